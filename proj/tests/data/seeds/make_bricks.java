public boolean makeBricks(int small, int big, int goal) {
    int bigUsed = Math.min(big, goal / 5);
    int remaining = goal - bigUsed * 5;
    return remaining <= small;
}
