public int[] runningMax(int[] nums) {
    int[] result = new int[nums.length];
    int best = Integer.MIN_VALUE;
    for (int i = 0; i < nums.length; i++) {
        best = Math.max(best, nums[i]);
        result[i] = best;
    }
    return result;
}
