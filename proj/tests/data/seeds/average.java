public double average(int[] values) {
    if (values.length == 0) {
        return 0.0;
    }
    double total = 0;
    for (int v : values) {
        total += v;
    }
    return total / values.length;
}
