// Returns true when the array is in non-decreasing order.
public boolean isSorted(int[] a) {
    for (int i = 1; i < a.length; i++) {
        if (a[i - 1] > a[i]) {
            return false;
        }
    }
    return true;
}
