public String dayName(int day) {
    String name;
    switch (day) {
        case 1:
            name = "Monday";
            break;
        case 2:
            name = "Tuesday";
            break;
        case 3:
            name = "Wednesday";
            break;
        default:
            name = "Other";
            break;
    }
    return name;
}
