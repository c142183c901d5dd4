public String charType(char c) {
    if (Character.isDigit(c)) {
        return "digit";
    }
    if (Character.isLetter(c)) {
        return "letter";
    }
    return "other";
}
