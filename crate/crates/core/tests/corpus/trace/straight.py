def straight(a, b):
    total = a + b
    doubled = total * 2
    return doubled - 1
