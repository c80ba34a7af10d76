def first_negative(xs):
    for i, x in enumerate(xs):
        if x < 0:
            return i + 1
    return -1
