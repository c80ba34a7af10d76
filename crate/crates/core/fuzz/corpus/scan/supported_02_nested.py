from functools import reduce


def outer(x):
    def inner(y):
        return y * 2

    return inner(x) + 1


def make_counter():
    count = 0

    def step():
        nonlocal count
        count += 1
        return count

    def reset():
        nonlocal count
        count = 0

    return step, reset


def deep(a):
    def level1(b):
        def level2(c):
            def level3(d):
                return d
            return level3(c)
        return level2(b)
    return level1(a)


def closure_sum(xs):
    def add(acc, x):
        return acc + x
    return reduce(add, xs, 0)
