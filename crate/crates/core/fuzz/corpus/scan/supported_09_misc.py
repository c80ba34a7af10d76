from os import path as p, sep
import itertools, operator


def generator(n):
    for i in range(n):
        yield i


def comprehension(xs):
    return [
        x * 2
        for x in xs
        if x % 2
    ]


def try_except(value):
    try:
        return int(value)
    except ValueError:
        return None
    finally:
        pass


def with_block(path):
    with open(path) as fh:
        return fh.read()


def while_loop(n):
    i = 0
    while i < n:
        i += 1
    return i


def semicolons(a): 
    x = a; y = a * 2
    return x + y


def uses_global():
    global COUNTER
    COUNTER = 1
    return COUNTER


def pass_only():
    pass


def ellipsis_only():
    ...


def match_statement(cmd):
    match cmd:
        case "go":
            return 1
        case _:
            return 0


def combo(a):
    return list(itertools.accumulate(a, operator.add))


def unicode_név(ß):
    return ß * 2
