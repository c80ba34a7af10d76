import os
import sys as system
from collections import OrderedDict


def zero():
    return 0


def add(a, b):
    return a + b


def scale(values, factor=2):
    out = []
    for v in values:
        out.append(v * factor)
    return out


def greet(name):
    """Return a greeting."""
    return "hello " + name


def with_blank_interior(xs):
    total = 0

    for x in xs:


        total += x

    return total



def trailing_comment(x):
    y = x + 1
    return y
    # this comment is not part of the body


def last_in_file(a):
    if a:
        return 1
    else:
        return 2
