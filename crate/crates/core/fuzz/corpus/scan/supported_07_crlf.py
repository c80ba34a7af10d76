import os


def crlf_one(a):
    return a


def crlf_two(a, b):
    c = a * b

    return c
