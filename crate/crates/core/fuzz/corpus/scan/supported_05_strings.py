import re

TEMPLATE = """
def not_a_function():
    pass
"""


def documented(x):
    """Docstring mentioning code:

def fake(y):
    return y

    the fake def above lives inside the string.
    """
    return x


def holds_multiline_string():
    text = '''
first line
def also_fake():
second line'''
    return text


def string_with_hash(s):
    marker = "# not a comment"
    return s + marker


def regex_user(pattern):
    return re.compile(r"def\s+(\w+)\(").match(pattern)


def continued_expression(a, b):
    total = (a +
b)
    other = a + \
        b
    return total + other


def dict_literal():
    return {
        "a": 1,
"b": 2,
    }
