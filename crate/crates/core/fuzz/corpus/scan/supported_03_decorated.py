import functools
from dataclasses import (
    dataclass,
    field,
)


def trace(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        return fn(*args, **kwargs)
    return wrapper


@trace
def decorated_once(x):
    return x + 1


@trace
@functools.lru_cache(maxsize=None)
def decorated_twice(n):
    if n < 2:
        return n
    return decorated_twice(n - 1) + decorated_twice(n - 2)


@functools.lru_cache(
    maxsize=128,
    typed=False,
)
def decorated_multiline(n):
    return n * n


@dataclass
class Point:
    x: int = 0
    y: int = field(default=0)

    @property
    def norm2(self):
        return self.x * self.x + self.y * self.y

    @staticmethod
    def origin():
        return Point()

    @classmethod
    def from_pair(cls, pair):
        return cls(*pair)
