import typing


def long_signature(alpha,
                   beta,
                   gamma=3):
    return alpha + beta + gamma


def hanging_signature(
    first,
    second=None,
    *rest,
    **options,
):
    return first, second, rest, options


def annotated(a: int, b: "typing.List[int]" = None) -> typing.Optional[int]:
    return a


def default_with_parens(point=(0,
                               0), names=["a", "b"]):
    return point, names


def keyword_only(a, *, b, c=1):
    return a + b + c


def positional_only(a, b, /, c):
    return a - b - c


def colon_in_default(d={"k": 1}, s="x:y"):
    return d, s


def return_annotation(
    x: int,
) -> dict:
    return {"x": x}


async def fetch(url, timeout=10):
    return url


async def gather(*urls):
    results = []
    for u in urls:
        results.append(await fetch(u))
    return results
