from collections import Counter


def median(values):
    ordered = sorted(values)
    n = len(ordered)
    mid = n // 2
    if n % 2 == 1:
        return ordered[mid]
    return (ordered[mid - 1] + ordered[mid]) / 2


def running_max(xs):
    best = None
    out = []
    for x in xs:
        if best is None or x > best:
            best = x
        out.append(best)
    return out


def histogram(words):
    counts = {}
    for w in words:
        counts[w] = counts.get(w, 0) + 1
    return counts


def first_negative(xs):
    for i, x in enumerate(xs):
        if x < 0:
            return i
    return -1


def mean(values):
    return sum(values) / len(values)


def most_common(words):
    return Counter(words).most_common(1)[0][0]
