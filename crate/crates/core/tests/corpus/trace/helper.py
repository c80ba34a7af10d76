def caller(n):
    def helper(v):
        w = v * 10
        return w + 1
    a = helper(n)
    b = a + 1
    return b
