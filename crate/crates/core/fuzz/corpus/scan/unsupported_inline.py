def one(): return 1


class K:
    def two(self): return 2
