"""Independent reference computations used by the tests.

None of these import the code paths they check.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import product


def optimal_hits(pages: tuple, capacity: int) -> int:
    """Maximum hit count over every demand-paging eviction decision tree."""

    @lru_cache(maxsize=None)
    def best(i: int, cache: frozenset) -> int:
        if i == len(pages):
            return 0
        p = pages[i]
        if p in cache:
            return 1 + best(i + 1, cache)
        if len(cache) < capacity:
            return best(i + 1, cache | {p})
        return max(best(i + 1, (cache - {v}) | {p}) for v in cache)

    return best(0, frozenset())


def all_traces(length: int, alphabet: int):
    return product(range(alphabet), repeat=length)


def clock_walk(usage: list[int], pinned: list[bool], hand: int):
    """Hand-stepped second-chance sweep: returns (victim, new_usage, new_hand)."""
    usage = list(usage)
    n = len(usage)
    while True:
        i = hand
        hand = (hand + 1) % n
        if pinned[i]:
            continue
        if usage[i] == 0:
            return i, usage, hand
        usage[i] -= 1


def lru_hits(pages, capacity: int) -> int:
    cache: list = []
    hits = 0
    for p in pages:
        if p in cache:
            hits += 1
            cache.remove(p)
        elif len(cache) == capacity:
            cache.pop(0)
        cache.append(p)
    return hits


def zipf_mass(n: int, s: float, k: int) -> float:
    """Probability of rank k (0-based) under Zipf(s) on n items, computed in
    exact rational-ish arithmetic via mpmath."""
    import mpmath

    mpmath.mp.dps = 30
    h = mpmath.fsum(mpmath.power(j, -s) for j in range(1, n + 1))
    return float(mpmath.power(k + 1, -s) / h)
