"""Exhaustive ground truth for small instances.

``brute_opt_sets`` solves the rewinding problem over every set of observed
states (bitmask-indexed) without assuming anything about the optimal policy
beyond the fact that it depends only on the observed set. It is
exponential and only meant for n <= 15.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable

import numpy as np

from .chain import MarkovChain, check

MAX_BRUTE_STATES = 15
INF = math.inf


@dataclass
class SubsetValueTable:
    n: int
    values: np.ndarray  # indexed by bitmask

    def value(self, states: Iterable[int]) -> float:
        mask = 0
        for s in states:
            mask |= 1 << s
        return float(self.values[mask])

    def singleton(self, x: int) -> float:
        return float(self.values[1 << x])

    def singletons(self) -> np.ndarray:
        return np.array([self.values[1 << x] for x in range(self.n)])


def brute_opt_sets(chain: MarkovChain) -> SubsetValueTable:
    """Optimal expected hitting time for every observed set ``S``.

    Sets are processed by decreasing size. For ``S`` without the target, the
    policy picks one ``a`` in ``S`` and rewinds to it until a state outside
    ``S`` appears, so
    ``value(S) = min_a (1 + sum_{g not in S} P(a, g) value(S + g)) / P(a, outside S)``.
    Dividing by the escape mass removes the self-referential term; it is
    valid because each step costs exactly 1.
    """
    check(chain)
    n = chain.n
    if n > MAX_BRUTE_STATES:
        raise ValueError(f"brute force limited to {MAX_BRUTE_STATES} states, got {n}")
    full = (1 << n) - 1
    tbit = 1 << chain.target
    values = np.full(1 << n, INF)
    rows = chain.rows
    masks = sorted(range(1, full + 1), key=lambda m: (-bin(m).count("1"), m))
    for S in masks:
        if S & tbit:
            values[S] = 0.0
            continue
        best = INF
        for a in range(n):
            if not S >> a & 1:
                continue
            esc = 0.0
            acc = 1.0
            for g, p in rows[a]:
                if S >> g & 1:
                    continue
                esc += p
                acc += p * values[S | 1 << g]
            if esc > 0.0:
                v = acc / esc
                if v < best:
                    best = v
        values[S] = best
    return SubsetValueTable(n, values)


def verify_minimizer(chain: MarkovChain, table: SubsetValueTable | None = None) -> float:
    """Largest gap between ``value(S)`` and ``min_{x in S} value({x})`` over nonempty ``S``.

    Two infinities count as agreement.
    """
    if table is None:
        table = brute_opt_sets(chain)
    n = table.n
    vals = table.values
    size = 1 << n
    best_single = np.full(size, INF)
    worst = 0.0
    for S in range(1, size):
        low = S & -S
        rest = S ^ low
        b = vals[low] if rest == 0 else min(best_single[rest], vals[low])
        best_single[S] = b
        v = vals[S]
        if math.isinf(v) and math.isinf(b):
            continue
        gap = abs(v - b)
        if gap > worst:
            worst = gap
    return worst


# -- Game of 24 expression search -------------------------------------------------


@lru_cache(maxsize=None)
def expression_values(nums: tuple[Fraction, ...]) -> frozenset[Fraction]:
    """Every value of an arithmetic expression tree using each number exactly once.

    Splits the multiset into two nonempty parts in every way, recursively.
    """
    if len(nums) == 1:
        return frozenset(nums)
    k = len(nums)
    out: set[Fraction] = set()
    # the part holding index 0 is the left one, so each split is seen once
    for mask in range(1, 1 << k):
        if not mask & 1 or mask == (1 << k) - 1:
            continue
        left = tuple(sorted(nums[i] for i in range(k) if mask >> i & 1))
        right = tuple(sorted(nums[i] for i in range(k) if not mask >> i & 1))
        for a in expression_values(left):
            for b in expression_values(right):
                out.add(a + b)
                out.add(a * b)
                out.add(a - b)
                out.add(b - a)
                if b != 0:
                    out.add(a / b)
                if a != 0:
                    out.add(b / a)
    return frozenset(out)


def solves_24(nums: Iterable) -> bool:
    key = tuple(sorted(Fraction(v) for v in nums))
    return Fraction(24) in expression_values(key)
