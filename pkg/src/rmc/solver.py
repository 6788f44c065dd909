"""Optimal expected hitting times under rewinding.

Both solvers grow a settled set outward from the target, Dijkstra style.
Each unsettled state ``x`` carries a running numerator
``1 + sum_{y settled} P(x, y) * d_y`` and denominator ``P(x, settled)``; its
tentative value is their ratio. The unsettled state with the smallest
tentative value is always exact and gets settled next.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .chain import MarkovChain, check

INF = math.inf


@dataclass
class HittingTimeTable:
    """Per-state expected hitting times (``inf`` where the target is unreachable).

    ``extraction_order`` lists states in the order they were settled, so their
    values are nondecreasing along it.
    """

    values: np.ndarray
    extraction_order: list[int] = field(default_factory=list)

    def __getitem__(self, x: int) -> float:
        return float(self.values[x])

    def __len__(self) -> int:
        return len(self.values)

    def is_finite(self, x: int) -> bool:
        return math.isfinite(self.values[x])

    def settled_rank(self) -> np.ndarray:
        """Position of each state in ``extraction_order``; -1 if never settled."""
        rank = np.full(len(self.values), -1, dtype=np.int64)
        rank[np.asarray(self.extraction_order, dtype=np.int64)] = np.arange(
            len(self.extraction_order)
        )
        return rank


def compute_opt_dense(chain: MarkovChain) -> HittingTimeTable:
    """O(n^2) solver over a dense transition matrix.

    Ties in the extraction step go to the lowest state index.
    """
    check(chain)
    n = chain.n
    P = chain.dense_matrix()
    d = np.full(n, INF)
    d[chain.target] = 0.0
    settled = np.zeros(n, dtype=bool)
    num = np.ones(n)
    den = np.zeros(n)
    order: list[int] = []
    while len(order) < n:
        cand = np.where(settled, INF, d)
        x = int(np.argmin(cand))
        if cand[x] == INF:
            break
        settled[x] = True
        order.append(x)
        col = P[:, x]
        num += col * d[x]
        den += col
        upd = ~settled & (den > 0)
        d[upd] = num[upd] / den[upd]
    return HittingTimeTable(d, order)


def compute_opt_heap(chain: MarkovChain) -> HittingTimeTable:
    """O((m + n) log n) solver using a binary heap with lazy deletion."""
    check(chain)
    n = chain.n
    preds = chain.predecessors
    d = [INF] * n
    num = [1.0] * n
    den = [0.0] * n
    settled = [False] * n
    z = chain.target
    d[z] = 0.0
    heap = [(0.0, z)]
    order: list[int] = []
    while heap:
        dy, y = heapq.heappop(heap)
        if settled[y] or dy != d[y]:
            continue
        settled[y] = True
        order.append(y)
        for x, p in preds[y]:
            if settled[x]:
                continue
            num[x] += p * dy
            den[x] += p
            dx = num[x] / den[x]
            d[x] = dx
            heapq.heappush(heap, (dx, x))
    return HittingTimeTable(np.array(d, dtype=float), order)


def compute_opt(chain: MarkovChain, method: str = "heap") -> HittingTimeTable:
    if method == "heap":
        return compute_opt_heap(chain)
    if method == "dense":
        return compute_opt_dense(chain)
    raise ValueError(f"unknown solver method {method!r}")


def recursion_residual(chain: MarkovChain, table: HittingTimeTable) -> float:
    """Largest relative violation of the one-step optimality recursion.

    For every finite ``x`` other than the target, with ``L`` the states of
    strictly smaller value, ``OPT(x) * P(x, L)`` must equal
    ``1 + sum_{y in L} P(x, y) OPT(y)``. The error is scaled by
    ``max(1, OPT(x) * P(x, L))``.
    """
    v = table.values
    worst = 0.0
    for x in range(chain.n):
        vx = v[x]
        if x == chain.target or not math.isfinite(vx):
            continue
        mass = 0.0
        acc = 1.0
        for y, p in chain.rows[x]:
            if v[y] < vx:
                mass += p
                acc += p * v[y]
        lhs = vx * mass
        r = abs(lhs - acc) / max(1.0, lhs)
        if r > worst:
            worst = r
    return worst


def compute_aux_opt(
    chain: MarkovChain, opt_table: HittingTimeTable, eps: float
) -> HittingTimeTable:
    """Expected hitting times of the thresholded minimizer policy.

    The policy only moves its minimizer to a generated state whose optimal
    value is lower by more than ``c = eps / (1 + eps)``. States are processed
    in increasing optimal value; every state feeding ``x`` is strictly lower,
    so it is already final.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    c = eps / (1.0 + eps)
    opt = opt_table.values
    n = chain.n
    out = np.full(n, INF)
    out[chain.target] = 0.0
    order = sorted((x for x in range(n) if math.isfinite(opt[x])), key=lambda x: (opt[x], x))
    for x in order:
        if x == chain.target:
            continue
        bar = opt[x] - c
        mass = 0.0
        acc = 1.0
        for y, p in chain.rows[x]:
            if opt[y] < bar:
                mass += p
                acc += p * out[y]
        if mass > 0.0:
            out[x] = acc / mass
    return HittingTimeTable(out, order)
