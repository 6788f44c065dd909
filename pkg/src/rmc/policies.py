"""Rewinding policies and no-rewinding baselines.

Every policy returns a :class:`RunRecord` holding the observed-state tree:
node 0 is the start, and each generated state becomes a new node whose parent
is the node it was generated from.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .chain import MarkovChain
from .oracles import ExactOracle, LaplaceOracle, MeanMedianParams, ValueOracle, mean_median

DEFAULT_MAX_STEPS = 10**6


@dataclass
class ObservedTree:
    """Generated states in order; ``parents[0]`` is -1 (the root)."""

    states: list[int] = field(default_factory=list)
    parents: list[int] = field(default_factory=list)

    @classmethod
    def rooted_at(cls, state: int) -> ObservedTree:
        return cls([state], [-1])

    def add(self, state: int, parent: int) -> int:
        self.states.append(state)
        self.parents.append(parent)
        return len(self.states) - 1

    def __len__(self) -> int:
        return len(self.states)

    @property
    def nodes(self) -> list[tuple[int, Optional[int], int]]:
        """``(state, parent or None, generation index)`` per node."""
        return [
            (s, None if p < 0 else p, i)
            for i, (s, p) in enumerate(zip(self.states, self.parents))
        ]


@dataclass
class RunRecord:
    policy_name: str
    steps: int
    oracle_cost: int
    success: bool
    tree: ObservedTree
    seed: Optional[int] = None
    restarts: int = 0


def is_caterpillar(tree: ObservedTree) -> bool:
    """True iff the non-leaf nodes induce a path (possibly empty).

    Internal nodes are closed under taking parents, so they always induce a
    connected subtree; it is a path iff every internal node has at most two
    internal neighbours.
    """
    parents = tree.parents
    n = len(parents)
    internal = [False] * n
    for p in parents:
        if p >= 0:
            internal[p] = True
    degree = [0] * n
    for v in range(n):
        p = parents[v]
        if p >= 0 and internal[v]:
            degree[v] += 1
            degree[p] += 1
    return all(deg <= 2 for deg in degree)


def default_max_steps(opt_start: float | None = None) -> int:
    if opt_start is not None and math.isfinite(opt_start):
        return max(1, int(math.ceil(100 * opt_start)))
    return DEFAULT_MAX_STEPS


def _values(table) -> list[float]:
    return [float(v) for v in getattr(table, "values", table)]


def _run_minimizer(name, chain, opt, rng, max_steps, threshold) -> RunRecord:
    succ, cum = chain._sampling_tables
    target = chain.target
    tree = ObservedTree.rooted_at(chain.start)
    if chain.start == target:
        return RunRecord(name, 0, 0, True, tree)
    if max_steps is None:
        max_steps = default_max_steps(opt[chain.start])
    rand = rng.random
    x_state, x_node = chain.start, 0
    steps = 0
    success = False
    while steps < max_steps:
        row = cum[x_state]
        i = bisect_right(row, rand() * row[-1])
        g = succ[x_state][min(i, len(row) - 1)]
        steps += 1
        node = tree.add(g, x_node)
        if g == target:
            success = True
            break
        if opt[g] < opt[x_state] - threshold:
            x_state, x_node = g, node
    return RunRecord(name, steps, 0, success, tree)


def run_cat(chain: MarkovChain, opt_table, rng: np.random.Generator, max_steps: int | None = None) -> RunRecord:
    """Generate from the current minimizer; move it to any strictly better state."""
    return _run_minimizer("cat", chain, _values(opt_table), rng, max_steps, 0.0)


def run_aux(
    chain: MarkovChain, opt_table, eps: float, rng: np.random.Generator, max_steps: int | None = None
) -> RunRecord:
    """Like :func:`run_cat`, but the minimizer only moves on an improvement
    larger than ``eps / (1 + eps)``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return _run_minimizer("aux", chain, _values(opt_table), rng, max_steps, eps / (1.0 + eps))


def stable_params(n_bound: float, lam: float) -> MeanMedianParams:
    return MeanMedianParams(eps=0.1, delta=1.0 / (10.0 * n_bound), lam=lam)


def estimate_n_bound(oracle: ValueOracle, start: int) -> int:
    """Upper bound for the start's value from a boosted estimate: ``ceil(2 X)``.

    Uses the oracle itself (its cost is charged).
    """
    lam = getattr(oracle, "lam", 0.0)
    x = mean_median(oracle, start, MeanMedianParams(eps=0.1, delta=0.01, lam=lam))
    if not math.isfinite(x):
        raise ValueError("start state has infinite estimated value")
    return max(1, math.ceil(2.0 * x))


def run_stable(
    chain: MarkovChain,
    oracle: ValueOracle,
    n_bound: float,
    rng: np.random.Generator,
    with_reset: bool = True,
    max_steps: int | None = None,
) -> RunRecord:
    """Noise-robust minimizer policy.

    Each step generates ``g`` from the minimizer, estimates both values with
    median-of-means (``eps = 1/10``, ``delta = 1/(10 n_bound)``) and moves the
    minimizer when ``X_g < X_min - 1/2``. With ``with_reset``, an attempt
    that has not reached the target after ``4 n_bound`` steps is discarded
    and restarted from the start. ``steps`` counts generations over all
    attempts; the returned tree is the last attempt's. ``max_steps`` is an
    optional global cap (default: none).
    """
    if n_bound < 1:
        raise ValueError("n_bound must be at least 1")
    params = stable_params(n_bound, getattr(oracle, "lam", 0.0))
    reset_after = 4 * n_bound
    target = chain.target
    succ, cum = chain._sampling_tables
    rand = rng.random
    cost0 = oracle.cost
    steps = 0
    restarts = 0
    tree = ObservedTree.rooted_at(chain.start)
    if chain.start == target:
        return RunRecord("stable", 0, 0, True, tree)
    success = False
    x_state, x_node, local = chain.start, 0, 0
    while max_steps is None or steps < max_steps:
        if with_reset and local >= reset_after:
            restarts += 1
            tree = ObservedTree.rooted_at(chain.start)
            x_state, x_node, local = chain.start, 0, 0
        row = cum[x_state]
        i = bisect_right(row, rand() * row[-1])
        g = succ[x_state][min(i, len(row) - 1)]
        steps += 1
        local += 1
        node = tree.add(g, x_node)
        if g == target:
            success = True
            break
        est_x = mean_median(oracle, x_state, params)
        est_g = mean_median(oracle, g, params)
        if est_g < est_x - 0.5:
            x_state, x_node = g, node
    return RunRecord("stable", steps, oracle.cost - cost0, success, tree, restarts=restarts)


def softmax_weights(estimates: np.ndarray, tau: float) -> np.ndarray:
    """Normalised ``exp(-e / tau)``; infinite estimates get weight 0.

    If every estimate is infinite the weights are uniform.
    """
    est = np.asarray(estimates, dtype=float)
    finite = np.isfinite(est)
    if not finite.any():
        return np.full(len(est), 1.0 / len(est))
    w = np.zeros(len(est))
    w[finite] = np.exp(-(est[finite] - est[finite].min()) / tau)
    return w / w.sum()


def run_softmax_cat(
    chain: MarkovChain,
    oracle: ValueOracle,
    tau: float = 1.0,
    rng: np.random.Generator | None = None,
    max_steps: int | None = None,
    reevaluate: bool = False,
) -> RunRecord:
    """Rewind to an observed state drawn with probability ``∝ exp(-estimate / tau)``.

    Observed states are deduplicated; each is evaluated once when first seen
    unless ``reevaluate`` is set, in which case every observed state is
    re-evaluated before each draw.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    if rng is None:
        rng = np.random.default_rng()
    if max_steps is None:
        max_steps = DEFAULT_MAX_STEPS
    target = chain.target
    succ, cum = chain._sampling_tables
    rand = rng.random
    cost0 = oracle.cost
    tree = ObservedTree.rooted_at(chain.start)
    if chain.start == target:
        return RunRecord("softmax", 0, 0, True, tree)
    observed = [chain.start]
    node_of = {chain.start: 0}
    est = [oracle.evaluate(chain.start)]
    steps = 0
    success = False
    while steps < max_steps:
        if reevaluate:
            est = [oracle.evaluate(s) for s in observed]
        w = softmax_weights(np.array(est), tau)
        c = np.cumsum(w)
        k = min(int(np.searchsorted(c, rand() * c[-1], side="right")), len(c) - 1)
        x = observed[k]
        row = cum[x]
        i = bisect_right(row, rand() * row[-1])
        g = succ[x][min(i, len(row) - 1)]
        steps += 1
        node = tree.add(g, node_of[x])
        if g == target:
            success = True
            break
        if g not in node_of:
            node_of[g] = node
            observed.append(g)
            est.append(oracle.evaluate(g))
    return RunRecord("softmax", steps, oracle.cost - cost0, success, tree)


def _trajectory(chain, rng, max_steps, tree) -> tuple[int, bool]:
    """One no-rewind walk from the start, appended to ``tree`` under the root.

    A walk that enters an absorbing non-target state stops early: it can
    never succeed and the remaining generations are forced self-loops.
    """
    succ, cum = chain._sampling_tables
    target = chain.target
    absorbing = chain.absorbing
    rand = rng.random
    x, node = chain.start, 0
    steps = 0
    while steps < max_steps:
        if x in absorbing:
            break
        row = cum[x]
        i = bisect_right(row, rand() * row[-1])
        x = succ[x][min(i, len(row) - 1)]
        steps += 1
        node = tree.add(x, node)
        if x == target:
            return steps, True
    return steps, False


def run_no_rewind(chain: MarkovChain, rng: np.random.Generator, max_steps: int | None = None) -> RunRecord:
    """A single plain Markov trajectory from the start."""
    if max_steps is None:
        max_steps = DEFAULT_MAX_STEPS
    tree = ObservedTree.rooted_at(chain.start)
    if chain.start == chain.target:
        return RunRecord("norewind", 0, 0, True, tree)
    steps, ok = _trajectory(chain, rng, max_steps, tree)
    return RunRecord("norewind", steps, 0, ok, tree)


def run_k_parallel(
    chain: MarkovChain, k: int, rng: np.random.Generator, max_steps: int | None = None
) -> RunRecord:
    """``k`` independent trajectories sharing the start, each with its own
    ``max_steps`` budget. They are simulated one after another from the same
    random stream and the run stops at the first success, so trajectory ``i``
    is identical for every ``k > i`` under a fixed seed."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if max_steps is None:
        max_steps = DEFAULT_MAX_STEPS
    tree = ObservedTree.rooted_at(chain.start)
    if chain.start == chain.target:
        return RunRecord("kparallel", 0, 0, True, tree)
    total = 0
    for _ in range(k):
        steps, ok = _trajectory(chain, rng, max_steps, tree)
        total += steps
        if ok:
            return RunRecord("kparallel", total, 0, True, tree)
    return RunRecord("kparallel", total, 0, False, tree)


def make_oracle(kind: str, table, lam: float = 0.0, rng=None, group_sampler: str = "raw") -> ValueOracle:
    if kind == "exact":
        return ExactOracle(table)
    if kind == "laplace":
        return LaplaceOracle(table, lam, rng if rng is not None else np.random.default_rng(), group_sampler)
    raise ValueError(f"unknown oracle kind {kind!r}")
