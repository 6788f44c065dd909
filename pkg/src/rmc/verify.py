"""Invariant battery behind ``rmc verify``.

Each check returns a :class:`CheckResult` with the measured quantity and the
tolerance it was held to. ``fault`` deliberately corrupts one input so the
battery can be shown to catch it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .brute import brute_opt_sets, verify_minimizer
from .chain import MarkovChain, sample_successor, validate
from .game24 import gen_game24
from .generators import gen_dummy, gen_lb_tree, gen_random, gen_vgb, random_vgb_tables, tree_distances
from .policies import ObservedTree, is_caterpillar, run_aux, run_cat
from .solver import HittingTimeTable, compute_aux_opt, compute_opt_dense, compute_opt_heap, recursion_residual

FAULTS = ("residual", "solver", "brute", "caterpillar", "lbtree", "vgb", "aux")


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.detail})" if self.detail else ""
        return f"{status}  {self.name:<22} measured={self.measured:.3g}  tol={self.tolerance:.3g}{extra}"


def max_abs_diff(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    both_inf = np.isinf(a) & np.isinf(b) & (np.sign(a) == np.sign(b))
    with np.errstate(invalid="ignore"):
        diff = np.where(both_inf, 0.0, np.abs(a - b))
    diff = np.nan_to_num(diff, nan=math.inf)
    return float(diff.max()) if diff.size else 0.0


def _random_chains(rng, count, n_lo, n_hi):
    for _ in range(count):
        n = int(rng.integers(n_lo, n_hi + 1))
        yield gen_random(n, float(rng.uniform(1.5, 4.0)), int(rng.integers(2**31)),
                         ensure_reachable=bool(rng.random() < 0.8))


def check_solver_differential(rng, fault=None) -> CheckResult:
    worst = 0.0
    for c in _random_chains(rng, 40, 2, 80):
        a = compute_opt_dense(c).values
        b = compute_opt_heap(c).values
        if fault == "solver":
            b = b.copy()
            b[c.start] += 0.5
        worst = max(worst, max_abs_diff(a, b))
    return CheckResult("solver_differential", worst <= 1e-9, worst, 1e-9, "dense vs heap, 40 chains")


def check_brute_equivalence(rng, fault=None) -> CheckResult:
    worst = 0.0
    for c in _random_chains(rng, 25, 2, 8):
        table = brute_opt_sets(c)
        if fault == "brute":
            table.values[1 << c.start] += 1.0
        opt = compute_opt_heap(c).values
        worst = max(worst, max_abs_diff(table.singletons(), opt), verify_minimizer(c, table))
    return CheckResult("brute_equivalence", worst <= 1e-9, worst, 1e-9, "subset DP, 25 chains n<=8")


def _families(rng):
    yield gen_dummy(6, 0.5)
    yield gen_dummy(10, 0.3)
    yield gen_lb_tree(3, 1, 0.5, 1, depth=6)[0]
    yield gen_game24([4, 4, 6, 8])[0]
    yield gen_vgb(2, 3, *random_vgb_tables(2, 3, rng))
    yield from _random_chains(rng, 10, 2, 30)


def check_recursion_residual(rng, fault=None) -> CheckResult:
    worst = 0.0
    for c in _families(rng):
        t = compute_opt_heap(c)
        if fault == "residual":
            finite = [x for x in range(c.n) if x != c.target and math.isfinite(t.values[x])]
            if finite:
                vals = t.values.copy()
                vals[finite[0]] += 1.0
                t = HittingTimeTable(vals, t.extraction_order)
        worst = max(worst, recursion_residual(c, t))
    return CheckResult("recursion_residual", worst <= 1e-6, worst, 1e-6)


def check_caterpillar(rng, fault=None) -> CheckResult:
    bad = 0
    total = 0
    for c in _families(rng):
        t = compute_opt_heap(c)
        if not math.isfinite(t[c.start]):
            continue
        for i in range(40):
            r1 = run_cat(c, t, rng)
            r2 = run_aux(c, t, 0.5, rng)
            bad += (not is_caterpillar(r1.tree)) + (not is_caterpillar(r2.tree))
            total += 2
    if fault == "caterpillar":
        # perfect binary tree of depth 3
        tree = ObservedTree.rooted_at(0)
        for v in range(14):
            tree.add(0, v // 2)
        bad += not is_caterpillar(tree)
        total += 1
    return CheckResult("caterpillar", bad == 0, bad, 0, f"{total} trees")


def check_lbtree(rng, fault=None) -> CheckResult:
    worst_opt = 0.0
    worst_ratio = 0.0
    # size-reduced depths with floor(eps * d) = 1, so all three observation groups occur
    for delta, d, eps, depth in ((3, 2, 0.5, 8), (4, 3, 0.4, 7)):
        c, obs = gen_lb_tree(delta, d, eps, int(rng.integers(2**31)), depth=depth)
        t = compute_opt_heap(c)
        dist = np.array(tree_distances(c, c.target), dtype=float)
        worst_opt = max(worst_opt, max_abs_diff(t.values, delta * dist))
        vals = np.array(obs.values)
        if fault == "lbtree":
            vals[obs.groups.index(1) if 1 in obs.groups else 0] *= 2.0
        nz = t.values > 0
        ratio = vals[nz] / t.values[nz]
        excess = max(0.0, float(np.max(np.abs(ratio - 1.0))) - eps)
        zero_bad = float(np.max(np.abs(vals[~nz]))) if (~nz).any() else 0.0
        worst_ratio = max(worst_ratio, excess, zero_bad)
    worst = max(worst_opt, worst_ratio)
    return CheckResult("lbtree_bounds", worst <= 1e-9, worst, 1e-9, "OPT = delta*dist and (1 +- eps) observations")


def vgb_expected_row(y, alphabet, depth, pi_ref, Vb) -> dict:
    w = {}
    if y:
        w[y[:-1]] = Vb[y]
    if len(y) < depth:
        for a in range(alphabet):
            w[y + (a,)] = pi_ref[y][a] * Vb[y + (a,)]
    total = sum(w.values())
    return {u: v / total for u, v in w.items()}


def check_vgb(rng, fault=None, draws=20000) -> CheckResult:
    from .generators import vgb_prefixes

    worst = 0.0
    pi_ref, Vb = random_vgb_tables(2, 3, rng)
    c = gen_vgb(2, 3, pi_ref, Vb)
    prefixes = vgb_prefixes(2, 3)
    index = {y: i for i, y in enumerate(prefixes)}
    if fault == "vgb":
        Vb = dict(Vb)
        Vb[(0,)] *= 3.0
    for y in prefixes:
        expect = vgb_expected_row(y, 2, 3, pi_ref, Vb)
        counts = np.zeros(c.n)
        x = index[y]
        for _ in range(draws):
            counts[sample_successor(c, x, rng)] += 1
        freq = counts / draws
        exp_vec = np.zeros(c.n)
        for u, p in expect.items():
            exp_vec[index[u]] = p
        worst = max(worst, 0.5 * float(np.abs(freq - exp_vec).sum()))
    return CheckResult("vgb_distribution", worst <= 0.02, worst, 0.02, f"{draws} draws per node")


def check_aux_bound(rng, fault=None) -> CheckResult:
    worst = -math.inf
    for c in _random_chains(rng, 30, 2, 40):
        t = compute_opt_heap(c)
        for eps in (0.1, 0.5, 1.0, 2.0):
            a = compute_aux_opt(c, t, eps).values
            if fault == "aux":
                a = a * (2.0 + eps)
            fin = np.isfinite(t.values)
            if np.any(np.isinf(a[fin])):
                return CheckResult("aux_bound", False, math.inf, 1e-9, "infinite aux value")
            worst = max(worst, float(np.max(a[fin] - (1 + eps) * t.values[fin])))
    return CheckResult("aux_bound", worst <= 1e-9, max(worst, 0.0), 1e-9, "OPT' <= (1+eps) OPT")


def check_generators_validate(rng, fault=None) -> CheckResult:
    chains: list[MarkovChain] = list(_families(rng))
    bad = sum(1 for c in chains if validate(c))
    return CheckResult("generators_validate", bad == 0, bad, 0, f"{len(chains)} chains")


CHECKS = (
    check_generators_validate,
    check_solver_differential,
    check_brute_equivalence,
    check_recursion_residual,
    check_caterpillar,
    check_lbtree,
    check_vgb,
    check_aux_bound,
)


def run_battery(seed: int = 0, fault: str | None = None) -> list[CheckResult]:
    if fault is not None and fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}; choose from {', '.join(FAULTS)}")
    results = []
    for i, check in enumerate(CHECKS):
        rng = np.random.default_rng([seed, i])
        results.append(check(rng, fault))
    return results
