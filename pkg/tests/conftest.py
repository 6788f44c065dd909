import math

import numpy as np
import pytest

from rmc.chain import MarkovChain
from rmc.generators import gen_random

ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    status = "PASS" if passed else "FAIL"
    ACCEPTANCE_LINES.append(f"[{status}] criterion {number:>2}: {title} -- {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)


def random_chains(count, n_lo, n_hi, seed, reachable=True, avg_degree=(1.5, 4.0)):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(n_lo, n_hi + 1))
        out.append(
            gen_random(n, float(rng.uniform(*avg_degree)), int(rng.integers(2**31)),
                       ensure_reachable=reachable if reachable is not None else bool(rng.random() < 0.7))
        )
    return out


def geometric_chain(q: float) -> MarkovChain:
    """x0 -> z with probability q, otherwise stay; z absorbing."""
    return MarkovChain.from_rows([[(1, q), (0, 1.0 - q)], [(1, 1.0)]], start=0, target=1)


def forced_chain() -> MarkovChain:
    return MarkovChain.from_rows([[(1, 1.0)], [(1, 1.0)]], start=0, target=1)


def hitting_times_by_linear_solve(chain: MarkovChain, rank_values, threshold: float = 0.0):
    """Expected hitting time of the minimizer policy that moves from x to g only
    when ``rank_values[g] < rank_values[x] - threshold``, by solving the
    absorbing-chain linear system. Independent of the Dijkstra-style solvers.
    """
    n = chain.n
    z = chain.target
    v = np.asarray(rank_values, dtype=float)
    finite = [x for x in range(n) if math.isfinite(v[x]) and x != z]
    idx = {x: i for i, x in enumerate(finite)}
    A = np.eye(len(finite))
    b = np.ones(len(finite))
    for x in finite:
        for y, p in chain.rows[x]:
            moves = y == z or v[y] < v[x] - threshold
            if not moves:
                A[idx[x], idx[x]] -= p
            elif y != z:
                A[idx[x], idx[y]] -= p
    out = np.full(n, math.inf)
    out[z] = 0.0
    if finite:
        sol = np.linalg.solve(A, b)
        for x, i in idx.items():
            out[x] = sol[i]
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
