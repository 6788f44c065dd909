import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import forced_chain, random_chains
from rmc.chain import MarkovChain
from rmc.game24 import gen_game24
from rmc.generators import gen_dummy, gen_random
from rmc.oracles import AdversarialOracle, ExactOracle, LaplaceOracle
from rmc.policies import (
    ObservedTree,
    estimate_n_bound,
    is_caterpillar,
    run_aux,
    run_cat,
    run_k_parallel,
    run_no_rewind,
    run_softmax_cat,
    run_stable,
    softmax_weights,
    stable_params,
)
from rmc.solver import compute_aux_opt, compute_opt_heap


def rng(seed):
    return np.random.default_rng(seed)


def tree_from_parents(parents):
    t = ObservedTree.rooted_at(0)
    for i, p in enumerate(parents):
        t.add(i + 1, p)
    return t


def mean_and_se(xs):
    xs = np.asarray(xs, dtype=float)
    return xs.mean(), xs.std(ddof=1) / math.sqrt(len(xs))


# -- caterpillar ---------------------------------------------------------------


@pytest.mark.parametrize(
    "parents,expected",
    [
        ([], True),
        ([0, 0, 0, 0], True),  # star
        ([0, 1, 2, 3], True),  # path
        ([0, 0, 1, 1, 2, 2], True),  # perfect binary, depth 2
        ([0, 0, 1, 1, 2, 2, 3, 3, 4, 4, 5, 5, 6, 6], False),  # depth 3
        ([0, 0, 0, 1, 2, 3], False),  # spider with three internal legs
        ([0, 1, 1, 2, 2, 0], True),  # spine 1-0-2 with hairs
    ],
)
def test_is_caterpillar(parents, expected):
    assert is_caterpillar(tree_from_parents(parents)) is expected


# -- exact-value policies -------------------------------------------------------


def test_cat_forced():
    c = forced_chain()
    rec = run_cat(c, compute_opt_heap(c), rng(0))
    assert (rec.steps, rec.success) == (1, True)


def test_cat_start_is_target():
    c = MarkovChain.from_rows([[(0, 1.0)]], 0, 0)
    rec = run_cat(c, compute_opt_heap(c), rng(0))
    assert (rec.steps, rec.success) == (0, True)


def test_cat_mean_on_dummy():
    c = gen_dummy(10, 0.5)
    t = compute_opt_heap(c)
    g = rng(1)
    m, se = mean_and_se([run_cat(c, t, g).steps for _ in range(20000)])
    assert abs(m - 20.0) <= 3 * se


def test_cat_moves_minimizer_only_on_strict_improvement():
    for c in random_chains(10, 3, 15, seed=2):
        t = compute_opt_heap(c)
        rec = run_cat(c, t, rng(3))
        tr = rec.tree
        assert rec.steps == len(tr) - 1
        # each node's parent is the best state observed before it (first occurrence)
        best = 0
        for i in range(1, len(tr)):
            assert tr.parents[i] == best
            if t[tr.states[i]] < t[tr.states[best]]:
                best = i


def test_aux_tiny_eps_matches_cat():
    for c in random_chains(10, 3, 20, seed=4):
        t = compute_opt_heap(c)
        a = run_aux(c, t, 1e-12, rng(5))
        b = run_cat(c, t, rng(5))
        assert (a.steps, a.tree.states, a.tree.parents) == (b.steps, b.tree.states, b.tree.parents)


def test_aux_mean_matches_aux_value():
    c = gen_random(12, 3.0, seed=6)
    t = compute_opt_heap(c)
    for eps in (0.5, 2.0):
        a = compute_aux_opt(c, t, eps)
        g = rng(7)
        m, se = mean_and_se([run_aux(c, t, eps, g).steps for _ in range(20000)])
        assert abs(m - a[c.start]) <= 3 * se


def test_aux_rejects_bad_eps():
    c = forced_chain()
    with pytest.raises(ValueError):
        run_aux(c, compute_opt_heap(c), 0.0, rng(0))


def test_max_steps_caps_run():
    c = gen_dummy(10, 0.5)
    rec = run_cat(c, compute_opt_heap(c), rng(8), max_steps=3)
    assert rec.steps == 3 and not rec.success


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 25), seed=st.integers(0, 2**32 - 1), eps=st.floats(0.05, 3.0))
def test_minimizer_policy_properties(n, seed, eps):
    c = gen_random(n, 3.0, seed)
    t = compute_opt_heap(c)
    for rec in (run_cat(c, t, rng(seed)), run_aux(c, t, eps, rng(seed))):
        assert rec.success
        assert rec.tree.states[-1] == c.target
        assert rec.steps == len(rec.tree) - 1
        assert is_caterpillar(rec.tree)


# -- stable ---------------------------------------------------------------------


def test_stable_zero_noise_equals_aux_half():
    for c in random_chains(10, 3, 20, seed=9):
        t = compute_opt_heap(c)
        s = run_stable(c, LaplaceOracle(t, 0.0, rng(10)), 10**6, rng(11), with_reset=False)
        a = run_aux(c, t, 1.0, rng(11))
        assert s.tree.states == a.tree.states and s.tree.parents == a.tree.parents


def test_stable_cost_accounting():
    c = gen_dummy(8, 0.5)
    t = compute_opt_heap(c)
    params = stable_params(16, 1.0)
    for seed in range(5):
        o = LaplaceOracle(t, 1.0, rng(seed), "gamma")
        rec = run_stable(c, o, 16, rng(100 + seed))
        assert rec.success and is_caterpillar(rec.tree)
        assert rec.oracle_cost == 2 * params.cost * (rec.steps - 1)


def test_stable_reset():
    # attempts are cut after 4 * 2 = 8 generations; dummy(4) needs at least 4
    c = gen_dummy(4, 0.5)
    t = compute_opt_heap(c)
    recs = [run_stable(c, ExactOracle(t), 2, rng(s)) for s in range(30)]
    assert all(r.success and len(r.tree) - 1 <= 8 for r in recs)
    restarted = [r for r in recs if r.restarts > 0]
    assert restarted
    assert all(r.steps > len(r.tree) - 1 for r in restarted)


def test_stable_rejects_small_bound():
    c = forced_chain()
    with pytest.raises(ValueError):
        run_stable(c, ExactOracle(compute_opt_heap(c)), 0.5, rng(0))


def test_estimate_n_bound_exact():
    t = compute_opt_heap(gen_dummy(8, 0.5))
    assert estimate_n_bound(ExactOracle(t), 0) == 32


# -- softmax ----------------------------------------------------------------------


def test_softmax_weights():
    assert np.allclose(softmax_weights([3.0, 3.0], 1.0), [0.5, 0.5])
    assert np.allclose(softmax_weights([1.0, math.inf], 1.0), [1.0, 0.0])
    assert np.allclose(softmax_weights([math.inf, math.inf], 1.0), [0.5, 0.5])
    w = softmax_weights([0.0, 1.0, 2.0], 0.5)
    assert np.allclose(w, np.exp([0, -2, -4]) / np.exp([0, -2, -4]).sum())
    assert np.allclose(softmax_weights([1000.0, 1001.0], 1.0), softmax_weights([0.0, 1.0], 1.0))
    assert softmax_weights([5.0, 2.0, 9.0], 1e-9).argmax() == 1


def test_softmax_equal_estimates_split_evenly():
    # 0 -> 1 -> 1; target 2 unreachable; both observed states look identical
    c = MarkovChain.from_rows([[(1, 1.0)], [(1, 1.0)], [(2, 1.0)]], 0, 2)
    N = 20000
    rec = run_softmax_cat(c, AdversarialOracle([0.0, 0.0, 0.0]), 1.0, rng(13), max_steps=N)
    from_root = sum(1 for p in rec.tree.parents[2:] if p == 0)
    assert abs(from_root / (N - 1) - 0.5) <= 3 * math.sqrt(0.25 / (N - 1))
    assert rec.oracle_cost == 2


def test_softmax_low_temperature_follows_minimizer():
    c = gen_random(15, 3.0, seed=14)
    t = compute_opt_heap(c)
    rec = run_softmax_cat(c, ExactOracle(t), 1e-9, rng(15))
    tr = rec.tree
    first = {}
    for i, s in enumerate(tr.states):
        first.setdefault(s, i)
    seen = {tr.states[0]}
    for i in range(1, len(tr)):
        best = min(seen, key=lambda s: (t[s], first[s]))
        assert tr.parents[i] == first[best]
        seen.add(tr.states[i])
    assert rec.success


def test_softmax_reevaluate_costs_more():
    c = gen_dummy(6, 0.5)
    t = compute_opt_heap(c)
    once = run_softmax_cat(c, LaplaceOracle(t, 1.0, rng(16)), 1.0, rng(17))
    again = run_softmax_cat(c, LaplaceOracle(t, 1.0, rng(16)), 1.0, rng(17), reevaluate=True)
    assert once.oracle_cost == len(set(once.tree.states) - {c.target})
    assert again.oracle_cost > once.oracle_cost


def test_softmax_game24_exact():
    c, _ = gen_game24([4, 4, 6, 8])
    t = compute_opt_heap(c)
    wins = sum(run_softmax_cat(c, ExactOracle(t), 1.0, rng(s), max_steps=200).success for s in range(200))
    assert wins >= 198


# -- baselines --------------------------------------------------------------------


def test_no_rewind_forced_and_trap():
    assert run_no_rewind(forced_chain(), rng(0)).success
    c = gen_dummy(3, 0.5)
    rec = run_no_rewind(c, rng(18), max_steps=100)
    if not rec.success:
        assert rec.tree.states[-1] == c.n - 1  # stopped in D
        assert rec.steps <= 3


def test_no_rewind_success_rate():
    c = gen_dummy(6, 0.5)
    g = rng(19)
    N = 100_000
    rate = sum(run_no_rewind(c, g, 1000).success for _ in range(N)) / N
    p = 2.0**-6
    assert abs(rate - p) <= 3 * math.sqrt(p * (1 - p) / N)


def test_k_parallel_k1_is_no_rewind():
    c = gen_dummy(4, 0.5)
    for seed in range(50):
        a = run_k_parallel(c, 1, rng(seed), 50)
        b = run_no_rewind(c, rng(seed), 50)
        assert (a.steps, a.success, a.tree.states, a.tree.parents) == (
            b.steps, b.success, b.tree.states, b.tree.parents)


def test_k_parallel_monotone_in_k():
    c = gen_dummy(8, 0.5)
    for seed in range(300):
        wins = [run_k_parallel(c, k, rng(seed), 100).success for k in (1, 4, 16, 64)]
        assert wins == sorted(wins)


def test_k_parallel_bound():
    n, k, N = 10, 64, 20000
    c = gen_dummy(n, 0.5)
    g = rng(20)
    rate = sum(run_k_parallel(c, k, g, 100).success for _ in range(N)) / N
    bound = k / 2**n
    assert rate <= bound + 3 * math.sqrt(bound * (1 - bound) / N)


def test_k_parallel_rejects_zero():
    with pytest.raises(ValueError):
        run_k_parallel(forced_chain(), 0, rng(0))
