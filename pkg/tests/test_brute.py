import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from conftest import geometric_chain, random_chains
from rmc.brute import brute_opt_sets, expression_values, solves_24, verify_minimizer
from rmc.chain import MarkovChain
from rmc.generators import gen_dummy, gen_random
from rmc.solver import compute_opt_dense, compute_opt_heap
from rmc.verify import max_abs_diff


def three_state_chain():
    # x0 -> z or y with prob 1/2 each; y -> z
    return MarkovChain.from_rows([[(1, 0.5), (2, 0.5)], [(1, 1.0)], [(1, 1.0)]], start=0, target=1)


def test_sets_with_target_are_zero():
    c = gen_dummy(3, 0.5)
    t = brute_opt_sets(c)
    for S in range(1, 1 << c.n):
        if S >> c.target & 1:
            assert t.values[S] == 0.0


def test_dummy_singleton():
    assert brute_opt_sets(gen_dummy(4, 0.5)).singleton(0) == pytest.approx(8.0)


def test_hand_computed_values():
    t = brute_opt_sets(three_state_chain())
    assert t.value([2]) == pytest.approx(1.0)
    assert t.value([0, 2]) == pytest.approx(1.0)
    assert t.value([0]) == pytest.approx(1.5)
    assert compute_opt_heap(three_state_chain())[0] == pytest.approx(1.5)


@pytest.mark.parametrize("q", [0.05, 0.5, 0.9])
def test_geometric(q):
    assert brute_opt_sets(geometric_chain(q)).singleton(0) == pytest.approx(1 / q, rel=1e-12)


def test_singletons_match_solvers():
    for c in random_chains(100, 2, 8, seed=11, reachable=None):
        t = brute_opt_sets(c)
        assert max_abs_diff(t.singletons(), compute_opt_heap(c).values) <= 1e-9
        assert max_abs_diff(t.singletons(), compute_opt_dense(c).values) <= 1e-9
        assert verify_minimizer(c, t) <= 1e-9


def test_monotone_under_inclusion():
    c = gen_random(7, 3.0, seed=12)
    t = brute_opt_sets(c)
    for S in range(1, 1 << c.n):
        for g in range(c.n):
            assert t.values[S | 1 << g] <= t.values[S] + 1e-12


def test_unreachable_subsets_are_infinite():
    c = MarkovChain.from_rows([[(0, 1.0)], [(1, 1.0)], [(1, 0.5), (0, 0.5)]], start=0, target=1)
    t = brute_opt_sets(c)
    assert math.isinf(t.value([0]))
    assert t.value([0, 2]) == pytest.approx(2.0)
    assert verify_minimizer(c, t) == 0.0


def test_size_guard():
    with pytest.raises(ValueError, match="15"):
        brute_opt_sets(gen_dummy(15, 0.5))


def test_expression_oracle():
    assert solves_24([4, 4, 6, 8])
    assert solves_24([24])
    assert solves_24([1, 3, 4, 6])  # needs fractions: 6 / (1 - 3/4)
    assert not solves_24([1, 1, 1, 1])
    assert expression_values((Fraction(2), Fraction(3))) == {
        Fraction(5), Fraction(6), Fraction(-1), Fraction(1), Fraction(2, 3), Fraction(3, 2)
    }


def test_expression_oracle_matches_permutation_search():
    # a second, independent search: all orderings and left-to-right bracketings
    def naive(nums):
        vals = [Fraction(v) for v in nums]
        if len(vals) == 1:
            return vals[0] == 24
        for i, j in itertools.permutations(range(len(vals)), 2):
            rest = [vals[k] for k in range(len(vals)) if k not in (i, j)]
            a, b = vals[i], vals[j]
            outs = [a + b, a - b, a * b] + ([a / b] if b != 0 else [])
            if any(naive(rest + [r]) for r in outs):
                return True
        return False

    rng = np.random.default_rng(13)
    for _ in range(40):
        nums = [int(v) for v in rng.integers(1, 14, size=4)]
        assert solves_24(nums) == naive(nums)
