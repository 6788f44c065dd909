import math

import numpy as np
import pytest
from scipy import stats

from rmc.generators import gen_dummy
from rmc.oracles import (
    AdversarialOracle,
    ExactOracle,
    LaplaceOracle,
    MeanMedianParams,
    evaluate,
    evaluate_infinite_policy,
    laplace_inverse_cdf,
    lower_median,
    mean_median,
    sample_laplace,
)
from rmc.solver import compute_opt_heap

OPT = compute_opt_heap(gen_dummy(5, 0.5))  # [10, 8, 6, 4, 2, 0, inf]


def test_zero_noise_returns_opt():
    o = LaplaceOracle(OPT, 0.0, np.random.default_rng(0))
    assert [evaluate(o, s) for s in range(6)] == [10.0, 8.0, 6.0, 4.0, 2.0, 0.0]
    assert o.cost == 6


def test_inverse_cdf_matches_scipy():
    u = np.linspace(-0.499, 0.499, 101)
    ours = laplace_inverse_cdf(u, 1.5, 2.0)
    ref = stats.laplace.ppf(u + 0.5, loc=1.5, scale=2.0)
    assert np.allclose(ours, ref, rtol=1e-10, atol=1e-10)


def test_laplace_variance():
    x = sample_laplace(np.random.default_rng(1), 0.0, 2.0, size=10**6)
    assert abs(x.var() - 8.0) <= 0.05 * 8.0
    assert abs(x.mean()) <= 3 * math.sqrt(8.0 / 10**6)


def test_evaluate_distribution_ks():
    o = LaplaceOracle(OPT, 1.5, np.random.default_rng(2))
    draws = np.array([o.evaluate(0) for _ in range(5000)])
    assert stats.kstest(draws, stats.laplace(loc=10.0, scale=1.5).cdf).pvalue > 1e-3


def test_gamma_batches_match_raw_batches():
    raw = LaplaceOracle(OPT, 1.0, np.random.default_rng(3), "raw")
    fast = LaplaceOracle(OPT, 1.0, np.random.default_rng(4), "gamma")
    a = raw.group_means(2, 4000, 50)
    b = fast.group_means(2, 4000, 50)
    assert raw.cost == fast.cost == 4000 * 50
    assert stats.ks_2samp(a, b).pvalue > 1e-3


def test_infinite_values_pass_through():
    o = LaplaceOracle(OPT, 3.0, np.random.default_rng(5))
    assert math.isinf(o.evaluate(6))
    assert math.isinf(evaluate_infinite_policy(o, 6))
    assert math.isinf(mean_median(o, 6, MeanMedianParams(0.5, 0.1, 3.0)))
    with pytest.raises(ValueError):
        evaluate_infinite_policy(o, 0)


def test_determinism():
    a = LaplaceOracle(OPT, 1.0, np.random.default_rng(6))
    b = LaplaceOracle(OPT, 1.0, np.random.default_rng(6))
    assert [a.evaluate(1) for _ in range(20)] == [b.evaluate(1) for _ in range(20)]


def test_adversarial_oracle():
    o = AdversarialOracle([3.0, 1.0, 7.5])
    assert o.evaluate(2) == 7.5
    assert o.cost == 1


def test_params_reference_setting():
    p = MeanMedianParams(eps=0.1, delta=1 / 160, lam=1.0)
    assert (p.group_size, p.group_count, p.cost) == (3200, 8, 25600)


@pytest.mark.parametrize("lam,eps,delta,k,N", [(0.0, 0.1, 0.5, 1, 1), (2.0, 1.0, 0.01, 128, 7), (0.5, 0.3, 1e-3, 89, 10)])
def test_params(lam, eps, delta, k, N):
    p = MeanMedianParams(eps, delta, lam)
    assert p.group_size == k and p.group_count == N


@pytest.mark.parametrize("args", [(0.0, 0.1), (0.1, 0.0), (0.1, 1.0), (0.1, 0.5, -1.0)])
def test_params_validation(args):
    with pytest.raises(ValueError):
        MeanMedianParams(*args)


def test_mean_median_exact_and_cost():
    o = ExactOracle(OPT)
    p = MeanMedianParams(0.1, 1 / 160, 1.0)
    assert mean_median(o, 1, p) == 8.0
    assert o.cost == 25600
    mean_median(o, 1, p)
    assert o.cost == 51200


def test_lower_median():
    assert lower_median([4.0, 1.0, 3.0, 2.0]) == 2.0
    assert lower_median([5.0, 1.0, 3.0]) == 3.0


def test_mean_median_failure_rate():
    p = MeanMedianParams(eps=0.5, delta=1 / 8, lam=1.0)
    o = LaplaceOracle(OPT, 1.0, np.random.default_rng(7))
    R = 2000
    fails = sum(abs(mean_median(o, 0, p) - 10.0) > 0.5 for _ in range(R))
    assert fails / R <= p.delta + 3 * math.sqrt(p.delta * (1 - p.delta) / R)
    assert o.cost == R * p.cost
