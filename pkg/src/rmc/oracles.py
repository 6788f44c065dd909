"""Value oracles: exact, Laplace-noised, and adversarial hitting-time evaluations.

Every oracle counts raw evaluations in ``cost``. States whose true value is
infinite always evaluate to ``inf``; noise is never added to them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

_OPEN_LOW = float(np.nextafter(-0.5, 0.0))


def laplace_inverse_cdf(u, mu, lam):
    """Inverse CDF of Laplace(mu, lam) at ``u - 1/2``, for ``u`` in (-1/2, 1/2)."""
    return mu - lam * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def sample_laplace(rng: np.random.Generator, mu: float, lam: float, size=None):
    u = rng.uniform(_OPEN_LOW, 0.5, size=size)
    return laplace_inverse_cdf(u, mu, lam)


@dataclass(frozen=True)
class MeanMedianParams:
    """Accuracy ``eps`` with failure probability ``delta`` for noise scale ``lam``.

    ``group_size = ceil(32 lam^2 / eps^2)`` (at least 1) and
    ``group_count = ceil(log2(1 / delta))`` (at least 1).
    """

    eps: float
    delta: float
    lam: float = 0.0

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")

    @property
    def group_size(self) -> int:
        # round first so that 32 / 0.1**2 lands on 3200, not 3201
        return max(1, math.ceil(round(32.0 * self.lam**2 / self.eps**2, 9)))

    @property
    def group_count(self) -> int:
        return max(1, math.ceil(round(math.log2(1.0 / self.delta), 9)))

    @property
    def cost(self) -> int:
        return self.group_size * self.group_count


class ValueOracle:
    """Base class. Subclasses implement ``_value`` and ``_group_means``."""

    name = "oracle"

    def __init__(self):
        self.cost = 0

    def evaluate(self, s: int) -> float:
        self.cost += 1
        return self._value(s)

    def group_means(self, s: int, groups: int, k: int) -> np.ndarray:
        """Means of ``groups`` batches of ``k`` raw evaluations each."""
        self.cost += groups * k
        return self._group_means(s, groups, k)

    def _value(self, s: int) -> float:
        raise NotImplementedError

    def _group_means(self, s: int, groups: int, k: int) -> np.ndarray:
        return np.full(groups, self._value(s))


class ExactOracle(ValueOracle):
    name = "exact"

    def __init__(self, table):
        super().__init__()
        self.values = np.asarray(getattr(table, "values", table), dtype=float)

    def _value(self, s: int) -> float:
        return float(self.values[s])


class LaplaceOracle(ValueOracle):
    """Returns ``OPT(s)`` plus independent Laplace(0, lam) noise per evaluation.

    ``group_sampler="gamma"`` draws each batch sum directly as
    ``lam * (G1 - G2)`` with ``G1, G2 ~ Gamma(k, 1)``, which has exactly the
    distribution of a sum of ``k`` Laplace variates but costs O(1) to draw.
    The cost counter is charged ``k`` per batch either way.
    """

    name = "laplace"

    def __init__(self, table, lam: float, rng: np.random.Generator, group_sampler: str = "raw"):
        super().__init__()
        if lam < 0:
            raise ValueError("lam must be nonnegative")
        if group_sampler not in ("raw", "gamma"):
            raise ValueError(f"unknown group sampler {group_sampler!r}")
        self.values = np.asarray(getattr(table, "values", table), dtype=float)
        self.lam = float(lam)
        self.rng = rng
        self.group_sampler = group_sampler

    def _value(self, s: int) -> float:
        mu = float(self.values[s])
        if not math.isfinite(mu):
            return math.inf
        return float(sample_laplace(self.rng, mu, self.lam))

    def _group_means(self, s: int, groups: int, k: int) -> np.ndarray:
        mu = float(self.values[s])
        if not math.isfinite(mu):
            return np.full(groups, math.inf)
        if self.lam == 0.0:
            return np.full(groups, mu)
        if self.group_sampler == "gamma":
            g = self.rng.standard_gamma(k, size=(2, groups))
            return mu + self.lam * (g[0] - g[1]) / k
        noise = sample_laplace(self.rng, 0.0, self.lam, size=(groups, k))
        return mu + noise.mean(axis=1)


class AdversarialOracle(ValueOracle):
    """Returns stored observations verbatim (no randomness)."""

    name = "adversarial"

    def __init__(self, observations: Sequence[float]):
        super().__init__()
        self.values = np.asarray(getattr(observations, "values", observations), dtype=float)

    def _value(self, s: int) -> float:
        return float(self.values[s])


def evaluate(oracle: ValueOracle, s: int) -> float:
    return oracle.evaluate(s)


def lower_median(xs: np.ndarray) -> float:
    """Median; for an even count, the lower of the two middle values."""
    ordered = np.sort(np.asarray(xs, dtype=float))
    return float(ordered[(len(ordered) - 1) // 2])


def mean_median(oracle: ValueOracle, s: int, params: MeanMedianParams) -> float:
    """Median of ``group_count`` means of ``group_size`` evaluations each.

    Charges exactly ``group_size * group_count`` to ``oracle.cost``.
    """
    means = oracle.group_means(s, params.group_count, params.group_size)
    return lower_median(means)


def evaluate_infinite_policy(oracle: ValueOracle, s: int) -> float:
    """Evaluation for a state with no path to the target: ``inf``, noise-free."""
    v = oracle.evaluate(s)
    if math.isfinite(v):
        raise ValueError(f"state {s} has finite value {v}")
    return v
