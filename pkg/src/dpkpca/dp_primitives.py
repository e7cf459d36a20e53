"""Differential privacy mechanisms and budget arithmetic.

The histogram learner is the standard stability-based construction: Laplace
noise on occupied bins plus a delta-calibrated suppression threshold, which
naturally supports countably infinite bin partitions and a bottom return.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidInput, OutOfRange


@dataclass(frozen=True)
class PrivacyBudget:
    """An (epsilon, delta) pair."""

    epsilon: float
    delta: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InvalidInput("epsilon must be positive")
        if not 0 < self.delta < 1:
            raise InvalidInput("delta must be in (0, 1)")

    def split(self, fraction: float = 0.5) -> "PrivacyBudget":
        """Scale both parameters by ``fraction`` (basic composition share)."""
        return PrivacyBudget(self.epsilon * fraction, self.delta * fraction)


def gaussian_sigma(l2_sensitivity: float, budget: PrivacyBudget) -> float:
    """Gaussian mechanism noise scale: s * sqrt(2 ln(1.25/delta)) / epsilon."""
    if not l2_sensitivity > 0:
        raise InvalidInput("sensitivity must be positive")
    return l2_sensitivity * math.sqrt(2.0 * math.log(1.25 / budget.delta)) / budget.epsilon


def gaussian_mechanism(value, l2_sensitivity: float, budget: PrivacyBudget, rng) -> np.ndarray:
    """Release ``value`` with isotropic Gaussian noise calibrated to its l2 sensitivity."""
    value = np.asarray(value, dtype=float)
    sigma = gaussian_sigma(l2_sensitivity, budget)
    return value + sigma * rng.standard_normal(value.shape)


def symmetric_gaussian_matrix(d: int, sigma: float, rng) -> np.ndarray:
    """Symmetric d x d matrix with i.i.d. N(0, sigma^2) upper triangle (incl. diagonal)."""
    if d < 1:
        raise InvalidInput("d must be >= 1")
    if sigma < 0:
        raise InvalidInput("sigma must be nonnegative")
    upper = sigma * rng.standard_normal((d, d))
    out = np.triu(upper)
    out = out + np.triu(upper, 1).T
    return out


def laplace_noise(scale: float, rng) -> float:
    if not scale > 0:
        raise InvalidInput("scale must be positive")
    return float(rng.laplace(0.0, scale))


class BinPartition:
    """A countable partition of the reals into indexed bins with left edges."""

    def index_of(self, x: float) -> int:
        raise NotImplementedError

    def index_array(self, xs: np.ndarray) -> np.ndarray:
        return np.array([self.index_of(float(x)) for x in xs], dtype=np.int64)

    def left_edge(self, index: int) -> float:
        raise NotImplementedError


class GeometricBins(BinPartition):
    """Quarter-power-of-two bins [2^(j/4), 2^((j+1)/4)) on the nonnegative reals.

    Exponents are clamped to j in [-400, 400]; values below 2^-100 fall into
    an underflow bin with left edge 0.
    """

    UNDERFLOW = -10_000
    J_MIN, J_MAX = -400, 400

    def index_of(self, x: float) -> int:
        if x < 0 or not math.isfinite(x):
            raise InvalidInput("geometric bins cover the finite nonnegative reals")
        if x < 2.0 ** -100:
            return self.UNDERFLOW
        j = math.floor(4.0 * math.log2(x))
        # Guard against log2 rounding placing x just below its own bin edge.
        if x < 2.0 ** (j / 4.0):
            j -= 1
        elif x >= 2.0 ** ((j + 1) / 4.0):
            j += 1
        return int(min(max(j, self.J_MIN), self.J_MAX))

    def left_edge(self, index: int) -> float:
        if index == self.UNDERFLOW:
            return 0.0
        return 2.0 ** (index / 4.0)


class UniformBins(BinPartition):
    """Half-open width-w bins (j*w, (j+1)*w] covering the whole real line."""

    def __init__(self, width: float):
        if not width > 0:
            raise InvalidInput("bin width must be positive")
        self.width = width

    def index_of(self, x: float) -> int:
        if not math.isfinite(x):
            raise InvalidInput("uniform bins cover the finite reals")
        j = math.ceil(x / self.width) - 1
        if x <= j * self.width:
            j -= 1
        elif x > (j + 1) * self.width:
            j += 1
        return int(j)

    def index_array(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if not np.all(np.isfinite(xs)):
            raise InvalidInput("uniform bins cover the finite reals")
        j = np.ceil(xs / self.width).astype(np.int64) - 1
        j[xs <= j * self.width] -= 1
        j[xs > (j + 1) * self.width] += 1
        return j

    def left_edge(self, index: int) -> float:
        return index * self.width


@dataclass(frozen=True)
class HistogramResult:
    bin_index: int
    bin_left_edge: float
    noisy_count: float


def stability_threshold(budget: PrivacyBudget) -> float:
    return 1.0 + 2.0 * math.log(2.0 / budget.delta) / budget.epsilon


def stable_histogram(points, bins: BinPartition, budget: PrivacyBudget, rng,
                     suppress: bool = True) -> Optional[HistogramResult]:
    """Stability-based (epsilon, delta)-DP histogram over a countable partition.

    Occupied bins get Laplace(2/epsilon) noise on their counts; bins whose
    noisy count falls below 1 + 2 ln(2/delta)/epsilon are suppressed.  Returns
    the surviving bin with the largest noisy count, or None (bottom) when
    nothing survives or the input is empty.

    With ``suppress=False`` the threshold is skipped and the occupied bin with
    the largest noisy count is always returned (the argmax reading of the
    histogram learner; only an empty input gives bottom).  At small batch
    sizes the delta-calibrated threshold exceeds any achievable count, so the
    iterative estimators run in this mode by default.
    """
    xs = np.asarray(list(points) if not isinstance(points, np.ndarray) else points, dtype=float)
    if xs.size == 0:
        return None
    indices, counts = np.unique(bins.index_array(xs), return_counts=True)
    noisy = counts + rng.laplace(0.0, 2.0 / budget.epsilon, size=counts.size)
    if suppress:
        surviving = noisy >= stability_threshold(budget)
        if not np.any(surviving):
            return None
        pos = np.flatnonzero(surviving)[np.argmax(noisy[surviving])]
    else:
        pos = int(np.argmax(noisy))
    j = int(indices[pos])
    return HistogramResult(j, bins.left_edge(j), float(noisy[pos]))


def advanced_composition_split(budget: PrivacyBudget, k: int) -> PrivacyBudget:
    """Per-access budget so that k adaptive accesses compose to ``budget``.

    Each access runs at (eps / (2 sqrt(2 k ln(2/delta))), delta / (2 k)).
    """
    if budget.epsilon > 0.9:
        raise OutOfRange("advanced composition requires epsilon <= 0.9")
    if k < 1:
        raise InvalidInput("k must be >= 1")
    eps = budget.epsilon / (2.0 * math.sqrt(2.0 * k * math.log(2.0 / budget.delta)))
    return PrivacyBudget(eps, budget.delta / (2.0 * k))
