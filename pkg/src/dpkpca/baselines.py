"""Comparison algorithms: input/output-perturbed PCA and the noisy power method.

All three first clip samples (so a single sample has bounded influence in the
stochastic setting) and then privatize a summed covariance estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .datagen import SampleBatch
from .dp_primitives import PrivacyBudget, laplace_noise, symmetric_gaussian_matrix
from .errors import GapFailure, InvalidInput
from .linalg import orthonormalize, sym_eig

_CHUNK = 256


@dataclass(frozen=True)
class ClipThresholds:
    """l2 / l1 clip levels with the confidence used to derive them."""

    beta: float
    alpha_l1: float
    confidence: float = 0.01

    def __post_init__(self):
        if not self.beta > 0:
            raise InvalidInput("beta must be positive")
        if self.alpha_l1 < self.beta:
            raise InvalidInput("l1 threshold must dominate the l2 threshold")

    @classmethod
    def for_stream(cls, d: int, lambda1: float, sigma: float, n: int,
                   confidence: float = 0.01, c: float = 1.0) -> "ClipThresholds":
        """Thresholds sized so spiked-model samples are rarely clipped.

        l2 level c sqrt(lambda1) plus a sigma sqrt(d ln(n/confidence)) tail;
        the l1 level adds the sigma d + sqrt(lambda1 d) inflation of dense
        low-magnitude coordinates.
        """
        tail = sigma * math.sqrt(d * math.log(max(n, 2) / confidence))
        beta = c * math.sqrt(lambda1) + tail
        alpha = sigma * d + math.sqrt(lambda1 * d) + tail
        return cls(beta=beta, alpha_l1=max(alpha, beta), confidence=confidence)


def trace_clip_factors(samples: SampleBatch, beta: float) -> np.ndarray:
    """Per-sample factors min(1, beta^2 / Tr(A_i))."""
    tr = samples.traces()
    with np.errstate(divide="ignore"):
        return np.minimum(1.0, np.where(tr > 0, beta * beta / np.where(tr > 0, tr, 1.0), 1.0))


def clipped_sum(samples: SampleBatch, beta: float) -> np.ndarray:
    """Sum of trace-clipped samples: sum_i min(1, beta^2/Tr(A_i)) A_i."""
    c = trace_clip_factors(samples, beta)
    x = samples.x
    out = x.T @ (x * c[:, None])
    if samples.base is not None:
        out = out + float(np.sum(c)) * samples.base
    return 0.5 * (out + out.T)


def dp_gauss_1(samples: SampleBatch, k: int, budget: PrivacyBudget, clips: ClipThresholds,
               rng, noise_scale: float = 1.0) -> np.ndarray:
    """Input perturbation: clipped sum + symmetric Gaussian noise, then PCA.

    Noise scale Delta_1 = beta^2 sqrt(2 ln(1.25/delta)) / eps.
    """
    d = samples.dim
    if not k < d:
        raise InvalidInput("k must be < d")
    x = clipped_sum(samples, clips.beta)
    delta1 = clips.beta ** 2 * math.sqrt(2.0 * math.log(1.25 / budget.delta)) / budget.epsilon
    noisy = x + symmetric_gaussian_matrix(d, delta1 * noise_scale, rng)
    return sym_eig(noisy).eigenvectors[:, :k]


def dp_gauss_2(samples: SampleBatch, k: int, budget: PrivacyBudget, clips: ClipThresholds,
               rng, max_retries: int = 100, noise_scale: float = 1.0,
               diag: dict | None = None) -> np.ndarray:
    """Output perturbation scaled by a privately estimated eigengap.

    The eigengap of the clipped sum is privatized with Laplace(2/eps) noise,
    resampling while the noisy gap is nonpositive; the top-k subspace is then
    perturbed with symmetric Gaussian noise of scale
    Delta_2 = beta^2 (1 + sqrt(2 ln(1/delta)) / eps) / |g_k - 2(1 + ln(1/delta))/eps|
    and re-eigendecomposed.
    """
    d = samples.dim
    if not k < d:
        raise InvalidInput("k must be < d")
    if max_retries < 1:
        raise InvalidInput("max_retries must be >= 1")
    x = clipped_sum(samples, clips.beta)
    pairs = sym_eig(x)
    gap = float(pairs.eigenvalues[k - 1] - pairs.eigenvalues[k])
    retries = 0
    g_k = gap + laplace_noise(2.0 / budget.epsilon, rng)
    while g_k <= 0:
        retries += 1
        if retries >= max_retries:
            raise GapFailure(f"noisy eigengap stayed nonpositive after {max_retries} draws")
        g_k = gap + laplace_noise(2.0 / budget.epsilon, rng)
    if diag is not None:
        diag["retries"] = diag.get("retries", 0) + retries
    eps, delta = budget.epsilon, budget.delta
    denom = abs(g_k - 2.0 * (1.0 + math.log(1.0 / delta)) / eps)
    delta2 = clips.beta ** 2 * (1.0 + math.sqrt(2.0 * math.log(1.0 / delta)) / eps) / max(denom, 1e-12)
    vk = pairs.eigenvectors[:, :k]
    perturbed = vk @ vk.T + symmetric_gaussian_matrix(d, delta2 * noise_scale, rng)
    return sym_eig(perturbed).eigenvectors[:, :k]


def clip_vector_l2_l1(x: np.ndarray, beta: float, alpha: float) -> np.ndarray:
    """Scale rank-one generating vectors to ||x||_2 <= beta, then ||x||_1 <= alpha."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    l2 = np.linalg.norm(x, axis=1)
    f = np.minimum(1.0, np.divide(beta, l2, out=np.ones_like(l2), where=l2 > 0))
    x = x * f[:, None]
    l1 = np.abs(x).sum(axis=1)
    g = np.minimum(1.0, np.divide(alpha, l1, out=np.ones_like(l1), where=l1 > 0))
    return x * g[:, None]


def clip_matrix_general(a: np.ndarray, beta: float, alpha: float) -> np.ndarray:
    """Trace and max-row-l1 clipping for samples that are not pure outer products.

    Trace at most beta^2 (l2 proxy) and max row l1 at most alpha * beta (the
    level an outer product a a^T with ||a||_1 <= alpha, ||a||_2 <= beta attains).
    """
    a = np.asarray(a, dtype=float)
    tr = float(np.trace(a))
    if tr > beta * beta:
        a = a * (beta * beta / tr)
    row_l1 = float(np.abs(a).sum(axis=1).max())
    cap = alpha * beta
    if row_l1 > cap:
        a = a * (cap / row_l1)
    return a


def _power_clipped_sum(samples: SampleBatch, clips: ClipThresholds) -> np.ndarray:
    d = samples.dim
    if samples.base is None:
        xc = clip_vector_l2_l1(samples.x, clips.beta, clips.alpha_l1)
        out = xc.T @ xc
        return 0.5 * (out + out.T)
    cap = clips.alpha_l1 * clips.beta
    beta_sq = clips.beta ** 2
    base = samples.base
    base_tr = float(np.trace(base))
    tr = base_tr + np.einsum("mi,mi->m", samples.x, samples.x)
    c1 = np.minimum(1.0, np.divide(beta_sq, tr, out=np.ones_like(tr), where=tr > 0))
    # Row j of base + x x^T has l1 norm at most |base_j|_1 + |x_j| |x|_1, so
    # samples whose bound stays under the cap need no per-matrix row check.
    row_bound = (np.abs(base).sum(axis=1).max()
                 + np.abs(samples.x).max(axis=1) * np.abs(samples.x).sum(axis=1))
    easy = c1 * row_bound <= cap
    xe, ce = samples.x[easy], c1[easy]
    out = xe.T @ (xe * ce[:, None]) + float(np.sum(ce)) * base
    hard = np.flatnonzero(~easy)
    for start in range(0, hard.size, _CHUNK):
        idx = hard[start : start + _CHUNK]
        x = samples.x[idx]
        mats = base[None, :, :] + np.einsum("mi,mj->mij", x, x)
        mats *= c1[idx][:, None, None]
        row_l1 = np.abs(mats).sum(axis=2).max(axis=1)
        c2 = np.minimum(1.0, np.divide(cap, row_l1, out=np.ones_like(row_l1), where=row_l1 > 0))
        out += np.tensordot(c2, mats, axes=1)
    return 0.5 * (out + out.T)


def dp_power_method(samples: SampleBatch, k: int, budget: PrivacyBudget, clips: ClipThresholds,
                    rng, iterations: int = 10, noise_scale: float = 1.0) -> np.ndarray:
    """Noisy power iteration on the doubly-clipped sum.

    Rank-one samples have their generating vector clipped in l2 and l1; other
    samples fall back to trace / max-row-l1 matrix clipping.  Each of the L
    iterations adds a d x k Gaussian with per-entry std
    (beta alpha) sqrt(4 L ln(1/delta)) / eps.
    """
    d = samples.dim
    if not k < d:
        raise InvalidInput("k must be < d")
    if iterations < 1:
        raise InvalidInput("need at least one iteration")
    x = _power_clipped_sum(samples, clips)
    std = clips.beta * clips.alpha_l1 * math.sqrt(4.0 * iterations * math.log(1.0 / budget.delta)) / budget.epsilon
    std *= noise_scale
    y = orthonormalize(rng.standard_normal((d, k)))
    for _ in range(iterations):
        g = std * rng.standard_normal((d, k)) if std > 0 else 0.0
        y = orthonormalize(x @ y + g)
    return y
