"""Private top-eigenvector oracles and the deflation driver.

Two concrete (epsilon, delta)-DP oracles for the top eigenvector of P Sigma P
are provided: an Oja-style iteration with privately estimated gradient range
and mean (range estimation + truncated mean), and a simpler clipped-gradient
Oja with Gaussian noise.  The deflation driver is generic over any oracle
returning a unit vector in Im(P); disjoint sample batches per round give
parallel composition, so each round runs at the full budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .datagen import ModelParams, SampleBatch
from .dp_primitives import GeometricBins, PrivacyBudget, UniformBins, stable_histogram
from .errors import DegenerateDirection, InsufficientData, InvalidInput, RangeFailure
from .linalg import Projector, deflate, orthonormalize, project_unit
from .oja import LrSchedule, initial_direction, lr

# Unit vector in Im(P) from (samples, projector, budget, config, rng).
EPcaOracle = Callable[[SampleBatch, Projector, PrivacyBudget, "OracleConfig", np.random.Generator], np.ndarray]

_SQRT_FLOOR = 2.0 ** -50  # width floor so zero range estimates keep bins well defined


@dataclass(frozen=True)
class OracleConfig:
    """Tunables shared by the private oracles.

    The unspecified O(1) constants (c1 subset count, c_clip, c_noise) default
    to 1.  ``model`` supplies the distributional constants (K, a, gamma,
    eigenvalues, noise level) that thresholds and default schedules read.
    """

    B: Optional[int] = None  # batch size; None -> ceil(sqrt(m))
    b_divisor: Optional[int] = None  # when set (and B unset): B = max(sqrt(m), m // b_divisor)
    tau: float = 0.01
    K: float = 1.0
    a: float = 1.0
    gamma: float = 0.0
    schedule: Optional[LrSchedule] = None
    c1: float = 1.0
    c_clip: float = 1.0
    c_noise: float = 1.0
    reuse_first_half: bool = False
    theoretical_B: bool = False
    noiseless: bool = False
    autogrow_batch: bool = True
    strict_histograms: bool = False
    model: Optional[ModelParams] = None
    round_index: int = 1
    total_n: int = 0

    def __post_init__(self):
        if self.B is not None and self.B < 4:
            raise InvalidInput("batch size must be >= 4")
        if not 0 < self.tau < 1:
            raise InvalidInput("tau must be in (0, 1)")

    def assumption_constants(self) -> tuple[float, float, float]:
        """(K, a, gamma), preferring the attached model parameters."""
        if self.model is not None:
            return self.model.K, self.model.a, math.sqrt(self.model.gamma2)
        return self.K, self.a, self.gamma


def subset_count(budget: PrivacyBudget, tau: float, c1: float) -> int:
    """Number of disjoint subsets used by the range estimator."""
    return max(1, math.ceil(c1 * math.log(1.0 / (budget.delta * tau)) / budget.epsilon))


def priv_range(gradients: np.ndarray, budget: PrivacyBudget, tau: float, rng, c1: float = 1.0,
               strict: bool = False) -> Optional[float]:
    """Privately estimate the top eigenvalue of the gradient-difference Gram.

    Consecutive gradients are paired and differenced, the differences are
    split into disjoint subsets, and each subset contributes the top
    eigenvalue of (1/b) G G^T (computed as the top squared singular value of
    G / sqrt(b)).  A stability-based histogram over quarter-power-of-two bins
    picks the winning bin; its left edge is returned, or None on bottom.
    """
    gradients = np.asarray(gradients, dtype=float)
    m = gradients.shape[0] - gradients.shape[0] % 2
    diffs = gradients[1:m:2] - gradients[0:m:2]
    k_sub = subset_count(budget, tau, c1)
    if diffs.shape[0] < k_sub:
        raise InsufficientData(f"need at least {2 * k_sub} gradients, got {gradients.shape[0]}")
    values = []
    for g in np.array_split(diffs, k_sub):
        b = g.shape[0]
        top_sv = np.linalg.svd(g, compute_uv=False)[0]
        values.append(top_sv * top_sv / b)
    hit = stable_histogram(values, GeometricBins(), budget, rng, suppress=strict)
    return None if hit is None else hit.bin_left_edge


def priv_mean(
    gradients: np.ndarray,
    lambda_hat: float,
    budget: PrivacyBudget,
    tau: float,
    rng,
    K: float = 1.0,
    a: float = 1.0,
    strict: bool = False,
) -> np.ndarray:
    """Truncated private mean of a gradient batch, calibrated by lambda_hat.

    Each coordinate gets a stability histogram at budget
    (eps / (4 sqrt(2 d ln(4/delta))), delta / (4 d)) over buckets of width
    2^(1/4) K sqrt(lambda_hat) ln^a(2B/tau); gradients are truncated to a
    window of half-width 3 K sqrt(lambda_hat) ln^a(Bd/tau) around the winning
    bucket's left edge, averaged, and released with Gaussian noise of
    per-coordinate std 12 K sqrt(lambda_hat) ln^a(Bd/tau)
    sqrt(2 d ln(2.5/delta)) / (eps B).
    """
    gradients = np.asarray(gradients, dtype=float)
    if gradients.ndim != 2 or gradients.shape[0] < 1:
        raise InvalidInput("need a nonempty (B, d) gradient array")
    if lambda_hat < 0:
        raise InvalidInput("lambda_hat must be nonnegative")
    b, d = gradients.shape
    sqrt_lam = math.sqrt(lambda_hat)
    s = max(sqrt_lam, _SQRT_FLOOR)
    width = 2.0 ** 0.25 * K * s * math.log(2.0 * b / tau) ** a
    half_window = 3.0 * K * s * math.log(b * d / tau) ** a
    coord_budget = PrivacyBudget(
        budget.epsilon / (4.0 * math.sqrt(2.0 * d * math.log(4.0 / budget.delta))),
        budget.delta / (4.0 * d),
    )
    bins = UniformBins(width)
    truncated = np.empty_like(gradients)
    for j in range(d):
        hit = stable_histogram(gradients[:, j], bins, coord_budget, rng, suppress=strict)
        if hit is None:
            raise RangeFailure(f"coordinate {j} histogram returned bottom")
        center = hit.bin_left_edge
        truncated[:, j] = np.clip(gradients[:, j], center - half_window, center + half_window)
    mean = truncated.mean(axis=0)
    noise_std = (
        12.0 * K * sqrt_lam * math.log(b * d / tau) ** a
        * math.sqrt(2.0 * d * math.log(2.5 / budget.delta))
        / (budget.epsilon * b)
    )
    if noise_std > 0:
        mean = mean + noise_std * rng.standard_normal(d)
    return mean


def priv_mean_sensitivity(lambda_hat: float, b: int, d: int, tau: float, K: float = 1.0, a: float = 1.0) -> float:
    """l2 bound on the pre-noise truncated-mean change between add/remove neighbors."""
    s = max(math.sqrt(lambda_hat), _SQRT_FLOOR)
    return math.sqrt(d) * 2.0 * 3.0 * K * s * math.log(b * d / tau) ** a / b


def _default_schedule(cfg: OracleConfig, n: int) -> LrSchedule:
    if cfg.schedule is not None:
        return cfg.schedule
    if cfg.model is None:
        return LrSchedule.harmonic()
    i = cfg.round_index - 1
    lam = float(cfg.model.eigenvalues[i])
    lam_next = float(cfg.model.eigenvalues[i + 1]) if i + 1 < cfg.model.eigenvalues.size else 0.0
    n_ref = cfg.total_n or n
    return LrSchedule.kdppca_experimental(cfg.model.noise_sigma, lam, lam_next, n_ref)


def _pick_batch_size(m: int, budget: PrivacyBudget, cfg: OracleConfig) -> int:
    if cfg.B is not None:
        b = cfg.B
    elif cfg.theoretical_B:
        b = max(4, int(m / math.log(max(m, 3)) ** 3))
    elif cfg.b_divisor is not None:
        b = max(4, math.ceil(math.sqrt(m)), m // cfg.b_divisor)
    else:
        b = max(4, math.ceil(math.sqrt(m)))
    if cfg.autogrow_batch and not cfg.noiseless:
        # The range estimator needs floor(B/2)/2 pairs >= its subset count;
        # grow B (shrinking the step count) until that holds.  Two passes
        # suffice because the subset count only shrinks as T drops.
        half_budget = budget.split(0.5)
        for _ in range(3):
            t_steps = max(1, m // b)
            k_sub = subset_count(half_budget, cfg.tau / (2.0 * t_steps), cfg.c1)
            needed = 4 * k_sub + 3
            if b >= needed or needed > m // 2:
                break
            b = min(needed, max(4, m // 2))
    return b


def modified_dp_pca(
    samples: SampleBatch,
    p: Projector,
    budget: PrivacyBudget,
    cfg: OracleConfig,
    rng,
    diag: Optional[dict] = None,
) -> np.ndarray:
    """Oja iteration with privately estimated gradient range and mean.

    Each step spends (eps/2, delta/2) on range estimation over the first half
    of its batch and (eps/2, delta/2) on the truncated mean over the second
    half (or the same first half when ``reuse_first_half``); disjoint batches
    across steps compose in parallel.  A bottom range estimate or a mean
    failure skips that step's update.
    """
    m = len(samples)
    b = _pick_batch_size(m, budget, cfg)
    t_steps = m // b
    if t_steps < 1:
        raise InsufficientData(f"need at least {2 * b} samples, got {m}")
    if cfg.B is not None and m < 2 * cfg.B:
        raise InsufficientData("need at least 2B samples")
    schedule = _default_schedule(cfg, m)
    half_budget = budget.split(0.5)
    step_tau = cfg.tau / (2.0 * t_steps)
    half = b // 2
    pm = p.matrix
    k_const, a_const, _ = cfg.assumption_constants()
    omega = initial_direction(p, rng)
    bottoms = 0
    for t in range(1, t_steps + 1):
        batch = samples[(t - 1) * b : t * b]
        if cfg.noiseless:
            mean_half = batch[:half] if cfg.reuse_first_half else batch[half : 2 * half]
            g_hat = mean_half.projected_gradients(pm, omega).mean(axis=0)
        else:
            range_grads = batch[:half].projected_gradients(pm, omega)
            try:
                lam_hat = priv_range(range_grads, half_budget, step_tau, rng, cfg.c1,
                                     strict=cfg.strict_histograms)
            except InsufficientData:
                lam_hat = None
            if lam_hat is None:
                bottoms += 1
                continue
            if cfg.reuse_first_half:
                mean_grads = range_grads
            else:
                mean_grads = batch[half : 2 * half].projected_gradients(pm, omega)
            try:
                g_hat = priv_mean(mean_grads, lam_hat, half_budget, step_tau, rng, k_const, a_const,
                                  strict=cfg.strict_histograms)
            except RangeFailure:
                bottoms += 1
                continue
        try:
            omega = project_unit(p, omega + lr(schedule, t) * (pm @ g_hat))
        except DegenerateDirection:
            omega = initial_direction(p, rng)
    if diag is not None:
        diag["bottoms"] = diag.get("bottoms", 0) + bottoms
        diag["steps"] = diag.get("steps", 0) + t_steps
    return omega


def clip_l2(x: np.ndarray, beta: float) -> np.ndarray:
    """Scale x down to l2 norm beta when it exceeds it: x * min(1, beta/||x||)."""
    norm = np.linalg.norm(x)
    if norm > beta:
        return x * (beta / norm)
    return x


def dp_ojas(
    samples: SampleBatch,
    p: Projector,
    budget: PrivacyBudget,
    cfg: OracleConfig,
    rng,
    diag: Optional[dict] = None,
) -> np.ndarray:
    """Clipped-gradient Oja iteration with Gaussian noise.

    noise multiplier  alpha = c_noise ln(n/delta) / (eps sqrt(n))
    clip threshold    beta  = c_clip lambda_1 sqrt(d) (K gamma ln^a(n d / tau) + 1)
    update            omega' = omega + eta_t P (clip_beta(P A_t P omega) + 2 beta alpha z_t)
    """
    m = len(samples)
    if m < 1:
        raise InvalidInput("empty sample stream")
    d = samples.dim
    pm = p.matrix
    schedule = cfg.schedule or LrSchedule.harmonic()
    k_const, a_const, gamma = cfg.assumption_constants()
    lam1 = float(cfg.model.eigenvalues[0]) if cfg.model is not None else 1.0
    alpha = cfg.c_noise * math.log(m / budget.delta) / (budget.epsilon * math.sqrt(m))
    beta = cfg.c_clip * lam1 * math.sqrt(d) * (k_const * gamma * math.log(m * d / cfg.tau) ** a_const + 1.0)
    if cfg.noiseless:
        alpha, beta = 0.0, math.inf
    omega = initial_direction(p, rng)
    px = samples.x @ pm
    pbase = None if samples.base is None else pm @ samples.base @ pm
    noise_scale = 2.0 * beta * alpha
    for t in range(1, m + 1):
        xt = px[t - 1]
        grad = xt * float(xt @ omega)
        if pbase is not None:
            grad = grad + pbase @ omega
        grad = clip_l2(grad, beta)
        if noise_scale > 0:
            grad = grad + noise_scale * rng.standard_normal(d)
        try:
            omega = project_unit(p, omega + lr(schedule, t) * (pm @ grad))
        except DegenerateDirection:
            omega = initial_direction(p, rng)
    return omega


def exact_epca_oracle(sigma_matrix: np.ndarray) -> EPcaOracle:
    """Non-private test oracle: the exact top eigenvector of P Sigma P."""
    from .linalg import sym_eig

    sigma_matrix = np.asarray(sigma_matrix, dtype=float)

    def oracle(samples, p, budget, cfg, rng):
        projected = p.matrix @ sigma_matrix @ p.matrix
        pairs = sym_eig(projected)
        return project_unit(p, pairs.eigenvectors[:, 0])

    return oracle


def k_dp_pca(
    samples: SampleBatch,
    k: int,
    budget: PrivacyBudget,
    cfg: OracleConfig,
    oracle: EPcaOracle,
    rng,
    diag: Optional[dict] = None,
) -> np.ndarray:
    """Deflation driver: k oracle rounds on disjoint batches, full budget each.

    Returns a d x k orthonormal basis (defensively re-orthonormalized).
    """
    n = len(samples)
    d = samples.dim
    if not 1 <= k < d:
        raise InvalidInput("need 1 <= k < d")
    m = n // k
    if m < 1:
        raise InvalidInput("not enough samples for k rounds")
    p = Projector.identity(d)
    columns = []
    for i in range(1, k + 1):
        batch = samples[(i - 1) * m : i * m]
        round_cfg = replace(cfg, round_index=i, total_n=cfg.total_n or n)
        try:
            u = oracle(batch, p, budget, round_cfg, rng)
        except Exception as exc:
            raise RuntimeError(f"ePCA oracle failed in deflation round {i}") from exc
        u = project_unit(p, u)
        columns.append(u)
        if i < k:
            p = deflate(p, u)
    return orthonormalize(np.column_stack(columns))
