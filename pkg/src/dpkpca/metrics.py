"""Utility metrics and numerical verifiers for the subspace inequalities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput
from .linalg import principal_sine, sym_eig


@dataclass(frozen=True)
class UtilityReport:
    zeta2: float
    captured_energy: float
    optimal_energy: float
    sine: float  # principal sine for k = 1, NaN otherwise
    frob_sq: float


@dataclass(frozen=True)
class LemmaWitness:
    """One evaluated inequality: lhs >= rhs expected, slack = lhs - rhs."""

    lhs: float
    rhs: float
    slack: float


def zeta_utility(u: np.ndarray, sigma: np.ndarray, k: int) -> UtilityReport:
    """Relative captured-variance report of a k-column basis against Sigma.

    zeta^2 = max(0, 1 - <UU^T, Sigma> / <V_k V_k^T, Sigma>) with V_k the true
    top-k eigenvectors.  When the optimal energy is zero every subspace is
    optimal and zeta^2 = 0.
    """
    u = np.asarray(u, dtype=float)
    if u.shape[1] != k:
        raise InvalidInput("basis must have k columns")
    pairs = sym_eig(sigma)
    vk = pairs.eigenvectors[:, :k]
    captured = float(np.einsum("ij,il,lj->", u, np.asarray(sigma, dtype=float), u))
    optimal = float(np.sum(pairs.eigenvalues[:k]))
    zeta2 = 0.0 if optimal <= 0 else max(0.0, 1.0 - captured / optimal)
    sine = principal_sine(u[:, 0], vk[:, 0]) if k == 1 else float("nan")
    return UtilityReport(
        zeta2=zeta2,
        captured_energy=captured,
        optimal_energy=optimal,
        sine=sine,
        frob_sq=subspace_frob_sq(u, vk),
    )


def subspace_frob_sq(u: np.ndarray, v: np.ndarray) -> float:
    """||UU^T - VV^T||_F^2 computed as 2k - 2 ||U^T V||_F^2, clamped at 0."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape[1] != v.shape[1]:
        raise InvalidInput("bases must have equal column counts")
    k = u.shape[1]
    cross = float(np.sum((u.T @ v) ** 2))
    return max(0.0, 2.0 * k - 2.0 * cross)


def check_reduction_lemma(u: np.ndarray, sigma: np.ndarray, k: int) -> LemmaWitness:
    """Frobenius distance forces utility loss:

    zeta^2 >= ||UU^T - V_k V_k^T||_F^2 * Delta_k / (2 sum_{i<=k} lambda_i).
    """
    pairs = sym_eig(sigma)
    gap = float(pairs.eigenvalues[k - 1] - pairs.eigenvalues[k])
    if gap <= 0:
        raise InvalidInput("needs a positive eigengap at k")
    report = zeta_utility(u, sigma, k)
    bound = report.frob_sq * gap / (2.0 * report.optimal_energy)
    return LemmaWitness(lhs=report.zeta2, rhs=bound, slack=report.zeta2 - bound)


def check_sin_to_epca(w: np.ndarray, v: np.ndarray, sigma: np.ndarray) -> LemmaWitness:
    """<ww^T, Sigma> >= (1 - sin^2(w, v)) <vv^T, Sigma> for v the top eigenvector."""
    sigma = np.asarray(sigma, dtype=float)
    lhs = float(w @ sigma @ w)
    sine = principal_sine(w, v)
    rhs = (1.0 - sine * sine) * float(v @ sigma @ v)
    return LemmaWitness(lhs=lhs, rhs=rhs, slack=lhs - rhs)


def check_trace_vs_frobenius(u: np.ndarray, sigma: np.ndarray, k: int) -> LemmaWitness:
    """||UU^T - VV^T||_F^2 Delta_k / 2 <= Tr(VV^T Sigma) - Tr(UU^T Sigma)."""
    pairs = sym_eig(sigma)
    gap = float(pairs.eigenvalues[k - 1] - pairs.eigenvalues[k])
    vk = pairs.eigenvectors[:, :k]
    u = np.asarray(u, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    lhs_gap = subspace_frob_sq(u, vk) * gap / 2.0
    trace_gap = float(np.trace(vk.T @ sigma @ vk) - np.trace(u.T @ sigma @ u))
    return LemmaWitness(lhs=trace_gap, rhs=lhs_gap, slack=trace_gap - lhs_gap)


def check_eigengap_perturbation(sigma: np.ndarray, u: np.ndarray, xi: float) -> dict:
    """Deflating an approximate top eigenvector shifts the spectrum by at most
    D = 8 lambda_1 sqrt(xi)(1 + sqrt(xi)):

      |lambda~_i - lambda_{i+1}| <= D   and
      lambda~_1 - lambda~_2 >= lambda_2 - lambda_3 - 2 D,

    where lambda~ are eigenvalues of (I - uu^T) Sigma (I - uu^T) and
    sin^2(u, v_1) <= xi is required.
    """
    sigma = np.asarray(sigma, dtype=float)
    u = np.asarray(u, dtype=float)
    pairs = sym_eig(sigma)
    sine = principal_sine(u, pairs.eigenvectors[:, 0])
    if sine * sine > xi + 1e-12:
        raise InvalidInput("sin^2(u, v1) exceeds xi")
    d = sigma.shape[0]
    p = np.eye(d) - np.outer(u, u)
    deflated = sym_eig(p @ sigma @ p)
    lam = pairs.eigenvalues
    lam_t = deflated.eigenvalues
    bound = 8.0 * lam[0] * np.sqrt(xi) * (1.0 + np.sqrt(xi))
    shift_slacks = [bound - abs(lam_t[i] - lam[i + 1]) for i in range(d - 1)]
    gap_slack = None
    if d >= 3:
        gap_slack = (lam_t[0] - lam_t[1]) - (lam[1] - lam[2] - 2.0 * bound)
    return {
        "bound": float(bound),
        "shift_slacks": np.array(shift_slacks),
        "gap_slack": None if gap_slack is None else float(gap_slack),
    }
