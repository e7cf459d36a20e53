"""Seeded synthetic sample generators.

Every generator produces i.i.d. symmetric matrices with a known common
expectation.  All samples decompose as ``base + x x^T`` with a fixed (possibly
zero) base matrix, which the batch container exploits so that downstream
algorithms never have to materialize d x d matrices per sample.

Analytic model constants (M, V, K, a, gamma^2) are attached per generator
rather than estimated from data; algorithms that need them read them from the
stream's parameters.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidInput
from .linalg import orthonormalize, sym_eig
from .rng import substream

_MAGIC = b"DPPCA1"


@dataclass(frozen=True)
class ModelParams:
    """Distributional constants threaded into thresholds and learning rates."""

    sigma_matrix: np.ndarray
    eigenvalues: np.ndarray  # descending
    gap: float  # min_{i <= spike_count} (lambda_i - lambda_{i+1})
    kappa_prime: float  # lambda_1 / gap
    M: float
    V: float
    K: float
    a: float
    gamma2: float
    noise_sigma: float = 0.0
    spike_count: int = 1

    def eigengap(self, k: int) -> float:
        lam = self.eigenvalues
        if k >= lam.size:
            raise InvalidInput("k must be < d for an eigengap")
        return float(min(lam[i] - lam[i + 1] for i in range(k)))


class SampleBatch:
    """A contiguous slice of samples A_i = base + x_i x_i^T."""

    def __init__(self, x: np.ndarray, base: Optional[np.ndarray] = None):
        self.x = np.asarray(x, dtype=float)
        self.base = None if base is None else np.asarray(base, dtype=float)

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def __getitem__(self, sl) -> "SampleBatch":
        if not isinstance(sl, slice):
            raise TypeError("SampleBatch supports slicing only")
        return SampleBatch(self.x[sl], self.base)

    def matrix(self, i: int) -> np.ndarray:
        a = np.outer(self.x[i], self.x[i])
        if self.base is not None:
            a = a + self.base
        return a

    def matrices(self) -> np.ndarray:
        """Materialize all samples as an (m, d, d) array (tests / small m only)."""
        out = np.einsum("mi,mj->mij", self.x, self.x)
        if self.base is not None:
            out += self.base
        return out

    def mean_matrix(self) -> np.ndarray:
        m = self.x.T @ self.x / len(self)
        if self.base is not None:
            m = m + self.base
        return m

    def traces(self) -> np.ndarray:
        tr = np.einsum("mi,mi->m", self.x, self.x)
        if self.base is not None:
            tr = tr + np.trace(self.base)
        return tr

    def gradients(self, omega: np.ndarray) -> np.ndarray:
        """A_i @ omega for every sample, as an (m, d) array."""
        out = self.x * (self.x @ omega)[:, None]
        if self.base is not None:
            out += self.base @ omega
        return out

    def projected_gradients(self, p_matrix: np.ndarray, omega: np.ndarray) -> np.ndarray:
        """P A_i P @ omega for every sample, as an (m, d) array."""
        px = self.x @ p_matrix  # P is symmetric
        out = px * (px @ omega)[:, None]
        if self.base is not None:
            out += p_matrix @ (self.base @ (p_matrix @ omega))
        return out


@dataclass(frozen=True)
class SampleStream:
    """A reproducible generator of i.i.d. sample matrices.

    ``sample(n)`` always returns the same n samples for the same stream; the
    stream is otherwise stateless.
    """

    kind: str
    d: int
    seed: int
    params: ModelParams
    _config: dict = field(default_factory=dict, repr=False)

    def sample(self, n: int) -> SampleBatch:
        rng = substream(self.seed, self.kind, "samples")
        cfg = self._config
        if self.kind == "spiked_rank1":
            v, amp, sigma = cfg["v"], cfg["amp"], cfg["sigma"]
            signs = np.where(rng.random(n) < 0.5, 1.0, -1.0)
            x = signs[:, None] * (amp * v)[None, :]
            if sigma > 0:
                x = x + sigma * rng.standard_normal((n, self.d))
            return SampleBatch(x)
        if self.kind == "spiked_rankk":
            sigma = cfg["sigma"]
            z = sigma * rng.standard_normal((n, self.d)) if sigma > 0 else np.zeros((n, self.d))
            return SampleBatch(z, cfg["base"])
        if self.kind == "gaussian_outer":
            x = rng.standard_normal((n, self.d)) @ cfg["sqrt_sigma"]
            return SampleBatch(x)
        if self.kind == "heavy_tail_mixture":
            alpha, v = cfg["alpha"], cfg["v"]
            x = rng.standard_normal((n, self.d))
            spike = rng.random(n) < alpha
            signs = np.where(rng.random(n) < 0.5, 1.0, -1.0)
            mag = alpha ** -0.25
            x[spike] = (signs[spike] * mag)[:, None] * v[None, :]
            return SampleBatch(x)
        raise InvalidInput(f"unknown stream kind {self.kind!r}")


def _unit_vector(rng, d: int) -> np.ndarray:
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v)


def _spiked_params(sigma_matrix, spike_count, sigma, d) -> ModelParams:
    pairs = sym_eig(sigma_matrix)
    lam = pairs.eigenvalues
    gap = float(min(lam[i] - lam[i + 1] for i in range(spike_count)))
    return ModelParams(
        sigma_matrix=sigma_matrix,
        eigenvalues=lam,
        gap=gap,
        kappa_prime=float(lam[0] / gap) if gap > 0 else math.inf,
        M=float(d),
        V=float(sigma * sigma * d),
        K=1.0,
        a=1.0,
        gamma2=float(sigma * sigma),
        noise_sigma=float(sigma),
        spike_count=spike_count,
    )


def spiked_rank1(d: int, lambda1: float, sigma: float, seed: int, scaled: bool = True) -> SampleStream:
    """Rank-one spiked covariance stream: x = s + noise, A = x x^T.

    With ``scaled`` (the experimental default) the signal is +/- sqrt(lambda1) v
    so the spike eigenvalue of E[A] equals lambda1; unscaled uses a +/- v
    signal (unit spike).
    """
    if not lambda1 > 0:
        raise InvalidInput("lambda1 must be positive")
    if sigma < 0:
        raise InvalidInput("sigma must be nonnegative")
    rng = substream(seed, "spiked_rank1", "direction")
    v = _unit_vector(rng, d)
    amp = math.sqrt(lambda1) if scaled else 1.0
    sigma_matrix = amp * amp * np.outer(v, v) + sigma * sigma * np.eye(d)
    params = _spiked_params(sigma_matrix, 1, sigma, d)
    return SampleStream("spiked_rank1", d, seed, params, {"v": v, "amp": amp, "sigma": sigma})


def spiked_rankk(d: int, k: int, eigenvalues, sigma: float, seed: int) -> SampleStream:
    """Rank-k spiked stream: A = V_k diag(eigenvalues) V_k^T + z z^T, z ~ N(0, sigma^2 I)."""
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    if eigenvalues.size != k or k >= d:
        raise InvalidInput("need k < d eigenvalues")
    if np.any(eigenvalues <= 0) or np.any(np.diff(eigenvalues) > 0):
        raise InvalidInput("eigenvalues must be positive and descending")
    rng = substream(seed, "spiked_rankk", "basis")
    vk = orthonormalize(rng.standard_normal((d, k)))
    base = (vk * eigenvalues) @ vk.T
    sigma_matrix = base + sigma * sigma * np.eye(d)
    params = _spiked_params(sigma_matrix, k, sigma, d)
    return SampleStream("spiked_rankk", d, seed, params, {"base": base, "sigma": sigma})


def gaussian_outer(d: int, sigma_matrix, seed: int) -> SampleStream:
    """Gaussian outer-product stream: A = x x^T with x ~ N(0, sigma_matrix)."""
    sigma_matrix = np.asarray(sigma_matrix, dtype=float)
    pairs = sym_eig(sigma_matrix)
    if pairs.eigenvalues[-1] < -1e-8:
        raise InvalidInput("covariance must be PSD")
    lam = np.clip(pairs.eigenvalues, 0.0, None)
    sqrt_sigma = (pairs.eigenvectors * np.sqrt(lam)) @ pairs.eigenvectors.T
    gap = float(lam[0] - lam[1]) if d > 1 else math.inf
    params = ModelParams(
        sigma_matrix=sigma_matrix,
        eigenvalues=lam,
        gap=gap,
        kappa_prime=float(lam[0] / gap) if gap > 0 else math.inf,
        M=float(d),
        V=float(d),
        K=4.0,
        a=1.0,
        gamma2=1.0,
        noise_sigma=0.0,
        spike_count=1,
    )
    return SampleStream("gaussian_outer", d, seed, params, {"sqrt_sigma": sqrt_sigma})


def heavy_tail_mixture(d: int, alpha: float, seed: int) -> SampleStream:
    """Rare-spike mixture violating the sub-Gaussian tail assumption.

    With probability alpha the point is +/- alpha^(-1/4) v, otherwise standard
    normal; the mean covariance is (1 - alpha) I + sqrt(alpha) v v^T.
    """
    if not 0 < alpha < 1:
        raise InvalidInput("alpha must be in (0, 1)")
    rng = substream(seed, "heavy_tail_mixture", "direction")
    v = _unit_vector(rng, d)
    sigma_matrix = (1.0 - alpha) * np.eye(d) + math.sqrt(alpha) * np.outer(v, v)
    lam = np.full(d, 1.0 - alpha)
    lam[0] = (1.0 - alpha) + math.sqrt(alpha)
    gap = math.sqrt(alpha)
    params = ModelParams(
        sigma_matrix=sigma_matrix,
        eigenvalues=lam,
        gap=gap,
        kappa_prime=float(lam[0] / gap),
        M=float(d),
        V=float(d),
        K=4.0,
        a=1.0,
        gamma2=1.0,
        noise_sigma=0.0,
        spike_count=1,
    )
    return SampleStream("heavy_tail_mixture", d, seed, params, {"alpha": alpha, "v": v})


def dump_samples(path, stream: SampleStream, n: int) -> None:
    """Write n materialized samples to a flat binary file.

    Layout: magic "DPPCA1", u32 d, u64 n, u64 seed, then row-major float64
    entries for each matrix in order.
    """
    batch = stream.sample(n)
    with open(path, "wb") as f:
        f.write(struct.pack("<6sIQQ", _MAGIC, stream.d, n, stream.seed))
        for i in range(n):
            f.write(batch.matrix(i).astype("<f8").tobytes())


def load_samples(path):
    """Read a sample dump; returns (d, seed, matrices) with shape (n, d, d)."""
    with open(path, "rb") as f:
        header = f.read(struct.calcsize("<6sIQQ"))
        magic, d, n, seed = struct.unpack("<6sIQQ", header)
        if magic != _MAGIC:
            raise InvalidInput("not a sample dump (bad magic)")
        data = np.frombuffer(f.read(), dtype="<f8")
    if data.size != n * d * d:
        raise InvalidInput("sample dump is truncated")
    return d, seed, data.reshape(n, d, d).copy()
