"""Dense symmetric linear algebra: eigendecomposition, projectors, bases.

Everything here operates on plain ``numpy`` arrays.  Symmetric matrices are
stored dense (the target dimensions are a few hundred at most) and
symmetrized on construction so that storage enforces ``A[i, j] == A[j, i]``
exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DeflationError, DegenerateDirection, InvalidInput, RankError

PROJECTOR_TOL = 1e-10


def sym(m: np.ndarray) -> np.ndarray:
    """Symmetrize a square matrix so both triangles agree exactly."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidInput(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInput("matrix has non-finite entries")
    return 0.5 * (m + m.T)


@dataclass(frozen=True)
class EigenPairs:
    """Full symmetric eigendecomposition, eigenvalues sorted descending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # column i pairs with eigenvalues[i]

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def sym_eig(m: np.ndarray) -> EigenPairs:
    """Eigendecompose a symmetric matrix, eigenvalues descending.

    Backed by LAPACK's symmetric solver (tridiagonalization + implicit-shift
    QR).  Eigenvectors follow the sign convention that the entry of largest
    magnitude is positive, which makes downstream tests deterministic.
    """
    m = sym(m)
    w, v = np.linalg.eigh(m)
    order = np.argsort(w)[::-1]
    return EigenPairs(eigenvalues=w[order], eigenvectors=_fix_signs(v[:, order]))


@dataclass(frozen=True)
class Projector:
    """An orthogonal projection matrix together with its rank."""

    matrix: np.ndarray
    rank: int = field(default=-1)

    def __post_init__(self):
        m = sym(self.matrix)
        object.__setattr__(self, "matrix", m)
        r = self.rank
        if r < 0:
            r = int(round(np.trace(m)))
            object.__setattr__(self, "rank", r)
        if np.max(np.abs(m @ m - m)) > PROJECTOR_TOL:
            raise InvalidInput("matrix is not idempotent to tolerance")
        if abs(np.trace(m) - r) > 1e-8:
            raise InvalidInput("rank does not match trace")

    @classmethod
    def identity(cls, d: int) -> "Projector":
        return cls(np.eye(d), d)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, w: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(w, dtype=float)


def deflate(p: Projector, u: np.ndarray) -> Projector:
    """Remove the direction ``u`` from a projector: P - u u^T.

    ``u`` must be unit norm and (approximately) inside the image of ``p``;
    the result is again an orthogonal projector with rank reduced by one.
    """
    u = np.asarray(u, dtype=float)
    if abs(np.linalg.norm(u) - 1.0) > 1e-8:
        raise InvalidInput("deflation direction must be unit norm")
    if np.linalg.norm(p.apply(u) - u) > 1e-6:
        raise DeflationError("direction is not in the image of the projector")
    m = p.matrix - np.outer(u, u)
    # Re-symmetrize and clean tiny idempotence drift before revalidating.
    m = 0.5 * (m + m.T)
    return Projector(m, p.rank - 1)


def project_unit(p: Projector, w: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Project ``w`` onto Im(p) and normalize: Pw / ||Pw||."""
    pw = p.apply(w)
    norm = np.linalg.norm(pw)
    if norm <= tol:
        raise DegenerateDirection("projected vector has ~zero norm")
    return pw / norm


def orthonormalize(m: np.ndarray) -> np.ndarray:
    """Gram-Schmidt a d x k matrix with independent columns into an orthonormal basis."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise InvalidInput("expected a 2-d array of column vectors")
    smallest = np.linalg.svd(m, compute_uv=False)[-1] if min(m.shape) else 0.0
    if smallest <= 1e-10:
        raise RankError("columns are rank deficient")
    q, r = np.linalg.qr(m)
    # Fix the sign ambiguity of QR so the basis depends only on the span order.
    q = q * np.sign(np.diag(r))
    return q


def check_orthobasis(u: np.ndarray, tol: float = 1e-10) -> bool:
    """True when U^T U = I_k within ``tol`` (max-norm)."""
    u = np.asarray(u, dtype=float)
    k = u.shape[1]
    return bool(np.max(np.abs(u.T @ u - np.eye(k))) <= tol)


def principal_sine(u: np.ndarray, v: np.ndarray) -> float:
    """sin of the principal angle between two unit vectors: sqrt(1 - <u,v>^2)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    c = float(np.dot(u, v))
    return float(np.sqrt(max(0.0, 1.0 - min(1.0, c * c))))
