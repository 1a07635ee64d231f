"""Dense complex matrix algebra used throughout the package.

Matrices are plain ``numpy`` arrays of ``complex128``.  Every power, logarithm
or pseudo-inverse acts on the support of its argument only: eigenvalues at or
below ``RANK_TOL * max(eigenvalue)`` are treated as exact zeros.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, InvalidState, NotHermitian, SupportViolation

RANK_TOL = 1e-12
HERMITIAN_TOL = 1e-8
CLAMP_TOL = 1e-10
TRACE_TOL = 1e-10


def dagger(A: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(A, -1, -2))


def as_matrix(A) -> np.ndarray:
    """Return the underlying complex array of a matrix or `DensityOperator`."""
    if isinstance(A, DensityOperator):
        return A.matrix
    M = np.asarray(A, dtype=complex)
    if M.ndim != 2:
        raise DimensionMismatch(f"expected a 2-d matrix, got shape {M.shape}")
    return M


def hermitian_defect(A: np.ndarray) -> float:
    A = np.asarray(A)
    return float(np.max(np.abs(A - dagger(A)), initial=0.0))


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues in descending order with the matching eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.eigenvalues) @ dagger(V)

    def support_mask(self, rank_tol: float = RANK_TOL) -> np.ndarray:
        lam = self.eigenvalues
        scale = max(float(np.max(np.abs(lam), initial=0.0)), 0.0)
        if scale == 0.0:
            return np.zeros(lam.shape, dtype=bool)
        return lam > rank_tol * scale

    def apply(self, values: np.ndarray) -> np.ndarray:
        """``V diag(values) V†`` for per-eigenvalue function values."""
        V = self.eigenvectors
        return (V * values) @ dagger(V)


def herm_eig(A, tol: float = HERMITIAN_TOL) -> SpectralDecomposition:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Raises `NotHermitian` when ``max|A - A†|`` exceeds ``tol``.  Degenerate
    eigenspaces come back with whatever orthonormal basis LAPACK picks.
    """
    A = as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"square matrix required, got {A.shape}")
    defect = hermitian_defect(A)
    if defect > tol:
        raise NotHermitian(f"asymmetry {defect:.3e} exceeds {tol:.1e}")
    w, V = np.linalg.eigh(0.5 * (A + dagger(A)))
    return SpectralDecomposition(w[::-1].copy(), V[:, ::-1].copy())


def _spectral(A) -> SpectralDecomposition:
    if isinstance(A, DensityOperator):
        return A.spectral
    if isinstance(A, SpectralDecomposition):
        return A
    return herm_eig(A)


def power_values(eigenvalues: np.ndarray, alpha: complex, rank_tol: float = RANK_TOL) -> np.ndarray:
    lam = np.asarray(eigenvalues, dtype=float)
    scale = float(np.max(lam, initial=0.0))
    out = np.zeros(lam.shape, dtype=complex)
    if scale <= 0.0:
        return out
    keep = lam > rank_tol * scale
    out[keep] = np.exp(alpha * np.log(lam[keep]))
    return out


def mat_pow(A, alpha: complex, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Support-restricted complex power ``A^alpha`` of a PSD matrix.

    Eigenvalues ``<= rank_tol * max(eigenvalue)`` map to zero, so ``alpha = 0``
    gives the support projector and negative ``alpha`` a pseudo-inverse power.
    """
    sd = _spectral(A)
    return sd.apply(power_values(sd.eigenvalues, alpha, rank_tol))


def mat_log(A, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Natural logarithm of a PSD matrix on its support (zero elsewhere)."""
    sd = _spectral(A)
    keep = sd.support_mask(rank_tol)
    vals = np.zeros(sd.eigenvalues.shape)
    vals[keep] = np.log(sd.eigenvalues[keep])
    return sd.apply(vals.astype(complex))


def support_projector(A, rank_tol: float = RANK_TOL) -> np.ndarray:
    sd = _spectral(A)
    return sd.apply(sd.support_mask(rank_tol).astype(complex))


def tensor(*ops) -> np.ndarray:
    """Kronecker product of any number of matrices (or vectors)."""
    if not ops:
        raise DimensionMismatch("tensor() needs at least one operand")
    arrays = [op.matrix if isinstance(op, DensityOperator) else np.asarray(op, dtype=complex) for op in ops]
    out = arrays[0]
    for B in arrays[1:]:
        out = np.kron(out, B)
    return out


def partial_trace(A, dims: Sequence[int], keep) -> np.ndarray:
    """Trace out every subsystem not listed in ``keep``.

    ``dims`` are the subsystem dimensions in tensor order; ``keep`` is an
    index or a collection of indices.  The kept factors stay in their
    original order.
    """
    A = as_matrix(A)
    dims = [int(d) for d in dims]
    n = len(dims)
    total = int(np.prod(dims))
    if A.shape != (total, total):
        raise DimensionMismatch(f"dims {dims} do not match matrix shape {A.shape}")
    keep = sorted({keep} if isinstance(keep, (int, np.integer)) else set(keep))
    if any(k < 0 or k >= n for k in keep):
        raise DimensionMismatch(f"keep indices {keep} out of range for {n} subsystems")
    traced = [k for k in range(n) if k not in keep]
    T = A.reshape(dims + dims)
    # contract traced axes pairwise, highest first so earlier axis numbers stay valid
    for k in sorted(traced, reverse=True):
        m = T.ndim // 2
        T = np.trace(T, axis1=k, axis2=k + m)
    d_keep = int(np.prod([dims[k] for k in keep])) if keep else 1
    return T.reshape(d_keep, d_keep)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Hermitian, positive semidefinite, unit-trace matrix.

    Eigenvalues within ``CLAMP_TOL`` below zero are clamped to zero and the
    stored matrix is rebuilt from the clamped spectrum; anything more
    negative raises `InvalidState`.
    """

    matrix: np.ndarray
    trace_tol: float = field(default=TRACE_TOL, repr=False)

    def __post_init__(self):
        M = as_matrix(self.matrix)
        if M.shape[0] != M.shape[1]:
            raise DimensionMismatch(f"density operator must be square, got {M.shape}")
        sd = herm_eig(M)
        lam = sd.eigenvalues
        if lam.size and lam[-1] < -CLAMP_TOL:
            raise InvalidState(f"eigenvalue {lam[-1]:.3e} is negative")
        tr = float(np.sum(lam))
        if abs(tr - 1.0) > self.trace_tol:
            raise InvalidState(f"trace {tr:.12f} differs from 1")
        clamped = np.clip(lam, 0.0, None)
        sd = SpectralDecomposition(clamped, sd.eigenvectors)
        M = 0.5 * (M + dagger(M))
        if np.any(clamped != lam):
            M = sd.reconstruct()
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)
        object.__setattr__(self, "_spectral", sd)

    @classmethod
    def from_vector(cls, psi) -> "DensityOperator":
        psi = np.asarray(psi, dtype=complex).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def maximally_mixed(cls, d: int) -> "DensityOperator":
        return cls(np.eye(d, dtype=complex) / d)

    @classmethod
    def normalized(cls, A) -> "DensityOperator":
        """Hermitize and rescale to unit trace before validating."""
        A = as_matrix(A)
        A = 0.5 * (A + dagger(A))
        return cls(A / np.trace(A).real)

    @property
    def spectral(self) -> SpectralDecomposition:
        return self._spectral

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._spectral.eigenvalues

    @property
    def eigenvectors(self) -> np.ndarray:
        return self._spectral.eigenvectors

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    @cached_property
    def support_rank(self) -> int:
        return int(np.count_nonzero(self._spectral.support_mask()))

    @property
    def is_full_rank(self) -> bool:
        return self.support_rank == self.dim

    def support_projector(self) -> np.ndarray:
        return support_projector(self)

    def power(self, alpha: complex) -> np.ndarray:
        return mat_pow(self, alpha)

    def log(self) -> np.ndarray:
        return mat_log(self)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


def _same_dims(a, b):
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes differ: {a.shape} vs {b.shape}")


def _as_state(x) -> DensityOperator:
    return x if isinstance(x, DensityOperator) else DensityOperator(x)


def von_neumann_entropy(rho) -> float:
    p = _as_state(rho).eigenvalues
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def fidelity(rho, tau) -> float:
    """``F(rho, tau) = ||sqrt(rho) sqrt(tau)||_1^2`` (squared convention)."""
    rho, tau = _as_state(rho), _as_state(tau)
    _same_dims(rho.matrix, tau.matrix)
    s = np.linalg.svd(mat_pow(rho, 0.5) @ mat_pow(tau, 0.5), compute_uv=False)
    return float(np.sum(s) ** 2)


def support_overlap(rho, gamma) -> float:
    """Fraction of ``support(rho)`` that lies inside ``support(gamma)``."""
    rho, gamma = _as_state(rho), _as_state(gamma)
    P_rho = rho.support_projector()
    P_gamma = gamma.support_projector()
    return float(np.trace(P_rho @ P_gamma).real / max(rho.support_rank, 1))


def relative_entropy(rho, gamma, support_tol: float = 1e-9) -> float:
    """Umegaki relative entropy ``Tr rho (log rho - log gamma)`` in nats.

    Raises `SupportViolation` instead of returning infinity when the support
    of ``rho`` is not contained in the support of ``gamma``.
    """
    rho, gamma = _as_state(rho), _as_state(gamma)
    _same_dims(rho.matrix, gamma.matrix)
    overlap = support_overlap(rho, gamma)
    if overlap < 1.0 - support_tol:
        raise SupportViolation(f"support overlap {overlap:.12f} < 1")
    p = rho.eigenvalues
    p = p[p > 0]
    s_rho = float(np.sum(p * np.log(p)))
    cross = float(np.trace(rho.matrix @ mat_log(gamma)).real)
    return s_rho - cross
