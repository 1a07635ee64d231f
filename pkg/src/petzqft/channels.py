"""CPTP maps in Kraus form.

Kraus operators are stacked in an array of shape ``(n_kraus, dim_out, dim_in)``.
The Choi matrix convention is ``J = sum_ij |i><j| (x) N(|i><j|)`` with the
input factor first, unnormalised (``Tr J = dim_in``).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatch, NotCPTP
from .matrixcore import DensityOperator, as_matrix, dagger, herm_eig, mat_pow

CPTP_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """Linear map ``rho -> sum_m K_m rho K_m^dagger``.

    Trace preservation is checked at construction (``validate=False`` skips it
    for intermediate objects).  Complete positivity holds by construction for
    a Kraus set; `from_choi` checks it on the Choi matrix.
    """

    kraus_ops: np.ndarray
    validate: bool = True
    tol: float = CPTP_TOL

    def __post_init__(self):
        ops = np.asarray(self.kraus_ops, dtype=complex)
        if ops.ndim == 2:
            ops = ops[None]
        if ops.ndim != 3 or ops.shape[0] == 0:
            raise DimensionMismatch(f"Kraus stack must have shape (m, d_out, d_in), got {ops.shape}")
        ops.setflags(write=False)
        object.__setattr__(self, "kraus_ops", ops)
        if self.validate:
            defect = self.tp_defect()
            if defect > self.tol:
                raise NotCPTP(f"sum K^dag K deviates from identity by {defect:.3e}")

    @property
    def dim_in(self) -> int:
        return self.kraus_ops.shape[2]

    @property
    def dim_out(self) -> int:
        return self.kraus_ops.shape[1]

    @property
    def n_kraus(self) -> int:
        return self.kraus_ops.shape[0]

    def tp_defect(self) -> float:
        K = self.kraus_ops
        S = np.einsum("mji,mjk->ik", K.conj(), K)
        return float(np.max(np.abs(S - np.eye(self.dim_in))))

    def apply_matrix(self, X) -> np.ndarray:
        """Linear action on an arbitrary ``dim_in x dim_in`` operator."""
        X = as_matrix(X)
        if X.shape != (self.dim_in, self.dim_in):
            raise DimensionMismatch(f"input {X.shape} vs channel dim_in {self.dim_in}")
        K = self.kraus_ops
        return np.einsum("mab,bc,mdc->ad", K, X, K.conj(), optimize=True)

    def apply(self, rho) -> DensityOperator:
        return DensityOperator(self.apply_matrix(rho))

    def adjoint_apply(self, X) -> np.ndarray:
        X = as_matrix(X)
        if X.shape != (self.dim_out, self.dim_out):
            raise DimensionMismatch(f"input {X.shape} vs channel dim_out {self.dim_out}")
        K = self.kraus_ops
        return np.einsum("mba,bc,mcd->ad", K.conj(), X, K, optimize=True)

    def choi(self) -> np.ndarray:
        # |K>> = sum_i |i> (x) K|i>, flattened with the input index slowest
        vecs = np.swapaxes(self.kraus_ops, 1, 2).reshape(self.n_kraus, -1)
        return vecs.T @ vecs.conj()

    def compose(self, first: "KrausChannel") -> "KrausChannel":
        """``self o first``: apply ``first`` then ``self``."""
        if first.dim_out != self.dim_in:
            raise DimensionMismatch("composition dimensions do not chain")
        ops = np.einsum("mab,nbc->mnac", self.kraus_ops, first.kraus_ops).reshape(
            -1, self.dim_out, first.dim_in
        )
        return KrausChannel(ops, validate=self.validate and first.validate, tol=max(self.tol, first.tol))

    def compressed(self, zero_tol: float = 1e-14) -> "KrausChannel":
        """Equivalent channel with a minimal (Choi-rank) Kraus set."""
        return KrausChannel.from_choi(self.choi(), self.dim_in, self.dim_out, tol=self.tol, zero_tol=zero_tol)

    @classmethod
    def from_choi(cls, J, dim_in: int, dim_out: int, tol: float = CPTP_TOL, zero_tol: float = 1e-14,
                  validate: bool = True) -> "KrausChannel":
        J = as_matrix(J)
        if J.shape != (dim_in * dim_out, dim_in * dim_out):
            raise DimensionMismatch(f"Choi matrix {J.shape} vs dims ({dim_in}, {dim_out})")
        sd = herm_eig(J, tol=max(tol, 1e-8))
        lam, V = sd.eigenvalues, sd.eigenvectors
        if validate and lam[-1] < -tol:
            raise NotCPTP(f"Choi matrix has eigenvalue {lam[-1]:.3e}; map is not completely positive")
        keep = lam > zero_tol * max(lam[0], 1.0)
        ops = (np.sqrt(lam[keep])[:, None] * V[:, keep].T).reshape(-1, dim_in, dim_out)
        return cls(np.swapaxes(ops, 1, 2), validate=validate, tol=tol)

    @classmethod
    def from_linear_map(cls, fn: Callable[[np.ndarray], np.ndarray], dim_in: int, dim_out: int,
                        tol: float = CPTP_TOL) -> "KrausChannel":
        return cls.from_choi(choi_of_map(fn, dim_in, dim_out), dim_in, dim_out, tol=tol)


def choi_of_map(fn: Callable[[np.ndarray], np.ndarray], dim_in: int, dim_out: int) -> np.ndarray:
    """Choi matrix of any linear map given as a Python callable."""
    J = np.zeros((dim_in, dim_out, dim_in, dim_out), dtype=complex)
    for i in range(dim_in):
        for j in range(dim_in):
            E = np.zeros((dim_in, dim_in), dtype=complex)
            E[i, j] = 1.0
            J[i, :, j, :] = fn(E)
    return J.reshape(dim_in * dim_out, dim_in * dim_out)


def choi_min_eigenvalue(J) -> float:
    return float(herm_eig(J).eigenvalues[-1])


def apply(ch: KrausChannel, rho) -> DensityOperator:
    return ch.apply(rho)


def adjoint_apply(ch: KrausChannel, X) -> np.ndarray:
    return ch.adjoint_apply(X)


def rescale(A, alpha: complex, X) -> np.ndarray:
    """Rescaling map ``A^alpha X (A^alpha)^dagger`` with support-restricted powers."""
    X = as_matrix(X)
    Aa = mat_pow(A, alpha)
    if Aa.shape != X.shape:
        raise DimensionMismatch(f"rescaling operator {Aa.shape} vs argument {X.shape}")
    return Aa @ X @ dagger(Aa)


def conjugated_channel(ch: KrausChannel, gamma, theta: float) -> KrausChannel:
    """``J_{N(gamma)}^{-i theta} o N o J_gamma^{i theta}`` in Kraus form."""
    gamma = gamma if isinstance(gamma, DensityOperator) else DensityOperator(gamma)
    if gamma.dim != ch.dim_in:
        raise DimensionMismatch(f"reference dim {gamma.dim} vs channel dim_in {ch.dim_in}")
    Ngamma = DensityOperator(ch.apply_matrix(gamma.matrix))
    left = mat_pow(Ngamma, -1j * theta)
    right = mat_pow(gamma, 1j * theta)
    return KrausChannel(left @ ch.kraus_ops @ right, validate=False)


def covariance_defect(ch: KrausChannel, gamma, theta: float) -> float:
    """Max-norm Choi distance between ``N`` and its rotated conjugate.

    Zero (to rounding) exactly when the channel is covariant under the
    one-parameter groups generated by ``log gamma`` and ``log N(gamma)`` at
    this ``theta``.
    """
    rotated = conjugated_channel(ch, gamma, theta)
    return float(np.max(np.abs(rotated.choi() - ch.choi())))


def generator_covariance_defect(ch: KrausChannel, L, L_out=None, times=(0.37, 1.1, 2.3, 4.9)) -> float:
    """Max-norm Choi distance between ``N o U_t`` and ``U'_t o N`` with ``U_t = exp(-i L t)``.

    ``L_out`` generates the output action and defaults to ``L``.
    """
    L = as_matrix(L)
    L_out = L if L_out is None else as_matrix(L_out)
    if L.shape[0] != ch.dim_in or L_out.shape[0] != ch.dim_out:
        raise DimensionMismatch("generator dimensions do not match the channel")
    w, V = np.linalg.eigh(L)
    wo, Vo = np.linalg.eigh(L_out)
    worst = 0.0
    for t in times:
        U = (V * np.exp(-1j * w * t)) @ dagger(V)
        Uo = (Vo * np.exp(-1j * wo * t)) @ dagger(Vo)
        before = KrausChannel(ch.kraus_ops @ U, validate=False).choi()
        after = KrausChannel(Uo @ ch.kraus_ops, validate=False).choi()
        worst = max(worst, float(np.max(np.abs(before - after))))
    return worst


def charge_components(K, levels, tol: float = 1e-9) -> list[np.ndarray]:
    """Split ``K`` into parts with fixed ``levels[a] - levels[b]`` on each entry ``K[a, b]``.

    ``levels`` are eigenvalues of a diagonal generator.  The parts of a Kraus
    set form a Kraus set of the group-averaged (covariant) channel.
    """
    K = as_matrix(K)
    lv = np.asarray(levels, dtype=float)
    gap = lv[:, None] - lv[None, :]
    parts, seen = [], np.zeros(gap.shape, dtype=bool)
    for a, b in zip(*np.nonzero(~seen)):
        if seen[a, b]:
            continue
        mask = np.abs(gap - gap[a, b]) < tol
        seen |= mask
        parts.append(np.where(mask, K, 0))
    return parts


def identity_channel(d: int) -> KrausChannel:
    return KrausChannel(np.eye(d, dtype=complex)[None])


def unitary_channel(U) -> KrausChannel:
    return KrausChannel(as_matrix(U)[None])


PAULI = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def depolarizing_channel(p: float = 1.0) -> KrausChannel:
    """Qubit depolarising channel ``rho -> (1-p) rho + p I/2``."""
    weights = [1 - 3 * p / 4, p / 4, p / 4, p / 4]
    return KrausChannel(np.array([np.sqrt(w) * s for w, s in zip(weights, PAULI)]))


def dephasing_channel(basis) -> KrausChannel:
    """Complete dephasing in the orthonormal basis given by the columns of ``basis``."""
    B = as_matrix(basis)
    return KrausChannel(np.array([np.outer(B[:, k], B[:, k].conj()) for k in range(B.shape[1])]))


def dilation_channel(U, env, dim_sys: int) -> KrausChannel:
    """Kraus form of ``rho -> Tr_E[U (rho (x) env) U^dagger]``.

    Operators are ``sqrt(q_n) (I (x) <b_m|) U (I (x) |b_n>)`` over the
    eigenbasis ``{q_n, |b_n>}`` of the environment state; zero-weight
    environment eigenvectors are skipped on the input side only.
    """
    env = env if isinstance(env, DensityOperator) else DensityOperator(env)
    U = as_matrix(U)
    de = env.dim
    if U.shape != (dim_sys * de, dim_sys * de):
        raise DimensionMismatch(f"unitary {U.shape} vs system {dim_sys} (x) environment {de}")
    B = env.eigenvectors
    keep = env.eigenvalues > 0
    q = env.eigenvalues[keep]
    U4 = U.reshape(dim_sys, de, dim_sys, de)
    # (a, e_out, b, n) = <a, e_out| U |b, b_n>; the output trace runs over the full eigenbasis
    Ub = np.einsum("aebf,fn->aebn", U4, B[:, keep])
    Ub = np.einsum("em,aebn->mnab", B.conj(), Ub)
    ops = np.sqrt(q)[None, :, None, None] * Ub
    return KrausChannel(ops.reshape(-1, dim_sys, dim_sys))


def transpose_choi(d: int) -> np.ndarray:
    """Choi matrix of the transpose map (the swap operator, eigenvalue -1 present)."""
    return choi_of_map(lambda X: X.T, d, d)


def kraus_stack(ops: Sequence) -> np.ndarray:
    return np.array([as_matrix(K) for K in ops])
