"""Quasi-probabilities of transitions and complex entropy production.

Index convention for every six-index table: ``(mu, nu, i, j, k, l)`` where
``mu`` labels eigenvectors of the input state, ``nu`` eigenvectors of the
output state, ``(i, j)`` eigenvectors of the reference ``gamma`` and
``(k, l)`` eigenvectors of ``N(gamma)``.  All eigen-systems are ordered by
descending eigenvalue.

Entropy production of one transition is ``sigma = ds - dq`` with
``ds = log p_mu - log p'_nu`` and the complex information exchange ``dq``
of `info_exchange`.  Backward terms sit at ``-sigma`` of the forward term
with the same indices.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .channels import KrausChannel
from .errors import DegenerateBackward, DimensionMismatch, MissingAtom, SupportViolation
from .matrixcore import (
    RANK_TOL,
    DensityOperator,
    SpectralDecomposition,
    dagger,
    hermitian_defect,
    mat_pow,
    relative_entropy,
)
from .petz import RecoveryFamily, rotated_petz

BIN_TOL = 1e-9
ZERO_WEIGHT = 1e-12


def _state(x) -> DensityOperator:
    return x if isinstance(x, DensityOperator) else DensityOperator(x)


def _unit(v, dim: int, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=complex).ravel()
    if v.size != dim:
        raise DimensionMismatch(f"{name} has dimension {v.size}, expected {dim}")
    n = np.linalg.norm(v)
    if abs(n - 1.0) > 1e-9:
        raise ValueError(f"{name} is not normalised (norm {n:.12f})")
    return v


def _safe_log(values: np.ndarray) -> np.ndarray:
    """Natural log on the support (relative ``RANK_TOL``), NaN elsewhere."""
    lam = np.asarray(values, dtype=float)
    out = np.full(lam.shape, np.nan)
    scale = float(np.max(lam, initial=0.0))
    keep = lam > RANK_TOL * scale
    out[keep] = np.log(lam[keep])
    return out


# ---------------------------------------------------------------------------
# pure-state detailed balance


def transition_pure(ch: KrausChannel, psi, phi) -> float:
    """``<phi| N(|psi><psi|) |phi>``."""
    psi = _unit(psi, ch.dim_in, "psi")
    phi = _unit(phi, ch.dim_out, "phi")
    amps = np.einsum("a,mab,b->m", phi.conj(), ch.kraus_ops, psi)
    return float(np.sum(np.abs(amps) ** 2))


def rescaled_vector(ref, psi, direction: str = "initial") -> np.ndarray:
    """Reference-rescaled pure state.

    ``initial`` gives ``gamma^(-1/2)|psi>`` and ``final`` gives
    ``N(gamma)^(1/2)|phi>`` (pass ``N(gamma)`` as ``ref``), both normalised.
    """
    ref = _state(ref)
    psi = _unit(psi, ref.dim, "psi")
    if direction == "initial":
        leak = np.linalg.norm(psi - ref.support_projector() @ psi)
        if leak > 1e-9:
            raise SupportViolation(f"vector leaves the reference support by {leak:.3e}")
        out = mat_pow(ref, -0.5) @ psi
    elif direction == "final":
        out = mat_pow(ref, 0.5) @ psi
    else:
        raise ValueError(f"direction must be 'initial' or 'final', got {direction!r}")
    n = np.linalg.norm(out)
    if n == 0.0:
        raise SupportViolation("rescaled vector vanishes")
    return out / n


@dataclass(frozen=True)
class DetailedBalance:
    forward: float
    backward: float
    rhs: float

    @property
    def ratio(self) -> float:
        return self.forward / self.backward


def detailed_balance_ratio(fam: RecoveryFamily, psi, phi) -> DetailedBalance:
    """Forward probability, rescaled backward probability and their predicted ratio."""
    gamma, ngamma = fam.reference, fam.evolved_reference
    psi = _unit(psi, gamma.dim, "psi")
    phi = _unit(phi, ngamma.dim, "phi")
    fwd = transition_pure(fam.forward, psi, phi)
    psi_t = rescaled_vector(gamma, psi, "initial")
    phi_t = rescaled_vector(ngamma, phi, "final")
    bwd = transition_pure(rotated_petz(fam, 0.0), phi_t, psi_t)
    if bwd < 1e-14:
        raise DegenerateBackward(f"backward probability {bwd:.3e} too small for a ratio")
    rhs = float((psi.conj() @ mat_pow(gamma, -1.0) @ psi).real * (phi.conj() @ ngamma.matrix @ phi).real)
    return DetailedBalance(fwd, bwd, rhs)


def upsilon(H, beta: float, psi, phi) -> float:
    """``exp[beta dE] <psi|e^(beta H)|psi> <phi|e^(-beta H)|phi>``, with ``dE`` the mean-energy change."""
    H = np.asarray(H, dtype=complex)
    w, V = np.linalg.eigh(0.5 * (H + dagger(H)))
    psi = _unit(psi, H.shape[0], "psi")
    phi = _unit(phi, H.shape[0], "phi")
    a = np.abs(V.conj().T @ psi) ** 2
    b = np.abs(V.conj().T @ phi) ** 2
    dE = float(b @ w - a @ w)
    # shift exponents by their maxima before exponentiating
    ea, eb = beta * w, -beta * w
    la = np.log(a @ np.exp(ea - ea.max())) + ea.max()
    lb = np.log(b @ np.exp(eb - eb.max())) + eb.max()
    return float(np.exp(beta * dE + la + lb))


# ---------------------------------------------------------------------------
# transition tables


@dataclass(frozen=True, eq=False)
class TransitionBasis:
    """Eigen-systems of ``rho``, ``N(rho)``, ``gamma`` and ``N(gamma)``."""

    initial: SpectralDecomposition
    final: SpectralDecomposition
    reference: SpectralDecomposition
    evolved_reference: SpectralDecomposition

    @classmethod
    def build(cls, fam: RecoveryFamily, rho) -> "TransitionBasis":
        rho = _state(rho)
        if rho.dim != fam.forward.dim_in:
            raise DimensionMismatch(f"state dim {rho.dim} vs channel dim_in {fam.forward.dim_in}")
        out = DensityOperator(fam.forward.apply_matrix(rho.matrix), trace_tol=1e-8)
        return cls(rho.spectral, out.spectral, fam.reference.spectral, fam.evolved_reference.spectral)

    @property
    def dims(self) -> tuple[int, int]:
        return self.reference.eigenvalues.size, self.evolved_reference.eigenvalues.size

    def log_p(self):
        return _safe_log(self.initial.eigenvalues)

    def log_p_out(self):
        return _safe_log(self.final.eigenvalues)

    def log_r(self):
        return _safe_log(self.reference.eigenvalues)

    def log_r_out(self):
        return _safe_log(self.evolved_reference.eigenvalues)


def info_exchange_table(basis: TransitionBasis) -> np.ndarray:
    """Complex information exchange for all ``(i, j, k, l)``; NaN off the support."""
    lr, lro = basis.log_r(), basis.log_r_out()
    re = -0.5 * (lro[None, None, :, None] + lro[None, None, None, :]) + 0.5 * (lr[:, None, None, None] + lr[None, :, None, None])
    im = -0.5 * (lro[None, None, :, None] - lro[None, None, None, :]) + 0.5 * (lr[:, None, None, None] - lr[None, :, None, None])
    return re + 1j * im


def info_exchange(basis: TransitionBasis, i: int, j: int, k: int, l: int) -> complex:
    lr, lro = basis.log_r(), basis.log_r_out()
    vals = (lr[i], lr[j], lro[k], lro[l])
    if any(np.isnan(v) for v in vals):
        raise SupportViolation("information exchange needs indices inside the reference supports")
    re = -0.5 * (lro[k] + lro[l]) + 0.5 * (lr[i] + lr[j])
    im = -0.5 * (lro[k] - lro[l]) + 0.5 * (lr[i] - lr[j])
    return complex(re, im)


def transfer_tensor(ch: KrausChannel, basis: TransitionBasis) -> np.ndarray:
    """``T[i, j, k, l] = <k| N(|i><j|) |l>`` in the reference eigenbases."""
    V, W = basis.reference.eigenvectors, basis.evolved_reference.eigenvectors
    A = dagger(W)[None] @ ch.kraus_ops @ V[None]
    return np.einsum("mki,mlj->ijkl", A, A.conj(), optimize=True)


def reverse_transfer_tensor(rec: KrausChannel, basis: TransitionBasis) -> np.ndarray:
    """``Tt[i, j, k, l] = <i| R(|k><l|) |j>`` for a recovery channel ``R``."""
    V, W = basis.reference.eigenvectors, basis.evolved_reference.eigenvectors
    B = dagger(V)[None] @ rec.kraus_ops @ W[None]
    return np.einsum("mik,mjl->ijkl", B, B.conj(), optimize=True)


@dataclass(frozen=True, eq=False)
class TpmQuasiProb:
    """Six-index complex table with its eigen-systems.

    ``direction`` is ``"forward"`` for the channel and ``"backward"`` for a
    rotated recovery map at angle ``theta``.
    """

    table: np.ndarray
    basis: TransitionBasis
    direction: str = "forward"
    theta: float = 0.0

    def entry(self, mu, i, j, nu, k, l) -> complex:
        return complex(self.table[mu, nu, i, j, k, l])

    def total(self) -> complex:
        return complex(self.table.sum())

    def hermitian_defect(self) -> float:
        conj_pair = np.conj(np.transpose(self.table, (0, 1, 3, 2, 5, 4)))
        return float(np.max(np.abs(self.table - conj_pair)))

    def marginals(self) -> dict[str, np.ndarray]:
        """Sums over all indices but one group.

        Keys: ``mu``, ``nu`` (vectors), ``ij`` and ``kl`` (matrices).
        """
        P = self.table
        return {
            "mu": P.sum(axis=(1, 2, 3, 4, 5)),
            "nu": P.sum(axis=(0, 2, 3, 4, 5)),
            "ij": P.sum(axis=(0, 1, 4, 5)),
            "kl": P.sum(axis=(0, 1, 2, 3)),
        }

    def entropy_production(self) -> np.ndarray:
        """Forward-convention ``sigma`` for every index; NaN where undefined."""
        b = self.basis
        ds = b.log_p()[:, None] - b.log_p_out()[None, :]
        dq = info_exchange_table(b)
        return ds[:, :, None, None, None, None] - dq[None, None]


def tpm_quasiprob(fam: RecoveryFamily, rho) -> TpmQuasiProb:
    """``p_mu <phi_nu| P_k N(P_i |psi_mu><psi_mu| P_j) P_l |phi_nu>`` for every index."""
    basis = TransitionBasis.build(fam, rho)
    T = transfer_tensor(fam.forward, basis)
    a = dagger(basis.reference.eigenvectors) @ basis.initial.eigenvectors  # a[i, mu] = <i|psi_mu>
    b = dagger(basis.evolved_reference.eigenvectors) @ basis.final.eigenvectors  # b[k, nu]
    p = basis.initial.eigenvalues
    table = np.einsum("u,iu,ju,kv,lv,ijkl->uvijkl", p, a, a.conj(), b.conj(), b, T, optimize=True)
    return TpmQuasiProb(table, basis, "forward", 0.0)


def backward_quasiprob(fam: RecoveryFamily, theta: float, rho) -> TpmQuasiProb:
    """``p'_nu <psi_mu| P_i R^theta(P_k |phi_nu><phi_nu| P_l) P_j |psi_mu>``."""
    basis = TransitionBasis.build(fam, rho)
    Tt = reverse_transfer_tensor(rotated_petz(fam, theta), basis)
    a = dagger(basis.reference.eigenvectors) @ basis.initial.eigenvectors
    b = dagger(basis.evolved_reference.eigenvectors) @ basis.final.eigenvectors
    q = basis.final.eigenvalues
    table = np.einsum("v,iu,ju,kv,lv,ijkl->uvijkl", q, a.conj(), a, b, b.conj(), Tt, optimize=True)
    return TpmQuasiProb(table, basis, "backward", float(theta))


# ---------------------------------------------------------------------------
# entropy-production distributions


def bin_atoms(values: np.ndarray, weights: np.ndarray, tol: float = BIN_TOL):
    """Merge complex ``values`` whose real and imaginary parts agree within ``tol``.

    Grouping chains neighbours after sorting (first by real part, then by
    imaginary part inside each real group).  Returns ``(atoms, summed_weights)``
    with each atom the mean of its members.
    """
    values = np.asarray(values, dtype=complex).ravel()
    weights = np.asarray(weights, dtype=complex).ravel()
    if values.size == 0:
        return values, weights
    order = np.argsort(values.real, kind="stable")
    re = values.real[order]
    g_re = np.concatenate([[0], np.cumsum(np.diff(re) >= tol)])
    im = values.imag[order]
    order2 = np.lexsort((im, g_re))
    g_re2, im2 = g_re[order2], im[order2]
    brk = np.concatenate([[True], (np.diff(g_re2) != 0) | (np.diff(im2) >= tol)])
    gid = np.cumsum(brk) - 1
    idx = order[order2]
    n = gid[-1] + 1
    counts = np.bincount(gid, minlength=n)
    atom_re = np.bincount(gid, values.real[idx], minlength=n) / counts
    atom_im = np.bincount(gid, values.imag[idx], minlength=n) / counts
    w = np.bincount(gid, weights.real[idx], minlength=n) + 1j * np.bincount(gid, weights.imag[idx], minlength=n)
    return atom_re + 1j * atom_im, w


@dataclass(frozen=True, eq=False)
class EpDistribution:
    """Complex weights on complex entropy-production atoms ``sigma_R + i sigma_I``.

    ``dropped_mass`` records the summed weight of terms whose entropy
    production is infinite (an eigenvalue of the input or output state is
    zero); for forward tables it vanishes, for backward tables of a
    rank-deficient input it equals ``1 - kappa``.
    """

    atoms: np.ndarray
    weights: np.ndarray
    tol: float = BIN_TOL
    dropped_mass: complex = 0.0

    @property
    def sigma_R(self) -> np.ndarray:
        return self.atoms.real

    @property
    def sigma_I(self) -> np.ndarray:
        return self.atoms.imag

    def __len__(self) -> int:
        return self.atoms.size

    def total(self) -> complex:
        return complex(self.weights.sum())

    def expect(self, fn: Callable[[np.ndarray], np.ndarray]) -> complex:
        return complex(np.sum(self.weights * fn(self.atoms)))

    def mean_R(self) -> float:
        return float(np.sum(self.weights * self.sigma_R).real)

    def mean_I(self) -> complex:
        return complex(np.sum(self.weights * self.sigma_I))

    def lookup(self, sigma: complex, tol: float | None = None):
        """Weight of the atom at ``sigma`` or ``None`` if there is none."""
        tol = self.tol if tol is None else tol
        hit = (np.abs(self.atoms.real - sigma.real) < tol) & (np.abs(self.atoms.imag - sigma.imag) < tol)
        if not np.any(hit):
            return None
        return complex(self.weights[hit].sum())

    def real_marginal(self):
        """Distribution of ``sigma_R`` alone (summed over ``sigma_I``)."""
        atoms, w = bin_atoms(self.atoms.real.astype(complex), self.weights, self.tol)
        return atoms.real, w

    def significant(self, threshold: float = ZERO_WEIGHT) -> "EpDistribution":
        keep = np.abs(self.weights) > threshold
        return EpDistribution(self.atoms[keep], self.weights[keep], self.tol, self.dropped_mass)


def _distribution(table: TpmQuasiProb, sign: float, tol: float) -> EpDistribution:
    sigma = sign * table.entropy_production()
    P = table.table
    finite = np.isfinite(sigma)
    dropped = complex(P[~finite].sum())
    keep = finite & (P != 0)
    atoms, w = bin_atoms(sigma[keep], P[keep], tol)
    return EpDistribution(atoms, w, tol, dropped)


def ep_distribution(table: TpmQuasiProb, tol: float = BIN_TOL) -> EpDistribution:
    """Bin a table into entropy-production atoms.

    Forward tables use ``sigma``; backward tables place each term at
    ``-sigma`` of the same indices.
    """
    sign = 1.0 if table.direction == "forward" else -1.0
    return _distribution(table, sign, tol)


def backward_ep_distribution(fam: RecoveryFamily, theta: float, rho, tol: float = BIN_TOL) -> EpDistribution:
    return ep_distribution(backward_quasiprob(fam, theta, rho), tol)


@dataclass(frozen=True)
class CrooksReport:
    theta: float
    max_violation: float
    n_checked: int
    points: list = field(default_factory=list)
    excluded: list = field(default_factory=list)

    def ok(self, tol: float = 1e-6) -> bool:
        return self.max_violation <= tol


def crooks_check(fwd: EpDistribution, bwd: EpDistribution, theta: float,
                 threshold: float = ZERO_WEIGHT) -> CrooksReport:
    """Check ``P_fwd(sigma) = P_bwd(-conj(sigma)) exp(sigma_R - 2 i theta sigma_I)`` atom by atom.

    ``points`` holds ``(sigma, w_fwd, w_bwd, log(w_fwd / w_bwd))`` for every
    checked atom; the violation is relative to ``|w_fwd|``.
    """
    worst = 0.0
    points, excluded = [], []
    for s, wf in zip(fwd.atoms, fwd.weights):
        wb = bwd.lookup(-np.conj(s))
        if wb is None:
            if abs(wf) > threshold:
                raise MissingAtom(f"no backward atom at {-np.conj(s)} for forward weight {wf}")
            continue
        if abs(wb) <= threshold:
            excluded.append((complex(s), complex(wf), complex(wb)))
            continue
        pred = wb * np.exp(s.real - 2j * theta * s.imag)
        worst = max(worst, abs(wf - pred) / max(abs(wf), abs(pred)))
        points.append((complex(s), complex(wf), complex(wb), complex(np.log(wf / wb))))
    return CrooksReport(float(theta), worst, len(points), points, excluded)


def crooks_check_marginal(fwd: EpDistribution, bwd: EpDistribution,
                          threshold: float = ZERO_WEIGHT) -> CrooksReport:
    """Real-marginal identity ``P_fwd(sigma_R) / P_bwd(-sigma_R) = exp(sigma_R)``."""
    fa, fw = fwd.real_marginal()
    ba, bw = bwd.real_marginal()
    worst = 0.0
    points, excluded = [], []
    for s, wf in zip(fa, fw):
        hit = np.abs(ba + s) < fwd.tol
        if not np.any(hit):
            if abs(wf) > threshold:
                raise MissingAtom(f"no backward atom at {-s} for forward weight {wf}")
            continue
        wb = complex(bw[hit].sum())
        if abs(wb) <= threshold:
            excluded.append((complex(s), complex(wf), wb))
            continue
        pred = wb * np.exp(s)
        worst = max(worst, abs(wf - pred) / max(abs(wf), abs(pred)))
        points.append((complex(s), complex(wf), wb, complex(np.log(wf / wb))))
    return CrooksReport(0.0, worst, len(points), points, excluded)


# ---------------------------------------------------------------------------
# integral identities


def kappa(fam: RecoveryFamily, rho, theta: float) -> float:
    """``Tr[P_rho R^(theta/2)(N(rho))]`` with ``P_rho`` the support projector of ``rho``."""
    rho = _state(rho)
    out = rotated_petz(fam, theta / 2).apply_matrix(fam.forward.apply_matrix(rho.matrix))
    return float(np.trace(rho.support_projector() @ out).real)


def integral_qft(fam: RecoveryFamily, rho, theta: float, dist: EpDistribution | None = None):
    """``(<exp(-sigma_R + i theta sigma_I)>, kappa_theta)``."""
    dist = ep_distribution(tpm_quasiprob(fam, rho)) if dist is None else dist
    lhs = dist.expect(lambda s: np.exp(-s.real + 1j * theta * s.imag))
    return lhs, kappa(fam, rho, theta)


def relative_entropy_difference(fam: RecoveryFamily, rho) -> float:
    """``S(rho||gamma) - S(N(rho)||N(gamma))``."""
    rho = _state(rho)
    out = DensityOperator(fam.forward.apply_matrix(rho.matrix), trace_tol=1e-8)
    return relative_entropy(rho, fam.reference) - relative_entropy(out, fam.evolved_reference)


def mean_entropy_production(fam: RecoveryFamily, rho, dist: EpDistribution | None = None):
    """``(<sigma_R>, <sigma_I>)`` from the forward atoms.

    ``<sigma_I>`` is returned as a complex number: conjugate atom pairs carry
    conjugate weights, so the sum is purely imaginary up to rounding and
    vanishes for valid tables.
    """
    dist = ep_distribution(tpm_quasiprob(fam, rho)) if dist is None else dist
    return dist.mean_R(), dist.mean_I()


def table_hermitian_ok(table: TpmQuasiProb, tol: float = 1e-10) -> bool:
    return table.hermitian_defect() <= tol


__all__ = [
    "BIN_TOL",
    "CrooksReport",
    "DetailedBalance",
    "EpDistribution",
    "TpmQuasiProb",
    "TransitionBasis",
    "backward_ep_distribution",
    "backward_quasiprob",
    "bin_atoms",
    "crooks_check",
    "crooks_check_marginal",
    "detailed_balance_ratio",
    "ep_distribution",
    "hermitian_defect",
    "info_exchange",
    "info_exchange_table",
    "integral_qft",
    "kappa",
    "mean_entropy_production",
    "relative_entropy_difference",
    "rescaled_vector",
    "reverse_transfer_tensor",
    "tpm_quasiprob",
    "transfer_tensor",
    "transition_pure",
    "upsilon",
]
