"""Petz, rotated-Petz and averaged recovery channels."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from .channels import KrausChannel
from .errors import DimensionMismatch, RankDeficientReference
from .matrixcore import RANK_TOL, DensityOperator, as_matrix, dagger, fidelity, mat_pow

DEFAULT_CUTOFF = 12.0
DEFAULT_NODES = 241


@dataclass(frozen=True, eq=False)
class RecoveryFamily:
    """Forward channel together with a full-rank reference state.

    ``evolved_reference`` is computed from the other two fields and never
    passed in by the caller.
    """

    forward: KrausChannel
    reference: DensityOperator
    evolved_reference: DensityOperator = field(init=False)

    def __post_init__(self):
        ref = self.reference
        if not isinstance(ref, DensityOperator):
            ref = DensityOperator(ref)
            object.__setattr__(self, "reference", ref)
        if ref.dim != self.forward.dim_in:
            raise DimensionMismatch(f"reference dim {ref.dim} vs channel dim_in {self.forward.dim_in}")
        lam_min = ref.eigenvalues[-1]
        if lam_min <= RANK_TOL * ref.eigenvalues[0]:
            raise RankDeficientReference(
                f"reference has smallest eigenvalue {lam_min:.3e}; mix in eps*I/d explicitly if intended"
            )
        evolved = DensityOperator(self.forward.apply_matrix(ref.matrix), trace_tol=1e-8)
        object.__setattr__(self, "evolved_reference", evolved)


def regularize(rho, eps: float = 1e-10) -> DensityOperator:
    """Mix ``eps * I/d`` into a state so it becomes a valid full-rank reference."""
    M = as_matrix(rho)
    d = M.shape[0]
    return DensityOperator((1 - eps) * M + eps * np.eye(d) / d)


def rotated_petz(fam: RecoveryFamily, theta: float) -> KrausChannel:
    """Kraus form of ``gamma^(1/2+i theta) N^dag( N(gamma)^(-1/2-i theta) . h.c. )``.

    If ``N(gamma)`` is rank-deficient the Petz operators are trace preserving
    only on its support; operators ``sqrt(r_i)|i><c|`` for an orthonormal
    basis ``{|c>}`` of the complement are appended so the map is CPTP.
    They never act on states supported inside ``supp N(gamma)``.
    """
    gamma, ngamma = fam.reference, fam.evolved_reference
    left = mat_pow(gamma, 0.5 + 1j * theta)
    right = mat_pow(ngamma, -0.5 - 1j * theta)
    ops = left @ dagger(fam.forward.kraus_ops) @ right
    mask = ngamma.spectral.support_mask()
    if not np.all(mask):
        comp = ngamma.eigenvectors[:, ~mask]
        r, V = gamma.eigenvalues, gamma.eigenvectors
        extra = np.einsum("i,ai,bc->icab", np.sqrt(r), V, comp.conj()).reshape(-1, gamma.dim, ngamma.dim)
        ops = np.concatenate([ops, extra])
    return KrausChannel(ops)


def petz(fam: RecoveryFamily) -> KrausChannel:
    return rotated_petz(fam, 0.0)


def g0(theta) -> np.ndarray:
    """Probability density ``(pi/2) / (cosh(pi theta) + 1)`` on the real line."""
    # same function written as pi e^-|x| / (1 + e^-|x|)^2, which cannot overflow
    e = np.exp(-np.pi * np.abs(np.asarray(theta, dtype=float)))
    return np.pi * e / (1 + e) ** 2


def g0_quadrature(theta_cutoff: float = DEFAULT_CUTOFF, n_nodes: int = DEFAULT_NODES):
    """Composite Simpson nodes and weights for ``g0`` on ``[-cutoff, cutoff]``.

    Returns ``(nodes, weights, raw_mass)``; weights are renormalised to sum to
    one, ``raw_mass`` is the unnormalised Simpson estimate of the truncated
    integral.
    """
    if theta_cutoff < 10 or n_nodes < 101:
        raise ValueError("averaged recovery needs theta_cutoff >= 10 and n_nodes >= 101")
    if n_nodes % 2 == 0:
        raise ValueError("composite Simpson needs an odd node count")
    nodes = np.linspace(-theta_cutoff, theta_cutoff, n_nodes)
    h = nodes[1] - nodes[0]
    coef = np.ones(n_nodes)
    coef[1:-1:2] = 4.0
    coef[2:-1:2] = 2.0
    w = coef * h / 3 * g0(nodes)
    raw = float(np.sum(w))
    return nodes, w / raw, raw


def g0_mass(theta_cutoff: float = DEFAULT_CUTOFF, n_nodes: int = DEFAULT_NODES) -> float:
    nodes = np.linspace(-theta_cutoff, theta_cutoff, n_nodes)
    return float(simpson(g0(nodes), x=nodes))


def averaged_recovery(fam: RecoveryFamily, rho_in, theta_cutoff: float = DEFAULT_CUTOFF,
                      n_nodes: int = DEFAULT_NODES) -> DensityOperator:
    """``sum_k w_k R^(theta_k/2)(rho_in)`` over the ``g0`` quadrature."""
    nodes, weights, _ = g0_quadrature(theta_cutoff, n_nodes)
    X = as_matrix(rho_in)
    out = np.zeros((fam.reference.dim,) * 2, dtype=complex)
    for th, w in zip(nodes, weights):
        out += w * rotated_petz(fam, th / 2).apply_matrix(X)
    return DensityOperator(out, trace_tol=1e-8)


def averaged_recovery_channel(fam: RecoveryFamily, theta_cutoff: float = DEFAULT_CUTOFF,
                              n_nodes: int = DEFAULT_NODES) -> KrausChannel:
    """The same mixture as a single Kraus channel (stacked, weight-scaled operators)."""
    nodes, weights, _ = g0_quadrature(theta_cutoff, n_nodes)
    ops = [np.sqrt(w) * rotated_petz(fam, th / 2).kraus_ops for th, w in zip(nodes, weights)]
    return KrausChannel(np.concatenate(ops))


def recovery_fidelity(fam: RecoveryFamily, rho, theta: float) -> float:
    """``F(rho, R^theta(N(rho)))``."""
    out = rotated_petz(fam, theta).apply(fam.forward.apply(rho))
    return fidelity(rho, out)


def averaged_fidelity(fam: RecoveryFamily, rho, theta_cutoff: float = DEFAULT_CUTOFF,
                      n_nodes: int = DEFAULT_NODES) -> tuple[float, float]:
    """``(int g0 F_(theta/2), int g0 log F_(theta/2))`` over the quadrature grid."""
    nodes, weights, _ = g0_quadrature(theta_cutoff, n_nodes)
    F = np.array([recovery_fidelity(fam, rho, th / 2) for th in nodes])
    with np.errstate(divide="ignore"):
        logF = np.log(F)
    return float(weights @ F), float(weights @ logF)
