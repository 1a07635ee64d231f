"""Resource-theoretic fluctuation relations and reversibility bounds.

Every report carries the integral identity ``<exp(-sigma_R + i theta sigma_I)> = kappa_theta``
at a few angles, recovery fidelities on a theta grid, and the bound that
applies to its resource.  Failed checks are collected in ``violations``
instead of raising, so callers can export a full report either way.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .channels import KrausChannel, generator_covariance_defect
from .errors import (
    DimensionMismatch,
    EnergyConservationViolated,
    NotCovariant,
    NotPure,
    ReferenceNotCommuting,
)
from .fluctuation import (
    EpDistribution,
    TransitionBasis,
    ep_distribution,
    integral_qft,
    tpm_quasiprob,
)
from .matrixcore import (
    DensityOperator,
    as_matrix,
    dagger,
    fidelity,
    partial_trace,
    relative_entropy,
    von_neumann_entropy,
)
from .models import gibbs_state
from .petz import RecoveryFamily, averaged_fidelity, averaged_recovery, recovery_fidelity

QFT_THETAS = (0.0, 1.0, -2.5)
QFT_TOL = 1e-7
BOUND_TOL = 1e-9
SIGMA_I_TOL = 1e-8
COVARIANCE_TOL = 1e-7
FIDELITY_GRID = np.linspace(-12.0, 12.0, 129)


@dataclass
class ResourceReport:
    """Mean entropy production, integral identities, fidelities and one bound.

    ``recovery_fidelity_by_theta`` holds ``F(rho, R^(theta/2)(N(rho)))``;
    ``averaged_fidelity`` is the quantity that enters ``bound_rhs``.
    """

    kind: str
    mean_sigma_R: float
    mean_sigma_I: complex
    kappa_by_theta: dict
    recovery_fidelity_by_theta: dict
    averaged_fidelity: float
    bound_lhs: float
    bound_rhs: float
    bound_satisfied: bool
    quantities: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def qft_deviation(self) -> float:
        return max((abs(lhs - k) for lhs, k in self.kappa_by_theta.values()), default=0.0)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "mean_sigma_R": self.mean_sigma_R,
            "mean_sigma_I": [self.mean_sigma_I.real, self.mean_sigma_I.imag],
            "kappa_by_theta": {
                _key(t): {"lhs_re": lhs.real, "lhs_im": lhs.imag, "kappa": k}
                for t, (lhs, k) in self.kappa_by_theta.items()
            },
            "fidelity_by_theta": {_key(t): f for t, f in self.recovery_fidelity_by_theta.items()},
            "averaged_fidelity": self.averaged_fidelity,
            "bound_lhs": self.bound_lhs,
            "bound_rhs": self.bound_rhs,
            "satisfied": self.bound_satisfied,
            "quantities": dict(self.quantities),
            "violations": list(self.violations),
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _key(theta: float) -> str:
    return f"{float(theta):.17g}"


def _state(x) -> DensityOperator:
    if isinstance(x, DensityOperator):
        return x
    x = np.asarray(x, dtype=complex)
    return DensityOperator.from_vector(x) if x.ndim == 1 else DensityOperator(x)


def _common(kind: str, fam: RecoveryFamily, rho: DensityOperator, thetas, fidelity_thetas,
            dist: EpDistribution | None = None) -> ResourceReport:
    dist = ep_distribution(tpm_quasiprob(fam, rho)) if dist is None else dist
    qft = {float(t): integral_qft(fam, rho, t, dist) for t in thetas}
    fids = {float(t): recovery_fidelity(fam, rho, t / 2) for t in fidelity_thetas}
    rep = ResourceReport(kind, dist.mean_R(), dist.mean_I(), qft, fids, float("nan"),
                         float("nan"), float("nan"), False)
    if abs(rep.mean_sigma_I) > SIGMA_I_TOL:
        rep.violations.append(f"<sigma_I> = {rep.mean_sigma_I:.3e} is not zero")
    dev = rep.qft_deviation()
    if dev > QFT_TOL:
        rep.violations.append(f"integral identity off by {dev:.3e}")
    return rep


def _set_bound(rep: ResourceReport, lhs: float, rhs: float, label: str, slack: float = BOUND_TOL) -> None:
    rep.bound_lhs, rep.bound_rhs = float(lhs), float(rhs)
    rep.bound_satisfied = bool(lhs >= rhs - slack)
    if not rep.bound_satisfied:
        rep.violations.append(f"{label}: {lhs:.12g} < {rhs:.12g}")


def _averaged_recovery_fidelity(fam: RecoveryFamily, rho: DensityOperator) -> float:
    return fidelity(rho, averaged_recovery(fam, fam.forward.apply_matrix(rho.matrix)))


# ---------------------------------------------------------------------------
# thermodynamics


def free_energy_ft(ch: KrausChannel, rho, beta: float, H_S, H_S_out=None, thetas=QFT_THETAS,
                   fidelity_thetas=FIDELITY_GRID, tol: float = 1e-7) -> ResourceReport:
    """Free-energy fluctuations of a channel that maps ``gamma_S`` to ``gamma_S'``.

    Single-shot ``dF = -sigma/beta + dF_eq`` with ``dF_eq = log(Z_S/Z_S')/beta``;
    checks ``<exp(beta dF)> = kappa_0 exp(beta dF_eq)``, ``<dF> <= dF_eq``,
    vanishing imaginary parts and ``F(rho, Rbar(N(rho))) >= exp(beta(<dF> - dF_eq))``.
    """
    rho = _state(rho)
    H_S = as_matrix(H_S)
    H_S_out = H_S if H_S_out is None else as_matrix(H_S_out)
    g_in, g_out = gibbs_state(H_S, beta), gibbs_state(H_S_out, beta)
    fam = RecoveryFamily(ch, g_in)
    defect = float(np.max(np.abs(fam.evolved_reference.matrix - g_out.matrix)))
    if defect > tol:
        raise EnergyConservationViolated(f"N(gamma_S) differs from gamma_S' by {defect:.3e}")
    logZ = lambda H: float(np.log(np.sum(np.exp(-beta * np.linalg.eigvalsh(H)))))  # noqa: E731
    dF_eq = (logZ(H_S) - logZ(H_S_out)) / beta
    dist = ep_distribution(tpm_quasiprob(fam, rho))
    rep = _common("free_energy", fam, rho, thetas, fidelity_thetas, dist)
    jarzynski = dist.expect(lambda s: np.exp(-s.real)) * np.exp(beta * dF_eq)
    target = rep.kappa_by_theta.get(0.0, integral_qft(fam, rho, 0.0, dist))[1] * np.exp(beta * dF_eq)
    dF = -rep.mean_sigma_R / beta + dF_eq
    sig = dist.significant()
    max_sigma_I = float(np.max(np.abs(sig.sigma_I))) if len(sig) else 0.0
    rep.quantities.update(delta_F=dF, delta_F_eq=dF_eq, exp_beta_dF=complex(jarzynski).real,
                          max_abs_sigma_I=max_sigma_I)
    if abs(jarzynski - target) > tol:
        rep.violations.append(f"<exp(beta dF)> = {jarzynski:.12g} vs {target:.12g}")
    if dF > dF_eq + BOUND_TOL:
        rep.violations.append(f"<dF> = {dF:.12g} exceeds dF_eq = {dF_eq:.12g}")
    if max_sigma_I > SIGMA_I_TOL:
        rep.violations.append(f"imaginary entropy production {max_sigma_I:.3e} on a thermal channel")
    Fbar = _averaged_recovery_fidelity(fam, rho)
    rep.averaged_fidelity = Fbar
    _set_bound(rep, Fbar, np.exp(beta * (dF - dF_eq)), "recovery fidelity below exp(beta(dF - dF_eq))")
    return rep


# ---------------------------------------------------------------------------
# asymmetry


def _joint_eigenbasis(L: np.ndarray, A: np.ndarray, tol: float = 1e-9):
    """Orthonormal basis diagonalising ``L`` and a commuting Hermitian ``A``.

    Returns ``(levels, values, vectors)`` sorted by ``L`` eigenvalue, with
    ``A`` diagonalised inside each degenerate block of ``L``.
    """
    w, V = np.linalg.eigh(L)
    levels, values, vecs = [], [], []
    start = 0
    while start < w.size:
        stop = start + 1
        while stop < w.size and w[stop] - w[start] < tol:
            stop += 1
        B = V[:, start:stop]
        a, U = np.linalg.eigh(dagger(B) @ A @ B)
        levels.extend([w[start:stop].mean()] * (stop - start))
        values.extend(a)
        vecs.append(B @ U)
        start = stop
    return np.array(levels), np.array(values), np.concatenate(vecs, axis=1)


def dephase(rho, L, tol: float = 1e-9) -> DensityOperator:
    """Time average of ``exp(-iLt) rho exp(iLt)``: projection onto the eigenspaces of ``L``."""
    X, L = as_matrix(rho), as_matrix(L)
    w, V = np.linalg.eigh(L)
    out = np.zeros_like(X)
    start = 0
    while start < w.size:
        stop = start + 1
        while stop < w.size and w[stop] - w[start] < tol:
            stop += 1
        P = V[:, start:stop] @ dagger(V[:, start:stop])
        out += P @ X @ P
        start = stop
    return DensityOperator(out, trace_tol=1e-8)


def relative_entropy_of_asymmetry(rho, L) -> float:
    rho = _state(rho)
    return relative_entropy(rho, dephase(rho, L))


def _require_covariant(ch: KrausChannel, L, tol: float = COVARIANCE_TOL) -> float:
    defect = generator_covariance_defect(ch, L)
    if defect > tol:
        raise NotCovariant(f"channel is not covariant under exp(-iLt): Choi defect {defect:.3e}")
    return defect


def asymmetry_ft(ch: KrausChannel, rho, L, thetas=QFT_THETAS, fidelity_thetas=FIDELITY_GRID,
                 tol: float = 1e-8) -> ResourceReport:
    """Asymmetry loss with the dephased state ``D(rho)`` as reference.

    ``dC = C(N(rho)) - C(rho)`` must equal ``-<sigma_R>`` and satisfy
    ``F(rho, Rbar(N(rho))) >= exp(dC)``.
    """
    rho, L = _state(rho), as_matrix(L)
    if L.shape[0] != ch.dim_in or ch.dim_in != ch.dim_out:
        raise DimensionMismatch("asymmetry needs a generator acting on both input and output")
    defect = _require_covariant(ch, L)
    fam = RecoveryFamily(ch, dephase(rho, L))
    rep = _common("asymmetry", fam, rho, thetas, fidelity_thetas)
    out = DensityOperator(ch.apply_matrix(rho.matrix), trace_tol=1e-8)
    dC = relative_entropy_of_asymmetry(out, L) - relative_entropy_of_asymmetry(rho, L)
    rep.quantities.update(delta_C=dC, covariance_defect=defect)
    if abs(dC + rep.mean_sigma_R) > tol:
        rep.violations.append(f"dC = {dC:.12g} but -<sigma_R> = {-rep.mean_sigma_R:.12g}")
    Fbar = _averaged_recovery_fidelity(fam, rho)
    rep.averaged_fidelity = Fbar
    _set_bound(rep, Fbar, np.exp(dC), "recovery fidelity below exp(dC)")
    return rep


@dataclass(frozen=True)
class MergingBound:
    """Both sides of the coherence merging inequality for one output coherence."""

    lhs: float
    rhs: float
    source_modes: tuple
    k: int
    l: int

    @property
    def satisfied(self) -> bool:
        return self.lhs <= self.rhs + BOUND_TOL


def coherence_merging_bound(ch: KrausChannel, rho, gamma, L, k: int, l: int,
                            tol: float = 1e-9) -> MergingBound:
    """``|N(rho)_kl| <= sum_+ |rho_ij| exp(-dq_R) + sum_- |rho_ij|``.

    Matrix elements are taken in a joint eigenbasis of ``L`` with ``gamma``
    (input) and with ``N(gamma)`` (output), ordered by ``L`` eigenvalue.
    Source modes are the pairs ``(i, j)`` with the same ``L`` gap as
    ``(k, l)``; the plus set has ``dq_R >= 0``.
    """
    L, X = as_matrix(L), as_matrix(rho)
    gamma = _state(gamma)
    if L.shape[0] != ch.dim_in or ch.dim_in != ch.dim_out:
        raise DimensionMismatch("coherence merging needs a generator acting on both input and output")
    comm = float(np.max(np.abs(L @ gamma.matrix - gamma.matrix @ L)))
    if comm > COVARIANCE_TOL:
        raise ReferenceNotCommuting(f"[gamma, L] has norm {comm:.3e}")
    _require_covariant(ch, L)
    lam, r, V = _joint_eigenbasis(L, gamma.matrix)
    out_ref = ch.apply_matrix(gamma.matrix)
    lam_o, r_o, W = _joint_eigenbasis(L, out_ref)
    rho_in = dagger(V) @ X @ V
    rho_out = dagger(W) @ ch.apply_matrix(X) @ W
    gap = lam_o[k] - lam_o[l]
    lhs = abs(rho_out[k, l])
    rhs, modes = 0.0, []
    with np.errstate(divide="ignore"):
        log_r, log_ro = np.log(r), np.log(r_o)
    for i in range(lam.size):
        for j in range(lam.size):
            if abs((lam[i] - lam[j]) - gap) > tol:
                continue
            dq = 0.5 * (log_r[i] + log_r[j]) - 0.5 * (log_ro[k] + log_ro[l])
            modes.append((i, j, float(dq)))
            rhs += abs(rho_in[i, j]) * (np.exp(-dq) if dq >= 0 else 1.0)
    return MergingBound(float(lhs), float(rhs), tuple(modes), k, l)


# ---------------------------------------------------------------------------
# entanglement under LOCC


def _branch_states(out: np.ndarray, d_ab: int, n_outcomes: int):
    """Split ``sum_m P_m Phi_m (x) |m><m|`` into ``(P_m, Phi_m)`` pairs."""
    blocks = out.reshape(d_ab, n_outcomes, d_ab, n_outcomes)
    res = []
    for m in range(n_outcomes):
        B = blocks[:, m, :, m]
        p = float(np.trace(B).real)
        if p > 1e-14:
            res.append((p, B / p))
    return res


def coherent_information(rho_ab, dims) -> float:
    """``I(A>B) = S(rho_B) - S(rho_AB)``."""
    X = as_matrix(rho_ab)
    return von_neumann_entropy(partial_trace(X, dims, 1)) - von_neumann_entropy(X)


def coherent_information_change(locc: KrausChannel, rho_ab, dims) -> float:
    """``sum_m P_m I(A>B)_m - I(A>B)`` for a channel with a classical outcome register."""
    X = as_matrix(rho_ab)
    d_ab = int(np.prod(dims))
    if X.shape[0] != d_ab or locc.dim_in != d_ab or locc.dim_out % d_ab:
        raise DimensionMismatch("LOCC channel does not act on the given bipartition")
    n = locc.dim_out // d_ab
    out = locc.apply_matrix(X)
    after = sum(p * coherent_information(Phi, dims) for p, Phi in _branch_states(out, d_ab, n))
    return after - coherent_information(X, dims)


def locc_entanglement_ft(locc: KrausChannel, psi_ab, dims, thetas=QFT_THETAS,
                         fidelity_thetas=FIDELITY_GRID, allow_mixed: bool = False,
                         tol: float = 1e-8) -> ResourceReport:
    """Entanglement (coherent-information) loss under an LOCC channel.

    The reference ``I_A (x) rho_B`` is stored normalised; its ``log d_A``
    offset is shifted back onto the reference spectra and the resulting
    information exchange is compared with the normalised one.  Checks
    ``dE = -<sigma_R>``, ``dE <= 0``, ``<exp(-sigma_R + i theta sigma_I)> = F_theta``
    and ``dE <= log Fbar`` with ``Fbar`` the ``g0`` average of ``F_theta``.
    """
    rho = _state(psi_ab)
    dA, dB = dims
    if rho.dim != dA * dB:
        raise DimensionMismatch(f"state dim {rho.dim} vs {dA} x {dB}")
    if not allow_mixed and rho.support_rank != 1:
        raise NotPure(f"state has rank {rho.support_rank}; pass allow_mixed=True for coherent information")
    rho_B = partial_trace(rho.matrix, [dA, dB], 1)
    ref = DensityOperator(np.kron(np.eye(dA) / dA, rho_B))
    fam = RecoveryFamily(locc, ref)
    dist = ep_distribution(tpm_quasiprob(fam, rho))
    rep = _common("locc", fam, rho, thetas, fidelity_thetas, dist)
    basis = TransitionBasis.build(fam, rho)
    offset = np.log(dA)
    shifted = (basis.log_r()[:, None] + offset) - (basis.log_r_out()[None, :] + offset)
    plain = basis.log_r()[:, None] - basis.log_r_out()[None, :]
    finite = np.isfinite(plain)
    offset_residual = float(np.max(np.abs(shifted[finite] - plain[finite]))) if finite.any() else 0.0
    dE = coherent_information_change(locc, rho.matrix, dims)
    Fbar, _ = averaged_fidelity(fam, rho)
    rep.averaged_fidelity = Fbar
    fid_err = 0.0
    for t, (lhs, _k) in rep.kappa_by_theta.items():
        fid_err = max(fid_err, abs(lhs - recovery_fidelity(fam, rho, t / 2)))
    rep.quantities.update(delta_E=dE, log_scale_offset=offset, offset_residual=offset_residual,
                          qft_vs_fidelity=fid_err)
    if offset_residual > 1e-12:
        rep.violations.append(f"reference normalisation offset does not cancel ({offset_residual:.3e})")
    if abs(dE + rep.mean_sigma_R) > tol:
        rep.violations.append(f"dE = {dE:.12g} but -<sigma_R> = {-rep.mean_sigma_R:.12g}")
    if dE > BOUND_TOL:
        rep.violations.append(f"coherent information increased by {dE:.3e}")
    if rho.support_rank == 1 and fid_err > QFT_TOL:
        rep.violations.append(f"integral identity differs from F_theta by {fid_err:.3e}")
    _set_bound(rep, np.log(Fbar) if Fbar > 0 else -np.inf, dE, "log Fbar below dE")
    return rep


# ---------------------------------------------------------------------------
# reversibility


def reversibility_check(fam: RecoveryFamily, rho, fidelity_thetas=FIDELITY_GRID,
                        thetas=QFT_THETAS, tol: float = 1e-8) -> ResourceReport:
    """``<sigma_R> >= -log F(rho, Rbar(N(rho)))`` and full recovery when ``<sigma_R> = 0``.

    Also records the sharper ``<sigma_R> >= -int g0 log F_theta`` as
    ``quantities['log_fidelity_bound']``.
    """
    rho = _state(rho)
    rep = _common("reversibility", fam, rho, thetas, fidelity_thetas)
    Fbar = _averaged_recovery_fidelity(fam, rho)
    rep.averaged_fidelity = Fbar
    _, mean_log = averaged_fidelity(fam, rho)
    rep.quantities.update(log_fidelity_bound=-mean_log, neg_log_averaged_fidelity=-np.log(Fbar))
    _set_bound(rep, rep.mean_sigma_R, -np.log(Fbar), "<sigma_R> below -log Fbar", slack=tol)
    if rep.mean_sigma_R < -mean_log - tol:
        rep.violations.append(f"<sigma_R> = {rep.mean_sigma_R:.12g} below -<log F> = {-mean_log:.12g}")
    if rep.mean_sigma_R < 1e-10:
        worst = min(rep.recovery_fidelity_by_theta.values(), default=1.0)
        if worst < 1 - 1e-7:
            rep.violations.append(f"<sigma_R> vanishes but F_theta drops to {worst:.12g}")
    return rep


# ---------------------------------------------------------------------------
# Fourier diagnostic of the imaginary entropy production


@dataclass(frozen=True)
class SymmetrySpectrum:
    """Discrete Fourier transform of ``theta -> T(theta)``.

    ``frequencies`` are angular (radians per unit theta), ascending;
    ``amplitudes`` are divided by the grid length.
    """

    thetas: np.ndarray
    transition: np.ndarray
    frequencies: np.ndarray
    amplitudes: np.ndarray

    @property
    def resolution(self) -> float:
        return float(self.frequencies[1] - self.frequencies[0])

    def peaks(self, rel_threshold: float = 1e-6) -> np.ndarray:
        mag = np.abs(self.amplitudes)
        return self.frequencies[mag > rel_threshold * mag.max()] if mag.max() > 0 else np.array([])

    def is_flat(self, tol: float = 1e-9) -> bool:
        return float(np.ptp(self.transition)) < tol


def symmetry_grid(beta: float = 1.0, omega0: float = 1.0, n: int = 256) -> np.ndarray:
    """``n`` points covering one period ``4 pi / (beta omega0)`` without the endpoint."""
    return np.linspace(0.0, 4 * np.pi / (beta * omega0), n, endpoint=False)


def symmetry_diagnostic(fam: RecoveryFamily, psi, phi, theta_grid=None) -> SymmetrySpectrum:
    """Spectrum of ``T(U(theta/2) psi -> V(theta/2) phi)`` with ``U = exp(i theta log gamma)``.

    Its peaks sit at the imaginary information exchanges of the transitions
    that contribute, which are the imaginary entropy productions up to sign.
    """
    thetas = symmetry_grid() if theta_grid is None else np.asarray(theta_grid, dtype=float)
    n = thetas.size
    if n < 2 or n & (n - 1):
        raise ValueError("theta grid length must be a power of two")
    steps = np.diff(thetas)
    if np.ptp(steps) > 1e-9 * max(1.0, abs(steps[0])):
        raise ValueError("theta grid must be uniform")
    psi = np.asarray(psi, dtype=complex)
    phi = np.asarray(phi, dtype=complex)
    psi, phi = psi / np.linalg.norm(psi), phi / np.linalg.norm(phi)
    ga, gb = fam.reference, fam.evolved_reference
    la = np.log(np.clip(ga.eigenvalues, 1e-300, None))
    lb_mask = gb.spectral.support_mask()
    lb = np.where(lb_mask, np.log(np.clip(gb.eigenvalues, 1e-300, None)), 0.0)
    a = dagger(ga.eigenvectors) @ psi
    b = dagger(gb.eigenvectors) @ phi
    vals = np.empty(n)
    for idx, t in enumerate(thetas):
        u = ga.eigenvectors @ (np.exp(0.5j * t * la) * a)
        v = gb.eigenvectors @ (np.exp(0.5j * t * lb) * b)
        out = fam.forward.apply_matrix(np.outer(u, u.conj()))
        vals[idx] = float(np.real(v.conj() @ out @ v))
    amps = np.fft.fftshift(np.fft.fft(vals)) / n
    freqs = np.fft.fftshift(np.fft.fftfreq(n, d=steps[0])) * 2 * np.pi
    return SymmetrySpectrum(thetas, vals, freqs, amps)
