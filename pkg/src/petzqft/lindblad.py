"""Lindblad evolution and the reverse (Petz) generator.

Superoperators act on row-major vectorised matrices, ``vec(A X B) =
(A kron B^T) vec(X)``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps

from .channels import choi_of_map
from .errors import DimensionMismatch, NotHermitian, RankDeficientReference, StepTooLarge
from .matrixcore import RANK_TOL, DensityOperator, as_matrix, dagger, hermitian_defect, herm_eig

TRACE_DRIFT_TOL = 1e-8
NEGATIVITY_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class LindbladGenerator:
    """``L(rho) = -i[H, rho] + sum_n (L_n rho L_n^dag - {L_n^dag L_n, rho}/2)``."""

    hamiltonian: np.ndarray
    jumps: tuple = ()
    herm_tol: float = 1e-10

    def __post_init__(self):
        H = as_matrix(self.hamiltonian)
        defect = hermitian_defect(H)
        if defect > self.herm_tol:
            raise NotHermitian(f"Hamiltonian asymmetry {defect:.3e}")
        H = 0.5 * (H + dagger(H))
        jumps = tuple(as_matrix(L) for L in self.jumps)
        for L in jumps:
            if L.shape != H.shape:
                raise DimensionMismatch(f"jump operator {L.shape} vs Hamiltonian {H.shape}")
        object.__setattr__(self, "hamiltonian", H)
        object.__setattr__(self, "jumps", jumps)

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    def _damping(self) -> np.ndarray:
        D = np.zeros_like(self.hamiltonian)
        for L in self.jumps:
            D += dagger(L) @ L
        return D

    def __call__(self, rho) -> np.ndarray:
        X = as_matrix(rho)
        H = self.hamiltonian
        out = -1j * (H @ X - X @ H)
        for L in self.jumps:
            out += L @ X @ dagger(L)
        D = self._damping()
        return out - 0.5 * (D @ X + X @ D)

    def adjoint(self, Y) -> np.ndarray:
        """Heisenberg-picture generator ``L^dag``."""
        Y = as_matrix(Y)
        H = self.hamiltonian
        out = 1j * (H @ Y - Y @ H)
        for L in self.jumps:
            out += dagger(L) @ Y @ L
        D = self._damping()
        return out - 0.5 * (D @ Y + Y @ D)

    def superoperator(self) -> sps.csr_matrix:
        d = self.dim
        Id = sps.identity(d, format="csr", dtype=complex)
        H = sps.csr_matrix(self.hamiltonian)
        S = -1j * (sps.kron(H, Id) - sps.kron(Id, H.T))
        if self.jumps:
            D = sps.csr_matrix(self._damping())
            S = S - 0.5 * (sps.kron(D, Id) + sps.kron(Id, D.T))
            for L in self.jumps:
                Ls = sps.csr_matrix(L)
                S = S + sps.kron(Ls, Ls.conj())
        return sps.csr_matrix(S)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: list = field(default_factory=list)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.size != len(self.states):
            raise ValueError("times and states differ in length")
        if times.size and times[0] != 0.0:
            raise ValueError("trajectories start at time 0")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must increase")
        object.__setattr__(self, "times", times)

    @property
    def final(self) -> DensityOperator:
        return self.states[-1]

    def to_csv(self, path) -> None:
        """Columns ``time``, then real and imaginary parts of each entry in row-major order."""
        d = self.states[0].dim if self.states else 0
        header = ["time"]
        for a in range(d):
            for b in range(d):
                header += [f"re_{a}_{b}", f"im_{a}_{b}"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for t, s in zip(self.times, self.states):
                flat = s.matrix.reshape(-1)
                row = [t]
                for z in flat:
                    row += [z.real, z.imag]
                w.writerow([f"{x:.17g}" for x in row])


def _rk4(apply, y, dt):
    k1 = apply(y)
    k2 = apply(y + 0.5 * dt * k1)
    k3 = apply(y + 0.5 * dt * k2)
    k4 = apply(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _n_steps(tau: float, dt: float) -> int:
    if dt <= 0:
        raise ValueError("dt must be positive")
    if tau < 0:
        raise ValueError("tau must be non-negative")
    n = int(round(tau / dt))
    if n == 0 and tau > 0:
        raise ValueError("tau must be at least dt")
    return n


def evolve(gen: LindbladGenerator, rho0, tau: float, dt: float = 1e-3, store_every: int = 1) -> Trajectory:
    """Fixed-step RK4 from ``rho0`` over ``[0, tau]``.

    The step is adjusted to ``tau / round(tau / dt)`` so the last state lands
    on ``tau``.  After every step the state is Hermitised and its trace reset
    to one; a trace drift beyond ``1e-8`` raises `StepTooLarge`, as does an
    eigenvalue below ``-1e-6`` at a stored state.  States are stored every
    ``store_every`` steps and at ``tau``.
    """
    rho0 = rho0 if isinstance(rho0, DensityOperator) else DensityOperator(rho0)
    n = _n_steps(tau, dt)
    h = tau / n if n else 0.0
    d = gen.dim
    S = gen.superoperator()
    y = rho0.matrix.reshape(-1).copy()
    times, states = [0.0], [rho0]
    for step in range(1, n + 1):
        y = _rk4(S.dot, y, h)
        M = y.reshape(d, d)
        tr = np.trace(M).real
        if abs(tr - 1.0) > TRACE_DRIFT_TOL:
            raise StepTooLarge(f"trace drifted to {tr:.12f} at step {step}")
        M = 0.5 * (M + dagger(M)) / tr
        y = M.reshape(-1)
        if step % store_every == 0 or step == n:
            lam_min = np.linalg.eigvalsh(M)[0]
            if lam_min < -NEGATIVITY_TOL:
                raise StepTooLarge(f"eigenvalue {lam_min:.3e} at t = {step * h:.6g}; reduce dt")
            M = M.copy()
            M[np.diag_indices(d)] = M.diagonal().real
            states.append(DensityOperator(M, trace_tol=1e-8))
            times.append(step * h)
    return Trajectory(np.array(times), states)


def integrate(gen: LindbladGenerator, X0, tau: float, dt: float = 1e-3) -> np.ndarray:
    """Linear RK4 propagation of one matrix or a stack ``(n, d, d)`` of them.

    No renormalisation is applied, so any operator (not only states) can be
    propagated; used to build channel Choi matrices from basis inputs.
    """
    X0 = np.asarray(X0, dtype=complex)
    single = X0.ndim == 2
    stack = X0[None] if single else X0
    d = gen.dim
    n = _n_steps(tau, dt)
    h = tau / n if n else 0.0
    S = gen.superoperator()
    Y = stack.reshape(stack.shape[0], -1).T.copy()
    for _ in range(n):
        Y = _rk4(S.dot, Y, h)
    out = Y.T.reshape(-1, d, d)
    return out[0] if single else out


def sqrt_derivative(gamma, dgamma) -> np.ndarray:
    """Derivative of ``gamma^(1/2)`` along ``dgamma`` (divided differences in the eigenbasis).

    In the eigenbasis ``(V^dag dG V)_ij = (V^dag dgamma V)_ij / (sqrt(l_i) + sqrt(l_j))``,
    which includes the degenerate limit ``1 / (2 sqrt(l))``.
    """
    sd = gamma.spectral if isinstance(gamma, DensityOperator) else herm_eig(gamma)
    lam, V = sd.eigenvalues, sd.eigenvectors
    s = np.sqrt(np.clip(lam, 0.0, None))
    denom = s[:, None] + s[None, :]
    B = dagger(V) @ as_matrix(dgamma) @ V
    return V @ (B / denom) @ dagger(V)


def reverse_generator(gen: LindbladGenerator, gamma_t, dgamma_dt) -> LindbladGenerator:
    """Generator of the Petz-reversed dynamics about the reference trajectory.

    With ``G = gamma_t^(1/2)``: jumps ``G L_n^dag G^-1`` and Hamiltonian
    ``-(K + K^dag)/2`` where ``K = G H G^-1 + i dG/dt G^-1 + (i/2) sum_n G L_n^dag L_n G^-1``.
    """
    gamma_t = gamma_t if isinstance(gamma_t, DensityOperator) else DensityOperator(gamma_t)
    lam = gamma_t.eigenvalues
    if lam[-1] <= RANK_TOL * lam[0]:
        raise RankDeficientReference(f"reference eigenvalue {lam[-1]:.3e} on the trajectory")
    G = gamma_t.power(0.5)
    Ginv = gamma_t.power(-0.5)
    dG = sqrt_derivative(gamma_t, dgamma_dt)
    K = G @ gen.hamiltonian @ Ginv + 1j * dG @ Ginv + 0.5j * G @ gen._damping() @ Ginv
    H_rev = -0.5 * (K + dagger(K))
    jumps = tuple(G @ dagger(L) @ Ginv for L in gen.jumps)
    return LindbladGenerator(H_rev, jumps, herm_tol=1e-9)


def infinitesimal_petz_error(gen: LindbladGenerator, gamma, dt: float) -> float:
    """Max-norm Choi distance between the Petz map of ``1 + L dt`` and ``1 + L_rev dt``.

    Both maps are built from ``gamma`` at time ``t``; the reference after the
    step is ``gamma + dt L(gamma)``.  The distance is ``O(dt^2)``.
    """
    gamma = gamma if isinstance(gamma, DensityOperator) else DensityOperator(gamma)
    d = gen.dim
    dgamma = gen(gamma.matrix)
    nxt = gamma.matrix + dt * dgamma
    G = gamma.power(0.5)
    w, V = np.linalg.eigh(0.5 * (nxt + dagger(nxt)))
    Nm = (V * w ** -0.5) @ dagger(V)

    def petz_step(X):
        Y = Nm @ X @ Nm
        return G @ (Y + dt * gen.adjoint(Y)) @ G

    rev = reverse_generator(gen, gamma, dgamma)
    J_petz = choi_of_map(petz_step, d, d)
    J_rev = choi_of_map(lambda X: X + dt * rev(X), d, d)
    return float(np.max(np.abs(J_petz - J_rev)))


def reverse_recovery_check(gen: LindbladGenerator, gamma0, tau: float, dt: float = 1e-3,
                           n_checkpoints: int = 20) -> float:
    """Run the reference forward, then back with the reverse generator; return the max deviation.

    The forward pass uses step ``dt/2`` so that the reverse RK4 step ``dt``
    finds the reference state (and its derivative) at each stage time.  The
    deviation ``max |rho_rev(s) - gamma(tau - s)|`` is sampled at about
    ``n_checkpoints`` evenly spaced reverse times, including the end.
    """
    gamma0 = gamma0 if isinstance(gamma0, DensityOperator) else DensityOperator(gamma0)
    n = _n_steps(tau, dt)
    h = tau / n
    fwd = evolve(gen, gamma0, tau, h / 2)
    refs = fwd.states  # refs[m] at time m * h / 2
    cache: dict[int, LindbladGenerator] = {}

    def rev_at(m: int) -> LindbladGenerator:
        if m not in cache:
            g = refs[m]
            cache[m] = reverse_generator(gen, g, gen(g.matrix))
        return cache[m]

    rho = refs[-1].matrix.copy()
    stride = max(1, n // n_checkpoints)
    worst = 0.0
    for step in range(n):
        top = 2 * (n - step)  # forward index of the reference at the start of this step
        k1 = rev_at(top)(rho)
        k2 = rev_at(top - 1)(rho + 0.5 * h * k1)
        k3 = rev_at(top - 1)(rho + 0.5 * h * k2)
        k4 = rev_at(top - 2)(rho + h * k3)
        rho = rho + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        rho = 0.5 * (rho + dagger(rho))
        for m in (top, top - 1):
            cache.pop(m, None)
        if (step + 1) % stride == 0 or step == n - 1:
            target = refs[2 * (n - step - 1)].matrix
            worst = max(worst, float(np.max(np.abs(rho - target))))
    return worst


def zero_generator(d: int) -> LindbladGenerator:
    return LindbladGenerator(np.zeros((d, d), dtype=complex))


def generators_close(a: LindbladGenerator, b: LindbladGenerator, tol: float = 1e-8) -> bool:
    """Same action on a basis of operators (jump sets may differ by unitary mixing)."""
    if a.dim != b.dim:
        return False
    Ja = choi_of_map(a, a.dim, a.dim)
    Jb = choi_of_map(b, b.dim, b.dim)
    return bool(np.max(np.abs(Ja - Jb)) <= tol)
