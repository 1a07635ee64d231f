"""Physical scenarios: resonant Jaynes-Cummings channels, thermodynamic and LOCC channels.

Jaynes-Cummings conventions
---------------------------
* Ordering is atom (x) field.  Atom basis index 0 is ``|g>``, 1 is ``|e>``;
  ``H_a = (omega0/2) diag(-1, 1)`` and ``H_f = omega0 a^dag a`` with the
  Fock space truncated at ``n_max``.
* The interaction is ``g (s_+ a + s_- a^dag)`` with ``s_+ = sigma_x + i sigma_y
  = 2|e><g|`` (``coupling="pauli"``, the default) or ``s_+ = |e><g|``
  (``coupling="ladder"``).
* Thermal noise acts on the atom with decay ``sqrt(G)|g><e|`` and
  excitation ``sqrt(G e^(-beta omega0))|e><g|``, so the rate ratio is
  ``e^(beta omega0)`` and ``gamma_a (x) gamma_f`` is stationary.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .channels import KrausChannel, dilation_channel
from .errors import (
    DimensionMismatch,
    EnergyConservationViolated,
    InvalidState,
    NotPovm,
    TruncationInsufficient,
)
from .lindblad import LindbladGenerator, integrate
from .matrixcore import DensityOperator, as_matrix, dagger, partial_trace, tensor

TAIL_TOL = 1e-12
FIXED_POINT_TOL = 1e-8
BATHS = ("thermal", "coherent_gibbs")
COUPLINGS = ("pauli", "ladder")


@dataclass(frozen=True)
class JcConfig:
    beta: float = 1.0
    omega0: float = 1.0
    g: float = 0.1
    n_max: int = 40
    gamma_noise: float = 0.0
    tau: float = 18.66
    bath: str = "thermal"
    coupling: str = "pauli"
    dt: float = 1e-3

    def __post_init__(self):
        if self.beta <= 0 or self.omega0 <= 0:
            raise ValueError("beta and omega0 must be positive")
        if self.n_max < 1:
            raise ValueError("n_max must be at least 1")
        if self.gamma_noise < 0 or self.tau < 0 or self.dt <= 0:
            raise ValueError("gamma_noise and tau must be non-negative, dt positive")
        if self.bath not in BATHS:
            raise ValueError(f"bath must be one of {BATHS}, got {self.bath!r}")
        if self.coupling not in COUPLINGS:
            raise ValueError(f"coupling must be one of {COUPLINGS}, got {self.coupling!r}")

    @property
    def n_levels(self) -> int:
        return self.n_max + 1

    def thermal_tail(self) -> float:
        """Thermal weight beyond the cutoff, ``sum_(n > n_max) e^(-beta omega0 n) / Z``."""
        return float(np.exp(-self.beta * self.omega0 * (self.n_max + 1)))

    def require_truncation(self) -> None:
        tail = self.thermal_tail()
        if tail >= TAIL_TOL:
            raise TruncationInsufficient(f"thermal tail {tail:.3e} beyond n_max = {self.n_max}")


# ---------------------------------------------------------------------------
# operators and states

SIGMA_Z = np.diag([-1.0, 1.0]).astype(complex)
RAISE = np.array([[0, 0], [1, 0]], dtype=complex)  # |e><g|
LOWER = RAISE.T.copy()  # |g><e|


def annihilation(n_levels: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_levels)), 1).astype(complex)


def gibbs_state(H, beta: float) -> DensityOperator:
    H = as_matrix(H)
    w, V = np.linalg.eigh(0.5 * (H + dagger(H)))
    p = np.exp(-beta * (w - w.min()))
    return DensityOperator((V * (p / p.sum())) @ dagger(V))


def atom_hamiltonian(cfg: JcConfig) -> np.ndarray:
    return 0.5 * cfg.omega0 * SIGMA_Z


def field_hamiltonian(cfg: JcConfig) -> np.ndarray:
    return cfg.omega0 * np.diag(np.arange(cfg.n_levels)).astype(complex)


def gamma_atom(cfg: JcConfig) -> DensityOperator:
    return gibbs_state(atom_hamiltonian(cfg), cfg.beta)


def gamma_field(cfg: JcConfig) -> DensityOperator:
    return gibbs_state(field_hamiltonian(cfg), cfg.beta)


def coherent_gibbs_vector(cfg: JcConfig) -> np.ndarray:
    """Normalised ``sum_n e^(-n beta omega0 / 2) |n>`` over the truncated space."""
    amp = np.exp(-0.5 * cfg.beta * cfg.omega0 * np.arange(cfg.n_levels)).astype(complex)
    return amp / np.linalg.norm(amp)


def bath_state(cfg: JcConfig) -> DensityOperator:
    if cfg.bath == "thermal":
        return gamma_field(cfg)
    return DensityOperator.from_vector(coherent_gibbs_vector(cfg))


def jc_hamiltonian(cfg: JcConfig) -> np.ndarray:
    """Resonant Jaynes-Cummings Hamiltonian on atom (x) truncated field."""
    N = cfg.n_levels
    a = annihilation(N)
    s_plus = RAISE * (2.0 if cfg.coupling == "pauli" else 1.0)
    H0 = tensor(atom_hamiltonian(cfg), np.eye(N)) + tensor(np.eye(2), field_hamiltonian(cfg))
    V = cfg.g * (tensor(s_plus, a) + tensor(dagger(s_plus), dagger(a)))
    return H0 + V


def free_hamiltonian(cfg: JcConfig) -> np.ndarray:
    return tensor(atom_hamiltonian(cfg), np.eye(cfg.n_levels)) + tensor(np.eye(2), field_hamiltonian(cfg))


def jc_unitary(cfg: JcConfig, tau: float | None = None) -> np.ndarray:
    tau = cfg.tau if tau is None else tau
    w, V = np.linalg.eigh(jc_hamiltonian(cfg))
    return (V * np.exp(-1j * w * tau)) @ dagger(V)


def _reduced_atom(out: np.ndarray, cfg: JcConfig) -> np.ndarray:
    return partial_trace(out, [2, cfg.n_levels], 0)


def jc_channel(cfg: JcConfig, bath: str | None = None, tau: float | None = None,
               check_truncation: bool = True) -> KrausChannel:
    """Atom channel ``Tr_f[U (rho (x) bath) U^dag]`` of the noiseless model.

    The thermal-bath channel is checked to keep ``gamma_a`` fixed to 1e-8.
    """
    bath = cfg.bath if bath is None else bath
    cfg = replace(cfg, bath=bath)
    if check_truncation:
        cfg.require_truncation()
    U = jc_unitary(cfg, tau)
    ch = dilation_channel(U, bath_state(cfg), 2).compressed()
    if bath == "thermal":
        ga = gamma_atom(cfg).matrix
        resid = float(np.max(np.abs(ch.apply_matrix(ga) - ga)))
        if resid > FIXED_POINT_TOL:
            raise TruncationInsufficient(f"thermal fixed-point residual {resid:.3e}")
    return ch


def reverse_jc_channel(cfg: JcConfig, tau: float | None = None) -> KrausChannel:
    """``Tr_f[U^dag (rho (x) gamma_f) U]``: evolution under ``-H_JC``."""
    cfg = replace(cfg, bath="thermal")
    U = jc_unitary(cfg, tau)
    return dilation_channel(dagger(U), gamma_field(cfg), 2).compressed()


def coherent_return_residual(cfg: JcConfig, tau: float) -> float:
    """``max|N_coh(gamma_a) - gamma_a|`` for the coherent-Gibbs bath at time ``tau``."""
    cfg = replace(cfg, bath="coherent_gibbs")
    U = jc_unitary(cfg, tau)
    joint = tensor(gamma_atom(cfg), bath_state(cfg))
    out = _reduced_atom(U @ joint @ dagger(U), cfg)
    return float(np.max(np.abs(out - gamma_atom(cfg).matrix)))


def coherent_return_time(cfg: JcConfig, seed: float = 18.66, window: float = 0.3) -> tuple[float, float]:
    """Interaction time near ``seed`` minimising `coherent_return_residual`.

    Returns ``(tau, residual)``.
    """
    cfg = replace(cfg, bath="coherent_gibbs")
    w, V = np.linalg.eigh(jc_hamiltonian(cfg))
    joint = V.conj().T @ tensor(gamma_atom(cfg), bath_state(cfg)) @ V
    ga = gamma_atom(cfg).matrix

    def resid(t):
        ph = np.exp(-1j * w * t)
        out = V @ (ph[:, None] * joint * ph.conj()[None, :]) @ V.conj().T
        return float(np.max(np.abs(_reduced_atom(out, cfg) - ga)))

    res = minimize_scalar(resid, bounds=(seed - window, seed + window), method="bounded",
                          options={"xatol": 1e-10})
    return float(res.x), float(res.fun)


# ---------------------------------------------------------------------------
# dissipative model


def noise_lindbladian(cfg: JcConfig) -> LindbladGenerator:
    """Joint atom-field generator: ``H_JC`` plus thermal noise on the atom."""
    N = cfg.n_levels
    jumps = []
    if cfg.gamma_noise > 0:
        I = np.eye(N)
        jumps.append(np.sqrt(cfg.gamma_noise) * tensor(LOWER, I))
        jumps.append(np.sqrt(cfg.gamma_noise * np.exp(-cfg.beta * cfg.omega0)) * tensor(RAISE, I))
    return LindbladGenerator(jc_hamiltonian(cfg), tuple(jumps))


def noise_rate_ratio(cfg: JcConfig) -> float:
    """Decay rate over excitation rate of the atomic noise (``e^(beta omega0)``)."""
    gen = noise_lindbladian(cfg)
    if len(gen.jumps) < 2:
        raise ValueError("no noise operators at gamma_noise = 0")
    rate = [float(np.max(np.abs(L)) ** 2) for L in gen.jumps]
    return rate[0] / rate[1]


def jc_noisy_channels(cfg: JcConfig, taus: Sequence[float], dt: float | None = None,
                      check_truncation: bool = True) -> list[KrausChannel]:
    """Atom channels of the dissipative joint evolution at increasing times ``taus``.

    The four operators ``|i><j| (x) bath`` are propagated together with RK4
    in one pass (each segment uses the largest step not exceeding ``dt``
    that divides it), the field is traced out at every requested time and
    each channel is assembled from its Choi matrix.
    """
    dt = cfg.dt if dt is None else dt
    taus = [float(t) for t in taus]
    if any(b < a for a, b in zip(taus, taus[1:])) or (taus and taus[0] < 0):
        raise ValueError("times must be non-negative and non-decreasing")
    if check_truncation:
        cfg.require_truncation()
    N = cfg.n_levels
    env = bath_state(cfg).matrix
    inputs = []
    for i in range(2):
        for j in range(2):
            E = np.zeros((2, 2), dtype=complex)
            E[i, j] = 1.0
            inputs.append(np.kron(E, env))
    X = np.array(inputs)
    gen = noise_lindbladian(cfg)
    now, channels = 0.0, []
    for tau in taus:
        span = tau - now
        if span > 0:
            X = integrate(gen, X, span, min(dt, span))
        now = tau
        J = np.zeros((2, 2, 2, 2), dtype=complex)
        for idx, Y in enumerate(X):
            i, j = divmod(idx, 2)
            J[i, :, j, :] = partial_trace(Y, [2, N], 0)
        channels.append(KrausChannel.from_choi(J.reshape(4, 4), 2, 2, tol=1e-6))
    return channels


def jc_noisy_channel(cfg: JcConfig, tau: float | None = None, dt: float | None = None,
                     check_truncation: bool = True) -> KrausChannel:
    """Atom channel of the dissipative joint evolution at a single time."""
    tau = cfg.tau if tau is None else tau
    return jc_noisy_channels(cfg, [tau], dt, check_truncation)[0]


# ---------------------------------------------------------------------------
# thermodynamic and LOCC channels


def thermodynamic_channel(U, gamma_B, H_S, H_S_out, H_B, H_B_out, beta: float,
                          tol: float = 1e-8) -> KrausChannel:
    """``Tr_B[U (rho (x) gamma_B) U^dag]`` for an energy-conserving ``U``.

    Requires ``U (H_S + H_B) U^dag = H_S' + H_B'`` and ``gamma_B`` Gibbs at
    ``beta``; the result maps the system Gibbs state to the output Gibbs state.
    """
    U = as_matrix(U)
    H_S, H_S_out, H_B, H_B_out = (as_matrix(h) for h in (H_S, H_S_out, H_B, H_B_out))
    dS, dB = H_S.shape[0], H_B.shape[0]
    if U.shape != (dS * dB, dS * dB) or H_S_out.shape != H_S.shape or H_B_out.shape != H_B.shape:
        raise DimensionMismatch("unitary and Hamiltonians do not share system/bath dimensions")
    before = tensor(H_S, np.eye(dB)) + tensor(np.eye(dS), H_B)
    after = tensor(H_S_out, np.eye(dB)) + tensor(np.eye(dS), H_B_out)
    defect = float(np.max(np.abs(U @ before @ dagger(U) - after)))
    if defect > tol:
        raise EnergyConservationViolated(f"U (H_S + H_B) U^dag differs from H_S' + H_B' by {defect:.3e}")
    gamma_B = gamma_B if isinstance(gamma_B, DensityOperator) else DensityOperator(gamma_B)
    if np.max(np.abs(gamma_B.matrix - gibbs_state(H_B, beta).matrix)) > tol:
        raise InvalidState("bath state is not the Gibbs state of H_B at this beta")
    ch = dilation_channel(U, gamma_B, dS)
    out = ch.apply_matrix(gibbs_state(H_S, beta).matrix)
    if np.max(np.abs(out - gibbs_state(H_S_out, beta).matrix)) > tol:
        raise EnergyConservationViolated("channel does not map Gibbs state to Gibbs state")
    return ch


def swap_unitary(d: int) -> np.ndarray:
    S = np.zeros((d * d, d * d), dtype=complex)
    for a in range(d):
        for b in range(d):
            S[b * d + a, a * d + b] = 1.0
    return S


def locc_channel(unitaries_A: Sequence, measurement_B: Sequence, tol: float = 1e-8) -> KrausChannel:
    """``rho -> sum_m (V_m (x) K_m) rho (V_m (x) K_m)^dag (x) |m><m|`` on ``A (x) B (x) M``."""
    Vs = [as_matrix(V) for V in unitaries_A]
    Ks = [as_matrix(K) for K in measurement_B]
    if len(Vs) != len(Ks) or not Ks:
        raise DimensionMismatch("need one unitary on A per measurement operator on B")
    dB = Ks[0].shape[1]
    S = sum(dagger(K) @ K for K in Ks)
    defect = float(np.max(np.abs(S - np.eye(dB))))
    if defect > tol:
        raise NotPovm(f"sum K_m^dag K_m deviates from identity by {defect:.3e}")
    n = len(Ks)
    ops = []
    for m, (V, K) in enumerate(zip(Vs, Ks)):
        ket = np.zeros((n, 1), dtype=complex)
        ket[m, 0] = 1.0
        ops.append(np.kron(np.kron(V, K), ket))
    return KrausChannel(np.array(ops))


def locc_reference(dim_A: int, rho_B) -> DensityOperator:
    """Normalised ``I_A/d_A (x) rho_B``; the dropped factor ``log d_A`` cancels in every difference."""
    rho_B = as_matrix(rho_B)
    return DensityOperator(np.kron(np.eye(dim_A) / dim_A, rho_B))


def mixed_plus_state() -> DensityOperator:
    """``(1/2)|psi><psi| + I/4`` with ``|psi> = (|g> + |e>)/sqrt 2``."""
    psi = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2)
    return DensityOperator(0.5 * np.outer(psi, psi.conj()) + np.eye(2) / 4)


def driven_qubit(decay: float = 0.1) -> tuple[LindbladGenerator, DensityOperator]:
    """Qubit with ``H = sigma_x`` and one jump ``sqrt(decay) |g><e|``, started in ``diag(0.7, 0.3)``."""
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    gen = LindbladGenerator(sx, (np.sqrt(decay) * LOWER,))
    return gen, DensityOperator(np.diag([0.7, 0.3]).astype(complex))
