"""Command-line experiment runner.

Every subcommand reads a flat config, writes one CSV or JSON artifact (to
``--out`` or standard output) and exits with 0 on success, 2 when an
invariant check fails (a JSON violation report goes to standard error) and
1 on bad input.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import bounds, models
from .channels import (
    KrausChannel,
    covariance_defect,
    depolarizing_channel,
    identity_channel,
)
from .config import Config, load_config
from .errors import ConfigError
from .fluctuation import (
    backward_ep_distribution,
    backward_quasiprob,
    crooks_check,
    detailed_balance_ratio,
    ep_distribution,
    integral_qft,
    tpm_quasiprob,
    upsilon,
)
from .lindblad import infinitesimal_petz_error, reverse_recovery_check
from .matrixcore import DensityOperator
from .petz import RecoveryFamily
from .povm import (
    backward_two_point_distribution,
    build_povms,
    read_distribution_csv,
    reconstruct_quasiprob,
    two_point_distribution,
)
from .random import random_channel, random_covariant_channel, random_density

SUBCOMMANDS = (
    "detailed-balance",
    "entropy-dist",
    "crooks-check",
    "integral-qft",
    "lindblad-reverse",
    "povm-reconstruct",
    "covariance",
    "free-energy",
    "asymmetry",
    "coherence-merge",
    "locc",
    "symmetry-spectrum",
)

JC_KEYS = ("beta", "omega0", "g", "n_max", "gamma_noise", "tau", "bath", "coupling", "dt")
SCENARIO_KEYS = (
    "channel", "dim", "dim_out", "n_kraus", "seed", "p", "levels",
    "reference", "reference_seed",
    "state", "state_vector", "state_mixing", "state_seed",
)
KNOWN_KEYS = set(JC_KEYS) | set(SCENARIO_KEYS) | {
    "tau_min", "tau_max", "n_tau", "sweep_dt", "psi", "phi", "tol", "thetas",
    "model", "decay", "petz_dt", "distribution_csv",
    "expected_delta_F", "expected_delta_C", "expected_rel_tol",
    "n_instances", "dims", "measurement", "n_theta", "theta_span", "expect",
}


# ---------------------------------------------------------------------------
# output


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{float(x):.17g}"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# scenario builders


def jc_config(cfg: Config) -> models.JcConfig:
    return models.JcConfig(
        beta=cfg.get_float("beta", 1.0),
        omega0=cfg.get_float("omega0", 1.0),
        g=cfg.get_float("g", 0.1),
        n_max=cfg.get_int("n_max", 40),
        gamma_noise=cfg.get_float("gamma_noise", 0.0),
        tau=cfg.get_float("tau", 18.66),
        bath=cfg.get_str("bath", "thermal", choices=models.BATHS),
        coupling=cfg.get_str("coupling", "pauli", choices=models.COUPLINGS),
        dt=cfg.get_float("dt", 1e-3),
    )


def build_channel(cfg: Config) -> KrausChannel:
    kind = cfg.get_str("channel", "jc", choices=("jc", "identity", "depolarizing", "random", "random_covariant"))
    if kind == "jc":
        jc = jc_config(cfg)
        return models.jc_noisy_channel(jc) if jc.gamma_noise > 0 else models.jc_channel(jc)
    if kind == "identity":
        return identity_channel(cfg.get_int("dim", 2))
    if kind == "depolarizing":
        return depolarizing_channel(cfg.get_float("p", 0.5))
    rng = np.random.default_rng(cfg.get_int("seed", 0))
    if kind == "random":
        d = cfg.get_int("dim", 2)
        return random_channel(d, cfg.get_int("dim_out", d), cfg.get_int("n_kraus", 2), rng)
    return random_covariant_channel(cfg.get_floats("levels", [0.0, 1.0]), cfg.get_int("n_kraus", 2), rng)


def _levels_hamiltonian(cfg: Config, dim: int) -> np.ndarray:
    if cfg.get_str("channel", "jc") == "jc":
        return models.atom_hamiltonian(jc_config(cfg))
    levels = cfg.get_floats("levels", list(range(dim)))
    if len(levels) != dim:
        raise ConfigError(f"levels has {len(levels)} entries for dimension {dim}", cfg.lines.get("levels"))
    return np.diag(levels).astype(complex)


def build_state(cfg: Config, dim: int) -> DensityOperator:
    kind = cfg.get_str("state", "mixed_plus" if dim == 2 else "random",
                       choices=("mixed_plus", "vector", "random", "maximally_mixed"))
    if kind == "mixed_plus":
        if dim != 2:
            raise ConfigError("state = mixed_plus needs a qubit channel", cfg.lines.get("state"))
        return models.mixed_plus_state()
    if kind == "maximally_mixed":
        return DensityOperator.maximally_mixed(dim)
    if kind == "random":
        return random_density(dim, np.random.default_rng(cfg.get_int("state_seed", cfg.get_int("seed", 0) + 2)))
    v = cfg.get_vector("state_vector")
    if v.size != dim:
        raise ConfigError(f"state_vector has {v.size} entries for dimension {dim}", cfg.lines.get("state_vector"))
    v = v / np.linalg.norm(v)
    mix = cfg.get_float("state_mixing", 0.0)
    return DensityOperator((1 - mix) * np.outer(v, v.conj()) + mix * np.eye(dim) / dim)


def build_reference(cfg: Config, ch: KrausChannel, rho: DensityOperator) -> DensityOperator:
    kind = cfg.get_str("reference", "gibbs", choices=("gibbs", "maximally_mixed", "random", "dephased"))
    d = ch.dim_in
    if kind == "maximally_mixed":
        return DensityOperator.maximally_mixed(d)
    if kind == "random":
        return random_density(d, np.random.default_rng(cfg.get_int("reference_seed", cfg.get_int("seed", 0) + 1)))
    H = _levels_hamiltonian(cfg, d)
    if kind == "dephased":
        return bounds.dephase(rho, H)
    return models.gibbs_state(H, cfg.get_float("beta", 1.0))


def build_scenario(cfg: Config):
    ch = build_channel(cfg)
    rho = build_state(cfg, ch.dim_in)
    return RecoveryFamily(ch, build_reference(cfg, ch, rho)), rho


def _normalized(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _thetas(cfg: Config, cli_thetas, default):
    if cli_thetas:
        return [float(t) for t in cli_thetas]
    return cfg.get_floats("thetas", list(default))


# ---------------------------------------------------------------------------
# subcommands; each returns (artifact_text, summary, violations)


def cmd_detailed_balance(cfg: Config, cli_thetas):
    base = jc_config(cfg)
    psi = _normalized(cfg.get_vector("psi", [1.0, 1.0]))
    phi = _normalized(cfg.get_vector("phi", [1.0, -1.0]))
    n = cfg.get_int("n_tau", 20)
    t_max = cfg.get_float("tau_max", base.tau)
    taus = np.linspace(cfg.get_float("tau_min", t_max / n), t_max, n)
    tol = cfg.get_float("tol", 1e-6)
    if base.gamma_noise > 0:
        channels = models.jc_noisy_channels(base, taus, cfg.get_float("sweep_dt", 1e-2))
    else:
        channels = [models.jc_channel(base, "thermal", tau=t) for t in taus]
    H = models.atom_hamiltonian(base)
    dE = float((phi.conj() @ H @ phi).real - (psi.conj() @ H @ psi).real)
    target = upsilon(H, base.beta, psi, phi) * np.exp(-base.beta * dE)
    rows, violations = [], []
    gamma = models.gamma_atom(base)
    for t, ch in zip(taus, channels):
        db = detailed_balance_ratio(RecoveryFamily(ch, gamma), psi, phi)
        rows.append((t, db.forward, db.backward, db.ratio, target))
        if abs(db.ratio - target) > tol * target:
            violations.append(f"tau = {t:.6g}: ratio {db.ratio:.12g} vs {target:.12g}")
    text = _csv_text(["tau", "T_fwd", "T_bwd", "ratio", "upsilon_exp_minus_beta_dE"], rows)
    return text, f"upsilon*exp(-beta dE) = {target:.12g} over {n} times", violations


def _atom_rows(fwd, bwd):
    rows, used = [], np.zeros(len(bwd), dtype=bool)
    for s, wf in zip(fwd.atoms, fwd.weights):
        target = -np.conj(s)
        hit = (np.abs(bwd.atoms.real - target.real) < bwd.tol) & (np.abs(bwd.atoms.imag - target.imag) < bwd.tol)
        used |= hit
        wb = complex(bwd.weights[hit].sum())
        rows.append((s.real, s.imag, wf.real, wf.imag, wb.real, wb.imag))
    for s, wb in zip(bwd.atoms[~used], bwd.weights[~used]):
        f = -np.conj(s)
        rows.append((f.real, f.imag, 0.0, 0.0, wb.real, wb.imag))
    rows.sort(key=lambda r: (r[0], r[1]))
    return rows


def cmd_entropy_dist(cfg: Config, cli_thetas):
    fam, rho = build_scenario(cfg)
    theta = _thetas(cfg, cli_thetas, [0.0])[0]
    table = tpm_quasiprob(fam, rho)
    fwd = ep_distribution(table)
    bwd = backward_ep_distribution(fam, theta, rho)
    violations = []
    if table.hermitian_defect() > 1e-10:
        violations.append(f"forward table not Hermitian ({table.hermitian_defect():.3e})")
    if abs(fwd.total() + fwd.dropped_mass - 1) > 1e-8:
        violations.append(f"forward weights sum to {fwd.total():.12g}")
    text = _csv_text(["sigma_R", "sigma_I", "weight_fwd", "weight_fwd_imag", "weight_bwd", "weight_bwd_imag"],
                     _atom_rows(fwd, bwd))
    neg = float(min(fwd.weights.real, default=0.0))
    return text, f"{len(fwd)} forward atoms, most negative weight {neg:.6g}", violations


def cmd_crooks_check(cfg: Config, cli_thetas):
    fam, rho = build_scenario(cfg)
    tol = cfg.get_float("tol", 1e-6)
    fwd = ep_distribution(tpm_quasiprob(fam, rho))
    rows, violations, worst = [], [], 0.0
    for theta in _thetas(cfg, cli_thetas, [0.0, 0.7]):
        rep = crooks_check(fwd, backward_ep_distribution(fam, theta, rho), theta, threshold=1e-10)
        worst = max(worst, rep.max_violation)
        for s, wf, wb, lr in rep.points:
            rows.append((theta, s.real, s.imag, wf.real, wf.imag, wb.real, wb.imag, lr.real, lr.imag))
        if not rep.ok(tol):
            violations.append(f"theta = {theta:g}: relative violation {rep.max_violation:.3e}")
    header = ["theta", "sigma_R", "sigma_I", "w_fwd", "w_fwd_imag", "w_bwd", "w_bwd_imag",
              "log_ratio", "log_ratio_imag"]
    return _csv_text(header, rows), f"max relative violation {worst:.3e}", violations


def cmd_integral_qft(cfg: Config, cli_thetas):
    fam, rho = build_scenario(cfg)
    tol = cfg.get_float("tol", 1e-7)
    dist = ep_distribution(tpm_quasiprob(fam, rho))
    rows, violations = [], []
    for theta in _thetas(cfg, cli_thetas, bounds.QFT_THETAS):
        lhs, k = integral_qft(fam, rho, theta, dist)
        rows.append((theta, lhs.real, lhs.imag, k, abs(lhs - k)))
        if abs(lhs - k) > tol:
            violations.append(f"theta = {theta:g}: |lhs - kappa| = {abs(lhs - k):.3e}")
    text = _csv_text(["theta", "lhs", "lhs_imag", "kappa", "deviation"], rows)
    return text, f"<sigma_R> = {dist.mean_R():.12g}", violations


def cmd_lindblad_reverse(cfg: Config, cli_thetas):
    model = cfg.get_str("model", "driven_qubit", choices=("driven_qubit", "jc_noisy"))
    if model == "driven_qubit":
        gen, gamma0 = models.driven_qubit(cfg.get_float("decay", 0.1))
    else:
        jc = jc_config(cfg)
        gen = models.noise_lindbladian(jc)
        gamma0 = DensityOperator(np.kron(models.mixed_plus_state().matrix, models.bath_state(jc).matrix))
    tau = cfg.get_float("tau", 1.0)
    dt = cfg.get_float("dt", 1e-4)
    tol = cfg.get_float("tol", 1e-4)
    err = reverse_recovery_check(gen, gamma0, tau, dt)
    h = cfg.get_float("petz_dt", 1e-2)
    petz = [infinitesimal_petz_error(gen, gamma0, h / 2 ** m) for m in range(3)]
    ratios = [a / b for a, b in zip(petz, petz[1:])]
    violations = []
    if err >= tol:
        violations.append(f"reverse evolution misses the reference by {err:.3e}")
    for r in ratios:
        if not 3.5 <= r <= 4.5:
            violations.append(f"infinitesimal Petz error ratio {r:.4f} outside [3.5, 4.5]")
    out = {
        "model": model,
        "tau": tau,
        "dt": dt,
        "reverse_error": err,
        "petz_dt": [h / 2 ** m for m in range(3)],
        "petz_choi_error": petz,
        "halving_ratios": ratios,
        "satisfied": not violations,
    }
    return _json_text(out), f"reverse error {err:.3e}, halving ratios {ratios}", violations


def cmd_povm_reconstruct(cfg: Config, cli_thetas):
    fam, rho = build_scenario(cfg)
    tol = cfg.get_float("tol", 1e-8)
    thetas = _thetas(cfg, cli_thetas, [])
    direct = tpm_quasiprob(fam, rho)
    first, second = build_povms(direct.basis)
    if "distribution_csv" in cfg:
        dist = read_distribution_csv(cfg.get_str("distribution_csv"))
    else:
        dist = two_point_distribution(fam.forward, rho, first, second)
    rec = reconstruct_quasiprob(dist, direct.basis)
    pairs = [("forward", 0.0, rec, direct)]
    for theta in thetas:
        bd = backward_two_point_distribution(fam, theta, rho, first, second)
        pairs.append(("backward", theta, reconstruct_quasiprob(bd, direct.basis), backward_quasiprob(fam, theta, rho)))
    rows, violations = [], []
    for label, theta, r, d in pairs:
        err = float(np.max(np.abs(r.table - d.table)))
        if err > tol:
            violations.append(f"{label} theta = {theta:g}: reconstruction error {err:.3e}")
        for idx in np.ndindex(*d.table.shape):
            a, b = r.table[idx], d.table[idx]
            rows.append((label, theta, *idx, a.real, a.imag, b.real, b.imag))
    header = ["direction", "theta", "mu", "nu", "i", "j", "k", "l",
              "reconstructed", "reconstructed_imag", "direct", "direct_imag"]
    worst = max(float(np.max(np.abs(r.table - d.table))) for _, _, r, d in pairs)
    return _csv_text(header, rows), f"max reconstruction error {worst:.3e}", violations


def cmd_covariance(cfg: Config, cli_thetas):
    fam, _ = build_scenario(cfg)
    expect = cfg.get_str("expect", "none", choices=("none", "covariant", "non_covariant"))
    tol = cfg.get_float("tol", 1e-8)
    rows = []
    for theta in _thetas(cfg, cli_thetas, [0.5, 1.0, 2.0, -2.5]):
        rows.append((theta, covariance_defect(fam.forward, fam.reference, theta)))
    worst = max(r[1] for r in rows)
    violations = []
    if expect == "covariant" and worst > tol:
        violations.append(f"covariance defect {worst:.3e} exceeds {tol:g}")
    if expect == "non_covariant" and worst <= tol:
        violations.append(f"covariance defect {worst:.3e} unexpectedly below {tol:g}")
    return _csv_text(["theta", "covariance_defect"], rows), f"max covariance defect {worst:.3e}", violations


def _expected(cfg: Config, key: str, value: float, violations: list) -> None:
    if key in cfg:
        want = cfg.get_float(key)
        rel = cfg.get_float("expected_rel_tol", 0.05)
        if abs(value - want) > rel * abs(want):
            violations.append(f"{key}: got {value:.6g}, expected {want:.6g} within {rel:.0%}")


def _resource_channel(cfg: Config):
    if cfg.get_str("channel", "jc") != "jc":
        raise ConfigError("free-energy and asymmetry run on channel = jc", cfg.lines.get("channel"))
    jc = jc_config(cfg)
    ch = models.jc_noisy_channel(jc) if jc.gamma_noise > 0 else models.jc_channel(jc)
    return jc, ch, build_state(cfg, 2)


def cmd_free_energy(cfg: Config, cli_thetas):
    jc, ch, rho = _resource_channel(cfg)
    H = models.atom_hamiltonian(jc)
    rep = bounds.free_energy_ft(ch, rho, jc.beta, H, thetas=_thetas(cfg, cli_thetas, bounds.QFT_THETAS))
    violations = list(rep.violations)
    _expected(cfg, "expected_delta_F", rep.quantities["delta_F"], violations)
    return _json_text(rep.to_dict()), f"delta_F = {rep.quantities['delta_F']:.6g}", violations


def cmd_asymmetry(cfg: Config, cli_thetas):
    jc, ch, rho = _resource_channel(cfg)
    H = models.atom_hamiltonian(jc)
    rep = bounds.asymmetry_ft(ch, rho, H, thetas=_thetas(cfg, cli_thetas, bounds.QFT_THETAS))
    violations = list(rep.violations)
    _expected(cfg, "expected_delta_C", rep.quantities["delta_C"], violations)
    return _json_text(rep.to_dict()), f"delta_C = {rep.quantities['delta_C']:.6g}", violations


def cmd_coherence_merge(cfg: Config, cli_thetas):
    levels = cfg.get_floats("levels", [0.0, 1.0, 2.0])
    d = len(levels)
    L = np.diag(levels).astype(complex)
    rng = np.random.default_rng(cfg.get_int("seed", 0))
    n = cfg.get_int("n_instances", 100)
    n_kraus = cfg.get_int("n_kraus", 2)
    rows, violations, worst = [], [], -np.inf
    for inst in range(n):
        ch = random_covariant_channel(levels, n_kraus, rng)
        r = rng.random(d) + 0.05
        gamma = np.diag(r / r.sum()).astype(complex)
        rho = random_density(d, rng)
        for k in range(d):
            for l in range(d):
                mb = bounds.coherence_merging_bound(ch, rho, gamma, L, k, l)
                rows.append((inst, k, l, mb.lhs, mb.rhs))
                worst = max(worst, mb.lhs - mb.rhs)
                if not mb.satisfied:
                    violations.append(f"instance {inst} ({k},{l}): {mb.lhs:.12g} > {mb.rhs:.12g}")
    text = _csv_text(["instance", "k", "l", "lhs", "rhs"], rows)
    return text, f"{n} instances, max lhs - rhs = {worst:.3e}", violations


def cmd_locc(cfg: Config, cli_thetas):
    dims = [int(x) for x in cfg.get_floats("dims", [2, 2])]
    if len(dims) != 2:
        raise ConfigError("dims needs two entries", cfg.lines.get("dims"))
    dA, dB = dims
    default = np.zeros(dA * dB, dtype=complex)
    for i in range(min(dA, dB)):
        default[i * dB + i] = 1.0
    psi = cfg.get_vector("state_vector", default)
    if psi.size != dA * dB:
        raise ConfigError("state_vector length does not match dims", cfg.lines.get("state_vector"))
    psi = psi / np.linalg.norm(psi)
    basis = cfg.get_str("measurement", "computational", choices=("computational", "fourier"))
    if basis == "computational":
        B = np.eye(dB, dtype=complex)
    else:
        B = np.exp(2j * np.pi * np.outer(np.arange(dB), np.arange(dB)) / dB) / np.sqrt(dB)
    Ks = [np.outer(B[:, m], B[:, m].conj()) for m in range(dB)]
    ch = models.locc_channel([np.eye(dA)] * dB, Ks)
    rep = bounds.locc_entanglement_ft(ch, psi, (dA, dB), thetas=_thetas(cfg, cli_thetas, bounds.QFT_THETAS))
    return _json_text(rep.to_dict()), f"delta_E = {rep.quantities['delta_E']:.12g}", list(rep.violations)


def cmd_symmetry_spectrum(cfg: Config, cli_thetas):
    fam, rho = build_scenario(cfg)
    beta, omega0 = cfg.get_float("beta", 1.0), cfg.get_float("omega0", 1.0)
    n = cfg.get_int("n_theta", 256)
    span = cfg.get_float("theta_span", 4 * np.pi / (beta * omega0))
    grid = np.linspace(0.0, span, n, endpoint=False)
    psi = cfg.get_vector("psi", [1.0, 1.0])
    phi = cfg.get_vector("phi", [1.0, -1.0])
    spectrum = bounds.symmetry_diagnostic(fam, psi, phi, grid)
    dist = ep_distribution(tpm_quasiprob(fam, rho)).significant()
    allowed = np.concatenate([[0.0], dist.sigma_I, -dist.sigma_I])
    peaks = spectrum.peaks(cfg.get_float("tol", 1e-6))
    violations = []
    for f in peaks:
        if np.min(np.abs(allowed - f)) > spectrum.resolution / 2:
            violations.append(f"peak at {f:.6g} has no imaginary entropy-production atom")
    rows = [(f, a.real, a.imag, abs(a)) for f, a in zip(spectrum.frequencies, spectrum.amplitudes)]
    text = _csv_text(["frequency", "amplitude", "amplitude_imag", "magnitude"], rows)
    return text, "peaks at " + ", ".join(f"{p:.6g}" for p in peaks), violations


COMMANDS = {
    "detailed-balance": cmd_detailed_balance,
    "entropy-dist": cmd_entropy_dist,
    "crooks-check": cmd_crooks_check,
    "integral-qft": cmd_integral_qft,
    "lindblad-reverse": cmd_lindblad_reverse,
    "povm-reconstruct": cmd_povm_reconstruct,
    "covariance": cmd_covariance,
    "free-energy": cmd_free_energy,
    "asymmetry": cmd_asymmetry,
    "coherence-merge": cmd_coherence_merge,
    "locc": cmd_locc,
    "symmetry-spectrum": cmd_symmetry_spectrum,
}


# ---------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    """Argument errors are input errors and exit with status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="petzqft", description="Quantum fluctuation theorem experiments.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, metavar="PATH")
    p.add_argument("--out", metavar="PATH", help="artifact path (standard output if omitted)")
    p.add_argument("--theta", type=float, action="append", metavar="FLOAT",
                   help="rotation angle; repeat for several")
    p.add_argument("--quiet", action="store_true", help="suppress the summary line")
    return p


def run(subcommand: str, config_path, output_path=None, thetas=None, quiet: bool = False) -> int:
    try:
        cfg = load_config(config_path)
        unknown = cfg.unknown_keys(KNOWN_KEYS)
        if unknown:
            raise ConfigError(f"unknown key {unknown[0]!r}", cfg.lines[unknown[0]])
        text, summary, violations = COMMANDS[subcommand](cfg, thetas or [])
    except ValueError as exc:  # library errors (QftError) and malformed numeric input
        print(f"error: {config_path}: {exc}", file=sys.stderr)
        return 1
    if output_path is None:
        sys.stdout.write(text)
    else:
        with open(output_path, "w", newline="") as fh:
            fh.write(text)
    if not quiet:
        print(f"{subcommand}: {summary}", file=sys.stderr)
    if violations:
        report = {"status": "invariant-failure", "subcommand": subcommand, "violations": violations}
        print(json.dumps(report, sort_keys=True), file=sys.stderr)
        return 2
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(args.subcommand, args.config, args.out, args.theta, args.quiet)


if __name__ == "__main__":
    sys.exit(main())
