"""End-to-end acceptance checks, one test per criterion.

Each test records a one-line PASS/FAIL summary in ``ACCEPTANCE_RESULTS``
(printed at the end of the run by conftest) before asserting.
"""
import time
from dataclasses import replace

import numpy as np

from conftest import ACCEPTANCE_RESULTS
from petzqft import bounds, lindblad, models, petz, povm
from petzqft import fluctuation as fl
from petzqft import matrixcore as mc
from petzqft.petz import RecoveryFamily
from petzqft.random import random_channel, random_covariant_channel, random_density

UPSILON_EXACT = np.cosh(0.5) ** 2
PLUS = np.array([1.0, 1.0]) / np.sqrt(2)
MINUS = np.array([1.0, -1.0]) / np.sqrt(2)


def record(n, ok, detail):
    ACCEPTANCE_RESULTS[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    return ok


def test_criterion_1_upsilon():
    start = time.perf_counter()
    base = models.JcConfig(beta=1.0, omega0=1.0)
    taus = np.linspace(base.tau / 20, base.tau, 20)
    gamma = models.gamma_atom(base)
    worst = 0.0
    for g in (0.05, 0.1):
        for noise in (0.0, 0.1):
            cfg = replace(base, g=g, gamma_noise=noise)
            if noise > 0:
                chans = models.jc_noisy_channels(cfg, taus, dt=1e-2)
            else:
                chans = [models.jc_channel(cfg, "thermal", tau=t) for t in taus]
            for ch in chans:
                ratio = fl.detailed_balance_ratio(RecoveryFamily(ch, gamma), PLUS, MINUS).ratio
                worst = max(worst, abs(ratio - UPSILON_EXACT))
    ups = fl.upsilon(models.atom_hamiltonian(base), 1.0, PLUS, MINUS)
    elapsed = time.perf_counter() - start
    ok = worst < 1e-6 and abs(ups - UPSILON_EXACT) < 1e-12 and round(ups, 2) == 1.27 and elapsed < 60
    record(1, ok, f"max |ratio - cosh^2(1/2)| = {worst:.2e} over 80 channels, Upsilon = {ups:.10f}, {elapsed:.1f} s")
    assert ok


def _log_ratio_residual(rep, theta):
    worst = 0.0
    for s, wf, wb, lr in rep.points:
        target = s.real - 2j * theta * s.imag
        diff = lr - target
        # the logarithm's phase is only defined modulo 2 pi
        phase = (diff.imag + np.pi) % (2 * np.pi) - np.pi
        worst = max(worst, abs(complex(diff.real, phase)))
    return worst


def test_criterion_2_crooks():
    start = time.perf_counter()
    cfg = models.JcConfig()
    gamma = models.gamma_atom(cfg)
    rho = models.mixed_plus_state()
    results = {}
    for bath, thetas in (("thermal", (0.0,)), ("coherent_gibbs", (0.0, 0.7))):
        fam = RecoveryFamily(models.jc_channel(cfg, bath), gamma)
        fwd = fl.ep_distribution(fl.tpm_quasiprob(fam, rho))
        for theta in thetas:
            bwd = fl.backward_ep_distribution(fam, theta, rho)
            rep = fl.crooks_check(fwd, bwd, theta, threshold=1e-10)
            results[(bath, theta)] = (_log_ratio_residual(rep, theta), rep.n_checked)
    elapsed = time.perf_counter() - start
    worst = max(r for r, _ in results.values())
    ok = worst < 1e-6 and all(n > 0 for _, n in results.values()) and elapsed < 120
    detail = ", ".join(f"{b}@{t:g}: {r:.1e} ({n} atoms)" for (b, t), (r, n) in results.items())
    record(2, ok, f"max log-ratio residual {worst:.2e} [{detail}], {elapsed:.1f} s")
    assert ok


def test_criterion_3_negativity_and_sigma_I():
    cfg = models.JcConfig()
    gamma = models.gamma_atom(cfg)
    rho = models.mixed_plus_state()
    coh = fl.ep_distribution(fl.tpm_quasiprob(RecoveryFamily(models.jc_channel(cfg, "coherent_gibbs"), gamma), rho))
    th = fl.ep_distribution(fl.tpm_quasiprob(RecoveryFamily(models.jc_channel(cfg, "thermal"), gamma), rho))
    allowed = np.array([0.0, 0.5, -0.5, 1.0, -1.0]) * cfg.beta * cfg.omega0
    sig = coh.significant()
    grid_dev = max(float(np.min(np.abs(allowed - s))) for s in sig.sigma_I)
    most_negative = float(coh.weights.real.min())
    th_min = float(th.weights.real.min())
    th_sigma_I = float(np.max(np.abs(th.significant().sigma_I)))
    ok = most_negative < -1e-4 and grid_dev < 1e-8 and th_min >= -1e-10 and th_sigma_I < 1e-8
    levels = sorted({round(float(s), 6) for s in sig.sigma_I})
    record(3, ok, f"coherent min weight {most_negative:.4f}, sigma_I levels {levels} (off-grid {grid_dev:.1e}); "
                  f"thermal min weight {th_min:.1e}, max |sigma_I| {th_sigma_I:.1e}")
    assert ok


def test_criterion_4_integral_qft():
    start = time.perf_counter()
    rng = np.random.default_rng(4)
    thetas = (0.0, 1.0, -2.5)
    worst_full = worst_mean_I = 0.0
    min_mean_R = np.inf
    for _ in range(1000):
        d_in, d_out = (int(x) for x in rng.integers(2, 5, size=2))
        n_kraus = int(rng.integers(-(-d_in // d_out), 5))
        fam = RecoveryFamily(random_channel(d_in, d_out, n_kraus, rng), random_density(d_in, rng))
        rho = random_density(d_in, rng)
        dist = fl.ep_distribution(fl.tpm_quasiprob(fam, rho))
        for t in thetas:
            lhs = dist.expect(lambda s: np.exp(-s.real + 1j * t * s.imag))
            worst_full = max(worst_full, abs(lhs - 1))
        min_mean_R = min(min_mean_R, dist.mean_R())
        worst_mean_I = max(worst_mean_I, abs(dist.mean_I()))
    worst_def, max_kappa = 0.0, -np.inf
    for _ in range(200):
        d = int(rng.integers(2, 5))
        fam = RecoveryFamily(random_channel(d, int(rng.integers(2, 5)), 2, rng), random_density(d, rng))
        rho = random_density(d, rng, rank=int(rng.integers(1, d)))
        dist = fl.ep_distribution(fl.tpm_quasiprob(fam, rho))
        for t in thetas:
            lhs, k = fl.integral_qft(fam, rho, t, dist)
            worst_def = max(worst_def, abs(lhs - k))
            max_kappa = max(max_kappa, k)
    elapsed = time.perf_counter() - start
    ok = (worst_full < 1e-7 and min_mean_R >= -1e-9 and worst_mean_I < 1e-9
          and worst_def < 1e-7 and max_kappa <= 1 + 1e-12 and elapsed < 300)
    record(4, ok, f"full rank: max |lhs - 1| {worst_full:.1e}, min <sigma_R> {min_mean_R:.1e}, "
                  f"max |<sigma_I>| {worst_mean_I:.1e}; rank-deficient: max |lhs - kappa| {worst_def:.1e}, "
                  f"max kappa {max_kappa:.6f}; {elapsed:.1f} s")
    assert ok


def test_criterion_5_resource_losses():
    start = time.perf_counter()
    cfg = replace(models.JcConfig(), gamma_noise=0.1)
    ch = models.jc_noisy_channel(cfg, dt=1e-3)
    rho = models.mixed_plus_state()
    H = models.atom_hamiltonian(cfg)
    fe = bounds.free_energy_ft(ch, rho, cfg.beta, H)
    asym = bounds.asymmetry_ft(ch, rho, H)
    dF, dC = fe.quantities["delta_F"], asym.quantities["delta_C"]
    qft = max(abs(fe.kappa_by_theta[0.0][0] - 1), abs(asym.kappa_by_theta[0.0][0] - 1))
    elapsed = time.perf_counter() - start
    rel_F, rel_C = abs(dF / -0.233 - 1), abs(dC / -0.115 - 1)
    ok = rel_F <= 0.05 and rel_C <= 0.05 and qft < 1e-6 and fe.ok and asym.ok and elapsed < 600
    record(5, ok, f"delta_F = {dF:.5f} ({rel_F:.1%} from -0.233), delta_C = {dC:.5f} ({rel_C:.1%} from -0.115), "
                  f"max |QFT - 1| {qft:.1e}, {elapsed:.1f} s")
    assert ok


def test_criterion_6_reverse_lindblad():
    gen, rho0 = models.driven_qubit()
    err = lindblad.reverse_recovery_check(gen, rho0, 1.0, dt=1e-4)
    errs = [lindblad.infinitesimal_petz_error(gen, rho0, 1e-2 / 2 ** m) for m in range(3)]
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    ok = err < 1e-4 and all(3.5 <= r <= 4.5 for r in ratios)
    record(6, ok, f"reverse error {err:.1e}, Petz Choi error halving ratios {', '.join(f'{r:.4f}' for r in ratios)}")
    assert ok


def _reconstruction_error(fam, rho, theta=None):
    direct = fl.tpm_quasiprob(fam, rho)
    first, second = povm.build_povms(direct.basis)
    dist = povm.two_point_distribution(fam.forward, rho, first, second)
    err = float(np.max(np.abs(povm.reconstruct_quasiprob(dist, direct.basis).table - direct.table)))
    if theta is not None:
        bd = povm.backward_two_point_distribution(fam, theta, rho, first, second)
        rec = povm.reconstruct_quasiprob(bd, direct.basis)
        err = max(err, float(np.max(np.abs(rec.table - fl.backward_quasiprob(fam, theta, rho).table))))
    return err


def test_criterion_7_povm_reconstruction():
    cfg = models.JcConfig()
    fam = RecoveryFamily(models.jc_channel(cfg, "coherent_gibbs"), models.gamma_atom(cfg))
    jc_err = _reconstruction_error(fam, models.mixed_plus_state(), theta=0.7)
    rng = np.random.default_rng(7)
    rand_err = 0.0
    for d in (2, 3):
        for _ in range(100):
            fam = RecoveryFamily(random_channel(d, d, int(rng.integers(1, 4)), rng), random_density(d, rng))
            rand_err = max(rand_err, _reconstruction_error(fam, random_density(d, rng)))
    ok = jc_err < 1e-8 and rand_err < 1e-8
    record(7, ok, f"coherent-bath JC error {jc_err:.1e} (forward and backward at 0.7), "
                  f"200 random dim-2/3 channels max error {rand_err:.1e}")
    assert ok


def _qubit_fixed_point(ch):
    # covariant qubit channels map diagonal states to diagonal states
    T = np.abs(ch.kraus_ops) ** 2
    T = T.sum(axis=0)
    w, V = np.linalg.eig(T)
    p = np.real(V[:, np.argmin(np.abs(w - 1))])
    return np.diag(p / p.sum())


def test_criterion_8_reversibility():
    rng = np.random.default_rng(8)
    worst_gap = np.inf
    for _ in range(500):
        d = int(rng.integers(2, 4))
        fam = RecoveryFamily(random_channel(d, d, int(rng.integers(1, 4)), rng), random_density(d, rng))
        rho = random_density(d, rng)
        mean_R = fl.ep_distribution(fl.tpm_quasiprob(fam, rho)).mean_R()
        Fbar = mc.fidelity(rho, petz.averaged_recovery(fam, fam.forward.apply(rho)))
        worst_gap = min(worst_gap, mean_R + np.log(Fbar))
    bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
    locc = models.locc_channel([np.eye(2), np.eye(2)], [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])
    rep = bounds.locc_entanglement_ft(locc, bell, (2, 2))
    dE = rep.quantities["delta_E"]
    theta_dev = 0.0
    instances = []
    for _ in range(20):
        ch = random_covariant_channel([0.0, 1.0], n_kraus=3, rng=rng)
        instances.append((ch, _qubit_fixed_point(ch)))
    jc = models.JcConfig()
    instances.append((models.jc_channel(jc, "thermal"), models.gamma_atom(jc).matrix))
    for ch, gamma in instances:
        fam = RecoveryFamily(ch, gamma)
        J0 = petz.petz(fam).choi()
        for t in (0.3, 1.0, -2.5, 6.0):
            theta_dev = max(theta_dev, float(np.max(np.abs(petz.rotated_petz(fam, t).choi() - J0))))
    ok = (worst_gap >= -1e-9 and abs(dE + np.log(2)) < 1e-9 and dE <= np.log(rep.averaged_fidelity) + 1e-9
          and theta_dev < 1e-8)
    record(8, ok, f"min(<sigma_R> + log Fbar) over 500 = {worst_gap:.2e}; Bell delta_E = {dE:.12f}, "
                  f"log Fbar = {np.log(rep.averaged_fidelity):.6f}; covariant theta deviation {theta_dev:.1e}")
    assert ok


def test_criterion_9_coherence_merging():
    rng = np.random.default_rng(9)
    worst, n_checks, n_instances = -np.inf, 0, 0
    for levels in ([0.0, 1.0], [0.0, 1.0, 2.0], [0.0, 1.0, 3.0]):
        d = len(levels)
        L = np.diag(levels)
        count = 400 if d == 2 else 300
        for _ in range(count):
            ch = random_covariant_channel(levels, n_kraus=int(rng.integers(1, 4)), rng=rng)
            r = rng.random(d) + 0.05
            gamma = np.diag(r / r.sum())
            rho = random_density(d, rng)
            for k in range(d):
                for l in range(d):
                    if k != l:
                        mb = bounds.coherence_merging_bound(ch, rho, gamma, L, k, l)
                        worst = max(worst, mb.lhs - mb.rhs)
                        n_checks += 1
            n_instances += 1
    ok = worst <= 1e-9
    record(9, ok, f"{n_instances} covariant qubit/qutrit instances, {n_checks} coherences, "
                  f"max(lhs - rhs) = {worst:.2e}")
    assert ok
