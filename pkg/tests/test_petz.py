import numpy as np
import pytest

from petzqft import channels as chn
from petzqft import matrixcore as mc
from petzqft import petz
from petzqft.errors import DimensionMismatch, RankDeficientReference
from petzqft.random import random_channel, random_density, random_unitary

import oracles


def _gad(p=0.7, g=0.4):
    a, b = np.sqrt(1 - g), np.sqrt(g)
    return chn.KrausChannel(np.array([
        np.sqrt(p) * np.array([[1, 0], [0, a]]),
        np.sqrt(p) * np.array([[0, b], [0, 0]]),
        np.sqrt(1 - p) * np.array([[a, 0], [0, 1]]),
        np.sqrt(1 - p) * np.array([[0, 0], [b, 0]]),
    ]))


def test_rotated_petz_recovers_reference(rng):
    ch = random_channel(3, 2, rng=rng)
    gamma = random_density(3, rng=rng)
    fam = petz.RecoveryFamily(ch, gamma)
    for theta in (0.0, 0.6, -2.1):
        R = petz.rotated_petz(fam, theta)
        assert R.tp_defect() < 1e-10
        assert np.abs(R.apply_matrix(fam.evolved_reference.matrix) - gamma.matrix).max() < 1e-10


def test_rotated_petz_matches_oracle(rng):
    ops = oracles.rand_kraus(3, 3, 2, rng)
    gamma = oracles.rand_psd(3, rng)
    fam = petz.RecoveryFamily(chn.KrausChannel(ops), gamma)
    X = oracles.rand_psd(3, rng)
    for theta in (0.0, 0.35, -1.7):
        got = petz.rotated_petz(fam, theta).apply_matrix(X)
        assert np.abs(got - oracles.rotated_petz_apply(ops, gamma, theta, X)).max() < 1e-9


def test_rotated_petz_is_cp(rng):
    fam = petz.RecoveryFamily(random_channel(2, 3, rng=rng), random_density(2, rng=rng))
    J = petz.rotated_petz(fam, 0.9).choi()
    assert mc.herm_eig(J).eigenvalues[-1] > -1e-12


def test_rank_deficient_output_is_completed(rng):
    # a channel onto a qubit embedded in a qutrit: N(gamma) has rank 2
    V = np.zeros((3, 2))
    V[0, 0] = V[1, 1] = 1
    ch = chn.KrausChannel(V[None])
    gamma = random_density(2, rng=rng)
    fam = petz.RecoveryFamily(ch, gamma)
    assert fam.evolved_reference.support_rank == 2
    R = petz.petz(fam)
    assert R.tp_defect() < 1e-10
    rho = random_density(2, rng=rng)
    # perfect recovery of an isometry on its range
    assert np.abs(R.apply_matrix(ch.apply_matrix(rho.matrix)) - rho.matrix).max() < 1e-10
    # a state outside the range is sent to gamma
    out = R.apply_matrix(np.diag([0, 0, 1.0]))
    assert np.abs(out - gamma.matrix).max() < 1e-10


def test_rank_deficient_reference_rejected():
    with pytest.raises(RankDeficientReference):
        petz.RecoveryFamily(chn.identity_channel(2), np.diag([1.0, 0.0]))
    fam = petz.RecoveryFamily(chn.identity_channel(2), petz.regularize(np.diag([1.0, 0.0])))
    assert fam.reference.is_full_rank
    with pytest.raises(DimensionMismatch):
        petz.RecoveryFamily(chn.identity_channel(2), np.eye(3) / 3)


def test_unitary_channel_recovery_is_inverse(rng):
    U = random_unitary(3, rng=rng)
    fam = petz.RecoveryFamily(chn.unitary_channel(U), random_density(3, rng=rng))
    rho = random_density(3, rng=rng)
    for theta in (0.0, 1.2):
        out = petz.rotated_petz(fam, theta).apply_matrix(U @ rho.matrix @ U.conj().T)
        assert np.abs(out - rho.matrix).max() < 1e-10
    assert abs(petz.recovery_fidelity(fam, rho, 0.4) - 1) < 1e-10


def test_covariant_channel_gives_theta_independent_recovery():
    ch = _gad()
    gamma = np.diag([0.7, 0.3])
    fam = petz.RecoveryFamily(ch, gamma)
    J0 = petz.petz(fam).choi()
    for theta in (0.5, -3.0, 7.1):
        assert np.abs(petz.rotated_petz(fam, theta).choi() - J0).max() < 1e-12


def test_generic_channel_recovery_depends_on_theta(rng):
    fam = petz.RecoveryFamily(random_channel(2, rng=rng), random_density(2, rng=rng))
    J0 = petz.petz(fam).choi()
    assert np.abs(petz.rotated_petz(fam, 1.0).choi() - J0).max() > 1e-4


def test_g0_density():
    from scipy.integrate import quad

    total, _ = quad(petz.g0, -np.inf, np.inf)
    assert abs(total - 1) < 1e-10
    assert abs(petz.g0(0.0) - np.pi / 4) < 1e-15
    assert abs(petz.g0_mass() - 1) < 1e-6
    nodes, w, raw = petz.g0_quadrature()
    assert abs(w.sum() - 1) < 1e-14 and abs(raw - 1) < 1e-6
    with pytest.raises(ValueError):
        petz.g0_quadrature(5.0)
    with pytest.raises(ValueError):
        petz.g0_quadrature(12.0, 240)


def test_averaged_recovery_is_cptp_and_recovers_reference(rng):
    fam = petz.RecoveryFamily(random_channel(2, rng=rng), random_density(2, rng=rng))
    Rbar = petz.averaged_recovery_channel(fam, n_nodes=121)
    assert Rbar.tp_defect() < 1e-10
    assert np.abs(Rbar.apply_matrix(fam.evolved_reference.matrix) - fam.reference.matrix).max() < 1e-10
    rho = random_density(2, rng=rng)
    direct = petz.averaged_recovery(fam, fam.forward.apply(rho), n_nodes=121)
    assert np.abs(direct.matrix - Rbar.apply_matrix(fam.forward.apply_matrix(rho.matrix))).max() < 1e-12
    F, logF = petz.averaged_fidelity(fam, rho, n_nodes=121)
    assert 0 < F <= 1 and logF <= np.log(F) + 1e-12
