import numpy as np
import pytest

from petzqft import channels as chn
from petzqft import fluctuation as fl
from petzqft import matrixcore as mc
from petzqft import models
from petzqft.petz import RecoveryFamily
from petzqft.errors import DegenerateBackward, MissingAtom, SupportViolation
from petzqft.random import random_channel, random_density, random_pure

import oracles


@pytest.fixture
def family(rng):
    return RecoveryFamily(random_channel(3, 2, n_kraus=3, rng=rng), random_density(3, rng=rng))


def test_table_matches_oracle(rng):
    ops = oracles.rand_kraus(3, 2, 2, rng)
    gamma = oracles.rand_psd(3, rng)
    rho = oracles.rand_psd(3, rng)
    fam = RecoveryFamily(chn.KrausChannel(ops), gamma)
    table = fl.tpm_quasiprob(fam, rho).table
    assert np.abs(table - oracles.tpm_table(ops, gamma, rho)).max() < 1e-12


def test_table_marginals_and_hermiticity(family, rng):
    rho = random_density(3, rng=rng)
    q = fl.tpm_quasiprob(family, rho)
    assert abs(q.total() - 1) < 1e-12
    m = q.marginals()
    assert np.abs(m["mu"] - rho.eigenvalues).max() < 1e-12
    out = family.forward.apply(rho)
    assert np.abs(m["nu"] - out.eigenvalues).max() < 1e-12
    V = q.basis.reference.eigenvectors
    # trace preservation kills the coherent (i != j) part of this marginal
    assert np.abs(m["ij"] - np.diag(np.diag(V.conj().T @ rho.matrix @ V))).max() < 1e-12
    assert q.hermitian_defect() < 1e-13
    assert fl.table_hermitian_ok(q)


def test_backward_table_total(family, rng):
    rho = random_density(3, rng=rng)
    for theta in (0.0, 0.8):
        b = fl.backward_quasiprob(family, theta, rho)
        assert abs(b.total() - 1) < 1e-10
        assert b.hermitian_defect() < 1e-12


def test_info_exchange_values(family, rng):
    basis = fl.TransitionBasis.build(family, random_density(3, rng=rng))
    lr, lro = basis.log_r(), basis.log_r_out()
    dq = fl.info_exchange(basis, 0, 2, 1, 0)
    assert abs(dq.real - (0.5 * (lr[0] + lr[2]) - 0.5 * (lro[1] + lro[0]))) < 1e-14
    assert abs(dq.imag - (0.5 * (lr[0] - lr[2]) - 0.5 * (lro[1] - lro[0]))) < 1e-14
    assert abs(fl.info_exchange_table(basis)[0, 2, 1, 0] - dq) < 1e-14


def test_crooks_relation(family, rng):
    rho = random_density(3, rng=rng)
    fwd = fl.ep_distribution(fl.tpm_quasiprob(family, rho))
    for theta in (0.0, 0.45, -1.3):
        bwd = fl.backward_ep_distribution(family, theta, rho)
        rep = fl.crooks_check(fwd, bwd, theta)
        assert rep.n_checked > 10
        assert rep.max_violation < 1e-8


def test_crooks_missing_atom():
    fwd = fl.EpDistribution(np.array([0.3 + 0j]), np.array([0.5 + 0j]))
    bwd = fl.EpDistribution(np.array([1.0 + 0j]), np.array([0.5 + 0j]))
    with pytest.raises(MissingAtom):
        fl.crooks_check(fwd, bwd, 0.0)


@pytest.mark.parametrize("rank", [3, 2, 1])
def test_integral_qft_equals_kappa(family, rng, rank):
    rho = random_density(3, rng=rng, rank=rank)
    dist = fl.ep_distribution(fl.tpm_quasiprob(family, rho))
    for theta in (0.0, 1.0, -2.5):
        lhs, k = fl.integral_qft(family, rho, theta, dist)
        assert abs(lhs - k) < 1e-9
    if rank == 3:
        assert abs(fl.kappa(family, rho, 0.7) - 1) < 1e-10
    else:
        assert fl.kappa(family, rho, 0.0) < 1


def test_mean_entropy_production_is_relative_entropy_drop(family, rng):
    rho = random_density(3, rng=rng)
    mean_R, mean_I = fl.mean_entropy_production(family, rho)
    assert abs(mean_R - fl.relative_entropy_difference(family, rho)) < 1e-10
    assert abs(mean_I) < 1e-12
    assert mean_R >= -1e-12


def test_thermal_jc_has_real_entropy_production(jc_cfg, thermal_channel, coherent_channel):
    gamma = models.gamma_atom(jc_cfg)
    rho = models.mixed_plus_state()
    th = fl.ep_distribution(fl.tpm_quasiprob(RecoveryFamily(thermal_channel, gamma), rho)).significant()
    # weight sitting at non-zero imaginary entropy production vanishes for the covariant channel
    off = np.abs(th.sigma_I) > 1e-6
    assert np.abs(th.weights[off]).sum() < 1e-8
    co = fl.ep_distribution(fl.tpm_quasiprob(RecoveryFamily(coherent_channel, gamma), rho)).significant()
    assert np.abs(co.weights[np.abs(co.sigma_I) > 1e-6]).sum() > 1e-3


def test_detailed_balance_ratio(family, rng):
    psi = random_pure(3, rng=rng)
    phi = random_pure(2, rng=rng)
    db = fl.detailed_balance_ratio(family, psi, phi)
    assert abs(db.ratio / db.rhs - 1) < 1e-10


def test_detailed_balance_degenerate():
    fam = RecoveryFamily(chn.identity_channel(2), np.diag([0.6, 0.4]))
    with pytest.raises(DegenerateBackward):
        fl.detailed_balance_ratio(fam, [1, 0], [0, 1])


def test_rescaled_vector(rng):
    gamma = mc.DensityOperator(np.diag([0.8, 0.2]))
    v = fl.rescaled_vector(gamma, np.array([1, 1]) / np.sqrt(2))
    assert np.abs(v - np.array([1, 2]) / np.sqrt(5)).max() < 1e-14
    with pytest.raises(SupportViolation):
        fl.rescaled_vector(mc.DensityOperator(np.diag([1.0, 0.0])), np.array([0, 1]))
    with pytest.raises(ValueError):
        fl.rescaled_vector(gamma, np.array([1, 1]))


def test_upsilon_examples():
    H = np.diag([-0.5, 0.5])
    # energy eigenstates give exactly one
    assert abs(fl.upsilon(H, 1.0, [1, 0], [0, 1]) - 1) < 1e-14
    plus = np.array([1, 1]) / np.sqrt(2)
    assert abs(fl.upsilon(H, 1.0, plus, plus) - np.cosh(0.5) ** 2) < 1e-14
    # high temperature: Upsilon = 1 + O(beta^2)
    vals = [fl.upsilon(H, b, plus, [1, 0]) - 1 for b in (1e-2, 5e-3)]
    assert abs(vals[0] / vals[1] - 4) < 0.05


def test_bin_atoms():
    vals = np.array([0.0, 1e-12, 1.0 + 1j, 1.0 + 1j + 1e-13, 1.0 - 1j])
    w = np.array([0.1, 0.2, 0.3, 0.1, 0.3])
    atoms, ws = fl.bin_atoms(vals, w)
    assert len(atoms) == 3
    got = {complex(np.round(a, 6)): complex(x) for a, x in zip(atoms, ws)}
    assert abs(got[0j] - 0.3) < 1e-15
    assert abs(got[1 + 1j] - 0.4) < 1e-15
    assert abs(got[1 - 1j] - 0.3) < 1e-15
    empty = fl.bin_atoms(np.array([]), np.array([]))
    assert empty[0].size == 0


def test_distribution_helpers():
    d = fl.EpDistribution(np.array([0.5 + 0.25j, 0.5 - 0.25j, -1 + 0j]), np.array([0.3 + 0.1j, 0.3 - 0.1j, 0.4]))
    assert abs(d.total() - 1) < 1e-15
    assert abs(d.mean_R() - (0.3 - 0.4)) < 1e-15
    assert abs(d.lookup(0.5 + 0.25j) - (0.3 + 0.1j)) < 1e-15
    assert d.lookup(7 + 0j) is None
    atoms, w = d.real_marginal()
    assert np.allclose(sorted(atoms), [-1, 0.5])
