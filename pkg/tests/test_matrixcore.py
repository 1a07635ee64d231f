import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from petzqft import matrixcore as mc
from petzqft.errors import DimensionMismatch, InvalidState, NotHermitian, SupportViolation

import oracles


def test_herm_eig_descending_and_reconstructs(rng):
    A = oracles.rand_psd(4, rng)
    sd = mc.herm_eig(A)
    assert np.all(np.diff(sd.eigenvalues) <= 0)
    assert np.abs(sd.reconstruct() - A).max() < 1e-12


def test_herm_eig_pauli_x():
    sd = mc.herm_eig(np.array([[0, 1], [1, 0]]))
    assert np.abs(sd.eigenvalues - [1, -1]).max() < 1e-14


def test_herm_eig_rejects_non_hermitian():
    with pytest.raises(NotHermitian):
        mc.herm_eig(np.array([[0, 1], [0, 0]]))
    with pytest.raises(DimensionMismatch):
        mc.herm_eig(np.zeros((2, 3)))


def test_mat_pow_examples():
    D = np.diag([0.25, 0.0, 1.0])
    assert np.abs(mc.mat_pow(D, 0.5) - np.diag([0.5, 0, 1])).max() < 1e-14
    # zero power is the support projector, negative powers act on the support only
    assert np.abs(mc.mat_pow(D, 0) - np.diag([1, 0, 1])).max() < 1e-14
    assert np.abs(mc.mat_pow(D, -1) - np.diag([4, 0, 1])).max() < 1e-14
    assert np.abs(mc.mat_pow(D, 1j) - np.diag([np.exp(1j * np.log(0.25)), 0, 1])).max() < 1e-14


def test_mat_pow_matches_expm_logm(rng):
    A = oracles.rand_psd(3, rng)
    for alpha in (0.5, -0.5 + 0.7j, 1.3j):
        assert np.abs(mc.mat_pow(A, alpha) - oracles.complex_power(A, alpha)).max() < 1e-10


def test_mat_log_and_support_projector():
    D = np.diag([np.e, 0.0])
    assert np.abs(mc.mat_log(D) - np.diag([1, 0])).max() < 1e-14
    assert np.abs(mc.support_projector(D) - np.diag([1, 0])).max() < 1e-14


def _psd(seed, d):
    return oracles.rand_psd(d, np.random.default_rng(seed))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 5),
       st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_mat_pow_group_law(seed, d, a, b, c, e):
    A = _psd(seed, d)
    alpha, beta = a + 1j * b, c + 1j * e
    lhs = mc.mat_pow(A, alpha) @ mc.mat_pow(A, beta)
    rhs = mc.mat_pow(A, alpha + beta)
    scale = max(1.0, np.abs(rhs).max())
    assert np.abs(lhs - rhs).max() < 1e-7 * scale


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 5), st.floats(-3, 3))
def test_imaginary_power_is_unitary_on_support(seed, d, t):
    A = _psd(seed, d)
    U = mc.mat_pow(A, 1j * t)
    assert np.abs(U @ U.conj().T - np.eye(d)).max() < 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 4), st.integers(1, 3))
def test_rank_deficient_power_stays_on_support(seed, d, rank):
    rank = min(rank, d - 1)
    A = oracles.rand_psd(d, np.random.default_rng(seed), rank=rank)
    P = mc.support_projector(A)
    assert abs(np.trace(P).real - rank) < 1e-9
    X = mc.mat_pow(A, -0.5 + 0.3j)
    assert np.abs(P @ X @ P - X).max() < 1e-8 * max(1.0, np.abs(X).max())


def test_tensor_and_partial_trace(rng):
    A = oracles.rand_psd(2, rng)
    B = oracles.rand_psd(3, rng)
    C = oracles.rand_psd(2, rng)
    ABC = mc.tensor(A, B, C)
    assert ABC.shape == (12, 12)
    assert np.abs(mc.partial_trace(ABC, [2, 3, 2], keep=1) - B).max() < 1e-13
    assert np.abs(mc.partial_trace(ABC, [2, 3, 2], keep=[0, 2]) - np.kron(A, C)).max() < 1e-13
    X = oracles.rand_psd(6, rng)
    assert np.abs(mc.partial_trace(X, [2, 3], keep=0) - oracles.partial_trace_second(X, 2, 3)).max() < 1e-13
    with pytest.raises(DimensionMismatch):
        mc.partial_trace(X, [2, 2], keep=0)
    with pytest.raises(DimensionMismatch):
        mc.partial_trace(X, [2, 3], keep=2)


def test_density_operator_validation():
    with pytest.raises(InvalidState):
        mc.DensityOperator(np.diag([1.1, -0.1]))
    with pytest.raises(InvalidState):
        mc.DensityOperator(np.diag([0.6, 0.6]))
    # tiny negative eigenvalues are clamped
    rho = mc.DensityOperator(np.diag([1 + 1e-12, -1e-12]))
    assert rho.eigenvalues.min() >= 0
    assert rho.support_rank == 1 and not rho.is_full_rank
    rho = mc.DensityOperator.normalized(np.diag([2.0, 2.0]))
    assert np.abs(rho.matrix - np.eye(2) / 2).max() < 1e-15


def test_fidelity_and_entropy_match_oracles(rng):
    rho = oracles.rand_psd(3, rng)
    sigma = oracles.rand_psd(3, rng)
    assert abs(mc.fidelity(rho, sigma) - oracles.fidelity(rho, sigma)) < 1e-9
    assert abs(mc.fidelity(rho, rho) - 1) < 1e-10
    assert abs(mc.relative_entropy(rho, sigma) - oracles.relative_entropy(rho, sigma)) < 1e-9
    assert abs(mc.von_neumann_entropy(rho) - oracles.entropy(rho)) < 1e-12
    assert abs(mc.von_neumann_entropy(np.eye(4) / 4) - np.log(4)) < 1e-14


def test_fidelity_pure_states():
    psi = np.array([1, 1j]) / np.sqrt(2)
    rho = mc.DensityOperator.from_vector(psi)
    sigma = mc.DensityOperator(np.diag([1.0, 0.0]))
    assert abs(mc.fidelity(rho, sigma) - 0.5) < 1e-12


def test_relative_entropy_support_violation():
    rho = np.eye(2) / 2
    gamma = np.diag([1.0, 0.0])
    with pytest.raises(SupportViolation):
        mc.relative_entropy(rho, gamma)
    # the reverse direction is finite: log 2
    assert abs(mc.relative_entropy(gamma, rho) - np.log(2)) < 1e-13
