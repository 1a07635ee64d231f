"""Random states and channels for property tests and sweeps."""
from __future__ import annotations

import numpy as np
from scipy.stats import unitary_group

from .channels import KrausChannel, charge_components
from .matrixcore import DensityOperator


def _rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def random_unitary(d: int, rng=None) -> np.ndarray:
    if d == 1:
        return np.ones((1, 1), dtype=complex)
    return unitary_group.rvs(d, random_state=_rng(rng))


def random_density(d: int, rng=None, rank: int | None = None) -> DensityOperator:
    """Ginibre-distributed density operator of the given rank (full by default)."""
    rng = _rng(rng)
    rank = d if rank is None else rank
    G = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = G @ G.conj().T
    return DensityOperator.normalized(rho)


def random_pure(d: int, rng=None) -> np.ndarray:
    rng = _rng(rng)
    psi = rng.normal(size=d) + 1j * rng.normal(size=d)
    return psi / np.linalg.norm(psi)


def random_channel(d_in: int, d_out: int | None = None, n_kraus: int | None = None, rng=None) -> KrausChannel:
    """Channel from a Haar isometry ``d_in -> d_out * n_kraus``."""
    rng = _rng(rng)
    d_out = d_in if d_out is None else d_out
    n_kraus = d_in * d_out if n_kraus is None else n_kraus
    big = d_out * n_kraus
    if big < d_in:
        raise ValueError("d_out * n_kraus must be at least d_in")
    W = random_unitary(big, rng)[:, :d_in]
    ops = W.reshape(n_kraus, d_out, d_in)
    return KrausChannel(ops)


def random_covariant_channel(levels, n_kraus: int = 2, rng=None) -> KrausChannel:
    """Random channel covariant under ``exp(-i diag(levels) t)``, from the charge split of a Haar channel."""
    d = len(levels)
    base = random_channel(d, d, n_kraus, rng)
    ops = [part for K in base.kraus_ops for part in charge_components(K, levels)]
    return KrausChannel(np.array(ops))
