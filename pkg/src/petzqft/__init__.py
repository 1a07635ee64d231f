"""Quantum fluctuation theorems for finite-dimensional channels via rotated Petz recovery maps."""
from .bounds import (
    ResourceReport,
    asymmetry_ft,
    coherence_merging_bound,
    free_energy_ft,
    locc_entanglement_ft,
    reversibility_check,
    symmetry_diagnostic,
)
from .channels import KrausChannel
from .errors import QftError
from .fluctuation import (
    EpDistribution,
    TpmQuasiProb,
    backward_ep_distribution,
    crooks_check,
    detailed_balance_ratio,
    ep_distribution,
    integral_qft,
    tpm_quasiprob,
    upsilon,
)
from .lindblad import LindbladGenerator, evolve, reverse_generator, reverse_recovery_check
from .matrixcore import DensityOperator, fidelity, relative_entropy
from .petz import RecoveryFamily, averaged_recovery, rotated_petz
from .povm import build_povms, reconstruct_quasiprob, two_point_distribution

__version__ = "0.1.0"

__all__ = [
    "DensityOperator",
    "EpDistribution",
    "KrausChannel",
    "LindbladGenerator",
    "QftError",
    "RecoveryFamily",
    "ResourceReport",
    "TpmQuasiProb",
    "asymmetry_ft",
    "averaged_recovery",
    "backward_ep_distribution",
    "build_povms",
    "coherence_merging_bound",
    "crooks_check",
    "detailed_balance_ratio",
    "ep_distribution",
    "evolve",
    "fidelity",
    "free_energy_ft",
    "integral_qft",
    "locc_entanglement_ft",
    "reconstruct_quasiprob",
    "relative_entropy",
    "reverse_generator",
    "reverse_recovery_check",
    "reversibility_check",
    "rotated_petz",
    "symmetry_diagnostic",
    "tpm_quasiprob",
    "two_point_distribution",
    "upsilon",
]
