"""Fast-forward scaling of quantum dynamics in finite-dimensional Hilbert spaces."""

from ._backend import BACKEND
from .dynamics import TimeDependentOperator, TimeGrid, Trajectory, evolve, fidelity, population
from .errors import (
    BranchLossError,
    ContractViolation,
    DegenerateSpectrumError,
    FFScalingError,
    InfeasibleError,
    IntegrationQualityError,
    InvalidBasisError,
    InvalidDimensionError,
    InvalidProtocolError,
    OutOfDomainError,
    VanishingFieldError,
)
from .ffscale import (
    AccelerationPotential,
    MagnificationProtocol,
    PhaseTrajectory,
    ScalingMap,
    detect_singularity,
    ff_hamiltonian,
    gauge_eliminate,
    magnification,
    residual_potential,
    scaling_map,
    solve_phase_condition,
    synthesize_potential,
)
from .qcore import (
    DiagonalObservableBasis,
    SpectralDecomposition,
    diagonal_phase_unitary,
    kron,
    pauli,
    spectral_decompose,
    standard_diagonal_basis,
)

__version__ = "0.1.0"

__all__ = [
    "AccelerationPotential",
    "BACKEND",
    "BranchLossError",
    "ContractViolation",
    "DegenerateSpectrumError",
    "DiagonalObservableBasis",
    "FFScalingError",
    "InfeasibleError",
    "IntegrationQualityError",
    "InvalidBasisError",
    "InvalidDimensionError",
    "InvalidProtocolError",
    "MagnificationProtocol",
    "OutOfDomainError",
    "PhaseTrajectory",
    "ScalingMap",
    "SpectralDecomposition",
    "TimeDependentOperator",
    "TimeGrid",
    "Trajectory",
    "VanishingFieldError",
    "detect_singularity",
    "diagonal_phase_unitary",
    "evolve",
    "ff_hamiltonian",
    "fidelity",
    "gauge_eliminate",
    "kron",
    "magnification",
    "pauli",
    "population",
    "residual_potential",
    "scaling_map",
    "solve_phase_condition",
    "spectral_decompose",
    "standard_diagonal_basis",
    "synthesize_potential",
    "__version__",
]
