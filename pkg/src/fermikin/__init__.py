"""Fermionic master equations with Pauli blocking.

Density matrices are dense complex ``numpy`` arrays in the eigenbasis of the
unperturbed Hamiltonian; rate tables use the ``omega[to][from]`` orientation.
"""
from fermikin._backend import BACKEND
from fermikin.core import (
    ConstantDrive,
    HamiltonianSpec,
    NoDrive,
    OrbitalBasis,
    PiecewiseDrive,
    RateTable,
    SinusoidalDrive,
    density_from_occupations,
    eigvalsh,
    evaluate_hamiltonian,
    hermitize,
    is_admissible,
    random_admissible,
    spectral_bounds,
    sup_norm,
)
from fermikin.errors import (
    ConfigurationError,
    ContractViolation,
    DimensionMismatch,
    FermikinError,
    IntegrationDiverged,
    PicardNotConverged,
    StructureViolation,
)
from fermikin.generators import (
    build_A1,
    build_A2,
    fermion_rhs,
    gain_factor,
    general_rhs,
    jump_ops_from_rates,
    lindblad_fermion_rhs,
    lindblad_rhs,
    loss_factor,
    markoff_rhs,
    transition_bound_M,
)
from fermikin.integrators import (
    FermionModel,
    IntegrationConfig,
    Trajectory,
    duhamel_apply,
    integrate_picard,
    integrate_rk4,
    propagate_K,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConstantDrive",
    "HamiltonianSpec",
    "NoDrive",
    "OrbitalBasis",
    "PiecewiseDrive",
    "RateTable",
    "SinusoidalDrive",
    "density_from_occupations",
    "eigvalsh",
    "evaluate_hamiltonian",
    "hermitize",
    "is_admissible",
    "random_admissible",
    "spectral_bounds",
    "sup_norm",
    "ConfigurationError",
    "ContractViolation",
    "DimensionMismatch",
    "FermikinError",
    "IntegrationDiverged",
    "PicardNotConverged",
    "StructureViolation",
    "build_A1",
    "build_A2",
    "fermion_rhs",
    "gain_factor",
    "general_rhs",
    "jump_ops_from_rates",
    "lindblad_fermion_rhs",
    "lindblad_rhs",
    "loss_factor",
    "markoff_rhs",
    "transition_bound_M",
    "FermionModel",
    "IntegrationConfig",
    "Trajectory",
    "duhamel_apply",
    "integrate_picard",
    "integrate_rk4",
    "propagate_K",
    "__version__",
]
