"""Structure-preserving simulation of hyperelastic mass-spring networks.

Finite-dimensional nonlinear elastodynamics in port-Hamiltonian form with an
implicit midpoint discrete-gradient integrator: energy, angular momentum
about the gravity axis, and the strain-kinematic relation are preserved to
solver precision in discrete time.
"""

from .diagnostics import (
    ConservationReport,
    ReportTolerances,
    StepDiagnostics,
    analyze,
    kinematic_residual,
)
from .discrete_gradients import (
    DiscreteGradientParams,
    hamiltonian_discrete_gradient,
    hamiltonian_discrete_gradient_blocks,
    internal_energy_discrete_gradient,
    midpoint_discrete_gradient,
    scalar_discrete_gradient,
)
from .errors import ConfigError, NonConvergenceError, PhelastError, StrainDomainError
from .integrator import (
    InputSignal,
    IntegratorParams,
    StepStats,
    Trajectory,
    collocated_damping,
    collocated_output,
    implicit_midpoint_step,
    integrate,
    midpoint_effort,
    solve_step,
    step_residual,
)
from .model import (
    Efforts,
    ElasticElement,
    ExternalPotential,
    GravityPotential,
    MechanicalSystem,
    State,
    angular_momentum,
    descriptor_matrix,
    efforts,
    hamiltonian,
    input_matrix,
    internal_energy,
    kinetic_energy,
    momenta_state,
    state_from_momenta,
    strain_jacobian,
    strain_map,
    stress,
    structure_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConservationReport",
    "DiscreteGradientParams",
    "Efforts",
    "ElasticElement",
    "ExternalPotential",
    "GravityPotential",
    "InputSignal",
    "IntegratorParams",
    "MechanicalSystem",
    "NonConvergenceError",
    "PhelastError",
    "ReportTolerances",
    "State",
    "StepDiagnostics",
    "StepStats",
    "StrainDomainError",
    "Trajectory",
    "analyze",
    "angular_momentum",
    "collocated_damping",
    "collocated_output",
    "descriptor_matrix",
    "efforts",
    "hamiltonian",
    "hamiltonian_discrete_gradient",
    "hamiltonian_discrete_gradient_blocks",
    "implicit_midpoint_step",
    "input_matrix",
    "integrate",
    "internal_energy",
    "internal_energy_discrete_gradient",
    "kinematic_residual",
    "kinetic_energy",
    "midpoint_discrete_gradient",
    "midpoint_effort",
    "momenta_state",
    "scalar_discrete_gradient",
    "solve_step",
    "state_from_momenta",
    "step_residual",
    "strain_jacobian",
    "strain_map",
    "stress",
    "structure_matrix",
]
