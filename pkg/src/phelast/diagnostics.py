"""Conservation accounting for computed trajectories.

Recomputes energies, angular momentum and the strain-kinematic defect from
the stored states (double-entry bookkeeping against the integrator's in-loop
records) and aggregates them into a pass/fail report.  Only the angular
momentum component along the constant external-field axis is checked; the
transverse components are not conserved and are deliberately left alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

import numpy as np

from .model import (
    MechanicalSystem,
    State,
    angular_momentum,
    hamiltonian,
    internal_energy,
    kinetic_energy,
    strain_map,
)

if TYPE_CHECKING:
    from .integrator import StepStats, Trajectory

__all__ = [
    "StepDiagnostics",
    "ReportTolerances",
    "ConservationReport",
    "kinematic_residual",
    "state_diagnostics",
    "analyze",
]


def kinematic_residual(sys: MechanicalSystem, x: State) -> np.ndarray:
    """Defect g = C - C(q) of the strain-kinematic relation, one per element."""
    return x.C - strain_map(sys, x.q)


@dataclass(frozen=True)
class StepDiagnostics:
    """Per-state bookkeeping attached to a trajectory entry.

    ``power_supplied`` is h * y . u of the step that produced this state
    (zero for the initial state); ``newton`` carries the solver statistics of
    that step (None for the initial state).
    """

    t: float
    H: float
    T_kin: float
    V_int: float
    V_ext: float
    L: np.ndarray
    kinematic_residual: float
    power_supplied: float
    newton: Optional["StepStats"]


def state_diagnostics(
    sys: MechanicalSystem,
    t: float,
    x: State,
    power_supplied: float,
    newton: Optional["StepStats"],
) -> StepDiagnostics:
    """Evaluate all per-state diagnostic quantities at (t, x)."""
    T = kinetic_energy(sys, x.v)
    V_int = internal_energy(sys, x.C)
    V_ext = sys.external.value(x.q)
    g = kinematic_residual(sys, x)
    return StepDiagnostics(
        t=float(t),
        H=T + V_int + V_ext,
        T_kin=T,
        V_int=V_int,
        V_ext=V_ext,
        L=angular_momentum(sys, x.q, x.v),
        kinematic_residual=float(np.max(np.abs(g))) if g.size else 0.0,
        power_supplied=float(power_supplied),
        newton=newton,
    )


@dataclass(frozen=True)
class ReportTolerances:
    """Acceptance thresholds of the conservation report.

    Defaults sit an order of magnitude above the default Newton tolerance:
    conservation holds to solver precision, not machine epsilon.
    """

    energy: float = 1e-8
    angular_momentum: float = 1e-8
    kinematic: float = 1e-8


@dataclass(frozen=True)
class ConservationReport:
    """Aggregated conservation defects of a trajectory with pass/fail flags.

    ``max_energy_defect`` is the largest per-step violation of the discrete
    power balance |H(x1) - H(x0) - h y . u|; ``max_angular_momentum_defect``
    the largest increment of L projected on the field axis; and
    ``max_kinematic_residual`` the largest strain-kinematic defect over all
    states.
    """

    n_states: int
    max_energy_defect: float
    max_angular_momentum_defect: float
    max_kinematic_residual: float
    tolerances: ReportTolerances
    energy_ok: bool = field(init=False)
    angular_momentum_ok: bool = field(init=False)
    kinematic_ok: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "energy_ok", self.max_energy_defect <= self.tolerances.energy)
        object.__setattr__(
            self,
            "angular_momentum_ok",
            self.max_angular_momentum_defect <= self.tolerances.angular_momentum,
        )
        object.__setattr__(
            self, "kinematic_ok", self.max_kinematic_residual <= self.tolerances.kinematic
        )

    @property
    def passed(self) -> bool:
        return self.energy_ok and self.angular_momentum_ok and self.kinematic_ok

    def to_text(self) -> str:
        """Structured key-value rendering (machine-readable, full precision)."""
        lines = [
            f"states: {self.n_states}",
            f"max_energy_defect: {self.max_energy_defect:.17g}",
            f"energy_tolerance: {self.tolerances.energy:.17g}",
            f"energy_ok: {self.energy_ok}",
            f"max_angular_momentum_defect: {self.max_angular_momentum_defect:.17g}",
            f"angular_momentum_tolerance: {self.tolerances.angular_momentum:.17g}",
            f"angular_momentum_ok: {self.angular_momentum_ok}",
            f"max_kinematic_residual: {self.max_kinematic_residual:.17g}",
            f"kinematic_tolerance: {self.tolerances.kinematic:.17g}",
            f"kinematic_ok: {self.kinematic_ok}",
            f"passed: {self.passed}",
        ]
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        """One-line-per-criterion human summary."""
        def row(name, value, tol, ok):
            verdict = "PASS" if ok else "FAIL"
            return f"{verdict}  {name:<18} max {value:.3e}  (tol {tol:.1e})"

        return "\n".join([
            row("energy balance", self.max_energy_defect, self.tolerances.energy,
                self.energy_ok),
            row("angular momentum", self.max_angular_momentum_defect,
                self.tolerances.angular_momentum, self.angular_momentum_ok),
            row("kinematic relation", self.max_kinematic_residual,
                self.tolerances.kinematic, self.kinematic_ok),
        ])


def analyze(
    sys: MechanicalSystem,
    trajectory: "Trajectory",
    gravity_axis: Optional[np.ndarray] = None,
    tolerances: ReportTolerances = ReportTolerances(),
) -> ConservationReport:
    """Build a conservation report from a trajectory.

    Energies and angular momenta are recomputed from the stored states (the
    supplied power of each step is taken from the trajectory records, since
    it involves the input signal).  ``gravity_axis`` defaults to the system's
    gravity vector; when it is the zero vector, every angular-momentum
    component is checked (all are conserved without external forces).
    """
    states = trajectory.states
    if len(states) == 0:
        raise ValueError("cannot analyze an empty trajectory")

    axis = sys.gravity if gravity_axis is None else np.asarray(gravity_axis, dtype=float)
    if axis.shape != (3,):
        raise ValueError(f"gravity_axis must be a 3-vector, got shape {axis.shape}")
    axis_norm = float(np.linalg.norm(axis))

    H = np.array([hamiltonian(sys, x) for x in states])
    L = np.array([angular_momentum(sys, x.q, x.v) for x in states])
    kin = [kinematic_residual(sys, x) for x in states]
    max_kin = max((float(np.max(np.abs(g))) for g in kin if g.size), default=0.0)

    if len(states) == 1:
        max_energy = 0.0
        max_ang = 0.0
    else:
        power = np.array([d.power_supplied for d in trajectory.diagnostics[1:]])
        max_energy = float(np.max(np.abs(np.diff(H) - power)))
        dL = np.diff(L, axis=0)
        if axis_norm > 0.0:
            max_ang = float(np.max(np.abs(dL @ (axis / axis_norm))))
        else:
            max_ang = float(np.max(np.abs(dL)))

    return ConservationReport(
        n_states=len(states),
        max_energy_defect=max_energy,
        max_angular_momentum_defect=max_ang,
        max_kinematic_residual=max_kin,
        tolerances=tolerances,
    )
