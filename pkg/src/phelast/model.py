"""Hyperelastic mass-spring networks in port-Hamiltonian state-space form.

A :class:`MechanicalSystem` is an immutable description of N point masses in
three dimensions coupled by hyperelastic elements.  Each element carries a
log-barrier stored energy

    V_i(C_i) = (k_i l0_i / 4) * (C_i - ln C_i - 1),

where the squared-length strain C_i = |qbar_i|^2 / l0_i^2 is kept as an
independent state next to positions and velocities, and the relative vector
qbar_i is a fixed linear combination of the point positions.  The state is
x = (q, v, C) and the dynamics take the descriptor form

    E dx/dt = J(x) z + B u,      E^T z = grad H(x),      y = B^T z,

with E = blockdiag(I, M, I), a skew-symmetric structure matrix J(q) built
from the strain Jacobian, and collocated input/output ports (u, y).  This
module provides the system description plus all continuous-time quantities:
strains, energies, efforts, structure matrices, and the angular momentum map.

All operations are pure functions of their inputs; systems and states are
safe to share across concurrent simulations.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .discrete_gradients import (
    DEFAULT_DGRAD_PARAMS,
    DiscreteGradientParams,
    midpoint_discrete_gradient,
)
from .errors import StrainDomainError

__all__ = [
    "ElasticElement",
    "ExternalPotential",
    "GravityPotential",
    "MechanicalSystem",
    "State",
    "Efforts",
    "strain_map",
    "strain_jacobian",
    "internal_energy",
    "stress",
    "kinetic_energy",
    "hamiltonian",
    "efforts",
    "structure_matrix",
    "descriptor_matrix",
    "input_matrix",
    "momenta_state",
    "state_from_momenta",
    "angular_momentum",
]


# ====================================================================
# System description
# ====================================================================

@dataclass(frozen=True)
class ElasticElement:
    """One hyperelastic element of a mass-spring network.

    Parameters
    ----------
    stiffness : float
        Spring stiffness parameter k [N], strictly positive.
    rest_length : float
        Natural length l0 [m], strictly positive.
    coefficients : Mapping[int, float]
        Sparse map from point index j to the coefficient a_j of the linear
        combination qbar = sum_j a_j q_j defining the element's relative
        vector.  A plain two-endpoint spring between points (j0, j1) uses
        {j0: +1.0, j1: -1.0}; general coefficients are permitted.
    """

    stiffness: float
    rest_length: float
    coefficients: Mapping[int, float]

    def __post_init__(self):
        if not self.stiffness > 0.0:
            raise ValueError(f"stiffness must be strictly positive, got {self.stiffness}")
        if not self.rest_length > 0.0:
            raise ValueError(f"rest_length must be strictly positive, got {self.rest_length}")
        coeffs = {int(j): float(a) for j, a in dict(self.coefficients).items() if a != 0.0}
        if not coeffs:
            raise ValueError("element needs at least one nonzero coefficient")
        if min(coeffs) < 0:
            raise ValueError(f"negative point index {min(coeffs)} in element coefficients")
        object.__setattr__(self, "coefficients", coeffs)

    # per-element energy law, used by the scalar discrete-gradient kernel
    def energy(self, c: float) -> float:
        """Stored energy (k l0 / 4)(c - ln c - 1); requires c > 0."""
        if c <= 0.0:
            raise StrainDomainError(f"stored energy undefined for strain {c:.6g} <= 0")
        return 0.25 * self.stiffness * self.rest_length * (c - np.log(c) - 1.0)

    def energy_slope(self, c: float) -> float:
        """dV/dC = (k l0 / 4)(1 - 1/c), i.e. half the work-conjugate stress."""
        if c <= 0.0:
            raise StrainDomainError(f"stored energy undefined for strain {c:.6g} <= 0")
        return 0.25 * self.stiffness * self.rest_length * (1.0 - 1.0 / c)


class ExternalPotential(abc.ABC):
    """Hook for a position-dependent external potential V_ext(q).

    Implementations supply the value and gradient; the discrete gradient
    defaults to the Gonzalez midpoint form built from them.  Only the
    constant-gravity case ships with the package; the conservation guarantee
    for the angular momentum about the field axis applies to that case only.
    """

    #: True when gradient(q) does not depend on q (enables the analytic
    #: Newton Jacobian, whose external block is then zero).
    gradient_is_constant: bool = False

    @abc.abstractmethod
    def value(self, q: np.ndarray) -> float:
        """Potential energy at the stacked position vector q."""

    @abc.abstractmethod
    def gradient(self, q: np.ndarray) -> np.ndarray:
        """Gradient of the potential w.r.t. q (length 3N)."""

    def discrete_gradient(
        self,
        q0: np.ndarray,
        q1: np.ndarray,
        params: DiscreteGradientParams = DEFAULT_DGRAD_PARAMS,
    ) -> np.ndarray:
        return midpoint_discrete_gradient(self.value, self.gradient, q0, q1, params)


@dataclass(frozen=True)
class GravityPotential(ExternalPotential):
    """Constant gravitational field b acting on point masses.

    V_ext(q) = -sum_k m_k b . q_k, so the gradient is the constant vector
    (-m_1 b, ..., -m_N b) and every discrete gradient coincides with it.
    """

    masses: np.ndarray
    acceleration: np.ndarray

    gradient_is_constant = True

    def __post_init__(self):
        masses = np.array(self.masses, dtype=float)
        b = np.array(self.acceleration, dtype=float)
        if b.shape != (3,):
            raise ValueError(f"gravity vector must have shape (3,), got {b.shape}")
        grad = (-np.outer(masses, b)).reshape(-1)
        grad.flags.writeable = False
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "acceleration", b)
        object.__setattr__(self, "_gradient", grad)

    def value(self, q: np.ndarray) -> float:
        return float(self._gradient @ q)

    def gradient(self, q: np.ndarray) -> np.ndarray:
        return self._gradient

    def discrete_gradient(self, q0, q1, params=DEFAULT_DGRAD_PARAMS) -> np.ndarray:
        return self._gradient


@dataclass(frozen=True)
class MechanicalSystem:
    """Immutable description of a hyperelastic mass-spring network.

    Parameters
    ----------
    masses : array_like
        N strictly positive point masses [kg].  The mass matrix is the
        block-diagonal m_k * I3, symmetric positive definite.
    elements : sequence of ElasticElement
        The hyperelastic elements; may be empty (free masses).
    gravity : array_like
        Constant gravitational acceleration b [m/s^2] defining the shipped
        external potential V_ext(q) = -sum_k m_k b . q_k.
    input_map : array_like, optional
        Matrix selecting which velocity equations receive the input u,
        shape (3N, n_u).  Defaults to the identity (one force input per
        translational degree of freedom).
    external : ExternalPotential, optional
        Replacement external potential; defaults to gravity.
    """

    masses: np.ndarray
    elements: tuple[ElasticElement, ...]
    gravity: np.ndarray
    input_map: np.ndarray | None = None
    external: ExternalPotential | None = None

    def __post_init__(self):
        masses = np.atleast_1d(np.array(self.masses, dtype=float))
        if masses.ndim != 1 or masses.size == 0:
            raise ValueError("masses must be a non-empty 1-D sequence")
        if np.any(masses <= 0.0):
            k = int(np.argmax(masses <= 0.0))
            raise ValueError(f"masses must be strictly positive, masses[{k}] = {masses[k]:.6g}")
        n = masses.size

        elements = tuple(self.elements)
        for i, el in enumerate(elements):
            bad = [j for j in el.coefficients if j >= n]
            if bad:
                raise ValueError(
                    f"elements[{i}] references point index {bad[0]} "
                    f"but the system has only {n} points"
                )

        gravity = np.array(self.gravity, dtype=float)
        if gravity.shape != (3,):
            raise ValueError(f"gravity must be a 3-vector, got shape {gravity.shape}")

        input_map = self.input_map
        if input_map is None:
            input_map = np.eye(3 * n)
        else:
            input_map = np.array(self.input_map, dtype=float)
            if input_map.ndim != 2 or input_map.shape[0] != 3 * n:
                raise ValueError(
                    f"input_map must have row dimension {3 * n} "
                    f"(velocity block), got shape {input_map.shape}"
                )

        external = self.external
        if external is None:
            external = GravityPotential(masses, gravity)

        # cached dense arrays shared by all operations
        n_el = len(elements)
        coeff = np.zeros((n_el, n))
        for i, el in enumerate(elements):
            for j, a in el.coefficients.items():
                coeff[i, j] = a
        stiffness = np.array([el.stiffness for el in elements])
        rest_length = np.array([el.rest_length for el in elements])
        mass3 = np.repeat(masses, 3)

        for arr in (masses, gravity, input_map, coeff, stiffness, rest_length, mass3):
            arr.flags.writeable = False

        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "gravity", gravity)
        object.__setattr__(self, "input_map", input_map)
        object.__setattr__(self, "external", external)
        object.__setattr__(self, "_coeff", coeff)
        object.__setattr__(self, "_stiffness", stiffness)
        object.__setattr__(self, "_rest_length", rest_length)
        object.__setattr__(self, "_mass3", mass3)
        object.__setattr__(self, "_two_over_l0sq", 2.0 / rest_length**2)
        object.__setattr__(self, "_kappa", 0.25 * stiffness * rest_length)

    @property
    def n_points(self) -> int:
        return self.masses.size

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def dim_q(self) -> int:
        """Dimension of the position (and velocity) block, 3N."""
        return 3 * self.n_points

    @property
    def dim_state(self) -> int:
        """Dimension of the full state vector (q, v, C)."""
        return 2 * self.dim_q + self.n_elements

    @property
    def n_inputs(self) -> int:
        return self.input_map.shape[1]

    @property
    def mass_vector(self) -> np.ndarray:
        """Diagonal of the mass matrix, masses repeated per coordinate (3N,)."""
        return self._mass3

    @property
    def coefficient_matrix(self) -> np.ndarray:
        """Dense element coefficient matrix a_ij, shape (n_el, N)."""
        return self._coeff

    @property
    def energy_coefficients(self) -> np.ndarray:
        """Per-element energy prefactors k l0 / 4, shape (n_el,)."""
        return self._kappa

    def relative_vectors(self, q: np.ndarray) -> np.ndarray:
        """Element relative vectors qbar_i = sum_j a_ij q_j, shape (n_el, 3)."""
        return self._coeff @ q.reshape(self.n_points, 3)


# ====================================================================
# State and efforts
# ====================================================================

@dataclass(frozen=True, eq=False)
class State:
    """Port-Hamiltonian state x = (q, v, C).

    Positions and velocities are stacked per point (q_1 in R^3 first); the
    strain block holds one independent squared-length strain per element.
    All strain components must be strictly positive (domain of the
    log-barrier stored energy).
    """

    q: np.ndarray
    v: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float).copy()
        v = np.asarray(self.v, dtype=float).copy()
        C = np.atleast_1d(np.asarray(self.C, dtype=float)).copy()
        if q.ndim != 1 or v.ndim != 1 or q.shape != v.shape:
            raise ValueError(f"q and v must be equal-length 1-D vectors, got {q.shape}, {v.shape}")
        if q.size % 3 != 0:
            raise ValueError(f"position vector length {q.size} is not a multiple of 3")
        if C.ndim != 1:
            raise ValueError("C must be a 1-D vector")
        if C.size and np.any(C <= 0.0):
            i = int(np.argmax(C <= 0.0))
            raise StrainDomainError(f"state strain C[{i}] = {C[i]:.6g} is not strictly positive")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "C", C)

    def as_vector(self) -> np.ndarray:
        """Stacked state vector (q, v, C) of length 6N + n_el."""
        return np.concatenate([self.q, self.v, self.C])

    @classmethod
    def from_vector(cls, sys: MechanicalSystem, x: np.ndarray) -> State:
        x = np.asarray(x, dtype=float)
        if x.shape != (sys.dim_state,):
            raise ValueError(f"state vector must have shape ({sys.dim_state},), got {x.shape}")
        nq = sys.dim_q
        return cls(q=x[:nq], v=x[nq:2 * nq], C=x[2 * nq:])


@dataclass(frozen=True, eq=False)
class Efforts:
    """Gradient of the total energy, blocked as (grad V_ext, M v, S/2).

    These are the co-state blocks appearing on the right of the descriptor
    form after solving E^T z = grad H (the velocity slot of z itself carries
    v rather than M v; see :func:`phelast.integrator.midpoint_effort`).
    """

    external_gradient: np.ndarray
    momentum: np.ndarray
    half_stress: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.external_gradient, self.momentum, self.half_stress])


def _check_positions(sys: MechanicalSystem, q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (sys.dim_q,):
        raise ValueError(f"position vector must have shape ({sys.dim_q},), got {q.shape}")
    return q


def _check_strains(sys: MechanicalSystem, C: np.ndarray, positive: bool = False) -> np.ndarray:
    C = np.atleast_1d(np.asarray(C, dtype=float))
    if C.shape != (sys.n_elements,):
        raise ValueError(f"strain vector must have shape ({sys.n_elements},), got {C.shape}")
    if positive and C.size and np.any(C <= 0.0):
        i = int(np.argmax(C <= 0.0))
        raise StrainDomainError(
            f"element {i}: strain C = {C[i]:.6g} outside the domain C > 0 "
            "of the stored-energy law"
        )
    return C


def _check_state(sys: MechanicalSystem, x: State):
    if x.q.size != sys.dim_q or x.C.size != sys.n_elements:
        raise ValueError(
            f"state dimensions (q: {x.q.size}, C: {x.C.size}) do not match the "
            f"system (q: {sys.dim_q}, C: {sys.n_elements})"
        )


# ====================================================================
# Strain kinematics
# ====================================================================

def strain_map(sys: MechanicalSystem, q: np.ndarray) -> np.ndarray:
    """Squared-length strains C_i(q) = |qbar_i|^2 / l0_i^2.

    Parameters
    ----------
    q : array_like
        Stacked positions, length 3N.

    Returns
    -------
    ndarray
        One non-negative strain per element, shape (n_el,).
    """
    q = _check_positions(sys, q)
    qbar = sys.relative_vectors(q)
    return np.einsum("id,id->i", qbar, qbar) / sys._rest_length**2


def strain_jacobian(sys: MechanicalSystem, q: np.ndarray) -> np.ndarray:
    """Jacobian of the strain map, shape (n_el, 3N).

    Row i holds the gradient of C_i; its block for point k is
    a_ik * (2 / l0_i^2) * qbar_i.
    """
    q = _check_positions(sys, q)
    qbar = sys.relative_vectors(q)
    jac = np.einsum("ik,i,id->ikd", sys._coeff, sys._two_over_l0sq, qbar)
    return jac.reshape(sys.n_elements, sys.dim_q)


# ====================================================================
# Energies, stresses, efforts
# ====================================================================

def internal_energy(sys: MechanicalSystem, C: np.ndarray) -> float:
    """Total stored energy sum_i (k_i l0_i / 4)(C_i - ln C_i - 1), >= 0.

    Raises
    ------
    StrainDomainError
        If any strain component is not strictly positive.
    """
    C = _check_strains(sys, C, positive=True)
    if sys.n_elements == 0:
        return 0.0
    return float(np.sum(sys._kappa * (C - np.log(C) - 1.0)))


def stress(sys: MechanicalSystem, C: np.ndarray) -> np.ndarray:
    """Work-conjugate stresses S_i = 2 dV_i/dC_i = (k_i l0_i / 2)(1 - 1/C_i).

    Negative for compressed elements (C < 1), zero at the stress-free strain
    C = 1.
    """
    C = _check_strains(sys, C, positive=True)
    return 2.0 * sys._kappa * (1.0 - 1.0 / C)


def kinetic_energy(sys: MechanicalSystem, v: np.ndarray) -> float:
    """Kinetic energy 0.5 v . M v."""
    v = np.asarray(v, dtype=float)
    if v.shape != (sys.dim_q,):
        raise ValueError(f"velocity vector must have shape ({sys.dim_q},), got {v.shape}")
    return 0.5 * float(v @ (sys._mass3 * v))


def hamiltonian(sys: MechanicalSystem, x: State) -> float:
    """Total energy H(x) = 0.5 v . M v + V_int(C) + V_ext(q)."""
    _check_state(sys, x)
    return kinetic_energy(sys, x.v) + internal_energy(sys, x.C) + sys.external.value(x.q)


def efforts(sys: MechanicalSystem, x: State) -> Efforts:
    """Energy gradient blocks (grad V_ext(q), M v, S/2) at a state."""
    _check_state(sys, x)
    return Efforts(
        external_gradient=np.asarray(sys.external.gradient(x.q), dtype=float).copy(),
        momentum=sys._mass3 * x.v,
        half_stress=0.5 * stress(sys, x.C),
    )


# ====================================================================
# Descriptor-form matrices
# ====================================================================

def structure_matrix(sys: MechanicalSystem, q: np.ndarray) -> np.ndarray:
    """Skew-symmetric structure matrix J(q) of the descriptor form.

    Assembled from identity and strain-Jacobian blocks:

        [ 0    I      0    ]
        [-I    0   -DC(q)^T]
        [ 0  DC(q)    0    ]

    Skewness holds exactly by construction for every q.
    """
    q = _check_positions(sys, q)
    nq = sys.dim_q
    dim = sys.dim_state
    jac = strain_jacobian(sys, q)
    J = np.zeros((dim, dim))
    J[:nq, nq:2 * nq] = np.eye(nq)
    J[nq:2 * nq, :nq] = -np.eye(nq)
    J[nq:2 * nq, 2 * nq:] = -jac.T
    J[2 * nq:, nq:2 * nq] = jac
    return J


def descriptor_matrix(sys: MechanicalSystem) -> np.ndarray:
    """Constant descriptor matrix E = blockdiag(I, M, I), symmetric SPD."""
    return np.diag(np.concatenate([
        np.ones(sys.dim_q), sys._mass3, np.ones(sys.n_elements),
    ]))


def input_matrix(sys: MechanicalSystem) -> np.ndarray:
    """Full input matrix B, the input map embedded in the velocity block."""
    B = np.zeros((sys.dim_state, sys.n_inputs))
    B[sys.dim_q:2 * sys.dim_q, :] = sys.input_map
    return B


# ====================================================================
# State transformations and momentum maps
# ====================================================================

def momenta_state(
    sys: MechanicalSystem, x: State
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Canonical coordinates (q, p, C) = E x with conjugate momenta p = M v."""
    _check_state(sys, x)
    return x.q.copy(), sys._mass3 * x.v, x.C.copy()


def state_from_momenta(
    sys: MechanicalSystem, q: np.ndarray, p: np.ndarray, C: np.ndarray
) -> State:
    """Inverse of :func:`momenta_state`: recover velocities as v = M^-1 p."""
    p = np.asarray(p, dtype=float)
    return State(q=q, v=p / sys._mass3, C=C)


def angular_momentum(sys: MechanicalSystem, q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Total angular momentum L = sum_k q_k x m_k v_k about the origin.

    Only the component along a constant external-field axis is a conserved
    quantity of the dynamics; the transverse components drift.
    """
    q = _check_positions(sys, q)
    v = np.asarray(v, dtype=float)
    if v.shape != (sys.dim_q,):
        raise ValueError(f"velocity vector must have shape ({sys.dim_q},), got {v.shape}")
    qp = q.reshape(sys.n_points, 3)
    mv = (sys._mass3 * v).reshape(sys.n_points, 3)
    return np.cross(qp, mv).sum(axis=0)
