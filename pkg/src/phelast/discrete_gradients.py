"""Discrete-gradient kernels for energy-exact time stepping.

A discrete gradient replaces the analytic gradient of a scalar function by a
two-point quantity DG(x0, x1) satisfying the directionality identity

    DG(x0, x1) . (x1 - x0) = f(x1) - f(x0),

which is the mechanism behind exact discrete energy balance of the midpoint
scheme in :mod:`phelast.integrator`.  Two classical kernels are provided:
Greenspan's scalar difference quotient and the Gonzalez midpoint discrete
gradient (midpoint gradient plus a rank-one correction along the increment).
On top of the kernels sits the block-assembled discrete gradient of the total
energy of a :class:`phelast.model.MechanicalSystem`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np

from .errors import StrainDomainError

if TYPE_CHECKING:
    from .model import MechanicalSystem, State

__all__ = [
    "DiscreteGradientParams",
    "DEFAULT_DGRAD_PARAMS",
    "scalar_discrete_gradient",
    "midpoint_discrete_gradient",
    "internal_energy_discrete_gradient",
    "hamiltonian_discrete_gradient",
    "hamiltonian_discrete_gradient_blocks",
]


@dataclass(frozen=True)
class DiscreteGradientParams:
    """Numerical parameters of the discrete-gradient kernels.

    ``fallback_threshold`` is a relative separation below which the analytic
    gradient at the arithmetic midpoint is used instead of the difference
    quotient (the quotient becomes 0/0 at coincident arguments).
    """

    fallback_threshold: float = 1e-10

    def __post_init__(self):
        if not self.fallback_threshold > 0.0:
            raise ValueError("fallback_threshold must be strictly positive")


DEFAULT_DGRAD_PARAMS = DiscreteGradientParams()


def scalar_discrete_gradient(
    value_fn: Callable[[float], float],
    grad_fn: Callable[[float], float],
    c0: float,
    c1: float,
    params: DiscreteGradientParams = DEFAULT_DGRAD_PARAMS,
) -> float:
    """Greenspan's difference-quotient discrete gradient of a scalar function.

    Returns ``(value_fn(c1) - value_fn(c0)) / (c1 - c0)`` whenever the
    arguments are separated by more than ``fallback_threshold`` relative to
    ``max(1, |c0|, |c1|)``, and ``grad_fn`` at the midpoint otherwise.  In the
    quotient branch the directionality identity holds exactly (to roundoff)
    by construction.
    """
    gap = abs(c1 - c0)
    scale = max(1.0, abs(c0), abs(c1))
    if gap > params.fallback_threshold * scale:
        return (value_fn(c1) - value_fn(c0)) / (c1 - c0)
    return grad_fn(0.5 * (c0 + c1))


def midpoint_discrete_gradient(
    value_fn: Callable[[np.ndarray], float],
    grad_fn: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    x1: np.ndarray,
    params: DiscreteGradientParams = DEFAULT_DGRAD_PARAMS,
) -> np.ndarray:
    """Midpoint discrete gradient (Gonzalez) of a multivariate function.

    The analytic gradient at the arithmetic midpoint receives a rank-one
    correction along the increment so that directionality holds exactly:

        g_mid + (f(x1) - f(x0) - g_mid . d) / (d . d) * d,   d = x1 - x0.

    For coincident arguments (relative separation at or below the fallback
    threshold) the midpoint gradient is returned unchanged.  For linear
    functions the correction vanishes identically.
    """
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    d = x1 - x0
    g_mid = np.asarray(grad_fn(0.5 * (x0 + x1)), dtype=float)
    scale = max(1.0, float(np.linalg.norm(x0)), float(np.linalg.norm(x1)))
    norm_d = float(np.linalg.norm(d))
    if norm_d <= params.fallback_threshold * scale:
        return g_mid.copy()
    defect = float(value_fn(x1)) - float(value_fn(x0)) - float(g_mid @ d)
    return g_mid + (defect / float(d @ d)) * d


def _check_strain_domain(C: np.ndarray, label: str):
    if C.size and np.any(C <= 0.0):
        idx = int(np.argmax(C <= 0.0))
        raise StrainDomainError(
            f"{label}: non-positive strain C[{idx}] = {C[idx]:.6g} "
            "(stored-energy law requires C > 0)"
        )


def internal_energy_discrete_gradient(
    sys: MechanicalSystem,
    C0: np.ndarray,
    C1: np.ndarray,
    params: DiscreteGradientParams = DEFAULT_DGRAD_PARAMS,
) -> np.ndarray:
    """Componentwise discrete gradient of the stored-energy law.

    Equals the Greenspan quotient of each element energy between ``C0[i]``
    and ``C1[i]``, written in the cancellation-free form

        (k l0 / 4) * (1 - log1p(dC / C0) / dC),

    which stays accurate arbitrarily close to the fallback threshold (the
    naive quotient loses up to half the significant digits there).  At or
    below the threshold the analytic slope at the midpoint strain is used.
    """
    C0 = np.asarray(C0, dtype=float)
    C1 = np.asarray(C1, dtype=float)
    if C0.shape != (sys.n_elements,) or C1.shape != (sys.n_elements,):
        raise ValueError(
            f"strain vectors must have shape ({sys.n_elements},), "
            f"got {C0.shape} and {C1.shape}"
        )
    _check_strain_domain(C0, "internal_energy_discrete_gradient")
    _check_strain_domain(C1, "internal_energy_discrete_gradient")
    if sys.n_elements == 0:
        return np.zeros(0)

    kappa = sys.energy_coefficients
    dC = C1 - C0
    scale = np.maximum(1.0, np.maximum(np.abs(C0), np.abs(C1)))
    quotient = np.abs(dC) > params.fallback_threshold * scale

    safe_dC = np.where(quotient, dC, 1.0)
    dg_quot = kappa * (1.0 - np.log1p(dC / C0) / safe_dC)
    dg_mid = kappa * (1.0 - 2.0 / (C0 + C1))
    return np.where(quotient, dg_quot, dg_mid)


def internal_energy_discrete_gradient_slope(
    sys: MechanicalSystem,
    C0: np.ndarray,
    C1: np.ndarray,
    params: DiscreteGradientParams = DEFAULT_DGRAD_PARAMS,
    dg: np.ndarray | None = None,
) -> np.ndarray:
    """Derivative of :func:`internal_energy_discrete_gradient` w.r.t. ``C1``.

    Used by the analytic Newton Jacobian.  Quotient branch:
    ``(V'(C1) - DG) / dC``; fallback branch: half the energy curvature at the
    midpoint strain.  A precomputed discrete-gradient value may be passed to
    avoid recomputation.
    """
    C0 = np.asarray(C0, dtype=float)
    C1 = np.asarray(C1, dtype=float)
    if sys.n_elements == 0:
        return np.zeros(0)
    kappa = sys.energy_coefficients
    dC = C1 - C0
    scale = np.maximum(1.0, np.maximum(np.abs(C0), np.abs(C1)))
    quotient = np.abs(dC) > params.fallback_threshold * scale

    if dg is None:
        dg = internal_energy_discrete_gradient(sys, C0, C1, params)
    slope1 = kappa * (1.0 - 1.0 / C1)
    safe_dC = np.where(quotient, dC, 1.0)
    d_quot = (slope1 - dg) / safe_dC
    c_mid = 0.5 * (C0 + C1)
    d_mid = 0.5 * kappa / c_mid**2
    return np.where(quotient, d_quot, d_mid)


def hamiltonian_discrete_gradient_blocks(
    sys: MechanicalSystem,
    x0: State,
    x1: State,
    params: DiscreteGradientParams = DEFAULT_DGRAD_PARAMS,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The three blocks of the discrete total-energy gradient.

    Returns ``(DG V_ext(q0, q1), M v_mid, DG V_int(C0, C1))``, i.e. the
    external-potential discrete gradient, the momentum at the velocity
    midpoint (exact for the quadratic kinetic energy), and the componentwise
    stored-energy discrete gradient.
    """
    dg_q = np.asarray(sys.external.discrete_gradient(x0.q, x1.q), dtype=float)
    m_v_mid = sys.mass_vector * (0.5 * (x0.v + x1.v))
    dg_C = internal_energy_discrete_gradient(sys, x0.C, x1.C, params)
    return dg_q, m_v_mid, dg_C


def hamiltonian_discrete_gradient(
    sys: MechanicalSystem,
    x0: State,
    x1: State,
    params: DiscreteGradientParams = DEFAULT_DGRAD_PARAMS,
) -> np.ndarray:
    """Stacked discrete gradient of the total energy between two states.

    Satisfies DG(x0, x1) . (x1.as_vector() - x0.as_vector()) = H(x1) - H(x0)
    to roundoff whenever all strain components take the quotient branch.  At
    coincident states it reduces to the analytic energy gradient.
    """
    return np.concatenate(hamiltonian_discrete_gradient_blocks(sys, x0, x1, params))
