import dataclasses

import numpy as np
import pytest

from phelast import (
    ElasticElement,
    IntegratorParams,
    MechanicalSystem,
    State,
    collocated_damping,
    integrate,
)

# All shared objects are immutable (frozen dataclasses, locked arrays), so
# session scope is safe and saves repeated 400-step benchmark runs.


@pytest.fixture(scope="session")
def pendulum():
    """Benchmark scenario: one unit mass on a stiff hyperelastic spring."""
    return MechanicalSystem(
        masses=[1.0],
        elements=(ElasticElement(stiffness=1e4, rest_length=1.0, coefficients={0: 1.0}),),
        gravity=[0.0, 0.0, -9.81],
    )


@pytest.fixture(scope="session")
def pendulum_state():
    return State(q=[1.1, 0.0, 0.0], v=[0.0, 1.0, 1.0], C=[1.21])


@pytest.fixture(scope="session")
def pendulum_params():
    return IntegratorParams(h=1e-2, t_end=4.0, t0=0.0, newton_tol=1e-9)


@pytest.fixture(scope="session")
def benchmark_trajectory(pendulum, pendulum_state, pendulum_params):
    """Discrete-gradient benchmark run, zero input."""
    return integrate(pendulum, pendulum_state, pendulum_params)


@pytest.fixture(scope="session")
def midpoint_trajectory(pendulum, pendulum_state, pendulum_params):
    """Implicit-midpoint baseline on the same benchmark."""
    params = dataclasses.replace(pendulum_params, scheme="implicit_midpoint")
    return integrate(pendulum, pendulum_state, params)


@pytest.fixture(scope="session")
def damped_trajectory(pendulum, pendulum_state, pendulum_params):
    """Benchmark run under viscous output feedback u = -0.5 y."""
    return integrate(pendulum, pendulum_state, pendulum_params,
                     collocated_damping(pendulum, 0.5))


@pytest.fixture
def free_mass():
    """Elementless system: a single ballistic mass (quadratic total energy)."""
    return MechanicalSystem(masses=[2.0], elements=(), gravity=[0.0, 0.0, -9.81])


@pytest.fixture
def free_mass_state():
    return State(q=[0.0, 0.0, 1.0], v=[1.0, 0.5, 2.0], C=np.zeros(0))
