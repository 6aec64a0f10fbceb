"""Acceptance suite: the conservation, accuracy and robustness gates.

Every test prints one summary line (run with ``pytest -s`` to stream them)
and then asserts the criterion at its stated tolerance.  The benchmark runs
reuse the session fixtures, which carry the exact published scenario:
m = 1 kg, k = 1e4 N, l0 = 1 m, h = 1e-2 s over [0, 4] s, Newton tolerance
1e-9, q0 = (1.1, 0, 0), v0 = (0, 1, 1), C0 = 1.21, gravity -9.81 e3.
"""

import dataclasses

import numpy as np

from phelast import (
    IntegratorParams,
    State,
    efforts,
    hamiltonian,
    hamiltonian_discrete_gradient,
    solve_step,
    strain_jacobian,
    strain_map,
)
from phelast.cli import builtin_config_text, parse_config, sweep
from oracles import (
    central_gradient,
    central_jacobian,
    hanging_equilibrium_strain,
    random_network,
    random_state,
)


def _criterion(number, description, detail, ok):
    verdict = "PASS" if ok else "FAIL"
    print(f"[criterion {number}] {description}: {detail} -> {verdict}")
    return ok


def test_criterion_1_energy_increments(benchmark_trajectory):
    H = np.array([d.H for d in benchmark_trajectory.diagnostics])
    worst = float(np.max(np.abs(np.diff(H))))
    ok = _criterion(1, "energy increments at solver precision",
                    f"max |dH| = {worst:.3e} (tol 1e-8, {len(H) - 1} steps)",
                    worst <= 1e-8)
    assert ok


def test_criterion_2_vertical_angular_momentum(benchmark_trajectory):
    L3 = np.array([d.L[2] for d in benchmark_trajectory.diagnostics])
    worst_increment = float(np.max(np.abs(np.diff(L3))))
    worst_drift = float(np.max(np.abs(L3 - 1.1)))
    ok = _criterion(2, "vertical angular momentum conserved",
                    f"max |dL3| = {worst_increment:.3e} (tol 1e-8), "
                    f"max |L3 - 1.1| = {worst_drift:.3e} (tol 1e-6)",
                    worst_increment <= 1e-8 and worst_drift <= 1e-6)
    assert ok


def test_criterion_3_kinematic_relation(benchmark_trajectory):
    residuals = np.array([d.kinematic_residual for d in benchmark_trajectory.diagnostics])
    worst = float(np.max(residuals))
    ok = _criterion(3, "strain-kinematic relation exact in discrete time",
                    f"max |C - C(q)| = {worst:.3e} (tol 1e-8)", worst <= 1e-8)
    assert ok


def test_criterion_4_directionality_on_random_networks():
    rng = np.random.default_rng(2024)
    worst_ratio = 0.0
    for trial in range(1000):
        if trial % 10 == 0:
            sys = random_network(rng, n_points=3, n_springs=3)
        x0 = random_state(rng, sys)
        x1 = random_state(rng, sys)
        dg = hamiltonian_discrete_gradient(sys, x0, x1)
        H0 = hamiltonian(sys, x0)
        H1 = hamiltonian(sys, x1)
        residual = abs(dg @ (x1.as_vector() - x0.as_vector()) - (H1 - H0))
        worst_ratio = max(worst_ratio, residual / (1.0 + abs(H0) + abs(H1)))
    ok = _criterion(4, "directionality on 1000 random state pairs",
                    f"max residual / (1 + |H0| + |H1|) = {worst_ratio:.3e} (tol 1e-11)",
                    worst_ratio <= 1e-11)
    assert ok


def test_criterion_5_gradient_oracle():
    rng = np.random.default_rng(199)
    worst = 0.0
    for trial in range(100):
        if trial % 10 == 0:
            sys = random_network(rng, n_points=3, n_springs=3)
        x = random_state(rng, sys)
        z = efforts(sys, x)

        fd_q = central_gradient(lambda q: hamiltonian(sys, State(q=q, v=x.v, C=x.C)), x.q)
        fd_v = central_gradient(lambda v: hamiltonian(sys, State(q=x.q, v=v, C=x.C)), x.v)
        fd_C = central_gradient(lambda C: hamiltonian(sys, State(q=x.q, v=x.v, C=C)), x.C)
        fd_jac = central_jacobian(lambda q: strain_map(sys, q), x.q)

        for analytic, fd in (
            (z.external_gradient, fd_q),
            (z.momentum, fd_v),
            (z.half_stress, fd_C),
            (strain_jacobian(sys, x.q).reshape(-1), fd_jac.reshape(-1)),
        ):
            worst = max(worst, float(np.max(
                np.abs(analytic - fd) / (1.0 + np.abs(analytic)))))
    ok = _criterion(5, "efforts and strain Jacobian vs central differences",
                    f"max relative deviation = {worst:.3e} (tol 1e-6, 100 states)",
                    worst <= 1e-6)
    assert ok


def test_criterion_6_baseline_contrast(benchmark_trajectory, midpoint_trajectory):
    dH_dg = float(np.max(np.abs(np.diff([d.H for d in benchmark_trajectory.diagnostics]))))
    dH_mp = float(np.max(np.abs(np.diff([d.H for d in midpoint_trajectory.diagnostics]))))
    ok = _criterion(6, "implicit-midpoint energy drift dwarfs the discrete gradient's",
                    f"max |dH| midpoint = {dH_mp:.3e} vs discrete gradient = "
                    f"{dH_dg:.3e} (ratio {dH_mp / dH_dg:.1e}, need >= 100)",
                    dH_mp >= 100.0 * dH_dg)
    assert ok


def test_criterion_7_passivity_under_viscous_feedback(damped_trajectory,
                                                      pendulum_params):
    H = np.array([d.H for d in damped_trajectory.diagnostics])
    power = np.array([d.power_supplied for d in damped_trajectory.diagnostics[1:]])
    dH = np.diff(H)
    worst_rise = float(np.max(dH))
    worst_balance = float(np.max(np.abs(dH - power)))
    ok = _criterion(7, "passivity with u = -0.5 v_mid",
                    f"max dH = {worst_rise:.3e} (tol 1e-8), "
                    f"max |dH - h y.u| = {worst_balance:.3e} (tol 1e-8)",
                    worst_rise <= 1e-8 and worst_balance <= 1e-8)
    assert ok


def test_criterion_8_second_order_convergence():
    config = parse_config(builtin_config_text("pendulum"), source="pendulum")
    # short horizon and analytic Jacobian keep the h = 1e-5 reference run fast
    config = dataclasses.replace(config, params=dataclasses.replace(
        config.params, t_end=0.1, jacobian_mode="analytic"))
    rows = sweep(config, [4e-3, 2e-3, 1e-3])
    orders = [order for _, _, order in rows if order is not None]
    ok = _criterion(8, "observed convergence order 2.0 +/- 0.2",
                    "orders " + ", ".join(f"{p:.3f}" for p in orders)
                    + " (errors " + ", ".join(f"{err:.2e}" for _, err, _ in rows) + ")",
                    all(1.8 <= p <= 2.2 for p in orders) and len(orders) == 2)
    assert ok


def test_criterion_9_equilibrium_fixed_point(pendulum, pendulum_params):
    C_star = hanging_equilibrium_strain(1e4, 1.0, 1.0, 9.81)
    x_star = State(q=[0.0, 0.0, -np.sqrt(C_star)], v=np.zeros(3), C=[C_star])
    x = x_star
    drift = 0.0
    for n in range(100):
        x, _ = solve_step(pendulum, x, n * pendulum_params.h, pendulum_params)
        drift = max(drift, float(np.max(np.abs(x.as_vector() - x_star.as_vector()))))
    ok = _criterion(9, "hanging equilibrium is a fixed point of the stepper",
                    f"C* = {C_star:.12f}, max drift over 100 steps = {drift:.3e} "
                    "(tol 1e-9)", drift <= 1e-9)
    assert ok
