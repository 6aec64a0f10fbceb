import numpy as np
import pytest

from phelast import (
    IntegratorParams,
    ReportTolerances,
    State,
    Trajectory,
    analyze,
    angular_momentum,
    hamiltonian,
    integrate,
    kinematic_residual,
)
from phelast.diagnostics import state_diagnostics
from oracles import random_network, random_state


class TestKinematicResidual:
    def test_consistent_state_is_clean(self, pendulum, pendulum_state):
        g = kinematic_residual(pendulum, pendulum_state)
        assert np.max(np.abs(g)) <= 1e-14

    def test_benchmark_initial_condition(self, pendulum):
        x = State(q=[1.1, 0.0, 0.0], v=np.zeros(3), C=[1.21])
        assert abs(kinematic_residual(pendulum, x)[0]) <= 1e-14

    def test_inconsistent_strain_value(self, pendulum):
        x = State(q=[1.1, 0.0, 0.0], v=np.zeros(3), C=[1.5])
        assert kinematic_residual(pendulum, x)[0] == pytest.approx(0.29, rel=1e-12)


class TestStateDiagnostics:
    def test_energy_decomposition_sums_to_total(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            sys = random_network(rng)
            x = random_state(rng, sys)
            d = state_diagnostics(sys, 0.0, x, 0.0, None)
            assert d.H == pytest.approx(d.T_kin + d.V_int + d.V_ext, rel=1e-12)
            assert d.H == pytest.approx(hamiltonian(sys, x), rel=1e-14)


class TestAnalyze:
    def test_benchmark_run_passes_all_criteria(self, pendulum, benchmark_trajectory):
        report = analyze(pendulum, benchmark_trajectory)
        assert report.passed
        assert report.energy_ok and report.angular_momentum_ok and report.kinematic_ok
        assert report.max_energy_defect <= 1e-8
        assert report.max_angular_momentum_defect <= 1e-8
        assert report.max_kinematic_residual <= 1e-8

    def test_single_state_trajectory_trivially_passes(self, pendulum, pendulum_state):
        params = IntegratorParams(h=1e-2, t_end=0.0)
        report = analyze(pendulum, integrate(pendulum, pendulum_state, params))
        assert report.passed
        assert report.max_energy_defect == 0.0

    def test_midpoint_baseline_fails_the_energy_criterion(
            self, pendulum, midpoint_trajectory):
        report = analyze(pendulum, midpoint_trajectory)
        assert not report.energy_ok
        assert not report.passed

    def test_double_entry_against_in_loop_records(self, pendulum, benchmark_trajectory):
        # the report recomputes from states; in-loop records must agree
        for x, d in zip(benchmark_trajectory.states, benchmark_trajectory.diagnostics):
            H = hamiltonian(pendulum, x)
            assert abs(d.H - H) <= 1e-12 * (1.0 + abs(H))
            np.testing.assert_allclose(d.L, angular_momentum(pendulum, x.q, x.v),
                                       rtol=1e-12, atol=1e-15)

    def test_report_maxima_match_manual_recomputation(self, pendulum, benchmark_trajectory):
        report = analyze(pendulum, benchmark_trajectory)
        H = np.array([hamiltonian(pendulum, x) for x in benchmark_trajectory.states])
        power = np.array([d.power_supplied for d in benchmark_trajectory.diagnostics[1:]])
        assert report.max_energy_defect == pytest.approx(
            np.max(np.abs(np.diff(H) - power)), rel=1e-12)

    def test_transverse_components_do_not_affect_the_verdict(
            self, pendulum, benchmark_trajectory):
        L = np.array([d.L for d in benchmark_trajectory.diagnostics])
        # sanity: the transverse components really do move
        assert np.max(np.abs(np.diff(L[:, 0]))) > 1e-4
        assert analyze(pendulum, benchmark_trajectory).passed

    def test_zero_axis_checks_all_components(self, free_mass, free_mass_state):
        params = IntegratorParams(h=1e-2, t_end=0.2)
        trajectory = integrate(free_mass, free_mass_state, params)
        report = analyze(free_mass, trajectory, gravity_axis=np.zeros(3))
        # ballistic mass under gravity: horizontal momentum trivial, but L
        # about the origin is not conserved in every component, so only the
        # kinematic and energy criteria are meaningful here
        assert report.energy_ok and report.kinematic_ok

    def test_empty_trajectory_rejected(self, pendulum):
        empty = Trajectory(times=np.zeros(0), states=(), diagnostics=())
        with pytest.raises(ValueError, match="empty"):
            analyze(pendulum, empty)

    def test_custom_tolerances_flip_the_verdict(self, pendulum, benchmark_trajectory):
        strict = ReportTolerances(energy=1e-15, angular_momentum=1e-15, kinematic=1e-15)
        report = analyze(pendulum, benchmark_trajectory, tolerances=strict)
        assert not report.passed


class TestReportRendering:
    def test_text_rendering_is_structured(self, pendulum, benchmark_trajectory):
        report = analyze(pendulum, benchmark_trajectory)
        text = report.to_text()
        for key in ("max_energy_defect", "max_angular_momentum_defect",
                    "max_kinematic_residual", "passed: True"):
            assert key in text
        # full-precision values round-trip through the text form
        value = [line for line in text.splitlines()
                 if line.startswith("max_energy_defect")][0].split(": ")[1]
        assert float(value) == report.max_energy_defect

    def test_summary_has_one_line_per_criterion(self, pendulum, benchmark_trajectory):
        summary = analyze(pendulum, benchmark_trajectory).summary()
        lines = summary.splitlines()
        assert len(lines) == 3
        assert all(line.startswith("PASS") for line in lines)
