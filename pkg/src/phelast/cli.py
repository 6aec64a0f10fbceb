"""Command-line front end: configuration files, runs, reports, sweeps.

Configuration files are YAML with a required ``version: 1`` key::

    version: 1
    system:
      points:                      # one entry per point mass
        - mass: 1.0                # [kg], > 0
      elements:                    # may be empty for free masses
        - stiffness: 1.0e4         # k [N], > 0
          rest_length: 1.0         # l0 [m], > 0
          coefficients: {0: 1.0}   # point index -> coefficient of qbar
      gravity: [0.0, 0.0, -9.81]   # b [m/s^2]
    initial:
      q: [[1.1, 0.0, 0.0]]         # per-point positions [m]
      v: [[0.0, 1.0, 1.0]]         # per-point velocities [m/s]
      C: [1.21]                    # optional; defaults to the strain map of q
    integrator:
      h: 1.0e-2                    # step size [s]
      t0: 0.0
      t_end: 4.0
      newton_tol: 1.0e-9
      newton_max_iters: 50
      scheme: discrete_gradient    # or implicit_midpoint
      jacobian: finite_difference  # or analytic
    input:
      kind: none                   # or viscous (requires damping > 0)
    output:
      trajectory: trajectory.csv
      report: report.txt
    report_tolerances:             # optional, defaults 1.0e-8 each
      energy: 1.0e-8
      angular_momentum: 1.0e-8
      kinematic: 1.0e-8

Subcommands: ``simulate`` (run, write CSV + report), ``check`` (run + report
only), ``sweep`` (convergence study over a list of step sizes).  Exit codes:
0 ok, 2 configuration error, 3 solver non-convergence, 4 conservation report
failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import math
import sys as _sys
from dataclasses import dataclass
from importlib import resources
from typing import Optional, Sequence

import numpy as np
import yaml

from .diagnostics import ReportTolerances, analyze, state_diagnostics
from .errors import ConfigError, NonConvergenceError, StrainDomainError
from .integrator import (
    IntegratorParams,
    InputSignal,
    StepStats,
    Trajectory,
    collocated_damping,
    integrate,
)
from .model import ElasticElement, MechanicalSystem, State, strain_map

__all__ = [
    "RunConfig",
    "parse_config",
    "builtin_config_text",
    "run",
    "sweep",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "main",
]

CONFIG_VERSION = 1
BUILTIN_CONFIGS = ("pendulum",)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NO_CONVERGENCE = 3
EXIT_REPORT_FAILURE = 4


@dataclass(frozen=True)
class RunConfig:
    """Fully validated run description built from a configuration file."""

    system: MechanicalSystem
    initial_state: State
    params: IntegratorParams
    input_kind: str = "none"
    damping: Optional[float] = None
    trajectory_path: str = "trajectory.csv"
    report_path: str = "report.txt"
    tolerances: ReportTolerances = ReportTolerances()

    def input_signal(self) -> Optional[InputSignal]:
        if self.input_kind == "none":
            return None
        return collocated_damping(self.system, self.damping)


# ====================================================================
# Config parsing
# ====================================================================

def _fail(field, message):
    raise ConfigError(f"{field}: {message}", field=field)


def _section(data, key, required=True):
    value = data.get(key)
    if value is None:
        if required:
            _fail(key, "missing required section")
        return {}
    if not isinstance(value, dict):
        _fail(key, "must be a mapping")
    return value


def _coerce_number(value, field):
    # YAML 1.1 reads exponents without a sign (1.0e4) as strings; accept them.
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            _fail(field, f"must be a number, got {value!r}")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(field, f"must be a number, got {value!r}")
    return float(value)


def _number(mapping, key, field, default=None, required=False):
    if key not in mapping or mapping[key] is None:
        if required:
            _fail(field, "missing required value")
        return default
    return _coerce_number(mapping[key], field)


def _integer(mapping, key, field, default):
    if key not in mapping or mapping[key] is None:
        return default
    value = mapping[key]
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(field, f"must be an integer, got {value!r}")
    return value


def _vector3(value, field):
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        _fail(field, "must be a list of 3 numbers")
    return [_coerce_number(entry, f"{field}[{i}]") for i, entry in enumerate(value)]


def _point_vectors(value, field, n_points):
    if not isinstance(value, list) or len(value) != n_points:
        _fail(field, f"must list one 3-vector per point ({n_points} expected)")
    return np.concatenate([_vector3(row, f"{field}[{k}]") for k, row in enumerate(value)])


def _parse_system(data) -> MechanicalSystem:
    section = _section(data, "system")
    points = section.get("points")
    if not isinstance(points, list) or not points:
        _fail("system.points", "must be a non-empty list")
    masses = []
    for k, point in enumerate(points):
        if not isinstance(point, dict):
            _fail(f"system.points[{k}]", "must be a mapping with a mass key")
        mass = _number(point, "mass", f"system.points[{k}].mass", required=True)
        if mass <= 0.0:
            _fail(f"system.points[{k}].mass", f"must be strictly positive, got {mass}")
        masses.append(mass)

    elements = []
    raw_elements = section.get("elements", [])
    if raw_elements is None:
        raw_elements = []
    if not isinstance(raw_elements, list):
        _fail("system.elements", "must be a list")
    for i, raw in enumerate(raw_elements):
        field = f"system.elements[{i}]"
        if not isinstance(raw, dict):
            _fail(field, "must be a mapping")
        stiffness = _number(raw, "stiffness", f"{field}.stiffness", required=True)
        rest_length = _number(raw, "rest_length", f"{field}.rest_length", required=True)
        coeffs = raw.get("coefficients")
        if not isinstance(coeffs, dict) or not coeffs:
            _fail(f"{field}.coefficients", "must be a non-empty mapping of point index "
                  "to coefficient")
        parsed = {}
        for j, a in coeffs.items():
            if not isinstance(j, int) or isinstance(j, bool) or j < 0 or j >= len(masses):
                _fail(f"{field}.coefficients", f"invalid point index {j!r}")
            parsed[j] = _coerce_number(a, f"{field}.coefficients[{j}]")
        try:
            elements.append(ElasticElement(stiffness, rest_length, parsed))
        except ValueError as exc:
            _fail(field, str(exc))

    gravity = _vector3(section.get("gravity", [0.0, 0.0, 0.0]), "system.gravity")
    try:
        return MechanicalSystem(masses=masses, elements=tuple(elements), gravity=gravity)
    except ValueError as exc:
        _fail("system", str(exc))


def _parse_integrator(data) -> IntegratorParams:
    section = _section(data, "integrator")
    kwargs = dict(
        h=_number(section, "h", "integrator.h", required=True),
        t0=_number(section, "t0", "integrator.t0", default=0.0),
        t_end=_number(section, "t_end", "integrator.t_end", required=True),
        newton_tol=_number(section, "newton_tol", "integrator.newton_tol", default=1e-9),
        newton_max_iters=_integer(section, "newton_max_iters",
                                  "integrator.newton_max_iters", 50),
        scheme=section.get("scheme", "discrete_gradient"),
        jacobian_mode=section.get("jacobian", "finite_difference"),
        consistency_tol=_number(section, "consistency_tol",
                                "integrator.consistency_tol", default=1e-9),
    )
    if kwargs["h"] is not None and kwargs["h"] <= 0.0:
        _fail("integrator.h", f"must be strictly positive, got {kwargs['h']}")
    try:
        return IntegratorParams(**kwargs)
    except ValueError as exc:
        _fail("integrator", str(exc))


def _parse_tolerances(data) -> ReportTolerances:
    section = _section(data, "report_tolerances", required=False)
    return ReportTolerances(
        energy=_number(section, "energy", "report_tolerances.energy", default=1e-8),
        angular_momentum=_number(section, "angular_momentum",
                                 "report_tolerances.angular_momentum", default=1e-8),
        kinematic=_number(section, "kinematic", "report_tolerances.kinematic",
                          default=1e-8),
    )


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse and validate a YAML run configuration.

    Raises :class:`ConfigError` with a line number for syntax errors and with
    the dotted field path for semantic violations.
    """
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        where = f"{source}:{line}" if line is not None else source
        raise ConfigError(f"{where}: syntax error: {exc}", line=line) from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: configuration must be a mapping")

    version = data.get("version")
    if version != CONFIG_VERSION:
        _fail("version", f"must be {CONFIG_VERSION}, got {version!r}")

    system = _parse_system(data)
    params = _parse_integrator(data)
    tolerances = _parse_tolerances(data)

    initial = _section(data, "initial")
    if "q" not in initial:
        _fail("initial.q", "missing required value")
    if "v" not in initial:
        _fail("initial.v", "missing required value")
    q0 = _point_vectors(initial["q"], "initial.q", system.n_points)
    v0 = _point_vectors(initial["v"], "initial.v", system.n_points)

    derived_C = strain_map(system, q0)
    raw_C = initial.get("C")
    if raw_C is None:
        C0 = derived_C
    else:
        if not isinstance(raw_C, list) or len(raw_C) != system.n_elements:
            _fail("initial.C", f"must list one strain per element "
                  f"({system.n_elements} expected)")
        C0 = np.array([_coerce_number(c, f"initial.C[{i}]") for i, c in enumerate(raw_C)])
        mismatch = float(np.max(np.abs(C0 - derived_C))) if C0.size else 0.0
        if mismatch > params.consistency_tol:
            _fail("initial.C", f"inconsistent with the strain map of initial.q: "
                  f"max defect {mismatch:.3e} > {params.consistency_tol:.3e}")
    try:
        x0 = State(q=q0, v=v0, C=C0)
    except (ValueError, StrainDomainError) as exc:
        _fail("initial", str(exc))

    input_section = _section(data, "input", required=False)
    kind = input_section.get("kind", "none")
    damping = None
    if kind == "viscous":
        damping = _number(input_section, "damping", "input.damping", required=True)
        if damping <= 0.0:
            _fail("input.damping", f"must be strictly positive, got {damping}")
    elif kind != "none":
        _fail("input.kind", f"must be 'none' or 'viscous', got {kind!r}")

    output = _section(data, "output", required=False)
    trajectory_path = output.get("trajectory", "trajectory.csv")
    report_path = output.get("report", "report.txt")

    return RunConfig(
        system=system,
        initial_state=x0,
        params=params,
        input_kind=kind,
        damping=damping,
        trajectory_path=str(trajectory_path),
        report_path=str(report_path),
        tolerances=tolerances,
    )


def builtin_config_text(name: str) -> str:
    """Return the text of a shipped benchmark configuration."""
    if name not in BUILTIN_CONFIGS:
        raise ConfigError(f"unknown built-in configuration {name!r}; "
                          f"available: {', '.join(BUILTIN_CONFIGS)}")
    return resources.files("phelast").joinpath(f"data/{name}.cfg").read_text()


# ====================================================================
# Trajectory CSV
# ====================================================================

def _csv_header(sys: MechanicalSystem) -> list[str]:
    cols = ["t"]
    for k in range(sys.n_points):
        cols += [f"q{k + 1}x", f"q{k + 1}y", f"q{k + 1}z"]
    for k in range(sys.n_points):
        cols += [f"v{k + 1}x", f"v{k + 1}y", f"v{k + 1}z"]
    cols += [f"C{i + 1}" for i in range(sys.n_elements)]
    cols += ["H", "T_kin", "V_int", "V_ext", "L1", "L2", "L3",
             "g_inf_norm", "newton_iters", "power_supplied"]
    return cols


def write_trajectory_csv(path, sys: MechanicalSystem, trajectory: Trajectory):
    """Write one row per state at full double precision (17 significant digits)."""
    def fmt(x):
        return format(float(x), ".17g")

    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(_csv_header(sys))
        for t, x, diag in zip(trajectory.times, trajectory.states, trajectory.diagnostics):
            iters = 0 if diag.newton is None else diag.newton.iterations
            row = (
                [fmt(t)]
                + [fmt(v) for v in x.q]
                + [fmt(v) for v in x.v]
                + [fmt(v) for v in x.C]
                + [fmt(diag.H), fmt(diag.T_kin), fmt(diag.V_int), fmt(diag.V_ext)]
                + [fmt(v) for v in diag.L]
                + [fmt(diag.kinematic_residual), str(iters), fmt(diag.power_supplied)]
            )
            writer.writerow(row)


def read_trajectory_csv(path, sys: MechanicalSystem) -> Trajectory:
    """Rebuild a trajectory from a CSV written by :func:`write_trajectory_csv`.

    States and supplied power round-trip exactly; Newton residual norms are
    not stored in the CSV, so the reconstructed per-step statistics carry the
    iteration counts only.
    """
    nq = sys.dim_q
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if header != _csv_header(sys):
            raise ValueError(f"{path}: header does not match the system layout")
        times, states, diags = [], [], []
        for row in reader:
            t = float(row[0])
            q = np.array([float(v) for v in row[1:1 + nq]])
            v = np.array([float(v) for v in row[1 + nq:1 + 2 * nq]])
            C = np.array([float(v) for v in row[1 + 2 * nq:1 + 2 * nq + sys.n_elements]])
            iters = int(row[-2])
            power = float(row[-1])
            x = State(q=q, v=v, C=C)
            newton = None if not times else StepStats(iters, float("nan"), True)
            times.append(t)
            states.append(x)
            diags.append(state_diagnostics(sys, t, x, power, newton))
    return Trajectory(times=np.array(times), states=tuple(states), diagnostics=tuple(diags))


# ====================================================================
# Commands
# ====================================================================

def run(config: RunConfig, write_trajectory: bool = True) -> int:
    """Integrate, write outputs, and return the process exit code."""
    try:
        trajectory = integrate(
            config.system, config.initial_state, config.params, config.input_signal()
        )
    except (NonConvergenceError, StrainDomainError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_NO_CONVERGENCE

    if write_trajectory:
        write_trajectory_csv(config.trajectory_path, config.system, trajectory)
        print(f"trajectory: {config.trajectory_path} ({len(trajectory)} states)")

    report = analyze(config.system, trajectory, tolerances=config.tolerances)
    with open(config.report_path, "w") as handle:
        handle.write(report.to_text())
    print(f"report: {config.report_path}")
    print(report.summary())
    return EXIT_OK if report.passed else EXIT_REPORT_FAILURE


def sweep(config: RunConfig, h_list: Sequence[float]) -> list[tuple[float, float, Optional[float]]]:
    """Convergence study: global error at t_end versus a fine reference run.

    Requires at least three strictly decreasing step sizes; the reference
    uses min(h_list) / 100.  Returns (h, error, observed order) rows, where
    the order is estimated between consecutive step sizes.
    """
    h_list = [float(h) for h in h_list]
    if len(h_list) < 3:
        raise ConfigError(f"sweep needs at least 3 step sizes, got {len(h_list)}")
    if any(h <= 0.0 for h in h_list):
        raise ConfigError("sweep step sizes must be strictly positive")
    if any(a <= b for a, b in zip(h_list, h_list[1:])):
        raise ConfigError("sweep step sizes must be strictly decreasing")

    def final_state(h):
        params = dataclasses.replace(config.params, h=h)
        trajectory = integrate(
            config.system, config.initial_state, params, config.input_signal(),
            collect_diagnostics=False,
        )
        return trajectory.states[-1].as_vector()

    reference = final_state(min(h_list) / 100.0)
    errors = [float(np.linalg.norm(final_state(h) - reference)) for h in h_list]

    rows = []
    for i, (h, err) in enumerate(zip(h_list, errors)):
        if i == 0 or err <= 0.0 or errors[i - 1] <= 0.0:
            order = None
        else:
            order = math.log(errors[i - 1] / err) / math.log(h_list[i - 1] / h)
        rows.append((h, err, order))
    return rows


def _print_sweep_table(rows):
    print(f"{'h':>12}  {'error':>14}  {'order':>7}")
    for h, err, order in rows:
        order_str = f"{order:7.3f}" if order is not None else "      -"
        print(f"{h:12.6g}  {err:14.6e}  {order_str}")


# ====================================================================
# Entry point
# ====================================================================

def _load_config(path_or_name: str) -> str:
    if path_or_name in BUILTIN_CONFIGS:
        return builtin_config_text(path_or_name)
    try:
        with open(path_or_name) as handle:
            return handle.read()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path_or_name!r}: {exc}") from exc


def _apply_overrides(config: RunConfig, args) -> RunConfig:
    updates = {}
    for name in ("h", "t_end", "newton_tol", "scheme"):
        value = getattr(args, name, None)
        if value is not None:
            updates[name] = value
    if getattr(args, "jacobian", None) is not None:
        updates["jacobian_mode"] = args.jacobian
    if updates:
        if "h" in updates and updates["h"] <= 0.0:
            raise ConfigError(f"--h must be strictly positive, got {updates['h']}")
        try:
            config = dataclasses.replace(
                config, params=dataclasses.replace(config.params, **updates)
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    paths = {}
    if getattr(args, "trajectory", None) is not None:
        paths["trajectory_path"] = args.trajectory
    if getattr(args, "report", None) is not None:
        paths["report_path"] = args.report
    if paths:
        config = dataclasses.replace(config, **paths)
    return config


def _add_common_arguments(parser):
    parser.add_argument("config", help="path to a YAML configuration, or the name "
                        "of a built-in one (pendulum)")
    parser.add_argument("--h", type=float, help="override the step size")
    parser.add_argument("--t-end", dest="t_end", type=float, help="override the horizon")
    parser.add_argument("--newton-tol", dest="newton_tol", type=float,
                        help="override the Newton residual tolerance")
    parser.add_argument("--scheme", choices=("discrete_gradient", "implicit_midpoint"),
                        help="override the time-stepping scheme")
    parser.add_argument("--jacobian", choices=("finite_difference", "analytic"),
                        help="override the Newton Jacobian mode")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="phelast",
        description="Structure-preserving simulation of hyperelastic mass-spring "
                    "networks in port-Hamiltonian form.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="integrate and write trajectory + report")
    _add_common_arguments(p_sim)
    p_sim.add_argument("--trajectory", help="override the trajectory CSV path")
    p_sim.add_argument("--report", help="override the report path")

    p_check = sub.add_parser("check", help="integrate and report, no trajectory file")
    _add_common_arguments(p_check)
    p_check.add_argument("--report", help="override the report path")

    p_sweep = sub.add_parser("sweep", help="convergence order study")
    _add_common_arguments(p_sweep)
    p_sweep.add_argument("--step-sizes", required=True,
                         help="comma-separated step sizes, strictly decreasing, "
                              "at least 3 (e.g. 4e-3,2e-3,1e-3)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)

    try:
        config = parse_config(_load_config(args.config), source=args.config)
        config = _apply_overrides(config, args)
        if args.command == "sweep":
            h_list = [float(v) for v in args.step_sizes.split(",") if v.strip()]
        else:
            h_list = None
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"configuration error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG

    if args.command == "simulate":
        return run(config, write_trajectory=True)
    if args.command == "check":
        return run(config, write_trajectory=False)

    try:
        rows = sweep(config, h_list)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    except (NonConvergenceError, StrainDomainError) as exc:
        print(f"error: sweep aborted: {exc}", file=_sys.stderr)
        return EXIT_NO_CONVERGENCE
    _print_sweep_table(rows)
    return EXIT_OK


if __name__ == "__main__":
    _sys.exit(main())
