"""Command-line front end: config parsing, scenarios, and serialization.

Config files are line-oriented UTF-8 text: ``[section]`` headers group
``key = value`` lines, ``#`` starts a comment, blank lines are ignored.
Sections are ``[scenario]`` (initial data, inline or generated),
``[solver]`` (tolerances and thresholds), ``[twobody]`` (separation
problem inputs), and ``[converge]`` (cap index list).  Unknown keys are
rejected by name; structural problems report the line number.

The scenario generator is pinned so the same seed reproduces the same
initial data everywhere: a SplitMix64 stream (increment
0x9E3779B97F4A7C15, mix constants 0xBF58476D1CE4E5B9 and
0x94D049BB133111EB, final shifts 30/27/31), mapped to doubles in [0, 1)
by taking the top 53 bits.  Positions are drawn uniformly per component
in [-box/2, box/2]; velocities are drawn uniformly from the unit ball by
rejection and scaled by ``speed``.

Commands write into the output directory:

* ``simulate``: ``trajectory.csv`` (header ``t,x_1_1..x_N_d,v_1_1..v_N_d``,
  one row per sample, round-trippable decimal), ``events.jsonl`` (one
  object per event: t_event, group, kind, rel_speed, min_dist), and
  ``meta.txt`` echoing the resolved config in the config grammar itself.
* ``twobody``: ``report.txt`` with the classification, the level-time
  table, and the bounded-kernel floor ratio when the kernel is the
  smooth family.
* ``converge``: ``convergence.csv`` with columns
  ``n,sup_dx,sup_dv,reference_gap_x,reference_gap_v`` (consecutive-gap
  fields are empty on the first row), plus ``meta.txt``.
* ``diagnose``: ``report.txt`` (flat ``key = value`` lines),
  ``r_series.csv``, ``events.jsonl``, ``meta.txt``.

Exit codes: 0 success, 1 numerical failure, 2 invalid input.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .convergence import cauchy_table, run_family
from .diagnostics import run_diagnostics
from .dynamics import ParticleSystem, make_system
from .errors import (
    ConfigError,
    DomainError,
    FlockError,
    InsufficientDataError,
    ValidationError,
)
from .integrator import PiecewiseTrajectory, SolverConfig, solve_piecewise
from .kernels import CuckerSmaleKernel, SingularKernel
from .twobody import (
    CollideNonstick,
    NoCollision,
    StickFiniteTime,
    TwoBodyProblem,
    bounded_weight_floor_check,
    classify,
    critical_velocity,
    level_time_bound_check,
)

__all__ = [
    "SplitMix64",
    "ScenarioConfig",
    "TwoBodyConfig",
    "RunConfig",
    "parse_config",
    "generate_scenario",
    "build_system",
    "serialize_trajectory",
    "run_command",
    "main",
]

_COMMANDS = ("simulate", "twobody", "converge", "diagnose")

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """Deterministic 64-bit generator with the standard SplitMix constants."""

    def __init__(self, seed: int):
        self.state = int(seed) & _MASK64

    def u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return (z ^ (z >> 31)) & _MASK64

    def uniform(self) -> float:
        return (self.u64() >> 11) * 2.0**-53

    def ball(self, d: int) -> list[float]:
        while True:
            comps = [2.0 * self.uniform() - 1.0 for _ in range(d)]
            if sum(c * c for c in comps) <= 1.0:
                return comps


def generate_scenario(
    n: int, d: int, seed: int, box: float, speed: float
) -> tuple[np.ndarray, np.ndarray]:
    """Seeded random initial data: box-uniform positions, ball velocities."""
    rng = SplitMix64(seed)
    x = np.empty((n, d))
    v = np.empty((n, d))
    for i in range(n):
        for k in range(d):
            x[i, k] = box * (rng.uniform() - 0.5)
    for i in range(n):
        v[i] = [speed * c for c in rng.ball(d)]
    return x, v


@dataclass
class ScenarioConfig:
    n: Optional[int] = None
    d: Optional[int] = None
    alpha: Optional[float] = None
    mode: str = "inline"
    kernel: str = "singular"
    K: float = 1.0
    beta: float = 2.0
    seed: Optional[int] = None
    box: float = 1.0
    speed: float = 1.0
    x: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None


@dataclass
class TwoBodyConfig:
    phi0: float
    dphi0: float
    n_levels: int = 20


@dataclass
class RunConfig:
    command: str
    scenario: ScenarioConfig
    solver: SolverConfig
    twobody: Optional[TwoBodyConfig] = None
    n_list: Optional[tuple[int, ...]] = None
    out_dir: str = "flock_out"


_SOLVER_FLOAT_KEYS = ("rel_tol", "abs_tol", "d_stick", "v_stick", "sample_dt", "t_end")
_SOLVER_INT_KEYS = ("n_reg", "max_segments")
_SCENARIO_KEYS = {"n", "d", "alpha", "mode", "kernel", "K", "beta", "seed", "box", "speed"}
_TWOBODY_KEYS = {"phi0", "dphi0", "n_levels"}


def _parse_float(key: str, raw: str) -> float:
    try:
        val = float(raw)
    except ValueError:
        raise ValidationError(f"not a number: {raw!r}", key=key) from None
    if not math.isfinite(val):
        raise ValidationError(f"must be finite, got {raw!r}", key=key)
    return val


def _parse_int(key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ValidationError(f"not an integer: {raw!r}", key=key) from None


def _split_sections(text: str) -> dict[str, dict[str, tuple[str, int]]]:
    """Raw (value, line number) per key per section; structure errors here."""
    sections: dict[str, dict[str, tuple[str, int]]] = {}
    current: Optional[str] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in ("scenario", "solver", "twobody", "converge"):
                raise ConfigError(f"unknown section [{name}]", line=lineno)
            current = name
            sections.setdefault(name, {})
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", line=lineno)
        if current is None:
            raise ConfigError("key outside any [section]", line=lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError("empty key", line=lineno)
        if key in sections[current]:
            raise ConfigError(f"duplicate key {key!r} in [{current}]", line=lineno)
        sections[current][key] = (value, lineno)
    return sections


def _build_scenario(raw: dict[str, tuple[str, int]]) -> ScenarioConfig:
    sc = ScenarioConfig()
    vector_keys = {}
    for key, (value, lineno) in raw.items():
        if key.startswith("x_") or key.startswith("v_"):
            vector_keys[key] = (value, lineno)
            continue
        if key not in _SCENARIO_KEYS:
            raise ValidationError("unknown key in [scenario]", key=key)
        if key == "n":
            sc.n = _parse_int(key, value)
        elif key == "d":
            sc.d = _parse_int(key, value)
        elif key == "alpha":
            sc.alpha = _parse_float(key, value)
        elif key == "mode":
            if value not in ("inline", "generate"):
                raise ValidationError(f"mode must be inline or generate, got {value!r}", key=key)
            sc.mode = value
        elif key == "kernel":
            if value not in ("singular", "cucker_smale"):
                raise ValidationError(
                    f"kernel must be singular or cucker_smale, got {value!r}", key=key
                )
            sc.kernel = value
        elif key == "K":
            sc.K = _parse_float(key, value)
        elif key == "beta":
            sc.beta = _parse_float(key, value)
        elif key == "seed":
            sc.seed = _parse_int(key, value)
        elif key == "box":
            sc.box = _parse_float(key, value)
        elif key == "speed":
            sc.speed = _parse_float(key, value)

    if sc.alpha is not None and not (0.0 < sc.alpha < 1.0):
        raise ValidationError(f"must lie strictly inside (0, 1), got {sc.alpha}", key="alpha")

    if vector_keys:
        if sc.n is None or sc.d is None:
            raise ValidationError("inline rows need n and d declared", key="n")
        sc.x = _collect_rows("x", vector_keys, sc.n, sc.d)
        sc.v = _collect_rows("v", vector_keys, sc.n, sc.d)
        extra = [
            k
            for k in vector_keys
            if not any(k == f"{p}_{i}" for p in ("x", "v") for i in range(1, sc.n + 1))
        ]
        if extra:
            raise ValidationError("row index out of range", key=sorted(extra)[0])
    return sc


def _collect_rows(prefix: str, vector_keys, n: int, d: int) -> np.ndarray:
    out = np.empty((n, d))
    for i in range(1, n + 1):
        key = f"{prefix}_{i}"
        if key not in vector_keys:
            raise ValidationError("missing inline row", key=key)
        value, _ = vector_keys[key]
        parts = value.split()
        if len(parts) != d:
            raise ValidationError(f"expected {d} components, got {len(parts)}", key=key)
        for k, part in enumerate(parts):
            out[i - 1, k] = _parse_float(key, part)
    return out


def _build_solver(raw: dict[str, tuple[str, int]]) -> SolverConfig:
    kwargs = {}
    for key, (value, lineno) in raw.items():
        if key in _SOLVER_FLOAT_KEYS:
            kwargs[key] = _parse_float(key, value)
        elif key in _SOLVER_INT_KEYS:
            kwargs[key] = _parse_int(key, value)
        else:
            raise ValidationError("unknown key in [solver]", key=key)
    try:
        return SolverConfig(**kwargs)
    except DomainError as exc:
        bad = str(exc).split()[0]
        raise ValidationError(str(exc), key=bad) from None


def _build_twobody(raw: dict[str, tuple[str, int]]) -> TwoBodyConfig:
    vals = {}
    for key, (value, lineno) in raw.items():
        if key not in _TWOBODY_KEYS:
            raise ValidationError("unknown key in [twobody]", key=key)
        vals[key] = value
    if "phi0" not in vals:
        raise ValidationError("required for the separation problem", key="phi0")
    if "dphi0" not in vals:
        raise ValidationError("required for the separation problem", key="dphi0")
    phi0 = _parse_float("phi0", vals["phi0"])
    dphi0 = _parse_float("dphi0", vals["dphi0"])
    n_levels = _parse_int("n_levels", vals["n_levels"]) if "n_levels" in vals else 20
    if phi0 <= 0.0:
        raise ValidationError(f"must be positive, got {phi0}", key="phi0")
    if n_levels < 2:
        raise ValidationError(f"must be at least 2, got {n_levels}", key="n_levels")
    return TwoBodyConfig(phi0=phi0, dphi0=dphi0, n_levels=n_levels)


def _build_n_list(raw: dict[str, tuple[str, int]]) -> tuple[int, ...]:
    for key in raw:
        if key != "n_list":
            raise ValidationError("unknown key in [converge]", key=key)
    if "n_list" not in raw:
        raise ValidationError("required for convergence runs", key="n_list")
    value, _ = raw["n_list"]
    parts = value.split()
    if len(parts) < 2:
        raise ValidationError("need at least two cap indices", key="n_list")
    ns = tuple(_parse_int("n_list", p) for p in parts)
    if any(n < 2 for n in ns):
        raise ValidationError(f"cap indices must be >= 2, got {ns}", key="n_list")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValidationError(f"cap indices must be strictly increasing, got {ns}", key="n_list")
    return ns


def parse_config(text: str, command: str = "simulate", out_dir: str = "flock_out") -> RunConfig:
    """Parse and fully validate one config document for a command."""
    if command not in _COMMANDS:
        raise ValidationError(f"unknown command {command!r}", key="command")
    sections = _split_sections(text)
    scenario = _build_scenario(sections.get("scenario", {}))
    solver = _build_solver(sections.get("solver", {}))
    twobody = _build_twobody(sections["twobody"]) if "twobody" in sections else None
    n_list = _build_n_list(sections["converge"]) if "converge" in sections else None

    if command in ("simulate", "diagnose", "converge"):
        _validate_system_scenario(scenario, command)
    if command == "converge" and n_list is None:
        raise ValidationError("converge needs a [converge] section", key="n_list")
    if command == "twobody":
        if twobody is None:
            raise ValidationError("twobody needs a [twobody] section", key="phi0")
        if scenario.kernel == "singular" and scenario.alpha is None:
            raise ValidationError("required for the singular kernel", key="alpha")
    return RunConfig(
        command=command,
        scenario=scenario,
        solver=solver,
        twobody=twobody,
        n_list=n_list,
        out_dir=out_dir,
    )


def _validate_system_scenario(sc: ScenarioConfig, command: str) -> None:
    if sc.n is None:
        raise ValidationError("required", key="n")
    if sc.d is None:
        raise ValidationError("required", key="d")
    if sc.n < 1:
        raise ValidationError(f"need at least one particle, got {sc.n}", key="n")
    if sc.d < 1:
        raise ValidationError(f"need at least one dimension, got {sc.d}", key="d")
    if sc.kernel == "singular" and sc.alpha is None:
        raise ValidationError("required for the singular kernel", key="alpha")
    if command == "converge" and sc.kernel != "singular":
        raise ValidationError("convergence runs use the singular kernel", key="kernel")
    if sc.mode == "inline":
        if sc.x is None or sc.v is None:
            raise ValidationError("inline scenarios need x_i and v_i rows", key="x_1")
    else:
        if sc.seed is None:
            raise ValidationError("required for generated scenarios", key="seed")
        if not (math.isfinite(sc.box) and sc.box > 0.0):
            raise ValidationError(f"must be positive, got {sc.box}", key="box")
        if not (math.isfinite(sc.speed) and sc.speed > 0.0):
            raise ValidationError(f"must be positive, got {sc.speed}", key="speed")


def build_system(sc: ScenarioConfig) -> ParticleSystem:
    """Materialize the scenario's particle system."""
    if sc.kernel == "cucker_smale":
        kernel = CuckerSmaleKernel(K=sc.K, beta=sc.beta)
    else:
        kernel = SingularKernel(alpha=sc.alpha)
    if sc.mode == "inline":
        x, v = sc.x, sc.v
    else:
        x, v = generate_scenario(sc.n, sc.d, sc.seed, sc.box, sc.speed)
    return make_system(x, v, kernel)


def _fmt(val: float) -> str:
    return repr(float(val))


def _write_text(path: Path, content: str) -> None:
    try:
        path.write_text(content, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def serialize_trajectory(traj: PiecewiseTrajectory, out_dir) -> None:
    """Write trajectory.csv and events.jsonl with round-trippable decimals."""
    out = Path(out_dir)
    s, n, d = traj.x.shape
    header = ["t"]
    header += [f"x_{i+1}_{k+1}" for i in range(n) for k in range(d)]
    header += [f"v_{i+1}_{k+1}" for i in range(n) for k in range(d)]
    lines = [",".join(header)]
    for row in range(s):
        vals = [_fmt(traj.t[row])]
        vals += [_fmt(traj.x[row, i, k]) for i in range(n) for k in range(d)]
        vals += [_fmt(traj.v[row, i, k]) for i in range(n) for k in range(d)]
        lines.append(",".join(vals))
    _write_text(out / "trajectory.csv", "\n".join(lines) + "\n")

    ev_lines = []
    for e in traj.events:
        ev_lines.append(
            json.dumps(
                {
                    "t_event": float(e.t_event),
                    "group": [int(g) for g in e.group],
                    "kind": e.kind,
                    "rel_speed": float(e.rel_speed),
                    "min_dist": float(e.min_dist),
                },
                sort_keys=True,
            )
        )
    _write_text(out / "events.jsonl", "".join(line + "\n" for line in ev_lines))


def _meta_text(config: RunConfig) -> str:
    sc = config.scenario
    lines = [f"# command: {config.command}", "[scenario]"]
    if sc.n is not None:
        lines.append(f"n = {sc.n}")
    if sc.d is not None:
        lines.append(f"d = {sc.d}")
    if sc.alpha is not None:
        lines.append(f"alpha = {_fmt(sc.alpha)}")
    lines.append(f"mode = {sc.mode}")
    lines.append(f"kernel = {sc.kernel}")
    if sc.kernel == "cucker_smale":
        lines.append(f"K = {_fmt(sc.K)}")
        lines.append(f"beta = {_fmt(sc.beta)}")
    if sc.mode == "generate":
        lines.append(f"seed = {sc.seed}")
        lines.append(f"box = {_fmt(sc.box)}")
        lines.append(f"speed = {_fmt(sc.speed)}")
    elif sc.x is not None:
        for i in range(sc.n):
            lines.append(f"x_{i+1} = " + " ".join(_fmt(val) for val in sc.x[i]))
        for i in range(sc.n):
            lines.append(f"v_{i+1} = " + " ".join(_fmt(val) for val in sc.v[i]))
    sol = config.solver
    lines += [
        "",
        "[solver]",
        f"rel_tol = {_fmt(sol.rel_tol)}",
        f"abs_tol = {_fmt(sol.abs_tol)}",
        f"d_stick = {_fmt(sol.d_stick)}",
        f"v_stick = {_fmt(sol.v_stick)}",
        f"n_reg = {sol.n_reg}",
        f"max_segments = {sol.max_segments}",
        f"t_end = {_fmt(sol.t_end)}",
        f"sample_dt = {_fmt(sol.sample_dt)}",
    ]
    if config.twobody is not None:
        tb = config.twobody
        lines += [
            "",
            "[twobody]",
            f"phi0 = {_fmt(tb.phi0)}",
            f"dphi0 = {_fmt(tb.dphi0)}",
            f"n_levels = {tb.n_levels}",
        ]
    if config.n_list is not None:
        lines += ["", "[converge]", "n_list = " + " ".join(str(n) for n in config.n_list)]
    return "\n".join(lines) + "\n"


def _cmd_simulate(config: RunConfig, out: Path) -> int:
    system = build_system(config.scenario)
    traj = solve_piecewise(system, config.solver)
    serialize_trajectory(traj, out)
    _write_text(out / "meta.txt", _meta_text(config))
    return 0


def _cmd_twobody(config: RunConfig, out: Path) -> int:
    sc = config.scenario
    tb = config.twobody
    lines = []
    if sc.kernel == "cucker_smale":
        floor = bounded_weight_floor_check(
            tb.phi0, tb.dphi0, sc.K, sc.beta, config.solver.t_end
        )
        lines.append(f"floor_min_ratio = {_fmt(floor.min_ratio)}")
        lines.append(f"floor_ok = {floor.ok}")
    else:
        problem = TwoBodyProblem(phi0=tb.phi0, dphi0=tb.dphi0, alpha=sc.alpha)
        outcome = classify(problem)
        lines.append(f"critical_velocity = {_fmt(critical_velocity(tb.phi0, sc.alpha))}")
        if isinstance(outcome, StickFiniteTime):
            lines.append("outcome = Stick")
            lines.append(f"stick_time = {_fmt(outcome.t0)}")
        elif isinstance(outcome, CollideNonstick):
            lines.append("outcome = Collide")
            lines.append(f"impact_speed = {_fmt(outcome.impact_speed)}")
            lines.append(f"t_hit = {_fmt(outcome.t_hit)}")
        elif isinstance(outcome, NoCollision):
            lines.append("outcome = NoCollision")
            lines.append(f"phi_limit = {_fmt(outcome.phi_limit)}")
        records = level_time_bound_check(tb.phi0, sc.alpha, tb.n_levels)
        for rec in records:
            lines.append(
                f"level_{rec.n} = {_fmt(rec.gap)} {_fmt(rec.bound)} {'ok' if rec.ok else 'VIOLATED'}"
            )
    _write_text(out / "report.txt", "".join(line + "\n" for line in lines))
    _write_text(out / "meta.txt", _meta_text(config))
    return 0


def _cmd_converge(config: RunConfig, out: Path) -> int:
    sc = config.scenario
    if sc.mode == "inline":
        x, v = sc.x, sc.v
    else:
        x, v = generate_scenario(sc.n, sc.d, sc.seed, sc.box, sc.speed)
    runs = run_family(x, v, sc.alpha, config.n_list, config.solver)
    report = cauchy_table(runs, config.n_list)
    lines = ["n,sup_dx,sup_dv,reference_gap_x,reference_gap_v"]
    for k, n in enumerate(report.n_list):
        dx = _fmt(report.sup_dx[k - 1]) if k > 0 else ""
        dv = _fmt(report.sup_dv[k - 1]) if k > 0 else ""
        lines.append(
            f"{n},{dx},{dv},{_fmt(report.reference_gap_x[k])},{_fmt(report.reference_gap_v[k])}"
        )
    _write_text(out / "convergence.csv", "\n".join(lines) + "\n")
    _write_text(out / "meta.txt", _meta_text(config))
    return 0


def _cmd_diagnose(config: RunConfig, out: Path) -> int:
    system = build_system(config.scenario)
    traj = solve_piecewise(system, config.solver)
    report = run_diagnostics(traj)
    lines = [
        f"mean_velocity_drift = {_fmt(report.mean_velocity_drift)}",
        f"r_violation = {_fmt(report.r_violation)}",
        f"ordered_sum_violation = {_fmt(report.ordered_sum_violation)}",
        f"velocity_bound_margin = {_fmt(report.velocity_bound_margin)}",
        f"n_events = {len(traj.events)}",
        f"n_sticking = {traj.n_sticking}",
    ]
    if report.holder is not None:
        lines.append(f"holder_exponent = {_fmt(report.holder.exponent)}")
        lines.append(f"holder_residual = {_fmt(report.holder.residual)}")
    for idx, rec in enumerate(report.integrability, start=1):
        est = "nan" if math.isnan(rec.estimate) else _fmt(rec.estimate)
        lines.append(
            f"integrability_{idx} = {rec.pair[0]} {rec.pair[1]} {est} {rec.classification}"
        )
    _write_text(out / "report.txt", "".join(line + "\n" for line in lines))
    series = ["t,r"]
    for t, r in zip(report.r_t, report.r_values):
        series.append(f"{_fmt(t)},{_fmt(r)}")
    _write_text(out / "r_series.csv", "\n".join(series) + "\n")
    serialize_trajectory(traj, out)
    _write_text(out / "meta.txt", _meta_text(config))
    return 0


def run_command(config: RunConfig) -> int:
    """Dispatch a validated RunConfig; returns the process exit code."""
    out = Path(config.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if config.command == "simulate":
            return _cmd_simulate(config, out)
        if config.command == "twobody":
            return _cmd_twobody(config, out)
        if config.command == "converge":
            return _cmd_converge(config, out)
        return _cmd_diagnose(config, out)
    except (ConfigError, ValidationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FlockError, InsufficientDataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="flock", description="alignment dynamics simulator and analysis tools"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the run config file")
        p.add_argument("--out", default="flock_out", help="output directory")
    args = parser.parse_args(argv)
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read {args.config}: {exc}", file=sys.stderr)
        return 2
    try:
        config = parse_config(text, command=args.command, out_dir=args.out)
    except (ConfigError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return run_command(config)


if __name__ == "__main__":
    sys.exit(main())
