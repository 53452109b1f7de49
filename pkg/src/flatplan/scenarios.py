"""Scenario configuration, the plan/torque/simulate/metrics pipeline and the
results table of the three reference scenarios.

Configs and summaries are flat JSON objects whose keys carry their units.
A summary is itself a valid config: metric keys and the version tag are
ignored on input.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from flatplan import __version__
from flatplan.dynsim import SimConfig, Trajectory, planned_vs_simulated, simulate
from flatplan.errors import ConfigError
from flatplan.flatmodel import (
    TABLE_I,
    JointState,
    ReducedFlatParams,
    feedforward_torque,
    flat_boundaries_from_joint,
    joint_state_from_flat,
)
from flatplan.metrics import (
    ScenarioMetrics,
    oscillation_amplitude,
    relative_change,
    torque_rms,
)
from flatplan.varplanner import MotionLaw, StrategySpec, plan_motion


@dataclass(frozen=True)
class MotionSpec:
    t_i: float = 0.0
    t_f: float = 1.0
    q1_i: float = 0.0
    q2_i: float = 0.0
    q1_f: float = math.pi
    q2_f: float = 0.0


@dataclass(frozen=True)
class ScenarioConfig:
    robot: ReducedFlatParams = TABLE_I
    motion: MotionSpec = MotionSpec()
    strategy: StrategySpec = StrategySpec()
    sim: SimConfig = SimConfig()


# flat JSON key -> (section, attribute)
CONFIG_KEYS = {
    "i1_star_kgm2": ("robot", "i_star_prev"),
    "i2_star_kgm2": ("robot", "i_star_last"),
    "k2_Nm_per_rad": ("robot", "stiffness"),
    "c2_Nms_per_rad": ("robot", "damping"),
    "t_i_s": ("motion", "t_i"),
    "t_f_s": ("motion", "t_f"),
    "q1_i_rad": ("motion", "q1_i"),
    "q2_i_rad": ("motion", "q2_i"),
    "q1_f_rad": ("motion", "q1_f"),
    "q2_f_rad": ("motion", "q2_f"),
    "strategy": ("strategy", "kind"),
    "r": ("strategy", "r"),
    "p": ("strategy", "p"),
    "dt_s": ("sim", "dt"),
    "t_free_s": ("sim", "t_free"),
    "k_scale": ("sim", "k_scale"),
    "c_scale": ("sim", "c_scale"),
}
METRIC_KEYS = tuple(ScenarioMetrics.__dataclass_fields__)
ANGLE_KEYS = {"q1_i_rad", "q2_i_rad", "q1_f_rad", "q2_f_rad"}

_PI_RE = re.compile(
    r"^\s*(?P<sign>[-+])?\s*(?:(?P<mul>\d+(?:\.\d*)?|\.\d+)\s*\*?\s*)?pi\s*(?:/\s*(?P<div>\d+(?:\.\d*)?))?\s*$"
)


def parse_angle(value) -> float:
    """Number, or a string such as ``"pi"``, ``"-pi/2"``, ``"2*pi"``."""
    if isinstance(value, bool):
        raise ConfigError(f"invalid angle {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        m = _PI_RE.match(value)
        if m:
            x = math.pi
            if m["mul"]:
                x = float(m["mul"]) * math.pi
            if m["div"]:
                x = x / float(m["div"])
            return -x if m["sign"] == "-" else x
        try:
            return float(value)
        except ValueError:
            pass
    raise ConfigError(f"invalid angle {value!r}")


def _format_angle(x: float):
    if x == math.pi:
        return "pi"
    if x == -math.pi:
        return "-pi"
    return x


def config_to_dict(config: ScenarioConfig) -> dict:
    out = {}
    for key, (section, attr) in CONFIG_KEYS.items():
        v = getattr(getattr(config, section), attr)
        out[key] = _format_angle(v) if key in ANGLE_KEYS else v
    return out


def config_from_dict(data: dict, base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Build a config from a flat mapping; missing keys fall back to ``base``.

    Raises
    ------
    ConfigError
        On unknown keys, wrong types or violated invariants.
    """
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    base = base or ScenarioConfig()
    sections = {name: asdict(getattr(base, name)) for name in ("robot", "motion", "strategy", "sim")}
    for key, value in data.items():
        if key in METRIC_KEYS or key == "version":
            continue
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        section, attr = CONFIG_KEYS[key]
        if key in ANGLE_KEYS:
            value = parse_angle(value)
        elif key == "strategy":
            if not isinstance(value, str):
                raise ConfigError("strategy must be a string")
        else:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{key} must be a number, got {value!r}")
            value = float(value)
        sections[section][attr] = value
    try:
        return ScenarioConfig(
            robot=ReducedFlatParams(**sections["robot"]),
            motion=MotionSpec(**sections["motion"]),
            strategy=StrategySpec(**sections["strategy"]),
            sim=SimConfig(**sections["sim"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, base: ScenarioConfig | None = None) -> ScenarioConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(data, base)


def scenario_config(scenario: int, strategy: str = "polynomial", **sim_overrides) -> ScenarioConfig:
    """One of the three reference scenarios.

    1: no damping; 2: damping in planner and plant; 3: as 2 with plant
    stiffness and damping raised by 10 %.
    """
    if scenario == 1:
        robot = replace(TABLE_I, damping=0.0)
        sim = SimConfig()
    elif scenario == 2:
        robot = TABLE_I
        sim = SimConfig()
    elif scenario == 3:
        robot = TABLE_I
        sim = SimConfig(k_scale=1.1, c_scale=1.1)
    else:
        raise ConfigError(f"unknown scenario {scenario}; expected 1, 2 or 3")
    if sim_overrides:
        sim = replace(sim, **sim_overrides)
    return ScenarioConfig(robot=robot, strategy=StrategySpec(kind=strategy), sim=sim)


@dataclass(frozen=True)
class ScenarioReport:
    metrics: ScenarioMetrics
    config: ScenarioConfig
    version: str = __version__
    law: MotionLaw | None = field(default=None, repr=False, compare=False)
    trajectory: Trajectory | None = field(default=None, repr=False, compare=False)
    planned: JointState | None = field(default=None, repr=False, compare=False)

    def as_dict(self) -> dict:
        out = config_to_dict(self.config)
        out.update(self.metrics.as_dict())
        out["version"] = self.version
        return out

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioReport":
        missing = [k for k in METRIC_KEYS if k not in data]
        if missing:
            raise ConfigError(f"summary lacks metric fields {missing}")
        metrics = ScenarioMetrics(**{k: float(data[k]) for k in METRIC_KEYS})
        return cls(metrics=metrics, config=config_from_dict(data), version=data.get("version", __version__))


def plan_scenario(config: ScenarioConfig) -> MotionLaw:
    m = config.motion
    bounds = flat_boundaries_from_joint(m.q1_i, m.q2_i, m.q1_f, m.q2_f, m.t_i, m.t_f)
    return plan_motion(config.strategy, config.robot, bounds)


def torque_profile(law: MotionLaw, params: ReducedFlatParams):
    """Feed-forward torque ``t -> tau1``; zero outside the motion interval."""

    def tau(t):
        return feedforward_torque(params, law.evaluate(t))

    return tau


def run_scenario(config: ScenarioConfig) -> ScenarioReport:
    """Plan, compute feed-forward torque, simulate and evaluate one scenario.

    Planner conditioning errors and simulator instability propagate as
    :class:`~flatplan.errors.ConditioningError` and
    :class:`~flatplan.errors.SimulationInstabilityError`.
    """
    law = plan_scenario(config)
    robot = config.robot
    initial = joint_state_from_flat(robot, law.evaluate(law.bounds.t_start))
    traj = simulate(
        robot,
        torque_profile(law, robot),
        initial,
        (law.bounds.t_start, law.bounds.t_end),
        config.sim,
    )
    planned = joint_state_from_flat(robot, law.evaluate(traj.times))
    e1, e2 = planned_vs_simulated(planned, traj)
    metrics = ScenarioMetrics(
        torque_rms=torque_rms(traj),
        amplitude_a=oscillation_amplitude(robot, traj),
        bc_residual_max=float(law.boundary_residuals().max()),
        tracking_error_q1=e1,
        tracking_error_q2=e2,
        condition_number=law.condition_number,
    )
    return ScenarioReport(metrics=metrics, config=config, law=law, trajectory=traj, planned=planned)


def _fmt(x: float) -> str:
    return repr(float(x))


PLAN_COLUMNS = ["t", "y1"] + [f"y1_d{i}" for i in range(1, 7)] + ["q1_planned", "q2_planned", "tau1"]
TRAJECTORY_COLUMNS = (
    ["t", "y1"]
    + [f"y1_d{i}" for i in range(1, 7)]
    + ["q1_planned", "q2_planned", "q1_sim", "q2_sim", "q1dot_sim", "q2dot_sim", "tau1"]
)


def sample_grid(config: ScenarioConfig) -> np.ndarray:
    m, s = config.motion, config.sim
    n = round((m.t_f - m.t_i + s.t_free) / s.dt)
    return m.t_i + s.dt * np.arange(n + 1)


def plan_csv(law: MotionLaw, params: ReducedFlatParams, times) -> str:
    """Motion-law samples with planned joints and feed-forward torque."""
    times = np.asarray(times, dtype=float)
    sample = law.evaluate(times)
    planned = joint_state_from_flat(params, sample)
    tau = feedforward_torque(params, sample)
    cols = [times] + list(sample.as_array()) + [planned.q1, planned.q2, tau]
    return _csv(PLAN_COLUMNS, cols)


def trajectory_csv(report: ScenarioReport) -> str:
    traj, law = report.trajectory, report.law
    if traj is None or law is None:
        raise ValueError("report carries no trajectory (loaded from JSON?)")
    sample = law.evaluate(traj.times)
    planned = report.planned
    cols = (
        [traj.times]
        + list(sample.as_array())
        + [planned.q1, planned.q2, traj.q1, traj.q2, traj.q1_dot, traj.q2_dot, traj.tau1]
    )
    return _csv(TRAJECTORY_COLUMNS, cols)


def _csv(header, cols) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in zip(*(np.broadcast_to(c, cols[0].shape) for c in cols)):
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


# Published results table: (scenario, strategy) -> (torque RMS N m, A rad,
# torque % vs polynomial, A % vs polynomial).
PUBLISHED_TABLE = {
    (1, "polynomial"): (0.0074, 0.0, None, None),
    (1, "min_control_effort"): (0.0069, 0.0, -6.8, None),
    (1, "min_potential_energy"): (0.0087, 0.0, 18.0, None),
    (2, "polynomial"): (0.0068, 0.0045, None, None),
    (2, "min_control_effort"): (0.0064, 0.0036, -5.9, -20.0),
    (2, "min_potential_energy"): (0.0079, 0.003, 16.0, -35.0),
    (3, "polynomial"): (0.0068, 0.099, None, None),
    (3, "min_control_effort"): (0.0064, 0.077, -5.9, -22.0),
    (3, "min_potential_energy"): (0.0079, 0.062, 16.0, -38.0),
}
TABLE_STRATEGIES = ("polynomial", "min_control_effort", "min_potential_energy")

TORQUE_REL_TOL = 0.03
AMPLITUDE_REL_TOL = 0.10
AMPLITUDE_ZERO_TOL = 1e-4
PERCENT_ABS_TOL = 5.0


@dataclass(frozen=True)
class TableRow:
    scenario: int
    strategy: str
    torque_rms: float
    amplitude_a: float
    torque_pct: float | None
    amplitude_pct: float | None
    published_torque_rms: float
    published_amplitude_a: float
    published_torque_pct: float | None
    published_amplitude_pct: float | None
    torque_ok: bool
    amplitude_ok: bool
    torque_pct_ok: bool | None
    amplitude_pct_ok: bool | None

    @property
    def all_ok(self) -> bool:
        flags = (self.torque_ok, self.amplitude_ok, self.torque_pct_ok, self.amplitude_pct_ok)
        return all(f is not False for f in flags)


def _check_rows(reports: dict) -> list[TableRow]:
    rows = []
    for (sc, strat), (p_tau, p_a, p_tau_pct, p_a_pct) in PUBLISHED_TABLE.items():
        rep = reports[sc, strat].metrics
        base = reports[sc, "polynomial"].metrics
        tau_pct = a_pct = None
        tau_pct_ok = a_pct_ok = None
        if p_tau_pct is not None:
            tau_pct = relative_change(base.torque_rms, rep.torque_rms)
            tau_pct_ok = abs(tau_pct - p_tau_pct) <= PERCENT_ABS_TOL
        if p_a_pct is not None:
            a_pct = relative_change(base.amplitude_a, rep.amplitude_a)
            a_pct_ok = abs(a_pct - p_a_pct) <= PERCENT_ABS_TOL
        if p_a == 0.0:
            a_ok = rep.amplitude_a < AMPLITUDE_ZERO_TOL
        else:
            a_ok = abs(rep.amplitude_a - p_a) <= AMPLITUDE_REL_TOL * p_a
        rows.append(
            TableRow(
                scenario=sc,
                strategy=strat,
                torque_rms=rep.torque_rms,
                amplitude_a=rep.amplitude_a,
                torque_pct=tau_pct,
                amplitude_pct=a_pct,
                published_torque_rms=p_tau,
                published_amplitude_a=p_a,
                published_torque_pct=p_tau_pct,
                published_amplitude_pct=p_a_pct,
                torque_ok=abs(rep.torque_rms - p_tau) <= TORQUE_REL_TOL * p_tau,
                amplitude_ok=a_ok,
                torque_pct_ok=tau_pct_ok,
                amplitude_pct_ok=a_pct_ok,
            )
        )
    return rows


def run_table_cells(workers: int = 1, **sim_overrides) -> dict:
    """All nine scenario x strategy reports, keyed by ``(scenario, strategy)``."""
    keys = list(PUBLISHED_TABLE)
    configs = [scenario_config(sc, st, **sim_overrides) for sc, st in keys]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(run_scenario, configs))
    else:
        reports = [run_scenario(c) for c in configs]
    return dict(zip(keys, reports))


def reproduce_results_table(workers: int = 1, **sim_overrides) -> list[TableRow]:
    """Nine rows (scenario x strategy) compared against the published table."""
    return _check_rows(run_table_cells(workers, **sim_overrides))


def _opt(x, spec=".6g"):
    return "" if x is None else format(x, spec)


def _flag(ok):
    return "" if ok is None else ("pass" if ok else "FAIL")


def format_table(rows: list[TableRow]) -> str:
    head = (
        f"{'sc':>2} {'strategy':<21} {'tau_rms':>10} {'pub':>7} {'':4} "
        f"{'A':>11} {'pub':>7} {'':4} {'tau%':>7} {'pub':>6} {'':4} {'A%':>7} {'pub':>6} {'':4}"
    )
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(
            f"{r.scenario:>2} {r.strategy:<21} {r.torque_rms:>10.6g} {r.published_torque_rms:>7g} {_flag(r.torque_ok):4} "
            f"{r.amplitude_a:>11.6g} {r.published_amplitude_a:>7g} {_flag(r.amplitude_ok):4} "
            f"{_opt(r.torque_pct, '.4g'):>7} {_opt(r.published_torque_pct, 'g'):>6} {_flag(r.torque_pct_ok):4} "
            f"{_opt(r.amplitude_pct, '.4g'):>7} {_opt(r.published_amplitude_pct, 'g'):>6} {_flag(r.amplitude_pct_ok):4}"
        )
    return "\n".join(lines) + "\n"


def table_csv(rows: list[TableRow]) -> str:
    names = list(TableRow.__dataclass_fields__)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for r in rows:
        w.writerow(["" if getattr(r, n) is None else getattr(r, n) for n in names])
    return buf.getvalue()
