"""Reported quantities: torque RMS, residual oscillation amplitude, deltas."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.integrate import trapezoid

from flatplan.dynsim import Trajectory
from flatplan.flatmodel import ReducedFlatParams


@dataclass(frozen=True)
class ScenarioMetrics:
    torque_rms: float
    amplitude_a: float
    bc_residual_max: float
    tracking_error_q1: float
    tracking_error_q2: float
    condition_number: float

    def __post_init__(self):
        for name, v in asdict(self).items():
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and non-negative, got {v}")

    def as_dict(self) -> dict:
        return asdict(self)


def torque_rms(traj: Trajectory, window: tuple[float, float] | None = None) -> float:
    """RMS of the motor torque over ``window`` (default: the motion interval).

    Trapezoidal quadrature on the simulation grid.
    """
    if window is None:
        window = (float(traj.times[0]), traj.t_end)
    t0, t1 = window
    eps = 1e-9 * max(abs(t0), abs(t1), 1.0)
    if t1 <= t0:
        raise ValueError(f"empty window {window}")
    if t0 < traj.times[0] - eps or t1 > traj.times[-1] + eps:
        raise ValueError(f"window {window} outside trajectory span")
    mask = (traj.times >= t0 - eps) & (traj.times <= t1 + eps)
    if mask.sum() < 2:
        raise ValueError(f"window {window} holds fewer than two samples")
    t = traj.times[mask]
    tau = traj.tau1[mask]
    return float(np.sqrt(trapezoid(tau**2, t) / (t[-1] - t[0])))


def oscillation_amplitude(params: ReducedFlatParams, traj: Trajectory) -> float:
    """Initial amplitude of the passive joint's free oscillation at ``t_end``.

    ``A = sqrt(q2^2 + (I2*/k2) q2_dot^2)`` with nominal ``I2*`` and ``k2``.
    """
    i = traj.end_index
    q2, q2d = traj.q2[i], traj.q2_dot[i]
    return float(np.sqrt(q2**2 + params.i_star_last / params.stiffness * q2d**2))


def relative_change(baseline: float, value: float) -> float:
    """Percent change of ``value`` with respect to ``baseline``."""
    if baseline == 0:
        raise ValueError("baseline must be non-zero")
    return 100.0 * (value - baseline) / baseline
