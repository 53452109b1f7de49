"""Fixed-step simulation of the 2-DOF underactuated plant.

Integrates ``M q'' + C q' + K q = [tau1(t), 0]`` with classical RK4.  The
torque profile is sampled at every stage time (grid points and midpoints)
before the loop, so it must be a pure function of time.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from flatplan.errors import SimulationInstabilityError
from flatplan.flatmodel import JointState, ReducedFlatParams, assemble_matrices


@dataclass(frozen=True)
class SimConfig:
    """Integration settings and plant perturbation.

    ``k_scale`` and ``c_scale`` multiply the passive joint stiffness and
    damping of the simulated plant only; the planner keeps nominal values.
    """

    dt: float = 1e-4
    t_free: float = 1.0
    k_scale: float = 1.0
    c_scale: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError("dt must be positive")
        if not (np.isfinite(self.t_free) and self.t_free >= 0):
            raise ValueError("t_free must be non-negative")
        if not (np.isfinite(self.k_scale) and self.k_scale > 0):
            raise ValueError("k_scale must be positive")
        if not (np.isfinite(self.c_scale) and self.c_scale >= 0):
            raise ValueError("c_scale must be non-negative")


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    q1_dot: np.ndarray
    q2_dot: np.ndarray
    tau1: np.ndarray
    end_index: int

    @property
    def t_end(self) -> float:
        return float(self.times[self.end_index])

    def state(self, i: int) -> JointState:
        return JointState(self.q1[i], self.q2[i], self.q1_dot[i], self.q2_dot[i])

    def shifted(self, offset: float) -> "Trajectory":
        return dataclasses.replace(self, times=self.times + offset)


def perturbed(params: ReducedFlatParams, config: SimConfig) -> ReducedFlatParams:
    return dataclasses.replace(
        params,
        stiffness=params.stiffness * config.k_scale,
        damping=params.damping * config.c_scale,
    )


def _grid_steps(span: float, dt: float) -> int:
    n = round(span / dt)
    if abs(n * dt - span) > 1e-9 * max(span, dt):
        raise ValueError(f"interval {span} is not a whole number of steps of {dt}")
    return int(n)


def _sample_torque(torque_profile, t: np.ndarray) -> np.ndarray:
    try:
        tau = np.asarray(torque_profile(t), dtype=float)
    except (TypeError, ValueError):
        tau = None
    if tau is None or tau.shape != t.shape:
        tau = np.array([float(torque_profile(ti)) for ti in t])
    return tau


def simulate(
    params: ReducedFlatParams,
    torque_profile,
    initial: JointState,
    horizon: tuple[float, float],
    config: SimConfig = SimConfig(),
) -> Trajectory:
    """Integrate the plant from ``horizon[0]`` to ``horizon[1] + t_free``.

    Parameters
    ----------
    params : ReducedFlatParams
        Nominal robot parameters; stiffness and damping are scaled by
        ``config.k_scale`` and ``config.c_scale``.
    torque_profile : callable
        ``tau1(t)`` in N m.  Called once with an array of all stage times;
        scalar-only callables are sampled point by point.  It is forced to
        zero after ``horizon[1]``.
    initial : JointState
        State at ``horizon[0]``.
    horizon : (t_start, t_end)
        Motion interval; ``t_end`` must lie on the integration grid.
    config : SimConfig

    Returns
    -------
    Trajectory

    Raises
    ------
    SimulationInstabilityError
        On the first non-finite state.
    """
    t_start, t_end = map(float, horizon)
    if not t_end > t_start:
        raise ValueError("horizon must have t_end > t_start")
    plant = perturbed(params, config)
    mats = assemble_matrices(plant)
    m_inv = np.linalg.inv(mats.mass)

    dt = config.dt
    n_motion = _grid_steps(t_end - t_start, dt)
    n_free = _grid_steps(config.t_free, dt) if config.t_free > 0 else 0
    n = n_motion + n_free

    # state matrix of x = [q1, q2, q1_dot, q2_dot]
    a = np.zeros((4, 4))
    a[0:2, 2:4] = np.eye(2)
    a[2:4, 0:2] = -m_inv @ mats.stiffness
    a[2:4, 2:4] = -m_inv @ mats.damping
    b = np.concatenate([np.zeros(2), m_inv[:, 0]])

    half = t_start + 0.5 * dt * np.arange(2 * n + 1)
    tau_half = _sample_torque(torque_profile, half)
    tau_half[half > t_end] = 0.0
    if not np.all(np.isfinite(tau_half)):
        bad = half[~np.isfinite(tau_half)][0]
        raise SimulationInstabilityError(f"torque not finite at t={bad:.6g}", time=float(bad))

    x = initial.as_vector()
    states = np.empty((n + 1, 4))
    states[0] = x
    # divergence is reported below, not through numpy warnings
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n):
            u0, um, u1 = tau_half[2 * i], tau_half[2 * i + 1], tau_half[2 * i + 2]
            k1 = a @ x + b * u0
            k2 = a @ (x + 0.5 * dt * k1) + b * um
            k3 = a @ (x + 0.5 * dt * k2) + b * um
            k4 = a @ (x + dt * k3) + b * u1
            x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.isfinite(x).all():
                t_bad = t_start + (i + 1) * dt
                raise SimulationInstabilityError(
                    f"state became non-finite at t={t_bad:.6g}", time=t_bad
                )
            states[i + 1] = x

    times = t_start + dt * np.arange(n + 1)
    return Trajectory(
        times=times,
        q1=states[:, 0],
        q2=states[:, 1],
        q1_dot=states[:, 2],
        q2_dot=states[:, 3],
        tau1=tau_half[::2].copy(),
        end_index=n_motion,
    )


def planned_vs_simulated(planned: JointState, traj: Trajectory) -> tuple[float, float]:
    """Max absolute joint-angle deviation over the motion interval (rad)."""
    q1p = np.atleast_1d(np.asarray(planned.q1, dtype=float))
    q2p = np.atleast_1d(np.asarray(planned.q2, dtype=float))
    if q1p.shape != traj.times.shape or q2p.shape != traj.times.shape:
        raise ValueError(
            f"planned series length {q1p.shape} does not match trajectory grid {traj.times.shape}"
        )
    sl = slice(0, traj.end_index + 1)
    e1 = float(np.max(np.abs(q1p[sl] - traj.q1[sl])))
    e2 = float(np.max(np.abs(q2p[sl] - traj.q2[sl])))
    return e1, e2


def free_mode_frequency(params: ReducedFlatParams) -> float:
    """Natural frequency of the flexible mode (rad/s)."""
    i1, i2 = params.i_star_prev, params.i_star_last
    return float(np.sqrt(params.stiffness / (i2 * (1.0 - i2 / i1))))
