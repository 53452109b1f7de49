"""Robot parameters, 2-DOF system matrices and the flatness maps.

The robot has one actuated joint ``q1`` and one passive joint ``q2`` coupled
through a torsional spring ``k2`` and a viscous damper ``c2``.  With the
second link fully balanced the last two rows of the mass matrix are constant
and the absolute orientation of the last link, ``y1 = q1 + q2``, is a flat
output: joint motion and motor torque are algebraic in ``y1`` and its
derivatives.

All functions accept scalars or numpy arrays in the sample fields and
broadcast accordingly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np


@dataclass(frozen=True)
class ReducedFlatParams:
    """The four scalars that drive the flatness equations.

    Parameters
    ----------
    i_star_prev : float
        Generalized inertia of the last actuated link, ``I*_{n-1}`` (kg m^2).
    i_star_last : float
        Generalized inertia of the passive link, ``I*_n`` (kg m^2).
    stiffness : float
        Passive joint spring stiffness ``k_n`` (N m/rad).
    damping : float
        Passive joint viscous damping ``c_n`` (N m s/rad).
    """

    i_star_prev: float
    i_star_last: float
    stiffness: float
    damping: float = 0.0

    def __post_init__(self):
        vals = (self.i_star_prev, self.i_star_last, self.stiffness, self.damping)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError(f"non-finite robot parameter in {self}")
        if self.i_star_last <= 0:
            raise ValueError("i_star_last must be positive")
        if self.i_star_prev <= self.i_star_last:
            raise ValueError(
                "i_star_prev must exceed i_star_last "
                f"({self.i_star_prev} <= {self.i_star_last}); mass matrix is singular"
            )
        if self.stiffness <= 0:
            raise ValueError("stiffness must be positive")
        if self.damping < 0:
            raise ValueError("damping must be non-negative")

    @property
    def inertia_gap(self) -> float:
        return self.i_star_prev - self.i_star_last


# Table I of the 2-DOF example robot.
TABLE_I = ReducedFlatParams(
    i_star_prev=6.4e-4, i_star_last=3.3e-5, stiffness=3e-3, damping=2e-5
)


@dataclass(frozen=True)
class SystemMatrices2DOF:
    mass: np.ndarray
    damping: np.ndarray
    stiffness: np.ndarray


def assemble_matrices(params: ReducedFlatParams) -> SystemMatrices2DOF:
    """Mass, damping and stiffness matrices of the 2-DOF robot.

    Raises
    ------
    ValueError
        If the mass matrix is not positive definite (``I*_1 <= I*_2``).
    """
    i1, i2 = params.i_star_prev, params.i_star_last
    if not (i2 > 0 and i1 > i2):
        raise ValueError(f"mass matrix not positive definite: I1*={i1}, I2*={i2}")
    mass = np.array([[i1, i2], [i2, i2]], dtype=float)
    damping = np.zeros((2, 2))
    damping[1, 1] = params.damping
    stiffness = np.zeros((2, 2))
    stiffness[1, 1] = params.stiffness
    for m in (mass, damping, stiffness):
        m.setflags(write=False)
    return SystemMatrices2DOF(mass=mass, damping=damping, stiffness=stiffness)


def _check_finite(obj):
    for f in fields(obj):
        if not np.all(np.isfinite(getattr(obj, f.name))):
            raise ValueError(f"{type(obj).__name__}.{f.name} is not finite")


@dataclass(frozen=True)
class FlatSample:
    """Flat output ``y1`` and its derivatives of order 1..6 at one or more times."""

    d0: float | np.ndarray = 0.0
    d1: float | np.ndarray = 0.0
    d2: float | np.ndarray = 0.0
    d3: float | np.ndarray = 0.0
    d4: float | np.ndarray = 0.0
    d5: float | np.ndarray = 0.0
    d6: float | np.ndarray = 0.0

    def __post_init__(self):
        _check_finite(self)

    @classmethod
    def from_array(cls, derivs) -> "FlatSample":
        """Build from a sequence ``[d0, ..., d6]`` (rows may be arrays)."""
        derivs = list(derivs)
        if len(derivs) != 7:
            raise ValueError(f"expected 7 derivative orders, got {len(derivs)}")
        return cls(*derivs)

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f"d{i}") for i in range(7)], dtype=float)

    def scaled(self, factor: float) -> "FlatSample":
        return FlatSample.from_array(factor * self.as_array())


@dataclass(frozen=True)
class JointState:
    q1: float | np.ndarray = 0.0
    q2: float | np.ndarray = 0.0
    q1_dot: float | np.ndarray = 0.0
    q2_dot: float | np.ndarray = 0.0

    def __post_init__(self):
        _check_finite(self)

    def as_vector(self) -> np.ndarray:
        return np.array([self.q1, self.q2, self.q1_dot, self.q2_dot], dtype=float)


@dataclass(frozen=True)
class FlatBoundaryConditions:
    """The 12 boundary conditions on the flat output.

    ``start_derivs[i]`` and ``end_derivs[i]`` hold the derivative of order
    ``i + 1`` at ``t_start`` and ``t_end``.
    """

    t_start: float
    t_end: float
    y_start: float
    y_end: float
    start_derivs: tuple = field(default=(0.0,) * 5)
    end_derivs: tuple = field(default=(0.0,) * 5)

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ValueError(f"t_end ({self.t_end}) must exceed t_start ({self.t_start})")
        object.__setattr__(self, "start_derivs", tuple(float(v) for v in self.start_derivs))
        object.__setattr__(self, "end_derivs", tuple(float(v) for v in self.end_derivs))
        if len(self.start_derivs) != 5 or len(self.end_derivs) != 5:
            raise ValueError("need derivative orders 1..5 at both ends")
        vals = (self.t_start, self.t_end, self.y_start, self.y_end) + self.start_derivs + self.end_derivs
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("boundary conditions must be finite")

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    @property
    def is_rest_to_rest(self) -> bool:
        return not any(self.start_derivs) and not any(self.end_derivs)

    def start_values(self) -> np.ndarray:
        """Values of derivative orders 0..5 at ``t_start``."""
        return np.array((self.y_start,) + self.start_derivs)

    def end_values(self) -> np.ndarray:
        return np.array((self.y_end,) + self.end_derivs)

    def vector(self) -> np.ndarray:
        """All 12 conditions, start block first."""
        return np.concatenate([self.start_values(), self.end_values()])


def passive_joint_from_flat(params: ReducedFlatParams, s: FlatSample):
    """Passive joint angle, rate and acceleration from the flat output.

    Returns
    -------
    q2, q2_dot, q2_ddot
        In rad, rad/s and rad/s^2.  The rate is the term-wise time
        derivative of the angle map.
    """
    a = params.i_star_last / params.stiffness
    b = params.i_star_last * params.damping / params.stiffness**2
    q2 = -a * s.d2 + b * s.d3
    q2_dot = -a * s.d3 + b * s.d4
    q2_ddot = -a * s.d4 + b * s.d5
    return q2, q2_dot, q2_ddot


def actuated_joint_from_flat(params: ReducedFlatParams, s: FlatSample):
    """Actuated joint angle and rate, ``q1 = y1 - q2``."""
    q2, q2_dot, _ = passive_joint_from_flat(params, s)
    return s.d0 - q2, s.d1 - q2_dot


def joint_state_from_flat(params: ReducedFlatParams, s: FlatSample) -> JointState:
    q2, q2_dot, _ = passive_joint_from_flat(params, s)
    return JointState(q1=s.d0 - q2, q2=q2, q1_dot=s.d1 - q2_dot, q2_dot=q2_dot)


def feedforward_torque(params: ReducedFlatParams, s: FlatSample):
    """Motor torque of the last actuated joint (N m).

    Exact inverse dynamics for zero damping; for ``c_n > 0`` the passive
    joint relation is a first-order expansion in ``c_n / k_n``.
    """
    i1, i2, k, c = params.i_star_prev, params.i_star_last, params.stiffness, params.damping
    gap = i1 - i2
    return i1 * s.d2 + (i2 * gap / k) * s.d4 - (i2 * gap * c / k**2) * s.d5


def flat_boundaries_from_joint(q1_i, q2_i, q1_f, q2_f, t_i, t_f) -> FlatBoundaryConditions:
    """Rest-to-rest boundary conditions on ``y1`` from joint end poses."""
    if not t_f > t_i:
        raise ValueError(f"final time {t_f} must exceed initial time {t_i}")
    return FlatBoundaryConditions(
        t_start=float(t_i), t_end=float(t_f), y_start=q1_i + q2_i, y_end=q1_f + q2_f
    )
