"""Optimal motion planning for differentially flat underactuated robots.

The planner builds the flat output ``y1 = q1 + q2`` of a 2-DOF robot with an
elastic passive joint by minimising a quadratic functional of its
derivatives, derives the feed-forward torque from the flatness maps and
checks the result by simulating the plant.
"""

__version__ = "0.1.0"

from flatplan.errors import (
    ConditioningError,
    ConfigError,
    FlatPlanError,
    SimulationInstabilityError,
)
from flatplan.flatmodel import (
    FlatBoundaryConditions,
    FlatSample,
    JointState,
    ReducedFlatParams,
    SystemMatrices2DOF,
    actuated_joint_from_flat,
    assemble_matrices,
    feedforward_torque,
    flat_boundaries_from_joint,
    passive_joint_from_flat,
)
from flatplan.varplanner import (
    MotionLaw,
    QuadraticCost,
    StrategySpec,
    plan_motion,
)


__all__ = [
    "ConditioningError",
    "ConfigError",
    "FlatPlanError",
    "SimulationInstabilityError",
    "FlatBoundaryConditions",
    "FlatSample",
    "JointState",
    "ReducedFlatParams",
    "SystemMatrices2DOF",
    "actuated_joint_from_flat",
    "assemble_matrices",
    "feedforward_torque",
    "flat_boundaries_from_joint",
    "passive_joint_from_flat",
    "MotionLaw",
    "QuadraticCost",
    "StrategySpec",
    "plan_motion",
    "__version__",
]
