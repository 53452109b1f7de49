"""Exception types. Each carries the CLI exit code it maps to."""


class FlatPlanError(Exception):
    code = 1


class ConfigError(FlatPlanError, ValueError):
    """Invalid or unreadable scenario configuration."""

    code = 2


class ConditioningError(FlatPlanError):
    """Boundary system of the motion law is numerically singular."""

    code = 3

    def __init__(self, message, condition_number=None):
        super().__init__(message)
        self.condition_number = condition_number


class SimulationInstabilityError(FlatPlanError):
    """Integrated state became non-finite."""

    code = 4

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time
