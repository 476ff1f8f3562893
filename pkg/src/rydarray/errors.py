"""Exception hierarchy; exit codes are consumed by the CLI."""


class SimulationError(Exception):
    exit_code = 1


class ConfigError(SimulationError):
    """Bad configuration file or out-of-domain parameter."""

    exit_code = 2


class ParameterError(ConfigError):
    """A value outside its physical or mathematical domain."""


class NumericsError(SimulationError):
    """Solver or accuracy failure."""

    exit_code = 3


class ConditioningError(NumericsError):
    def __init__(self, message, condition_estimate=None):
        if condition_estimate is not None:
            message = f"{message} (condition estimate {condition_estimate:.3e})"
        super().__init__(message)
        self.condition_estimate = condition_estimate


class DegenerateModeError(NumericsError):
    """Zero field overlap where a distribution or mode is required."""


class DataError(NumericsError):
    """A constructed matrix violates a structural invariant."""


class OutputError(SimulationError):
    """I/O failure while writing results."""

    exit_code = 4
