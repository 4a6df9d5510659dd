import typing as th

__all__ = [
    "LeobanditError",
    "ConfigurationError",
    "GeometryError",
    "DomainError",
    "UnknownNameError",
    "SimulationError",
    "SweepError",
]


class LeobanditError(Exception):
    """Base class of every error raised by leobandit."""


class ConfigurationError(LeobanditError, ValueError):
    """
    An invalid or infeasible scenario configuration.

    Args:
        message (str): Human readable description, should name the violated bound.
        field (str): The configuration field at fault (if known).
        line (int): The line of the configuration file at fault (if known).
    """

    def __init__(self, message: str, field: th.Optional[str] = None, line: th.Optional[int] = None):
        self.field = field
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class GeometryError(LeobanditError, ValueError):
    """Degenerate geometry, e.g. a user co-located with a satellite."""


class DomainError(LeobanditError, ValueError):
    """A link-level function evaluated outside of its domain."""


class UnknownNameError(LeobanditError, LookupError):
    """An unknown allocator, baseline kind or experiment preset."""


class SimulationError(LeobanditError, RuntimeError):
    """
    A run aborted at iteration `t`; the original exception is chained as the cause.
    """

    def __init__(self, t: int, message: str):
        super().__init__(t, message)  # args mirror __init__ so the error unpickles
        self.t = t
        self.message = message

    def __str__(self) -> str:
        return f"iteration {self.t}: {self.message}"


class SweepError(LeobanditError):
    """A run of an experiment sweep failed; names the sweep point and seed."""

    def __init__(self, point: th.Mapping[str, th.Any], seed: int, message: str):
        super().__init__(dict(point), seed, message)
        self.point = dict(point)
        self.seed = seed
        self.message = message

    def __str__(self) -> str:
        where = ", ".join(f"{key}={value}" for key, value in self.point.items()) or "base point"
        return f"sweep point {where} (seed {self.seed}): {self.message}"
