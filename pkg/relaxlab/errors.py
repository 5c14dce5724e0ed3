# Exceptions raised by the lab. Everything derives from RelaxLabError so the CLI
# can turn any of them into exit status 1.


class RelaxLabError(Exception):
    """Base class for every error raised by relaxlab."""


class DomainError(RelaxLabError, ValueError):
    """A value left its admissible interval by more than the clamp tolerance."""


class GridMismatchError(RelaxLabError, ValueError):
    """Two fields or states do not live on the same grid."""


class ScheduleError(RelaxLabError):
    """A source event was fired away from the time lattice t = n*dt."""


class CflError(RelaxLabError):
    """A convection sub-step would violate the Courant restriction."""


class BracketError(RelaxLabError):
    """A monotone root search was handed a bracket without a sign change."""


class InstabilityError(RelaxLabError):
    """An integrator produced values outside the physical range."""


class ConfigError(RelaxLabError, ValueError):
    """Invalid experiment configuration; `path` points at the offending key."""

    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message
