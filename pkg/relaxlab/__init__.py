# relaxlab: finite-volume lab for a 2x2 relaxation system with measure source terms.

from relaxlab.errors import (
    BracketError,
    CflError,
    ConfigError,
    DomainError,
    GridMismatchError,
    InstabilityError,
    RelaxLabError,
    ScheduleError,
)
from relaxlab.grid import GridSpec, GridState, init_from_function, project
from relaxlab.model import EquilibriumMap, FluxSpec, IsothermSpec, Model
from relaxlab.splitting import (
    CflPolicy,
    MollifiedConfig,
    Ordering,
    RelaxSolver,
    SchemeConfig,
    Strength,
    run,
    run_mollified,
    run_pair,
)

__version__ = "0.1.0"

__all__ = [
    "BracketError",
    "CflError",
    "CflPolicy",
    "ConfigError",
    "DomainError",
    "EquilibriumMap",
    "FluxSpec",
    "GridMismatchError",
    "GridSpec",
    "GridState",
    "InstabilityError",
    "IsothermSpec",
    "Model",
    "MollifiedConfig",
    "Ordering",
    "RelaxLabError",
    "RelaxSolver",
    "ScheduleError",
    "SchemeConfig",
    "Strength",
    "init_from_function",
    "project",
    "run",
    "run_mollified",
    "run_pair",
]
