#This file defines the scheme's State: the memory the splitting pipeline carries
#from one node to the next, plus the small config records every node reads.

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from relaxlab.errors import CflError, DomainError
from relaxlab.grid import GridState
from relaxlab.model import Model

INFINITE = "infinite"

RUN_COLUMNS = [
    "step",
    "t",
    "phase",
    "l1_u",
    "l1_v",
    "tv_u",
    "tv_v",
    "mass_u_plus_v",
    "relax_mass_cum",
    "entropy_residual_max",
    "eta_total",
    "relax_quad_cum",
]


class Ordering(str, Enum):
    CLASSICAL = "classical"  # project, then relax
    MODIFIED = "modified"  # relax, then project


class RelaxSolver(str, Enum):
    EXACT_QUADRATURE = "exact_quadrature"
    BACKWARD_EULER = "backward_euler"
    QUADRATURE = "quadrature"


@dataclass(frozen=True)
class Strength:
    """A relaxation or projection strength: finite (>= 0) or infinite."""

    value: float

    def __post_init__(self):
        if math.isnan(self.value) or self.value < 0:
            raise DomainError(f"strength must be >= 0 or infinite, got {self.value!r}")

    @classmethod
    def infinite(cls) -> "Strength":
        return cls(math.inf)

    @classmethod
    def parse(cls, raw: Any) -> "Strength":
        if isinstance(raw, Strength):
            return raw
        if isinstance(raw, str):
            if raw.strip().lower() in (INFINITE, "inf"):
                return cls.infinite()
            raise DomainError(f"unknown strength {raw!r}")
        return cls(float(raw))

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.value)

    def rate(self, dt: float) -> float:
        return math.inf if self.is_infinite else self.value * dt

    def projection_weight(self, dt: float) -> float:
        """1 - exp(-nu dt): how far the inner projection layer travels."""
        return 1.0 if self.is_infinite else -math.expm1(-self.value * dt)

    def to_json(self):
        return INFINITE if self.is_infinite else self.value


@dataclass(frozen=True)
class CflPolicy:
    """Courant number for the fine-grid convection sub-steps."""

    courant: float = 0.9

    def __post_init__(self):
        if not 0.0 < self.courant <= 1.0:
            raise DomainError(f"courant must lie in (0, 1], got {self.courant!r}")

    def max_step(self, dx: float, lip: float) -> float:
        return self.courant * dx / lip

    def substeps(self, dt: float, dx: float, lip: float) -> List[float]:
        """Full steps of the largest admissible size, the last one shortened."""
        if dt < 0:
            raise CflError(f"negative time interval {dt!r}")
        if dt == 0:
            return []
        dt_max = self.max_step(dx, lip)
        n_full = int(math.floor(dt / dt_max))
        remainder = dt - n_full * dt_max
        steps = [dt_max] * n_full
        if remainder > 1e-12 * dt_max:
            steps.append(remainder)
        return steps or [dt]


@dataclass(frozen=True)
class SchemeConfig:
    ordering: Ordering = Ordering.CLASSICAL
    mu: Strength = field(default_factory=lambda: Strength(10.0))
    nu: Strength = field(default_factory=Strength.infinite)
    dt: float = 0.01
    horizon: float = 1.0
    cfl: CflPolicy = field(default_factory=CflPolicy)
    relax_solver: RelaxSolver = RelaxSolver.EXACT_QUADRATURE
    probes: Tuple[float, ...] = (0.25, 0.5, 0.75)
    check_entropy: bool = True
    snapshot_steps: Tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "ordering", Ordering(self.ordering))
        object.__setattr__(self, "relax_solver", RelaxSolver(self.relax_solver))
        object.__setattr__(self, "mu", Strength.parse(self.mu))
        object.__setattr__(self, "nu", Strength.parse(self.nu))
        object.__setattr__(self, "probes", tuple(float(k) for k in self.probes))
        object.__setattr__(self, "snapshot_steps", tuple(int(n) for n in self.snapshot_steps))
        if not self.dt > 0:
            raise DomainError(f"dt must be positive, got {self.dt!r}")
        if self.dt > self.horizon * (1 + 1e-12):
            raise DomainError(f"dt={self.dt!r} exceeds horizon={self.horizon!r}")
        ratio = self.horizon / self.dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise DomainError(f"horizon={self.horizon!r} is not a multiple of dt={self.dt!r}")
        if any(not 0.0 <= k <= 1.0 for k in self.probes):
            raise DomainError(f"entropy probes must lie in [0,1], got {self.probes}")

    @property
    def n_events(self) -> int:
        return int(round(self.horizon / self.dt))

    def event_time(self, n: int) -> float:
        return n * self.dt


@dataclass(frozen=True)
class MollifiedConfig:
    """Ramp width epsilon of a^eps, b^eps and the sub-steps used on each ramp."""

    epsilon: float
    ramp_substeps: int = 8


@dataclass
class EventReport:
    """What happened inside one Dirac event.

    project_in_*: field handed to the projection layer
    relax_in_*, relax_out_*: endpoints of the pointwise relaxation layer
    """

    project_in_u: np.ndarray
    project_in_v: np.ndarray
    relax_in_u: np.ndarray
    relax_in_v: np.ndarray
    relax_out_u: np.ndarray
    relax_out_v: np.ndarray
    projection_weight: float
    ordering: Ordering
    relax_mass: float = 0.0
    relax_quadratic_mass: float = 0.0


@dataclass
class RunLog:
    rows: List[Dict[str, Any]] = field(default_factory=list)
    distances: List[Tuple[float, float]] = field(default_factory=list)
    relax_mass_cum: float = 0.0
    relax_quad_cum: float = 0.0
    entropy_inflow: float = 0.0
    time_modulus: float = 0.0
    max_convect_residual: float = 0.0
    max_event_residual: float = 0.0
    # (step, phase) -> state, for the steps listed in SchemeConfig.snapshot_steps
    snapshots: Dict[Tuple[int, str], GridState] = field(default_factory=dict)

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=RUN_COLUMNS)

    @property
    def initial(self) -> Dict[str, Any]:
        return self.rows[0]

    @property
    def final(self) -> Dict[str, Any]:
        return self.rows[-1]


@dataclass
class SplittingState:
    # 1. Physics and scheme parameters of the run
    model: Model
    scheme: SchemeConfig

    # 2. The state being advanced (u, v on the fine grid)
    current: GridState

    # 3. Optional second state advanced in lockstep (contraction runs)
    companion: Optional[GridState] = None

    # 4. Number of events fired so far
    step: int = 0

    # 5. Diagnostics gathered along the way
    log: RunLog = field(default_factory=RunLog)

    # 6. Last post-event state, for the time-equicontinuity modulus
    previous: Optional[GridState] = None
