# Uniform refined grid carrying the state (u, v), and the L2 projector P^h
# onto functions that are constant on each coarse cell C_j.
#
# A coarse cell of width h is split into `refine` fine cells; the state lives on
# the fine cells so that P^h (averaging over m fine cells) is not the identity.

from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable

import numpy as np
import pandas as pd

from relaxlab.errors import DomainError, GridMismatchError
from relaxlab.model import check_interval

GAUSS_NODES, GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(3)


class Boundary(str, Enum):
    PERIODIC = "periodic"
    OUTFLOW = "outflow"


@dataclass(frozen=True)
class GridSpec:
    x_min: float = 0.0
    x_max: float = 1.0
    n_coarse: int = 100
    refine: int = 8
    boundary: Boundary = Boundary.PERIODIC

    def __post_init__(self):
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        if not self.x_max > self.x_min:
            raise DomainError(f"empty domain [{self.x_min}, {self.x_max})")
        if int(self.n_coarse) != self.n_coarse or self.n_coarse < 1:
            raise DomainError(f"n_coarse must be a positive integer, got {self.n_coarse!r}")
        if int(self.refine) != self.refine or self.refine < 1:
            raise DomainError(f"refine must be a positive integer, got {self.refine!r}")

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / self.n_coarse

    @property
    def dx(self) -> float:
        return self.h / self.refine

    @property
    def n_fine(self) -> int:
        return self.n_coarse * self.refine

    @property
    def periodic(self) -> bool:
        return self.boundary is Boundary.PERIODIC

    def centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n_fine) + 0.5) * self.dx

    def check_field(self, field, name: str = "field") -> np.ndarray:
        field = np.asarray(field, dtype=float)
        if field.shape != (self.n_fine,):
            raise GridMismatchError(f"{name} has shape {field.shape}, grid expects ({self.n_fine},)")
        return field


@dataclass(frozen=True, eq=False)
class GridState:
    """Paired fields (u, v) on the fine cells of `grid` at time t."""

    grid: GridSpec
    u: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "u", self.grid.check_field(self.u, "u"))
        object.__setattr__(self, "v", self.grid.check_field(self.v, "v"))

    def evolve(self, **changes) -> "GridState":
        return replace(self, **changes)

    def validate(self) -> "GridState":
        """Clamp rounding drift back into [0,1]; raise if a field really left it."""
        return self.evolve(u=check_interval(self.u, "u"), v=check_interval(self.v, "v"))


def project(grid: GridSpec, field) -> np.ndarray:
    """P^h: replace every fine value by the mean of its coarse cell."""
    field = grid.check_field(field)
    means = field.reshape(grid.n_coarse, grid.refine).mean(axis=1)
    return np.repeat(means, grid.refine)


def cell_averages(grid: GridSpec, func: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """3-point Gauss-Legendre average of `func` over every fine cell."""
    centers = grid.centers()
    points = centers[:, None] + 0.5 * grid.dx * GAUSS_NODES[None, :]
    values = np.asarray(func(points), dtype=float)
    values = np.broadcast_to(values, points.shape)
    return 0.5 * values @ GAUSS_WEIGHTS


def init_from_function(grid: GridSpec, u0: Callable, v0: Callable) -> GridState:
    u = check_interval(cell_averages(grid, u0), "u0")
    v = check_interval(cell_averages(grid, v0), "v0")
    return GridState(grid=grid, u=u, v=v, t=0.0)


def l1_norm(grid: GridSpec, field) -> float:
    return float(np.sum(np.abs(grid.check_field(field))) * grid.dx)


def total_variation(grid: GridSpec, field) -> float:
    field = grid.check_field(field)
    tv = float(np.sum(np.abs(np.diff(field))))
    if grid.periodic:
        tv += abs(float(field[0] - field[-1]))
    return tv


def fields_frame(state: GridState) -> pd.DataFrame:
    """Field dump layout: one row per fine cell centre, columns x,u,v."""
    return pd.DataFrame({"x": state.grid.centers(), "u": state.u, "v": state.v})


def state_from_frame(grid: GridSpec, frame: pd.DataFrame) -> GridState:
    """Inverse of fields_frame, used by custom CSV initial data."""
    missing = {"x", "u", "v"} - set(frame.columns)
    if missing:
        raise GridMismatchError(f"field dump lacks columns {sorted(missing)}")
    u = check_interval(frame["u"].to_numpy(dtype=float), "u")
    v = check_interval(frame["v"].to_numpy(dtype=float), "v")
    return GridState(grid=grid, u=u, v=v, t=0.0)
