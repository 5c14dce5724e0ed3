# This node opens a run and keeps the RunLog rows that every other node appends to.

import logging

import numpy as np

from relaxlab.errors import GridMismatchError, ScheduleError
from relaxlab.grid import GridState, l1_norm, total_variation
from relaxlab.model import Model
from relaxlab.state import RunLog, SplittingState

logger = logging.getLogger(__name__)


def entropy_total(state: GridState, model: Model) -> float:
    """Integral of the special entropy u^2/2 + H(v) over the domain."""
    eta = 0.5 * state.u * state.u + model.isotherm.H(state.v)
    return float(np.sum(eta) * state.grid.dx)


def pair_distance(a: GridState, b: GridState) -> float:
    """l1(u - u~) + l1(v - v~)."""
    if a.grid != b.grid:
        raise GridMismatchError("states live on different grids")
    return l1_norm(a.grid, a.u - b.u) + l1_norm(a.grid, a.v - b.v)


def record_row(log: RunLog, state: GridState, model: Model, step: int, phase: str, residual: float) -> None:
    grid = state.grid
    log.rows.append(
        {
            "step": step,
            "t": state.t,
            "phase": phase,
            "l1_u": l1_norm(grid, state.u),
            "l1_v": l1_norm(grid, state.v),
            "tv_u": total_variation(grid, state.u),
            "tv_v": total_variation(grid, state.v),
            "mass_u_plus_v": float(np.sum(state.u + state.v) * grid.dx),
            "relax_mass_cum": log.relax_mass_cum,
            "entropy_residual_max": residual,
            "eta_total": entropy_total(state, model),
            "relax_quad_cum": log.relax_quad_cum,
        }
    )


def initialize(state: SplittingState) -> dict:
    """Graph node: check the starting point and write the initial row."""
    if state.current.t != 0.0:
        raise ScheduleError(f"runs start at t=0, got t={state.current.t!r}")
    log = state.log
    record_row(log, state.current, state.model, 0, "initial", 0.0)
    log.snapshots[(0, "initial")] = state.current
    if state.companion is not None:
        log.distances.append((0.0, pair_distance(state.current, state.companion)))
    logger.info(
        "starting %s run: %d events of dt=%.6g on %d fine cells",
        state.scheme.ordering.value,
        state.scheme.n_events,
        state.scheme.dt,
        state.current.grid.n_fine,
    )
    return {"log": log, "step": 0, "previous": state.current}
