# Time-stepping drivers: the classical and modified splitting schemes, the
# lockstep pair run behind the contraction checks, and the eps-mollified oracle.

import logging
import math
from dataclasses import fields
from typing import List, Optional, Tuple

import numpy as np

from relaxlab.errors import ConfigError, DomainError, GridMismatchError, InstabilityError
from relaxlab.graph import pipeline, recursion_limit
from relaxlab.grid import GridState
from relaxlab.model import Model
from relaxlab.nodes.sources import InnerOdeProblem, project_inner_apply, relax_inner_solve
from relaxlab.nodes.transport import convect
from relaxlab.state import (
    CflPolicy,
    MollifiedConfig,
    Ordering,
    RelaxSolver,
    RunLog,
    SchemeConfig,
    SplittingState,
    Strength,
)

__all__ = [
    "CflPolicy",
    "MollifiedConfig",
    "Ordering",
    "RelaxSolver",
    "SchemeConfig",
    "Strength",
    "run",
    "run_pair",
    "run_mollified",
    "mollified_substep",
]

logger = logging.getLogger(__name__)

STABLE_LOW = -0.01
STABLE_HIGH = 1.01


def _invoke(model: Model, cfg: SchemeConfig, state0: GridState, companion: Optional[GridState] = None) -> SplittingState:
    start = SplittingState(model=model, scheme=cfg, current=state0, companion=companion)
    values = {f.name: getattr(start, f.name) for f in fields(start)}
    result = pipeline().invoke(values, config={"recursion_limit": recursion_limit(cfg.n_events)})
    return result if isinstance(result, SplittingState) else SplittingState(**result)


def run(state0: GridState, model: Model, cfg: SchemeConfig) -> Tuple[GridState, RunLog]:
    """Alternate convection over dt and events at t = n dt up to the horizon."""
    final = _invoke(model, cfg, state0)
    return final.current, final.log


def run_pair(state_a: GridState, state_b: GridState, model: Model, cfg: SchemeConfig) -> List[Tuple[float, float]]:
    """Advance two states in lockstep and return (t, l1 distance) after every stage."""
    if state_a.grid != state_b.grid:
        raise GridMismatchError("run_pair needs both states on the same grid")
    final = _invoke(model, cfg, state_a, companion=state_b)
    return final.log.distances


def _check_stable(state: GridState, t: float) -> None:
    low = min(float(state.u.min()), float(state.v.min()))
    high = max(float(state.u.max()), float(state.v.max()))
    if low < STABLE_LOW or high > STABLE_HIGH:
        raise InstabilityError(f"mollified state left [{STABLE_LOW}, {STABLE_HIGH}] at t={t:.6g}: range [{low:.4g}, {high:.4g}]")


def _segments(cfg: SchemeConfig, eps: float) -> List[Tuple[str, float]]:
    """Convection windows, then one source ramp before and the other after each n dt.

    Classical: projection on [n dt - eps, n dt), relaxation on [n dt, n dt + eps).
    Modified: the two ramps swap places.
    """
    dt = cfg.dt
    ramps = ("project", "relax") if cfg.ordering is Ordering.CLASSICAL else ("relax", "project")
    pieces = []
    start = 0.0
    for n in range(1, cfg.n_events + 1):
        pieces.append(("convect", (n * dt - eps) - start))
        pieces.extend((kind, eps) for kind in ramps)
        start = n * dt + eps
    return pieces


def _mollified_step(state: GridState, model: Model, cfg: SchemeConfig, kind: str, step: float, eps: float) -> GridState:
    """Convection over one sub-step, then the source of the active ramp."""
    grid = state.grid
    state = convect(state, model.flux, step, CflPolicy(1.0))
    if kind == "project":
        inner_dt = cfg.dt * step / eps
        return state.evolve(
            u=project_inner_apply(grid, state.u, cfg.nu, inner_dt),
            v=project_inner_apply(grid, state.v, cfg.nu, inner_dt),
        )
    if kind == "relax":
        rate = cfg.mu.rate(cfg.dt) * step / eps
        u, v = relax_inner_solve(model.isotherm, InnerOdeProblem(state.u, state.v, rate), cfg.mu, cfg.relax_solver)
        return state.evolve(u=np.asarray(u), v=np.asarray(v))
    return state


def mollified_substep(grid, model: Model, cfg: SchemeConfig, moll: MollifiedConfig) -> float:
    """Target sub-step of the oracle: eps / ramp_substeps, capped by the CFL step."""
    return min(moll.epsilon / moll.ramp_substeps, cfg.cfl.max_step(grid.dx, model.flux.lip_bound()))


def run_mollified(state0: GridState, model: Model, cfg: SchemeConfig, moll: MollifiedConfig) -> GridState:
    """Integrate the eps-regularised system up to horizon + eps.

    The projection ramp acts with rate nu dt / eps and the relaxation ramp with
    rate mu dt / eps, placed around each n dt in the order of `cfg.ordering`.
    Each ramp is cut into equal sub-steps of convection followed by the exact
    source update.
    """
    if cfg.mu.is_infinite or cfg.nu.is_infinite:
        raise ConfigError("the mollified oracle needs finite mu and nu", path="$.scheme")
    eps = moll.epsilon
    if not 0.0 < eps < 0.5 * cfg.dt:
        raise ConfigError(f"epsilon={eps!r} must lie in (0, dt/2) with dt={cfg.dt!r}", path="$.sweeps.epsilon")
    if moll.ramp_substeps < 1:
        raise ConfigError("ramp_substeps must be positive", path="$.sweeps.ramp_substeps")

    target = mollified_substep(state0.grid, model, cfg, moll)
    state = state0

    for kind, length in _segments(cfg, eps):
        # windows are whole multiples of the sub-step when eps = dt / 2^j
        count = max(1, math.ceil(length / target - 1e-9))
        step = length / count
        for _ in range(count):
            try:
                state = _mollified_step(state, model, cfg, kind, step, eps)
            except DomainError as exc:
                raise InstabilityError(f"mollified run broke down at t={state.t:.6g}: {exc}") from exc
            _check_stable(state, state.t)
        logger.debug("mollified %s window of %.4g in %d sub-steps", kind, length, count)

    return state.validate()
