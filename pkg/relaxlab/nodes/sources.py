# This node fires the Dirac events at t = n dt.
# An event is two inner layers solved in the fast variable tau in [0,1]:
#   projection:  dw/dtau = nu dt (P^h w - w)          (explicit solution)
#   relaxation:  dv/dtau = mu dt (A(s - v) - v)        (u + v = s is frozen)
# The classical scheme projects first, the modified scheme relaxes first.

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.integrate import quad
from scipy.optimize import bisect

from relaxlab.diagnostics import EntropyProbe, kruzkov_residual_event
from relaxlab.errors import DomainError, ScheduleError
from relaxlab.grid import GridSpec, GridState, project
from relaxlab.model import IsothermSpec, Model, _scalar_or_array, check_interval
from relaxlab.nodes.bookkeeping import pair_distance, record_row
from relaxlab.state import (
    EventReport,
    Ordering,
    RelaxSolver,
    SchemeConfig,
    SplittingState,
    Strength,
)
from relaxlab.tools.bisection import bisect_monotone

logger = logging.getLogger(__name__)

ROOT_CAP = 1e-13


@dataclass(frozen=True, eq=False)
class InnerOdeProblem:
    """Pointwise relaxation layer; u0, v0 may be scalars or cell arrays."""

    u0: object
    v0: object
    rate: float

    @property
    def s(self):
        return np.asarray(self.u0, dtype=float) + np.asarray(self.v0, dtype=float)


def relax_equilibrium_root(iso: IsothermSpec, s):
    """v* in [max(0,s-1), min(1,s)] with A(s - v*) = v*."""
    s = check_interval(s, "s", upper=2.0)
    lo = np.maximum(0.0, s - 1.0)
    hi = np.minimum(1.0, s)
    root = bisect_monotone(lambda v: iso.relax_residual(s, v), lo, hi, increasing=False)
    return _scalar_or_array(root)


def _layer_linear(s, v0, rate):
    v_star = 0.5 * s
    return v_star + (v0 - v_star) * np.exp(-2.0 * rate)


def _layer_langmuir(iso: IsothermSpec, s, v0, rate):
    # g(v) = beta (v - a)(v - b) / D(v), D(v) = 1 + beta (s - v); integrating
    # dtau = dv / (rate g(v)) in closed form and writing v = v0 + theta (a - v0):
    #   k_a log(1 - theta) + k_b log(1 + theta (a - v0)/(v0 - b)) = beta rate
    beta = iso.beta
    a, b = iso.layer_roots(s)
    k_a = (1.0 + beta * (s - a)) / (a - b)
    k_b = (1.0 + beta * (s - b)) / (b - a)
    gap = a - v0
    ratio = gap / (v0 - b)
    target = beta * rate

    def psi(theta):
        with np.errstate(divide="ignore", invalid="ignore"):
            return k_a * np.log1p(-theta) + k_b * np.log1p(theta * ratio) - target

    theta = bisect_monotone(psi, np.zeros_like(s), np.ones_like(s), increasing=True, check_bracket=False)
    return v0 + theta * gap


def _layer_backward_euler(iso: IsothermSpec, s, v0, rate):
    # one implicit step v - v0 = rate g(v); the root sits between v0 and v*
    v_star = np.asarray(relax_equilibrium_root(iso, s), dtype=float)
    lo = np.minimum(v0, v_star)
    hi = np.maximum(v0, v_star)
    return bisect_monotone(
        lambda v: v - v0 - rate * iso.relax_residual(s, v), lo, hi, increasing=True, check_bracket=False
    )


def relax_inner_solve(
    iso: IsothermSpec,
    prob: InnerOdeProblem,
    mu: Strength,
    solver: RelaxSolver = RelaxSolver.EXACT_QUADRATURE,
):
    """Solve the relaxation layer up to tau = 1 and return (u1, v1)."""
    u0 = check_interval(prob.u0, "u0")
    v0 = check_interval(prob.v0, "v0")
    s = u0 + v0

    if mu.is_infinite:
        v1 = np.asarray(relax_equilibrium_root(iso, s), dtype=float)
    else:
        rate = float(prob.rate)
        if rate < 0 or not np.isfinite(rate):
            raise DomainError(f"relaxation rate must be finite and >= 0, got {rate!r}")
        if rate == 0.0:
            return _scalar_or_array(u0), _scalar_or_array(v0)
        solver = RelaxSolver(solver)
        if solver is RelaxSolver.BACKWARD_EULER:
            v1 = _layer_backward_euler(iso, s, v0, rate)
        elif solver is RelaxSolver.QUADRATURE:
            v1 = _layer_quadrature(iso, u0, v0, rate)
        elif iso.is_linear:
            v1 = _layer_linear(s, v0, rate)
        else:
            v1 = _layer_langmuir(iso, s, v0, rate)

    u1 = s - v1
    return _scalar_or_array(u1), _scalar_or_array(v1)


def layer_time(iso: IsothermSpec, s: float, v0: float, v: float, rate: float) -> float:
    """tau(v) = int_{v0}^{v} dw / (rate g(w)), by adaptive quadrature."""
    if v == v0:
        return 0.0
    value, _ = quad(lambda w: 1.0 / (rate * float(iso.relax_residual(s, w))), v0, v, epsabs=1e-14, epsrel=1e-13, limit=200)
    return value


def relax_inner_solve_quadrature(iso: IsothermSpec, u0: float, v0: float, rate: float) -> Tuple[float, float]:
    """Scalar layer solve for any isotherm: invert tau(v) = 1 by bisection.

    The integral is stopped ROOT_CAP short of v*, past that the layer counts as converged.
    """
    u0 = float(check_interval(u0, "u0"))
    v0 = float(check_interval(v0, "v0"))
    if rate < 0:
        raise DomainError(f"relaxation rate must be >= 0, got {rate!r}")
    s = u0 + v0
    if rate == 0.0:
        return u0, v0

    v_star = float(relax_equilibrium_root(iso, s))
    gap = v_star - v0
    if abs(gap) <= ROOT_CAP:
        return s - v_star, v_star
    v_cap = v_star - np.copysign(ROOT_CAP, gap)
    if layer_time(iso, s, v0, v_cap, rate) <= 1.0:
        return s - v_star, v_star

    lo, hi = min(v0, v_cap), max(v0, v_cap)
    v1 = bisect(lambda v: layer_time(iso, s, v0, v, rate) - 1.0, lo, hi, xtol=1e-15, maxiter=200)
    return s - v1, v1


def _layer_quadrature(iso: IsothermSpec, u0, v0, rate: float) -> np.ndarray:
    # cell by cell; slow, meant for cross-checking the closed forms on small grids
    u0, v0 = np.broadcast_arrays(u0, v0)
    v1 = [relax_inner_solve_quadrature(iso, a, b, rate)[1] for a, b in zip(u0.ravel(), v0.ravel())]
    return np.asarray(v1, dtype=float).reshape(u0.shape)


def project_inner_apply(grid: GridSpec, field, nu: Strength, dt: float) -> np.ndarray:
    """w(1) = e^{-nu dt} w(0) + (1 - e^{-nu dt}) P^h w(0)."""
    field = grid.check_field(field)
    if nu.is_infinite:
        return project(grid, field)
    weight = nu.projection_weight(dt)
    return field + weight * (project(grid, field) - field)


def _relax_fields(u, v, model: Model, cfg: SchemeConfig):
    prob = InnerOdeProblem(u0=u, v0=v, rate=cfg.mu.rate(cfg.dt))
    u1, v1 = relax_inner_solve(model.isotherm, prob, cfg.mu, cfg.relax_solver)
    return np.asarray(u1, dtype=float), np.asarray(v1, dtype=float)


def _check_schedule(t: float, dt: float) -> int:
    n = int(round(t / dt))
    if n < 1 or abs(t - n * dt) > 1e-12 * dt:
        raise ScheduleError(f"event fired at t={t!r}, off the lattice n*{dt!r}")
    return n


def apply_event(state: GridState, cfg: SchemeConfig, model: Model) -> Tuple[GridState, EventReport]:
    """One Dirac event at t = n dt in the configured ordering."""
    _check_schedule(state.t, cfg.dt)
    grid = state.grid
    weight = cfg.nu.projection_weight(cfg.dt)

    if cfg.ordering is Ordering.CLASSICAL:
        proj_u, proj_v = state.u, state.v
        rel_u = project_inner_apply(grid, state.u, cfg.nu, cfg.dt)
        rel_v = project_inner_apply(grid, state.v, cfg.nu, cfg.dt)
        out_u, out_v = _relax_fields(rel_u, rel_v, model, cfg)
        new_u, new_v = out_u, out_v
    else:
        rel_u, rel_v = state.u, state.v
        out_u, out_v = _relax_fields(rel_u, rel_v, model, cfg)
        proj_u, proj_v = out_u, out_v
        new_u = project_inner_apply(grid, out_u, cfg.nu, cfg.dt)
        new_v = project_inner_apply(grid, out_v, cfg.nu, cfg.dt)

    s = rel_u + rel_v
    primitive = model.isotherm.primitive
    quadratic = primitive(s - rel_v) - primitive(s - out_v) - 0.5 * (out_v * out_v - rel_v * rel_v)
    report = EventReport(
        project_in_u=proj_u,
        project_in_v=proj_v,
        relax_in_u=rel_u,
        relax_in_v=rel_v,
        relax_out_u=out_u,
        relax_out_v=out_v,
        projection_weight=weight,
        ordering=cfg.ordering,
        relax_mass=float(np.sum(np.abs(out_v - rel_v)) * grid.dx),
        relax_quadratic_mass=float(np.sum(quadratic) * grid.dx),
    )
    return state.evolve(u=new_u, v=new_v).validate(), report


def _event_residual(before: GridState, after: GridState, report: EventReport, cfg: SchemeConfig) -> float:
    if not cfg.check_entropy:
        return 0.0
    return max(
        (kruzkov_residual_event(before, after, report, EntropyProbe(k, l), cfg) for k in cfg.probes for l in cfg.probes),
        default=0.0,
    )


def fire_event(state: SplittingState) -> dict:
    """Graph node: apply the event to the current (and companion) state and log it."""
    cfg = state.scheme
    log = state.log
    n = state.step + 1

    before = state.current
    current, report = apply_event(before, cfg, state.model)
    residual = _event_residual(before, current, report, cfg)
    log.relax_mass_cum += report.relax_mass
    log.relax_quad_cum += report.relax_quadratic_mass

    companion = state.companion
    if companion is not None:
        comp_before = companion
        companion, comp_report = apply_event(comp_before, cfg, state.model)
        residual = max(residual, _event_residual(comp_before, companion, comp_report, cfg))
        log.distances.append((current.t, pair_distance(current, companion)))

    log.max_event_residual = max(log.max_event_residual, residual)
    if state.previous is not None:
        log.time_modulus += pair_distance(current, state.previous)
    record_row(log, current, state.model, n, "post_event", residual)
    if n in cfg.snapshot_steps:
        log.snapshots[(n, "post_event")] = current
    logger.debug("event %d at t=%.6g: relax mass %.3e", n, current.t, report.relax_mass)
    return {"current": current, "companion": companion, "step": n, "log": log, "previous": current}
