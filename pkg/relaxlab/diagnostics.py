# Computable forms of the estimates the scheme is supposed to satisfy:
# discrete Kruzkov residuals for convection and for events, the special entropy
# balance, relaxation mass sweeps, and error / rate measurement.

import logging
from dataclasses import dataclass, replace
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from relaxlab.errors import DomainError, GridMismatchError
from relaxlab.grid import GridSpec, GridState, l1_norm, project, total_variation
from relaxlab.model import Model, check_interval
from relaxlab.nodes.transport import kruzkov_cell_residuals
from relaxlab.state import EventReport, Ordering, RunLog, SchemeConfig, Strength

logger = logging.getLogger(__name__)

CONVECT_TOL = 1e-12
EVENT_TOL = 1e-10
BOUND_TOL = 1e-12


@dataclass(frozen=True)
class EntropyProbe:
    """Kruzkov constants: k for u, l for v."""

    k: float
    l: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "k", float(check_interval(self.k, "k")))
        object.__setattr__(self, "l", float(check_interval(self.l, "l")))


def _check_pair(before: GridState, after: GridState) -> GridSpec:
    if before.grid != after.grid:
        raise GridMismatchError("states live on different grids")
    return before.grid


def kruzkov_residual_convect(before: GridState, after: GridState, flux, probe: EntropyProbe, dt: float) -> float:
    """Worst cell of the discrete Kruzkov inequality for one convection sub-step."""
    grid = _check_pair(before, after)
    if not np.array_equal(before.v, after.v):
        raise GridMismatchError("convection must leave v untouched")
    lam = dt / grid.dx
    residual = kruzkov_cell_residuals(flux, before.u, after.u, probe.k, lam, grid.periodic)
    return float(np.max(residual))


def _layer_sign_change(v0, v1, s, k: float, l: float) -> np.ndarray:
    """int (sgn(v - l) - sgn(s - v - k)) dv along the layer from v0 to v1.

    The path is cut where v = l and where u = s - v = k, so the sign factor is
    constant on every piece and is read at its midpoint.
    """
    lo = np.minimum(v0, v1)
    hi = np.maximum(v0, v1)
    direction = np.sign(v1 - v0)
    cuts = np.sort(np.stack([lo, np.clip(l, lo, hi), np.clip(s - k, lo, hi), hi]), axis=0)
    total = np.zeros_like(lo)
    for left, right in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (left + right)
        total += (np.sign(mid - l) - np.sign(s - mid - k)) * (right - left)
    return direction * total


def event_cell_residuals(
    before: GridState, after: GridState, report: EventReport, probe: EntropyProbe
) -> np.ndarray:
    """lhs - rhs of the event entropy inequality, cell by cell."""
    k, l = probe.k, probe.l
    grid = before.grid
    lhs = np.abs(after.u - k) + np.abs(after.v - l) - np.abs(before.u - k) - np.abs(before.v - l)

    weight = report.projection_weight
    gain = np.zeros_like(lhs)
    for field, anchor in ((report.project_in_u, k), (report.project_in_v, l)):
        gain += weight * (np.abs(project(grid, field) - anchor) - np.abs(field - anchor))

    s = report.relax_in_u + report.relax_in_v
    relax = _layer_sign_change(report.relax_in_v, report.relax_out_v, s, k, l)
    return lhs - (gain + relax)


def kruzkov_residual_event(
    before: GridState, after: GridState, report: EventReport, probe: EntropyProbe, cfg: SchemeConfig
) -> float:
    """Violation magnitude of the event entropy inequality for one probe (k, l)."""
    _check_pair(before, after)
    if report.ordering is not cfg.ordering:
        raise GridMismatchError(f"report was made with {report.ordering.value} ordering, config says {cfg.ordering.value}")
    entry_u = report.project_in_u if cfg.ordering is Ordering.CLASSICAL else report.relax_in_u
    if entry_u.shape != before.u.shape or not np.array_equal(entry_u, before.u):
        raise GridMismatchError("event report does not start from this state")
    residual = event_cell_residuals(before, after, report, probe)
    return max(0.0, float(np.max(residual)))


def special_entropy_balance(run_log: RunLog, model: Model) -> float:
    """Slack of Q/Lip(A) <= eta(initial) - eta(final) + entropy inflow.

    Q is the quadratic relaxation mass, sum of mu dt int (A(u) - v)^2 dtau dx.
    """
    if not run_log.rows:
        raise DomainError("run log is empty")
    missing = {"eta_total", "relax_quad_cum"} - set(run_log.rows[0])
    if missing:
        raise DomainError(f"run log lacks fields {sorted(missing)}")
    eta0 = run_log.initial["eta_total"]
    eta_t = run_log.final["eta_total"]
    budget = eta0 - eta_t + run_log.entropy_inflow
    return budget - run_log.relax_quad_cum / model.isotherm.lip_bound()


def relax_mass_sweep(
    model: Model, state0: GridState, cfg_base: SchemeConfig, mus: Sequence[float], progress: bool = False
) -> List[Tuple[float, float, float, float]]:
    """Run the scheme once per mu: (mu, relax mass, quadratic mass, entropy budget)."""
    from relaxlab.splitting import run  # splitting imports the nodes, which import this module

    mus = [float(mu) for mu in mus]
    if any(mu <= 0 for mu in mus) or any(b <= a for a, b in zip(mus, mus[1:])):
        raise DomainError(f"mu values must be positive and increasing, got {mus}")

    results = []
    for mu in tqdm(mus, desc="relax-mass", disable=not progress):
        _, log = run(state0, model, replace(cfg_base, mu=Strength(mu)))
        budget = log.initial["eta_total"] - log.final["eta_total"] + log.entropy_inflow
        results.append((mu, log.relax_mass_cum, log.relax_quad_cum, budget))
        logger.info("mu=%g: relaxation mass %.6g", mu, log.relax_mass_cum)
    return results


def restrict(reference: np.ndarray, factor: int) -> np.ndarray:
    """Exact averaging of `factor` neighbouring reference cells."""
    reference = np.asarray(reference, dtype=float)
    if factor < 1 or reference.size % factor:
        raise GridMismatchError(f"cannot restrict {reference.size} cells by {factor}")
    return reference.reshape(-1, factor).mean(axis=1)


def error_vs_reference(schemed: GridState, reference, grid: GridSpec) -> float:
    """L1 error of u against a reference given on `grid` (same domain, finer or equal)."""
    target = schemed.grid
    if (grid.x_min, grid.x_max) != (target.x_min, target.x_max):
        raise GridMismatchError("reference and scheme live on different domains")
    reference = grid.check_field(reference, "reference")
    if grid.n_fine % target.n_fine:
        raise GridMismatchError(f"reference of {grid.n_fine} cells does not nest {target.n_fine} cells")
    coarse = restrict(reference, grid.n_fine // target.n_fine)
    return l1_norm(target, schemed.u - coarse)


def fit_rate(points: Iterable[Tuple[float, float]]) -> float:
    """Least-squares slope of log(error) against log(param)."""
    params, errors = (np.asarray(col, dtype=float) for col in zip(*points))
    if params.size < 2:
        raise DomainError("need at least two points to fit a rate")
    if np.any(params <= 0) or np.any(errors <= 0):
        raise DomainError("rates need positive parameters and errors")
    slope, _ = np.polyfit(np.log(params), np.log(errors), 1)
    return float(slope)


def equicontinuity_bound(initial: GridState, model: Model, cfg: SchemeConfig, relax_mass: float) -> float:
    """(T + dt)(h/dt + Lip f)(TV u0 + TV v0) + 2 relax_mass."""
    grid = initial.grid
    tv0 = total_variation(grid, initial.u) + total_variation(grid, initial.v)
    speed = grid.h / cfg.dt + model.flux.lip_bound()
    return (cfg.horizon + cfg.dt) * speed * tv0 + 2.0 * relax_mass


@dataclass(frozen=True)
class CheckResult:
    max_violation: float
    tolerance: float
    strict: bool = False

    @property
    def passed(self) -> bool:
        if self.strict:
            return self.max_violation < self.tolerance
        return self.max_violation <= self.tolerance

    def to_dict(self) -> Dict[str, object]:
        return {"max_violation": self.max_violation, "tolerance": self.tolerance, "pass": self.passed}


def equicontinuity_check(run_log: RunLog, initial: GridState, model: Model, cfg: SchemeConfig) -> CheckResult:
    bound = equicontinuity_bound(initial, model, cfg, run_log.relax_mass_cum)
    return CheckResult(max(0.0, run_log.time_modulus - bound), BOUND_TOL * max(1.0, bound))


def summarize_run(run_log: RunLog, model: Model, initial: GridState, cfg: SchemeConfig) -> Dict[str, CheckResult]:
    """Every check a single run can be held to, keyed by check name."""
    frame = run_log.frame()
    first = run_log.initial
    checks: Dict[str, CheckResult] = {}

    if cfg.check_entropy:
        checks["convect_entropy"] = CheckResult(run_log.max_convect_residual, CONVECT_TOL)
        checks["event_entropy"] = CheckResult(run_log.max_event_residual, EVENT_TOL)

    tv0 = first["tv_u"] + first["tv_v"]
    tv_excess = float((frame["tv_u"] + frame["tv_v"]).max() - tv0)
    checks["tv_bound"] = CheckResult(max(0.0, tv_excess), BOUND_TOL * max(1.0, tv0))

    if initial.grid.periodic:
        l10 = first["l1_u"] + first["l1_v"]
        l1_excess = float((frame["l1_u"] + frame["l1_v"]).max() - l10)
        checks["l1_bound"] = CheckResult(max(0.0, l1_excess), BOUND_TOL * max(1.0, l10))
        if cfg.nu.is_infinite:
            mass0 = first["mass_u_plus_v"]
            drift = float((frame["mass_u_plus_v"] - mass0).abs().max())
            checks["conservation"] = CheckResult(drift, BOUND_TOL * max(1.0, abs(mass0)))

    checks["equicontinuity"] = equicontinuity_check(run_log, initial, model, cfg)
    checks["special_entropy"] = CheckResult(max(0.0, -special_entropy_balance(run_log, model)), EVENT_TOL)
    return checks


def distances_check(distances: Sequence[Tuple[float, float]], slack: float = BOUND_TOL) -> CheckResult:
    """Largest increase along a run_pair distance sequence."""
    values = np.asarray([d for _, d in distances], dtype=float)
    worst = float(np.max(np.diff(values), initial=0.0)) if values.size > 1 else 0.0
    return CheckResult(max(0.0, worst), slack)
