# This node moves the solution between two Dirac events:
# Godunov updates for d_t u + d_x f(u) = 0 on the fine grid, with v frozen.

import logging
from dataclasses import dataclass
from typing import Callable, Sequence, Tuple

import numpy as np

from relaxlab.errors import CflError
from relaxlab.grid import GridState
from relaxlab.model import FluxSpec
from relaxlab.nodes.bookkeeping import pair_distance, record_row
from relaxlab.state import CflPolicy, SplittingState

logger = logging.getLogger(__name__)

NumericalFlux = Callable[[np.ndarray, np.ndarray], np.ndarray]


def godunov_flux(flux: FluxSpec, uL, uR):
    """Exact Godunov flux for a convex f with minimiser flux.argmin.

    min of f over [uL, uR] if uL <= uR, max over [uR, uL] otherwise.
    """
    uL = np.asarray(uL, dtype=float)
    uR = np.asarray(uR, dtype=float)
    bottom = flux.argmin
    value = np.maximum(flux.f(np.maximum(uL, bottom)), flux.f(np.minimum(uR, bottom)))
    return float(value) if value.ndim == 0 else value


def interface_fluxes(values: np.ndarray, numflux: NumericalFlux, periodic: bool):
    """Fluxes through the left and right face of every cell.

    Outflow boundaries use zero-gradient ghost cells.
    """
    if periodic:
        right = numflux(values, np.roll(values, -1))
        return np.roll(right, 1), right
    ext = np.concatenate(([values[0]], values, [values[-1]]))
    faces = numflux(ext[:-1], ext[1:])
    return faces[:-1], faces[1:]


def conservative_update(values: np.ndarray, lam: float, numflux: NumericalFlux, periodic: bool) -> np.ndarray:
    left, right = interface_fluxes(values, numflux, periodic)
    return values - lam * (right - left)


def kruzkov_cell_residuals(
    flux: FluxSpec, before: np.ndarray, after: np.ndarray, k: float, lam: float, periodic: bool
) -> np.ndarray:
    """|u_after-k| - |u_before-k| + lam (G_{j+1/2} - G_{j-1/2}) per cell.

    G(a,b) = godunov(a v k, b v k) - godunov(a ^ k, b ^ k), the numerical
    Kruzkov entropy flux. Nonpositive for a monotone update.
    """
    numflux = lambda a, b: godunov_flux(flux, a, b)  # noqa: E731
    upper_l, upper_r = interface_fluxes(np.maximum(before, k), numflux, periodic)
    lower_l, lower_r = interface_fluxes(np.minimum(before, k), numflux, periodic)
    g_left = upper_l - lower_l
    g_right = upper_r - lower_r
    return np.abs(after - k) - np.abs(before - k) + lam * (g_right - g_left)


@dataclass
class ConvectionReport:
    """Side results of one convection interval."""

    substeps: int = 0
    max_residual: float = 0.0
    entropy_inflow: float = 0.0
    mass_inflow: float = 0.0


def convect_with_report(
    state: GridState,
    flux: FluxSpec,
    dt: float,
    policy: CflPolicy,
    probes: Sequence[float] = (),
) -> Tuple[GridState, ConvectionReport]:
    grid = state.grid
    lip = flux.lip_bound()
    dt_max = policy.max_step(grid.dx, lip)
    numflux = lambda a, b: godunov_flux(flux, a, b)  # noqa: E731
    report = ConvectionReport()

    u = state.u
    for step in policy.substeps(dt, grid.dx, lip):
        if step > dt_max * (1.0 + 1e-12):
            raise CflError(f"sub-step {step!r} breaks the CFL bound {dt_max!r}")
        lam = step / grid.dx
        u_next = conservative_update(u, lam, numflux, grid.periodic)

        for k in probes:
            worst = float(np.max(kruzkov_cell_residuals(flux, u, u_next, k, lam, grid.periodic)))
            report.max_residual = max(report.max_residual, worst)

        if not grid.periodic:
            # upwind faces: what enters at x_min minus what leaves at x_max
            report.entropy_inflow += step * float(flux.entropy_flux(u[0]) - flux.entropy_flux(u[-1]))
            report.mass_inflow += step * float(flux.f(u[0]) - flux.f(u[-1]))

        u = u_next
        report.substeps += 1

    logger.debug("convected over %.6g in %d sub-steps", dt, report.substeps)
    return state.evolve(u=u, t=state.t + dt).validate(), report


def convect(state: GridState, flux: FluxSpec, dt: float, policy: CflPolicy) -> GridState:
    """Advance u over dt with conservative Godunov sub-steps; v is untouched."""
    new_state, _ = convect_with_report(state, flux, dt, policy)
    return new_state


def convect_interval(state: SplittingState) -> dict:
    """Graph node: convection over [(n-1)dt, n dt) for the current and companion states."""
    cfg = state.scheme
    flux = state.model.flux
    probes = cfg.probes if cfg.check_entropy else ()
    log = state.log
    n = state.step + 1
    t_event = cfg.event_time(n)

    current, report = convect_with_report(state.current, flux, cfg.dt, cfg.cfl, probes)
    current = current.evolve(t=t_event)
    worst = report.max_residual
    log.entropy_inflow += report.entropy_inflow

    companion = state.companion
    if companion is not None:
        companion, other = convect_with_report(companion, flux, cfg.dt, cfg.cfl, probes)
        companion = companion.evolve(t=t_event)
        worst = max(worst, other.max_residual)
        log.distances.append((t_event, pair_distance(current, companion)))

    log.max_convect_residual = max(log.max_convect_residual, worst)
    record_row(log, current, state.model, n, "pre_event", worst)
    if n in cfg.snapshot_steps:
        log.snapshots[(n, "pre_event")] = current
    return {"current": current, "companion": companion, "log": log}
