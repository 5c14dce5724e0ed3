# Reference solver for the equilibrium law d_t(w + A(w)) + d_x f(w) = 0.
# It works in z = w + A(w): then d_t z + d_x F(z) = 0 with F(z) = f(W(z))
# nondecreasing, and a plain upwind Godunov scheme is a monotone solver.

import logging
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from relaxlab.errors import GridMismatchError
from relaxlab.grid import GridSpec, cell_averages
from relaxlab.model import EquilibriumMap, FluxSpec, check_interval
from relaxlab.nodes.transport import conservative_update
from relaxlab.state import CflPolicy

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EquilibriumRun:
    eq_map: EquilibriumMap
    flux: FluxSpec
    grid: GridSpec
    courant: float = 0.9
    policy: CflPolicy = field(init=False)

    def __post_init__(self):
        if self.grid.refine != 1:
            raise GridMismatchError(f"the equilibrium reference runs on m=1 grids, got m={self.grid.refine}")
        object.__setattr__(self, "policy", CflPolicy(self.courant))

    def effective_flux(self, z):
        return self.flux.f(self.eq_map.invert(z))


def evolve_z(z0: np.ndarray, run: EquilibriumRun, horizon: float) -> np.ndarray:
    grid = run.grid
    z = check_interval(grid.check_field(z0, "z0"), "z0", upper=2.0)
    # F' = f'/(1 + A') <= Lip(f)
    steps = run.policy.substeps(horizon, grid.h, run.flux.lip_bound())
    upwind = lambda left, right: run.effective_flux(left)  # noqa: E731
    for step in steps:
        z = conservative_update(z, step / grid.h, upwind, grid.periodic)
    logger.debug("equilibrium reference: %d steps on %d cells", len(steps), grid.n_coarse)
    return check_interval(z, "z", upper=2.0)


def solve_equilibrium(w0: Union[Callable, np.ndarray], run: EquilibriumRun, horizon: float) -> np.ndarray:
    """Cell values of w at `horizon` for initial data w0 (a function or cell averages)."""
    eq_map = run.eq_map
    if callable(w0):
        z0 = cell_averages(run.grid, lambda x: eq_map.Z(check_interval(w0(x), "w0")))
    else:
        z0 = eq_map.Z(check_interval(run.grid.check_field(w0, "w0"), "w0"))
    return eq_map.invert(evolve_z(z0, run, horizon))
