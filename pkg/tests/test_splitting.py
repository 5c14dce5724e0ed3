import math

import numpy as np
import pytest

from relaxlab.diagnostics import distances_check, summarize_run
from relaxlab.errors import ConfigError, GridMismatchError, ScheduleError
from relaxlab.grid import GridSpec, GridState, init_from_function
from relaxlab.model import FluxSpec, IsothermSpec, Model
from relaxlab.nodes.bookkeeping import pair_distance
from relaxlab.nodes.transport import convect
from relaxlab.splitting import (
    CflPolicy,
    MollifiedConfig,
    Ordering,
    SchemeConfig,
    Strength,
    mollified_substep,
    run,
    run_mollified,
    run_pair,
)
from relaxlab.state import RUN_COLUMNS

LANGMUIR = Model(FluxSpec("linear", 1.0), IsothermSpec("langmuir", 1.0))


def hump_state(grid, iso=IsothermSpec("langmuir", 1.0)):
    def u0(x):
        offset = (x - 0.5) / 0.4
        return np.where(np.abs(offset) < 0.5, 0.8 * np.cos(np.pi * offset) ** 2, 0.0)

    return init_from_function(grid, u0, lambda x: iso.A(u0(x)))


def random_state(grid, seed):
    rng = np.random.default_rng(seed)
    return GridState(grid=grid, u=rng.uniform(size=grid.n_fine), v=rng.uniform(size=grid.n_fine))


def test_scheme_config_validates_the_event_lattice():
    assert SchemeConfig(dt=0.1, horizon=1.0).n_events == 10
    with pytest.raises(ValueError):
        SchemeConfig(dt=0.3, horizon=1.0)
    with pytest.raises(ValueError):
        SchemeConfig(dt=2.0, horizon=1.0)
    assert SchemeConfig(mu="infinite").mu.is_infinite


def test_rest_state_stays_at_rest():
    grid = GridSpec(n_coarse=10, refine=2)
    state0 = GridState(grid=grid, u=np.zeros(20), v=np.zeros(20))
    final, log = run(state0, LANGMUIR, SchemeConfig(dt=0.1, horizon=0.5))
    assert np.array_equal(final.u, np.zeros(20))
    assert np.array_equal(final.v, np.zeros(20))
    frame = log.frame()
    assert frame[["l1_u", "l1_v", "tv_u", "tv_v", "relax_mass_cum", "entropy_residual_max"]].abs().max().max() == 0.0


def test_run_log_layout():
    grid = GridSpec(n_coarse=10, refine=2)
    cfg = SchemeConfig(dt=0.1, horizon=0.3, snapshot_steps=(2,))
    final, log = run(hump_state(grid), LANGMUIR, cfg)
    frame = log.frame()
    assert list(frame.columns) == RUN_COLUMNS
    assert list(frame["phase"]) == ["initial"] + ["pre_event", "post_event"] * 3
    assert list(frame["step"]) == [0, 1, 1, 2, 2, 3, 3]
    assert frame["t"].iloc[-1] == pytest.approx(0.3)
    assert final.t == pytest.approx(0.3)
    assert set(log.snapshots) == {(0, "initial"), (2, "pre_event"), (2, "post_event")}


def test_runs_start_at_time_zero():
    grid = GridSpec(n_coarse=4, refine=2)
    with pytest.raises(ScheduleError):
        run(hump_state(grid).evolve(t=0.1), LANGMUIR, SchemeConfig(dt=0.1, horizon=0.2))


@pytest.mark.parametrize("ordering", list(Ordering))
@pytest.mark.parametrize("mu", [Strength(1.0), Strength(100.0), Strength.infinite()])
def test_periodic_runs_pass_every_check(ordering, mu):
    grid = GridSpec(n_coarse=20, refine=4)
    state0 = random_state(grid, 0)
    cfg = SchemeConfig(ordering=ordering, mu=mu, dt=grid.h, horizon=10 * grid.h)
    _, log = run(state0, LANGMUIR, cfg)
    checks = summarize_run(log, LANGMUIR, state0, cfg)
    assert {"convect_entropy", "event_entropy", "tv_bound", "l1_bound", "conservation"} <= set(checks)
    failed = {name: check for name, check in checks.items() if not check.passed}
    assert failed == {}


def test_finite_projection_runs_pass_every_check():
    grid = GridSpec(n_coarse=20, refine=4, boundary="outflow")
    state0 = hump_state(grid)
    cfg = SchemeConfig(ordering=Ordering.MODIFIED, mu=Strength(10.0), nu=Strength(20.0), dt=grid.h, horizon=5 * grid.h)
    _, log = run(state0, Model(FluxSpec("quadratic"), IsothermSpec("langmuir", 2.0)), cfg)
    checks = summarize_run(log, Model(FluxSpec("quadratic"), IsothermSpec("langmuir", 2.0)), state0, cfg)
    assert "conservation" not in checks
    assert all(check.passed for check in checks.values())


def test_orderings_coincide_without_subcells():
    grid = GridSpec(n_coarse=30, refine=1)
    state0 = hump_state(grid, IsothermSpec("langmuir", 4.0))
    model = Model(FluxSpec(), IsothermSpec("langmuir", 4.0))
    cfg = SchemeConfig(mu=Strength(500.0), dt=grid.h, horizon=6 * grid.h)
    classical, _ = run(state0, model, cfg)
    modified, _ = run(state0, model, SchemeConfig(ordering="modified", mu=Strength(500.0), dt=grid.h, horizon=6 * grid.h))
    assert np.array_equal(classical.u, modified.u)
    assert np.array_equal(classical.v, modified.v)


def test_orderings_differ_with_subcells_and_nonlinear_isotherm():
    grid = GridSpec(n_coarse=20, refine=8)
    state0 = random_state(grid, 1)
    model = Model(FluxSpec(), IsothermSpec("langmuir", 4.0))
    settings = dict(mu=Strength(1000.0), dt=grid.h, horizon=4 * grid.h)
    classical, _ = run(state0, model, SchemeConfig(**settings))
    modified, _ = run(state0, model, SchemeConfig(ordering="modified", **settings))
    assert pair_distance(classical, modified) > 1e-3


def test_pair_of_identical_states_stays_together():
    grid = GridSpec(n_coarse=10, refine=2)
    state = random_state(grid, 2)
    distances = run_pair(state, state, LANGMUIR, SchemeConfig(dt=0.1, horizon=0.3))
    assert len(distances) == 1 + 2 * 3
    assert all(d == 0.0 for _, d in distances)


@pytest.mark.parametrize("ordering", list(Ordering))
@pytest.mark.parametrize("mu", [Strength(10.0), Strength.infinite()])
def test_pair_distances_never_grow(ordering, mu):
    grid = GridSpec(n_coarse=10, refine=4)
    cfg = SchemeConfig(ordering=ordering, mu=mu, dt=grid.h, horizon=5 * grid.h)
    for seed in range(3):
        distances = run_pair(random_state(grid, 10 + seed), random_state(grid, 20 + seed), LANGMUIR, cfg)
        assert distances_check(distances).passed


def test_single_cell_perturbation_stays_small():
    grid = GridSpec(n_coarse=10, refine=4)
    a = random_state(grid, 3)
    delta = 0.05
    u = a.u.copy()
    u[7] = u[7] + delta if u[7] < 0.5 else u[7] - delta
    distances = run_pair(a, a.evolve(u=u), LANGMUIR, SchemeConfig(dt=grid.h, horizon=5 * grid.h))
    assert max(d for _, d in distances) <= 2 * delta * grid.dx + 1e-15


def test_pair_needs_matching_grids():
    with pytest.raises(GridMismatchError):
        run_pair(random_state(GridSpec(n_coarse=4), 0), random_state(GridSpec(n_coarse=5), 0), LANGMUIR, SchemeConfig(dt=0.1, horizon=0.1))


def test_mollified_oracle_rejects_bad_settings():
    grid = GridSpec(n_coarse=10, refine=2)
    state0 = hump_state(grid)
    with pytest.raises(ConfigError):
        run_mollified(state0, LANGMUIR, SchemeConfig(dt=0.1, horizon=0.2), MollifiedConfig(0.01))
    finite = SchemeConfig(mu=Strength(10.0), nu=Strength(10.0), dt=0.1, horizon=0.2)
    with pytest.raises(ConfigError):
        run_mollified(state0, LANGMUIR, finite, MollifiedConfig(0.05))
    with pytest.raises(ConfigError):
        run_mollified(state0, LANGMUIR, finite, MollifiedConfig(0.01, ramp_substeps=0))


def test_mollified_oracle_without_sources_only_convects():
    grid = GridSpec(n_coarse=10, refine=2)
    state0 = hump_state(grid)
    cfg = SchemeConfig(mu=Strength(0.0), nu=Strength(0.0), dt=0.1, horizon=0.2)
    moll = MollifiedConfig(epsilon=0.02, ramp_substeps=4)
    oracle = run_mollified(state0, LANGMUIR, cfg, moll)

    # same windows, same sub-steps, no source
    target = mollified_substep(grid, LANGMUIR, cfg, moll)
    windows = [0.1 - 0.02, 0.02, 0.02, 0.1 - 0.04, 0.02, 0.02]
    expected = state0
    for length in windows:
        count = max(1, math.ceil(length / target - 1e-9))
        for _ in range(count):
            expected = convect(expected, LANGMUIR.flux, length / count, CflPolicy(1.0))
    assert np.max(np.abs(oracle.u - expected.u)) <= 1e-12
    assert np.array_equal(oracle.v, state0.v)
    assert oracle.t == pytest.approx(0.2 + 0.02)


def test_mollified_oracle_approaches_the_split_scheme():
    grid = GridSpec(n_coarse=20, refine=2)
    state0 = hump_state(grid)
    cfg = SchemeConfig(mu=Strength(10.0), nu=Strength(50.0), dt=0.05, horizon=0.1)
    lip = LANGMUIR.flux.lip_bound()
    distances = []
    for eps in (cfg.dt / 4, cfg.dt / 8):
        moll = MollifiedConfig(epsilon=eps)
        step = mollified_substep(grid, LANGMUIR, cfg, moll)
        split, _ = run(state0, LANGMUIR, SchemeConfig(mu=cfg.mu, nu=cfg.nu, dt=cfg.dt, horizon=cfg.horizon, cfl=CflPolicy(step * lip / grid.dx)))
        distances.append(pair_distance(split, run_mollified(state0, LANGMUIR, cfg, moll)))
    assert distances[1] < distances[0]


@pytest.mark.parametrize("ordering", list(Ordering))
def test_mollified_oracle_converges_in_either_ordering(ordering):
    grid = GridSpec(n_coarse=10, refine=8)
    state0 = random_state(grid, 3)
    model = Model(FluxSpec(), IsothermSpec("langmuir", 4.0))
    cfg = SchemeConfig(ordering=ordering, mu=Strength(200.0), nu=Strength(200.0), dt=0.05, horizon=0.1)
    lip = model.flux.lip_bound()
    distances = []
    for eps in (cfg.dt / 4, cfg.dt / 16, cfg.dt / 64):
        moll = MollifiedConfig(epsilon=eps)
        step = mollified_substep(grid, model, cfg, moll)
        matched = SchemeConfig(
            ordering=ordering, mu=cfg.mu, nu=cfg.nu, dt=cfg.dt, horizon=cfg.horizon, cfl=CflPolicy(step * lip / grid.dx)
        )
        split, _ = run(state0, model, matched)
        distances.append(pair_distance(split, run_mollified(state0, model, cfg, moll)))
    assert distances[1] < distances[0]
    assert distances[2] < 0.25 * distances[0]
