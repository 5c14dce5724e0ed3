# The experiment registry.
# Each entry turns an ExperimentConfig into runs of the scheme, writes its CSV
# files under the run directory and returns the checks that decide the exit code.

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from relaxlab.config import CustomCsvData, ExperimentConfig, HumpData, LayerDemoData, RiemannData
from relaxlab.diagnostics import (
    CheckResult,
    distances_check,
    error_vs_reference,
    fit_rate,
    relax_mass_sweep,
    summarize_run,
)
from relaxlab.equilibrium import EquilibriumRun, solve_equilibrium
from relaxlab.errors import RelaxLabError
from relaxlab.grid import GridSpec, GridState, fields_frame, init_from_function, state_from_frame
from relaxlab.model import EquilibriumMap, FluxSpec, IsothermSpec, Model
from relaxlab.nodes.bookkeeping import pair_distance
from relaxlab.splitting import mollified_substep, run, run_mollified, run_pair
from relaxlab.state import CflPolicy, MollifiedConfig, Ordering, RunLog, SchemeConfig, Strength
from relaxlab.tools.catalogue import find_experiment
from relaxlab.tools.io import member_dir, resolve_out_dir, write_csv, write_json

logger = logging.getLogger(__name__)

REFERENCE_FACTOR = 8
Checks = Dict[str, CheckResult]
ExperimentFn = Callable[[ExperimentConfig, "RunContext"], Checks]
REGISTRY: Dict[str, ExperimentFn] = {}


def experiment(name: str):
    def register(fn: ExperimentFn) -> ExperimentFn:
        REGISTRY[name] = fn
        return fn

    return register


@dataclass
class RunContext:
    run_dir: Path
    parallel: int = 1
    progress: bool = False
    metrics: Optional[dict] = None

    def map(self, fn: Callable, items: Sequence, desc: str) -> List:
        """Apply fn to every item, in order; threads when --parallel > 1."""
        items = list(items)
        bar = tqdm(total=len(items), desc=desc, disable=not self.progress)
        try:
            if self.parallel > 1:
                with ThreadPoolExecutor(max_workers=self.parallel) as pool:
                    results = []
                    for result in pool.map(fn, items):
                        results.append(result)
                        bar.update()
                    return results
            results = []
            for item in items:
                results.append(fn(item))
                bar.update()
            return results
        finally:
            bar.close()


# ------------------ Checks ------------------

def exceeds(value: float, floor: float) -> CheckResult:
    """Passes when value > floor strictly."""
    return CheckResult(floor - value, 0.0, strict=True)


def at_least(value: float, floor: float) -> CheckResult:
    return CheckResult(floor - value, 0.0)


def strictly_decreasing(values: Sequence[float]) -> CheckResult:
    steps = np.diff(np.asarray(values, dtype=float))
    return CheckResult(float(steps.max()) if steps.size else -math.inf, 0.0, strict=True)


def prefixed(prefix: str, checks: Checks) -> Checks:
    return {f"{prefix}.{name}": result for name, result in checks.items()}


# ------------------ Initial data ------------------

Profile = Callable[[np.ndarray], np.ndarray]


def initial_profiles(cfg: ExperimentConfig, grid: GridSpec, model: Model) -> Tuple[Profile, Profile]:
    """Pointwise u0, v0 of the configured initial data."""
    data = cfg.initial_data
    A = model.isotherm.A

    if isinstance(data, RiemannData):
        u0 = lambda x: np.where(x < data.x0, data.u_left, data.u_right)  # noqa: E731
        if data.v_mode == "equilibrium":
            return u0, lambda x: A(u0(x))
        return u0, lambda x: np.zeros_like(x)

    if isinstance(data, HumpData):
        def u0(x):
            offset = (x - data.center) / data.width
            return np.where(np.abs(offset) < 0.5, data.height * np.cos(np.pi * offset) ** 2, 0.0)

        return u0, lambda x: A(u0(x))

    if isinstance(data, LayerDemoData):
        # u0 = 0 and v0 oscillating at the coarse scale h, far from equilibrium
        h = grid.h
        return (
            lambda x: np.zeros_like(x),
            lambda x: np.clip(np.sin(np.pi * (x - grid.x_min) / h), 0.0, 1.0),
        )

    if isinstance(data, CustomCsvData):
        frame = pd.read_csv(data.path, float_precision="round_trip")
        dump = state_from_frame(GridSpec(grid.x_min, grid.x_max, len(frame), 1, grid.boundary), frame)
        width = (grid.x_max - grid.x_min) / len(frame)

        def lookup(values):
            def profile(x):
                index = np.clip(((x - grid.x_min) / width).astype(int), 0, len(values) - 1)
                return values[index]

            return profile

        return lookup(dump.u), lookup(dump.v)

    raise RelaxLabError(f"unsupported initial data {type(data).__name__}")


def build_initial(cfg: ExperimentConfig, grid: GridSpec, model: Model) -> GridState:
    if isinstance(cfg.initial_data, CustomCsvData):
        frame = pd.read_csv(cfg.initial_data.path, float_precision="round_trip")
        if len(frame) == grid.n_fine:
            return state_from_frame(grid, frame)
    u0, v0 = initial_profiles(cfg, grid, model)
    return init_from_function(grid, u0, v0)


def equilibrium_reference(cfg: ExperimentConfig, grid: GridSpec, model: Model, n_ref: int) -> Tuple[GridSpec, np.ndarray]:
    """w at the horizon on an n_ref-cell grid, started from z0 = u0 + v0."""
    ref_grid = GridSpec(grid.x_min, grid.x_max, n_ref, 1, grid.boundary)
    eq_map = EquilibriumMap(model.isotherm)
    u0, v0 = initial_profiles(cfg, grid, model)
    reference = solve_equilibrium(
        lambda x: eq_map.invert(np.clip(u0(x) + v0(x), 0.0, 2.0)),
        EquilibriumRun(eq_map, model.flux, ref_grid, cfg.scheme.courant),
        cfg.scheme.horizon,
    )
    return ref_grid, reference


def reference_size(grid: GridSpec, n_coarse: int) -> int:
    """At least REFERENCE_FACTOR x n_coarse cells, nesting the scheme's fine cells."""
    return grid.n_fine * math.ceil(REFERENCE_FACTOR * n_coarse / grid.n_fine)


# ------------------ Shared plumbing ------------------

def run_and_dump(state0: GridState, model: Model, scheme: SchemeConfig, directory: Path) -> Tuple[GridState, RunLog, Checks]:
    final, log = run(state0, model, scheme)
    write_csv(log.frame(), directory / "run.csv")
    for (step, phase), snapshot in sorted(log.snapshots.items()):
        write_csv(fields_frame(snapshot), directory / f"fields_{step:04d}_{phase}.csv")
    write_csv(fields_frame(final), directory / "fields_final.csv")
    return final, log, summarize_run(log, model, state0, scheme)


# ------------------ Experiments ------------------

@experiment("layer-demo")
def layer_demo(cfg: ExperimentConfig, ctx: RunContext) -> Checks:
    model = cfg.build_model()
    grid = cfg.build_grid()
    scheme = cfg.build_scheme(grid)
    scheme = replace(scheme, snapshot_steps=tuple(sorted(set(scheme.snapshot_steps) | {1})))
    state0 = build_initial(cfg, grid, model)

    _, log, checks = run_and_dump(state0, model, scheme, ctx.run_dir)
    jump = pair_distance(log.snapshots[(1, "pre_event")], log.snapshots[(1, "post_event")])
    ctx.metrics["layer_jump"] = jump
    checks["layer_jump"] = exceeds(jump, 0.0)
    return checks


@experiment("splitting-order")
def splitting_order(cfg: ExperimentConfig, ctx: RunContext) -> Checks:
    model = cfg.build_model()
    grid = cfg.build_grid()
    state0 = build_initial(cfg, grid, model)
    checks: Checks = {}
    finals = {}

    for ordering in Ordering:
        scheme = cfg.build_scheme(grid, ordering=ordering)
        final, _, member = run_and_dump(state0, model, scheme, member_dir(ctx.run_dir, ordering=ordering.value))
        finals[ordering] = final
        checks.update(prefixed(ordering.value, member))

    classical, modified = finals[Ordering.CLASSICAL], finals[Ordering.MODIFIED]
    distance = pair_distance(classical, modified)
    ctx.metrics["ordering_distance"] = distance
    scheme = cfg.build_scheme(grid)
    if grid.refine == 1 and scheme.nu.is_infinite:
        gap = float(max(np.max(np.abs(classical.u - modified.u)), np.max(np.abs(classical.v - modified.v))))
        checks["orderings_identical"] = CheckResult(gap, 0.0)
    else:
        checks["ordering_distance"] = exceeds(distance, 1e-3)
    return checks


@experiment("stiff-regime")
def stiff_regime(cfg: ExperimentConfig, ctx: RunContext) -> Checks:
    model = cfg.build_model()
    grid = cfg.build_grid()
    state0 = build_initial(cfg, grid, model)
    ref_grid, reference = equilibrium_reference(cfg, grid, model, reference_size(grid, grid.n_coarse))
    write_csv(pd.DataFrame({"x": ref_grid.centers(), "w": reference}), ctx.run_dir / "reference.csv")

    mus = [Strength.parse(mu) for mu in (cfg.sweeps.mu or [10.0, 100.0, 1000.0, "infinite"])]
    members = [(ordering, mu) for ordering in Ordering for mu in mus]

    def one(member):
        ordering, mu = member
        scheme = cfg.build_scheme(grid, ordering=ordering, mu=mu)
        directory = member_dir(ctx.run_dir, ordering=ordering.value, mu=mu.value)
        final, _, summary = run_and_dump(state0, model, scheme, directory)
        return error_vs_reference(final, reference, ref_grid), summary

    results = ctx.map(one, members, "stiff-regime")
    rows, checks = [], {}
    for (ordering, mu), (error, summary) in zip(members, results):
        rows.append({"ordering": ordering.value, "mu": mu.to_json(), "l1_error": error})
        checks.update(prefixed(f"{ordering.value}.mu={mu.to_json()}", summary))
    write_csv(pd.DataFrame(rows), ctx.run_dir / "stiff.csv")
    ctx.metrics["errors"] = rows
    return checks


@experiment("equilibrium-limit")
def equilibrium_limit(cfg: ExperimentConfig, ctx: RunContext) -> Checks:
    model = cfg.build_model()
    sizes = cfg.sweeps.n_coarse or [50, 100, 200]
    base = cfg.build_grid()
    ref_grid, reference = equilibrium_reference(cfg, base, model, REFERENCE_FACTOR * max(sizes))
    write_csv(pd.DataFrame({"x": ref_grid.centers(), "w": reference}), ctx.run_dir / "reference.csv")
    members = [(ordering, n) for ordering in Ordering for n in sizes]

    def one(member):
        ordering, n = member
        grid = cfg.build_grid(n_coarse=n)
        state0 = build_initial(cfg, grid, model)
        # relaxation time tied to the mesh: mu = 1/h^2
        scheme = cfg.build_scheme(grid, ordering=ordering, mu=Strength(1.0 / grid.h**2))
        final, _, summary = run_and_dump(state0, model, scheme, member_dir(ctx.run_dir, ordering=ordering.value, n_coarse=n))
        return grid.h, error_vs_reference(final, reference, ref_grid), summary

    results = ctx.map(one, members, "equilibrium-limit")
    rows, checks = [], {}
    for (ordering, n), (h, error, summary) in zip(members, results):
        rows.append({"ordering": ordering.value, "n_coarse": n, "h": h, "mu": 1.0 / h**2, "l1_error": error})
        checks.update(prefixed(f"{ordering.value}.n_coarse={n}", summary))
    frame = pd.DataFrame(rows)
    write_csv(frame, ctx.run_dir / "convergence.csv")

    ctx.metrics["rates"] = {}
    for ordering in Ordering:
        part = frame[frame["ordering"] == ordering.value]
        rate = fit_rate(zip(part["h"], part["l1_error"]))
        ctx.metrics["rates"][ordering.value] = rate
        checks[f"{ordering.value}.error_decreasing"] = strictly_decreasing(part["l1_error"].tolist())
        checks[f"{ordering.value}.rate"] = at_least(rate, 0.4)
    return checks


def random_state(grid: GridSpec, rng: np.random.Generator) -> GridState:
    return GridState(grid=grid, u=rng.uniform(0.0, 1.0, grid.n_fine), v=rng.uniform(0.0, 1.0, grid.n_fine))


@experiment("contraction")
def contraction(cfg: ExperimentConfig, ctx: RunContext) -> Checks:
    model = cfg.build_model()
    grid = cfg.build_grid()
    rng = np.random.default_rng(cfg.seed)
    pairs = [(random_state(grid, rng), random_state(grid, rng)) for _ in range(cfg.sweeps.pairs)]
    mus = [Strength.parse(mu) for mu in (cfg.sweeps.mu or [cfg.scheme.mu, "infinite"])]
    members = [(index, ordering, mu) for index in range(len(pairs)) for ordering in Ordering for mu in mus]

    def one(member):
        index, ordering, mu = member
        state_a, state_b = pairs[index]
        return run_pair(state_a, state_b, model, cfg.build_scheme(grid, ordering=ordering, mu=mu))

    results = ctx.map(one, members, "contraction")
    rows = []
    for (index, ordering, mu), distances in zip(members, results):
        for t, distance in distances:
            rows.append({"pair": index, "ordering": ordering.value, "mu": mu.to_json(), "t": t, "distance": distance})
    worst = max((distances_check(distances) for distances in results), key=lambda check: check.max_violation)
    write_csv(pd.DataFrame(rows), ctx.run_dir / "distances.csv")
    return {"distances_nonincreasing": worst}


@experiment("mollified-validation")
def mollified_validation(cfg: ExperimentConfig, ctx: RunContext) -> Checks:
    model = cfg.build_model()
    grid = cfg.build_grid()
    state0 = build_initial(cfg, grid, model)
    scheme = cfg.build_scheme(grid)
    epsilons = cfg.sweeps.epsilon or [scheme.dt / 4, scheme.dt / 8, scheme.dt / 16]
    lip = model.flux.lip_bound()

    def one(eps):
        moll = MollifiedConfig(epsilon=eps, ramp_substeps=cfg.sweeps.ramp_substeps)
        # the split run convects with the oracle's sub-step, so only the source timing differs
        step = mollified_substep(grid, model, scheme, moll)
        split, _ = run(state0, model, replace(scheme, cfl=CflPolicy(min(1.0, step * lip / grid.dx))))
        oracle = run_mollified(state0, model, scheme, moll)
        write_csv(fields_frame(oracle), member_dir(ctx.run_dir, epsilon=eps) / "fields_final.csv")
        return pair_distance(split, oracle)

    distances = ctx.map(one, epsilons, "mollified-validation")
    frame = pd.DataFrame({"epsilon": epsilons, "l1_distance": distances})
    write_csv(frame, ctx.run_dir / "mollified.csv")

    order = fit_rate(zip(epsilons, distances))
    ctx.metrics["order"] = order
    by_eps = frame.sort_values("epsilon", ascending=False)
    return {
        "distance_decreasing": strictly_decreasing(by_eps["l1_distance"].tolist()),
        "order": at_least(order, 0.8),
    }


@experiment("relax-mass")
def relax_mass(cfg: ExperimentConfig, ctx: RunContext) -> Checks:
    model = cfg.build_model()
    grid = cfg.build_grid()
    state0 = build_initial(cfg, grid, model)
    mus = [Strength.parse(mu).value for mu in (cfg.sweeps.mu or [10.0, 100.0, 1000.0, 10000.0])]

    results = relax_mass_sweep(model, state0, cfg.build_scheme(grid), mus, progress=ctx.progress)
    frame = pd.DataFrame(results, columns=["mu", "relax_mass", "relax_quad", "entropy_budget"])
    write_csv(frame, ctx.run_dir / "relax_mass.csv")

    masses = frame["relax_mass"].to_numpy()
    if masses.max() == 0.0:
        ratio = 1.0
    else:
        ratio = float(masses.max() / masses.min()) if masses.min() > 0 else math.inf
    ctx.metrics["mass_ratio"] = ratio
    excess = frame["relax_quad"] / model.isotherm.lip_bound() - frame["entropy_budget"]
    return {
        "mass_ratio": CheckResult(ratio - 4.0, 0.0),
        "entropy_budget": CheckResult(float(excess.max()), 1e-10),
    }


@experiment("entropy-suite")
def entropy_suite(cfg: ExperimentConfig, ctx: RunContext) -> Checks:
    grid = cfg.build_grid()
    fluxes = [FluxSpec("linear", 1.0), FluxSpec("quadratic")]
    isotherms = [IsothermSpec("linear"), IsothermSpec("langmuir", 1.0)]
    mus = [Strength.parse(mu) for mu in (cfg.sweeps.mu or [1.0, 10.0, "infinite"])]
    members = [
        (flux, iso, ordering, mu) for flux in fluxes for iso in isotherms for ordering in Ordering for mu in mus
    ]

    def one(member):
        flux, iso, ordering, mu = member
        model = Model(flux, iso)
        state0 = build_initial(cfg, grid, model)
        scheme = cfg.build_scheme(grid, ordering=ordering, mu=mu, dt=grid.h / flux.lip_bound())
        labels = dict(flux=flux.kind.value, isotherm=iso.kind.value, ordering=ordering.value, mu=mu.value)
        _, _, summary = run_and_dump(state0, model, scheme, member_dir(ctx.run_dir, **labels))
        return summary

    checks: Checks = {}
    for (flux, iso, ordering, mu), summary in zip(members, ctx.map(one, members, "entropy-suite")):
        label = f"{flux.kind.value}.{iso.kind.value}.{ordering.value}.mu={mu.to_json()}"
        checks.update(prefixed(label, summary))
    return checks


@experiment("relaxation-rate")
def relaxation_rate(cfg: ExperimentConfig, ctx: RunContext) -> Checks:
    model = cfg.build_model()
    grid = cfg.build_grid()
    state0 = build_initial(cfg, grid, model)
    ref_grid, reference = equilibrium_reference(cfg, grid, model, reference_size(grid, grid.n_coarse))
    mus = [Strength.parse(mu).value for mu in (cfg.sweeps.mu or [10.0, 100.0, 1000.0, 10000.0])]

    def one(mu):
        scheme = cfg.build_scheme(grid, mu=Strength(mu))
        final, _, _ = run_and_dump(state0, model, scheme, member_dir(ctx.run_dir, mu=mu))
        return error_vs_reference(final, reference, ref_grid)

    errors = ctx.map(one, mus, "relaxation-rate")
    write_csv(pd.DataFrame({"mu": mus, "l1_error": errors}), ctx.run_dir / "rate.csv")
    # error ~ (1/mu)^rate
    rate = fit_rate(zip([1.0 / mu for mu in mus], errors))
    ctx.metrics["rate"] = rate
    return {"error_decreasing": strictly_decreasing(errors), "rate": at_least(rate, 0.3)}


# ------------------ Entry point ------------------

def run_experiment(cfg: ExperimentConfig, out: Optional[str] = None, parallel: int = 1, progress: bool = False) -> int:
    """Run one registered experiment; 0 if every check passes, 2 if one fails, 1 on error."""
    run_dir = resolve_out_dir(out, cfg.outputs.directory) / cfg.name
    ctx = RunContext(run_dir=run_dir, parallel=max(1, parallel), progress=progress, metrics={})
    entry = find_experiment(cfg.name)
    try:
        write_json({"experiment": entry, "config": cfg.resolved()}, run_dir / "manifest.json")
        checks = REGISTRY[cfg.name](cfg, ctx)
        write_json({name: result.to_dict() for name, result in checks.items()}, run_dir / "diagnostics.json")
        write_json(ctx.metrics, run_dir / "metrics.json")
    except (RelaxLabError, OSError) as exc:
        logger.error("experiment %s failed (output %s): %s", cfg.name, run_dir, exc)
        return 1

    failed = sorted(name for name, result in checks.items() if not result.passed)
    if failed:
        logger.warning("%s: %d of %d checks failed: %s", cfg.name, len(failed), len(checks), ", ".join(failed))
        return 2
    logger.info("%s: all %d checks passed, results in %s", cfg.name, len(checks), run_dir)
    return 0
