# Experiment configuration: a JSON document validated by pydantic.
# Unknown keys are rejected everywhere; the first validation error is reported
# as a ConfigError with the JSON path of the offending value.

from pathlib import Path
from typing import Annotated, List, Literal, Optional, Tuple, Union

import orjson
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeFloat,
    PositiveFloat,
    PositiveInt,
    ValidationError,
    ValidationInfo,
    field_validator,
    model_validator,
)

from relaxlab.errors import ConfigError
from relaxlab.grid import GridSpec
from relaxlab.model import FluxSpec, IsothermSpec, Model
from relaxlab.state import CflPolicy, SchemeConfig, Strength
from relaxlab.tools.catalogue import experiment_names

StrengthValue = Union[NonNegativeFloat, Literal["infinite"]]
UnitFloat = Annotated[float, Field(ge=0.0, le=1.0)]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class FluxConfig(_Strict):
    kind: Literal["linear", "quadratic"] = "linear"
    c: PositiveFloat = 1.0


class IsothermConfig(_Strict):
    kind: Literal["linear", "langmuir"] = "linear"
    beta: NonNegativeFloat = 1.0


class ModelConfig(_Strict):
    flux: FluxConfig = FluxConfig()
    isotherm: IsothermConfig = IsothermConfig()

    def build(self) -> Model:
        iso = self.isotherm
        return Model(
            flux=FluxSpec(self.flux.kind, self.flux.c),
            isotherm=IsothermSpec(iso.kind, iso.beta if iso.kind == "langmuir" else 0.0),
        )


class GridConfig(_Strict):
    domain: Tuple[float, float] = (0.0, 1.0)
    n_coarse: PositiveInt = 100
    refine: PositiveInt = 8
    boundary: Literal["periodic", "outflow"] = "periodic"

    @field_validator("domain")
    @classmethod
    def _ordered(cls, value):
        if not value[1] > value[0]:
            raise ValueError(f"domain must satisfy x_min < x_max, got {list(value)}")
        return value

    def build(self, n_coarse: Optional[int] = None, refine: Optional[int] = None) -> GridSpec:
        return GridSpec(
            x_min=self.domain[0],
            x_max=self.domain[1],
            n_coarse=n_coarse or self.n_coarse,
            refine=refine or self.refine,
            boundary=self.boundary,
        )


class SchemeSettings(_Strict):
    ordering: Literal["classical", "modified"] = "classical"
    mu: StrengthValue = 10.0
    nu: StrengthValue = "infinite"
    dt: Optional[PositiveFloat] = None  # null: coarse CFL dt = h / Lip(f)
    horizon: PositiveFloat = 1.0
    courant: Annotated[float, Field(gt=0.0, le=1.0)] = 0.9
    relax_solver: Literal["exact_quadrature", "backward_euler", "quadrature"] = "exact_quadrature"
    probes: List[UnitFloat] = [0.25, 0.5, 0.75]
    check_entropy: bool = True


class RiemannData(_Strict):
    kind: Literal["riemann"]
    u_left: UnitFloat = 1.0
    u_right: UnitFloat = 0.0
    x0: float = 0.5
    v_mode: Literal["equilibrium", "zero"] = "equilibrium"


class HumpData(_Strict):
    kind: Literal["hump"]
    center: float = 0.5
    width: PositiveFloat = 0.4
    height: UnitFloat = 0.8


class LayerDemoData(_Strict):
    kind: Literal["layer_demo"]


class CustomCsvData(_Strict):
    kind: Literal["custom_csv"]
    path: str

    @field_validator("path")
    @classmethod
    def _exists(cls, value: str, info: ValidationInfo):
        base = (info.context or {}).get("base_dir")
        path = Path(value)
        if base is not None and not path.is_absolute():
            path = Path(base) / path
        if not path.is_file():
            raise ValueError(f"initial data file {str(path)!r} does not exist")
        return str(path)


InitialData = Annotated[
    Union[RiemannData, HumpData, LayerDemoData, CustomCsvData],
    Field(discriminator="kind"),
]


class OutputsConfig(_Strict):
    directory: Optional[str] = None
    snapshots: List[NonNegativeFloat] = []  # times snapped to the event lattice


class SweepsConfig(_Strict):
    mu: Optional[List[StrengthValue]] = None
    n_coarse: Optional[List[PositiveInt]] = None
    epsilon: Optional[List[PositiveFloat]] = None
    ramp_substeps: PositiveInt = 8
    pairs: PositiveInt = 20


class ExperimentConfig(_Strict):
    name: str
    model: ModelConfig = ModelConfig()
    grid: GridConfig = GridConfig()
    scheme: SchemeSettings = SchemeSettings()
    initial_data: InitialData = HumpData(kind="hump")
    outputs: OutputsConfig = OutputsConfig()
    sweeps: SweepsConfig = SweepsConfig()
    seed: int = 0

    @field_validator("name")
    @classmethod
    def _registered(cls, value: str):
        known = experiment_names()
        if value not in known:
            raise ValueError(f"unknown experiment {value!r}; known: {', '.join(known)}")
        return value

    @model_validator(mode="after")
    def _mollified_needs_finite(self):
        if self.sweeps.epsilon and "infinite" in (self.scheme.mu, self.scheme.nu):
            raise ValueError("epsilon sweeps need finite scheme.mu and scheme.nu")
        return self

    def build_model(self) -> Model:
        return self.model.build()

    def build_grid(self, n_coarse: Optional[int] = None, refine: Optional[int] = None) -> GridSpec:
        return self.grid.build(n_coarse, refine)

    def effective_dt(self, grid: Optional[GridSpec] = None) -> float:
        grid = grid or self.build_grid()
        if self.scheme.dt is not None:
            return self.scheme.dt
        return grid.h / self.build_model().flux.lip_bound()

    def snapshot_steps(self, dt: float) -> Tuple[int, ...]:
        return tuple(sorted({int(round(t / dt)) for t in self.outputs.snapshots}))

    def build_scheme(self, grid: Optional[GridSpec] = None, **overrides) -> SchemeConfig:
        dt = self.effective_dt(grid)
        scheme = self.scheme
        settings = dict(
            ordering=scheme.ordering,
            mu=Strength.parse(scheme.mu),
            nu=Strength.parse(scheme.nu),
            dt=dt,
            horizon=scheme.horizon,
            cfl=CflPolicy(scheme.courant),
            relax_solver=scheme.relax_solver,
            probes=tuple(scheme.probes),
            check_entropy=scheme.check_entropy,
            snapshot_steps=self.snapshot_steps(dt),
        )
        settings.update(overrides)
        return SchemeConfig(**settings)

    def resolved(self) -> dict:
        """The config with every default filled in, as echoed into the manifest."""
        payload = self.model_dump(mode="json")
        payload["scheme"]["dt"] = self.effective_dt()
        return payload


def _json_path(loc) -> str:
    path = "$"
    for part in loc:
        path += f"[{part}]" if isinstance(part, int) else f".{part}"
    return path


def check_schedule(cfg: ExperimentConfig) -> None:
    dt = cfg.effective_dt()
    horizon = cfg.scheme.horizon
    if dt > horizon * (1 + 1e-12):
        raise ConfigError(f"dt={dt!r} exceeds horizon={horizon!r}", path="$.scheme.dt")
    ratio = horizon / dt
    if abs(ratio - round(ratio)) > 1e-9:
        raise ConfigError(f"horizon={horizon!r} is not a multiple of dt={dt!r}", path="$.scheme.horizon")


def parse_config(text, base_dir: Optional[Path] = None) -> ExperimentConfig:
    """Validate a JSON config document; raise ConfigError at the first problem."""
    try:
        data = orjson.loads(text)
    except orjson.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    try:
        cfg = ExperimentConfig.model_validate(data, context={"base_dir": base_dir})
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ConfigError(first["msg"], path=_json_path(first["loc"])) from exc
    check_schedule(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config(text, base_dir=path.parent)
