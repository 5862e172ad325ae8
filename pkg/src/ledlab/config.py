"""Experiment configuration: one TOML document, one block per command.

The pydantic models here are the shared schema of the CLI and the optional
HTTP service.  ``model`` is either an inline block or a reference of the form
``"gallery:<name>"`` / a path to another TOML file holding a ``[model]`` table.
"""

from __future__ import annotations

import sys
from importlib import resources
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .disc import RadialGrid
from .errors import ConfigError
from .model import AFModel, CoefficientField

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

COMMANDS = ("model-check", "spectrum", "resolvent-scan", "evolve", "decay-report", "trichotomy", "perron",
            "carleman-check")


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class FieldConfig(_Block):
    kind: Literal["metric_tt", "metric_tr", "metric_rr", "magnetic_t", "magnetic_r", "potential"]
    profile: Literal["bump", "tail"] = "bump"
    amplitude: float = 0.0
    center: float = Field(0.0, ge=0)
    width: float = Field(1.0, gt=0)
    power: float = Field(3.0, gt=0)
    rate: float = Field(0.0, ge=0)
    modulation: Literal["none", "sinusoidal"] = "none"
    imaginary_amplitude: float = Field(0.0, ge=0)


class ModelConfig(_Block):
    name: str = ""
    r0: float = Field(1.0, gt=0)
    m0: float = Field(1.0, ge=0)
    small_c: float = Field(0.1, gt=0)
    fields: list[FieldConfig] = []

    def build(self):
        fields = tuple(CoefficientField(**f.model_dump()) for f in self.fields)
        return AFModel(fields=fields, r0=self.r0, m0=self.m0, name=self.name, small_c=self.small_c)


class GridConfig(_Block):
    r_max: float = Field(gt=0)
    n: int | None = Field(None, ge=16)
    h: float | None = Field(None, gt=0)

    @model_validator(mode="after")
    def _one_of(self):
        if (self.n is None) == (self.h is None):
            raise ValueError("give exactly one of n or h")
        return self

    def build(self):
        if self.n is not None:
            return RadialGrid.covering(self.r_max, self.n)
        return RadialGrid.covering(self.r_max, max(int(round(self.r_max / self.h)) - 1, 16))


class SpectrumBlock(_Block):
    alpha_floor: float | None = Field(None, gt=0)
    trichotomy: bool = True
    pairing_tol: float = Field(1e-8, gt=0)
    isotropy_tol: float = Field(1e-6, gt=0)


class ScanBlock(_Block):
    re_min: float = 0.0
    re_max: float = 4.0
    n_re: int = Field(9, ge=1)
    im: list[float] = [-0.5, -0.1]
    iters: int = Field(20, ge=1)
    residual_tol: float = Field(1e-8, gt=0)

    @model_validator(mode="after")
    def _ordered(self):
        if self.re_min > self.re_max:
            raise ValueError("re_min must not exceed re_max")
        if any(x >= 0 for x in self.im):
            raise ValueError("im values must be negative")
        return self


class DataBlock(_Block):
    kind: Literal["gaussian", "eigenmode", "zero_part"] = "gaussian"
    center: float = Field(3.0, ge=0)
    width: float = Field(1.0, gt=0)
    carrier: float = 0.0
    outgoing: bool = False


class EvolveBlock(_Block):
    T: float = Field(10.0, gt=0)
    dt: float | None = Field(None, gt=0)
    sponge: bool = False
    store_every: int | None = Field(None, ge=1)
    data: DataBlock = DataBlock()
    drift_tol: float = Field(1e-6, gt=0)


class DecayBlock(_Block):
    horizons: list[float] = [10.0, 20.0, 40.0]
    alpha_hint: float = Field(0.0, ge=0)
    classify: bool = True

    @field_validator("horizons")
    @classmethod
    def _sorted(cls, v):
        if not v or any(b <= a for a, b in zip(v, v[1:])) or v[0] <= 0:
            raise ValueError("horizons must be positive and strictly increasing")
        return v


class TrichotomyBlock(_Block):
    T_star: float = Field(1.0, gt=0)
    N: int = Field(12, ge=10)
    dt: float | None = Field(None, gt=0)
    projector_method: Literal["eigen", "contour"] = "eigen"
    tol: float = Field(1e-10, gt=0)
    check_tol: float = Field(1e-6, gt=0)
    export_problem: bool = False


class ToyBlock(_Block):
    """Constant diagonal flow ``f = g (I + eps E)`` with a fixed rotation-like ``E``."""

    diagonal: list[float]
    q_minus: list[float]
    q_plus: list[float]
    eps: float = Field(0.0, ge=0)
    N: int = Field(200, ge=10)

    @model_validator(mode="after")
    def _shapes(self):
        d = len(self.diagonal)
        if len(self.q_minus) != d or len(self.q_plus) != d:
            raise ValueError("diagonal, q_minus and q_plus must have the same length")
        if any(x <= 0 for x in self.diagonal):
            raise ValueError("diagonal entries must be positive")
        return self


class PerronBlock(_Block):
    problem: str | None = None          # directory of Matrix Market files
    toy: ToyBlock | None = None
    C: float | None = Field(None, gt=0)
    gamma: float | None = None
    gamma0: float | None = None
    tol: float = Field(1e-10, gt=0)
    max_iter: int = Field(500, ge=1)
    check_tol: float = Field(1e-6, gt=0)

    @model_validator(mode="after")
    def _source(self):
        if (self.problem is None) == (self.toy is None):
            raise ValueError("give exactly one of problem or toy")
        return self


class BandBlock(_Block):
    tau0: float = Field(gt=0)
    tau1: float = Field(gt=0)
    lam: float = Field(64.0, ge=4)
    R: float = Field(1024.0, gt=0)
    delta: float = Field(0.1, gt=0)

    @model_validator(mode="after")
    def _ordered(self):
        if self.tau0 >= self.tau1:
            raise ValueError("tau0 must be below tau1")
        return self


class CarlemanBlock(_Block):
    family: Literal["exterior_convex", "exterior_cut", "interior"] = "exterior_convex"
    estimate: Literal["exterior", "cut", "interior"] = "exterior"
    lambdas: list[float] = [4.0, 8.0, 16.0, 32.0]
    sigma: float = Field(4.0, ge=4)
    R: float | None = Field(None, gt=0)
    n_tests: int = Field(20, ge=1)
    r_range: tuple[float, float] | None = None
    T: float = Field(8.0, gt=0)
    spread_max: float = Field(2.0, gt=1)
    band: BandBlock | None = None

    @field_validator("lambdas")
    @classmethod
    def _lams(cls, v):
        if not v or min(v) < 4:
            raise ValueError("lambdas must be nonempty and at least 4")
        return v


class ExperimentConfig(_Block):
    model: ModelConfig
    grid: GridConfig | None = None
    ell: int = Field(0, ge=0)
    seed: int = Field(0, ge=0, lt=2**64)
    out: str | None = None
    spectrum: SpectrumBlock = SpectrumBlock()
    scan: ScanBlock = ScanBlock()
    evolve: EvolveBlock = EvolveBlock()
    decay: DecayBlock = DecayBlock()
    trichotomy: TrichotomyBlock = TrichotomyBlock()
    perron: PerronBlock | None = None
    carleman: CarlemanBlock = CarlemanBlock()
    base_dir: str = "."

    def require_grid(self):
        if self.grid is None:
            raise ConfigError("missing [grid] block", "grid")
        return self.grid.build()


# ---------------------------------------------------------------------------
# loading

def gallery_names():
    root = resources.files("ledlab") / "gallery"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def gallery_path(name):
    p = resources.files("ledlab") / "gallery" / f"{name}.toml"
    if not p.is_file():
        raise ConfigError(f"unknown gallery entry {name!r} (known: {', '.join(gallery_names())})", "model")
    return p


def _read_toml(path):
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"file not found: {path}", "config") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML syntax error in {path}: {exc}", "config") from None


def _resolve_model(raw, base_dir):
    ref = raw.get("model")
    if not isinstance(ref, str):
        return raw
    if ref.startswith("gallery:"):
        doc = _read_toml(gallery_path(ref.split(":", 1)[1]))
    else:
        path = Path(ref) if Path(ref).is_absolute() else Path(base_dir) / ref
        doc = _read_toml(path)
    if "model" not in doc or not isinstance(doc["model"], dict):
        raise ConfigError(f"referenced file {ref!r} has no [model] table", "model")
    return {**raw, "model": doc["model"]}


def _validation_error(exc):
    err = exc.errors()[0]
    path = ".".join(str(p) for p in err["loc"]) or "config"
    return ConfigError(err["msg"], path)


def parse_config(raw, base_dir="."):
    """Validate a config mapping, resolving a model reference first."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a table", "config")
    raw = _resolve_model(dict(raw), base_dir)
    raw.setdefault("base_dir", str(base_dir))
    try:
        cfg = ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise _validation_error(exc) from None
    try:
        cfg.model.build()
    except ConfigError as exc:
        raise ConfigError(exc.message, f"model.{exc.path}" if exc.path else "model") from None
    if cfg.perron is not None and cfg.perron.problem is not None:
        p = Path(cfg.perron.problem)
        p = p if p.is_absolute() else Path(base_dir) / p
        if not p.is_dir():
            raise ConfigError(f"problem directory not found: {p}", "perron.problem")
    return cfg


def load_config(path):
    path = Path(path)
    return parse_config(_read_toml(path), base_dir=path.parent)


def load_gallery(name):
    """The gallery entry as a parsed config."""
    p = gallery_path(name)
    with p.open("rb") as fh:
        return parse_config(tomllib.load(fh), base_dir=str(Path(str(p)).parent))


def gallery_model(name):
    return load_gallery(name).model.build()
