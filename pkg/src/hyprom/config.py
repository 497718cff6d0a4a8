"""Run configuration: JSON files validated field by field, unknown keys rejected."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np

from .grid import Grid, build_uniform_grid
from .hdm import TimeSchedule
from .models import MODEL_KINDS, Model, ParameterDomain, make_model


class ConfigError(ValueError):
    pass


def _number(path: str, value, positive=False, integer=False, minimum=None):
    if isinstance(value, str):
        named = {"pi": math.pi, "-pi": -math.pi, "2pi": 2 * math.pi, "inf": math.inf}
        if value not in named:
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        value = named[value]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    if integer and (not float(value).is_integer()):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    value = int(value) if integer else float(value)
    if positive and not value > 0:
        raise ConfigError(f"{path}: must be positive, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}, got {value!r}")
    return value


def _section(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object")
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {unknown}")
    try:
        obj = cls(**data)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    obj.validate(path)
    return obj


@dataclass
class ModelSection:
    kind: str
    options: dict = field(default_factory=dict)

    def validate(self, path):
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"{path}.kind: expected one of {MODEL_KINDS}, got {self.kind!r}")
        allowed = {"burgers1d": {"state_box"},
                   "euler1d_smooth": {"gamma", "gamma_index", "state_box"},
                   "euler1d_sod": {"gamma", "gamma_index", "state_box"}}[self.kind]
        unknown = sorted(set(self.options) - allowed)
        if unknown:
            raise ConfigError(f"{path}.options: unknown keys {unknown}")


@dataclass
class GridSection:
    x_min: float
    x_max: float
    n_cells: int
    boundary: str = "periodic"

    def validate(self, path):
        self.x_min = _number(f"{path}.x_min", self.x_min)
        self.x_max = _number(f"{path}.x_max", self.x_max)
        self.n_cells = _number(f"{path}.n_cells", self.n_cells, integer=True, minimum=3)
        if not self.x_max > self.x_min:
            raise ConfigError(f"{path}: x_max must exceed x_min")
        if self.boundary not in ("periodic", "transmissive"):
            raise ConfigError(f"{path}.boundary: expected periodic or transmissive")


@dataclass
class ScheduleSection:
    dt: float
    n_steps: int

    def validate(self, path):
        self.dt = _number(f"{path}.dt", self.dt, positive=True)
        self.n_steps = _number(f"{path}.n_steps", self.n_steps, integer=True, minimum=1)


@dataclass
class TrainingSection:
    sampling: str = "uniform_grid"
    counts: list | None = None
    M: int | None = None
    seed: int | None = None

    def validate(self, path):
        if self.sampling == "uniform_grid":
            if self.counts is None:
                raise ConfigError(f"{path}.counts: required for uniform_grid sampling")
            self.counts = [_number(f"{path}.counts[{i}]", c, integer=True, minimum=1)
                           for i, c in enumerate(self.counts)]
        elif self.sampling == "monte_carlo":
            self.M = _number(f"{path}.M", self.M, integer=True, minimum=1)
            self.seed = _number(f"{path}.seed", self.seed, integer=True, minimum=0)
        else:
            raise ConfigError(f"{path}.sampling: expected uniform_grid or monte_carlo")


@dataclass
class OfflineSection:
    mode: str = "sequential"
    error_mode: str = "true"
    greedy_tol: float = 1e-4
    n_max: int = 50
    max_iterations: int | None = None
    eim_tol: float = 1e-6
    eim_max: int | None = None
    eim_seed_tol: float = 1e-2
    eim_seed_max: int = 3
    n_pod_init: int = 3
    n_pod_add: int = 1
    compression_tol: float = 1e-10
    stride: int = 1
    mu0_index: int = 0

    def validate(self, path):
        if self.mode not in ("sequential", "podei"):
            raise ConfigError(f"{path}.mode: expected sequential or podei")
        if self.error_mode not in ("true", "projection", "indicator"):
            raise ConfigError(f"{path}.error_mode: expected true, projection or indicator")
        self.greedy_tol = _number(f"{path}.greedy_tol", self.greedy_tol, positive=True)
        self.eim_tol = _number(f"{path}.eim_tol", self.eim_tol, minimum=0.0)
        self.eim_seed_tol = _number(f"{path}.eim_seed_tol", self.eim_seed_tol, minimum=0.0)
        self.compression_tol = _number(f"{path}.compression_tol", self.compression_tol, positive=True)
        for name in ("n_max", "eim_seed_max", "n_pod_init", "n_pod_add", "stride"):
            setattr(self, name, _number(f"{path}.{name}", getattr(self, name), integer=True, minimum=1))
        self.mu0_index = _number(f"{path}.mu0_index", self.mu0_index, integer=True, minimum=0)
        for name in ("max_iterations", "eim_max"):
            if getattr(self, name) is not None:
                setattr(self, name, _number(f"{path}.{name}", getattr(self, name), integer=True, minimum=1))


@dataclass
class IndicatorSection:
    n_eim_extra: int = 5
    n_test: int = 10
    test_seed: int = 2024
    mode: str = "full_second_level"

    def validate(self, path):
        self.n_eim_extra = _number(f"{path}.n_eim_extra", self.n_eim_extra, integer=True, minimum=0)
        self.n_test = _number(f"{path}.n_test", self.n_test, integer=True, minimum=1)
        self.test_seed = _number(f"{path}.test_seed", self.test_seed, integer=True, minimum=0)
        if self.mode not in ("full_second_level", "fixed"):
            raise ConfigError(f"{path}.mode: expected full_second_level or fixed")


@dataclass
class UqSection:
    M: int = 100
    seed: int = 12345

    def validate(self, path):
        self.M = _number(f"{path}.M", self.M, integer=True, minimum=1)
        self.seed = _number(f"{path}.seed", self.seed, integer=True, minimum=0)
        if self.seed >= 2 ** 64:
            raise ConfigError(f"{path}.seed: must fit in 64 bits")


_SECTIONS = {
    "model": ModelSection, "grid": GridSection, "schedule": ScheduleSection,
    "training": TrainingSection, "offline": OfflineSection, "indicator": IndicatorSection, "uq": UqSection,
}
_TOP = {"name", "muscl", "parameter_domain", "output_dir", *_SECTIONS}
_OFFLINE_KEYS = ("model", "grid", "schedule", "muscl", "parameter_domain", "training", "offline")


@dataclass
class RunConfig:
    name: str
    model: ModelSection
    grid: GridSection
    schedule: ScheduleSection
    parameter_domain: list
    training: TrainingSection
    offline: OfflineSection = field(default_factory=OfflineSection)
    indicator: IndicatorSection = field(default_factory=IndicatorSection)
    uq: UqSection = field(default_factory=UqSection)
    muscl: bool = False
    output_dir: str = "runs"

    @classmethod
    def from_dict(cls, data: dict) -> RunConfig:
        if not isinstance(data, dict):
            raise ConfigError("config: expected a JSON object")
        unknown = sorted(set(data) - _TOP)
        if unknown:
            raise ConfigError(f"config: unknown keys {unknown}")
        for key in ("name", "model", "grid", "schedule", "parameter_domain", "training"):
            if key not in data:
                raise ConfigError(f"config: missing required key {key!r}")
        kw = {k: _section(c, data[k], k) for k, c in _SECTIONS.items() if k in data}
        if not isinstance(data.get("muscl", False), bool):
            raise ConfigError("muscl: expected true or false")
        dom = data["parameter_domain"]
        if not isinstance(dom, list) or not dom:
            raise ConfigError("parameter_domain: expected a list of [lo, hi] pairs")
        pairs = []
        for i, iv in enumerate(dom):
            if not isinstance(iv, list) or len(iv) != 2:
                raise ConfigError(f"parameter_domain[{i}]: expected [lo, hi]")
            lo = _number(f"parameter_domain[{i}][0]", iv[0])
            hi = _number(f"parameter_domain[{i}][1]", iv[1])
            if hi < lo:
                raise ConfigError(f"parameter_domain[{i}]: hi < lo")
            pairs.append([lo, hi])
        cfg = cls(name=str(data["name"]), parameter_domain=pairs, muscl=data.get("muscl", False),
                  output_dir=str(data.get("output_dir", "runs")), **kw)
        cfg._cross_validate()
        return cfg

    def _cross_validate(self) -> None:
        dim = len(self.parameter_domain)
        need = 3 if self.model.kind == "burgers1d" else 2
        if dim != need:
            raise ConfigError(f"parameter_domain: {self.model.kind} expects {need} dimensions, got {dim}")
        if self.training.sampling == "uniform_grid" and len(self.training.counts) != dim:
            raise ConfigError(f"training.counts: expected {dim} entries")
        model = self.build_model()
        if model.boundary != self.grid.boundary:
            raise ConfigError(f"grid.boundary: {self.model.kind} needs {model.boundary!r}")

    @classmethod
    def load(cls, source: str | Path) -> RunConfig:
        """Load a JSON file, or a shipped preset by name."""
        p = Path(source)
        if p.suffix != ".json" and not p.exists():
            text = resources.files("hyprom.presets").joinpath(f"{source}.json")
            if not text.is_file():
                raise ConfigError(f"no config file or preset named {source!r}; presets: {preset_names()}")
            data = json.loads(text.read_text())
        else:
            try:
                data = json.loads(p.read_text())
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{p}: invalid JSON ({exc})") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: d[k] for k in ("name", "model", "grid", "schedule", "muscl", "parameter_domain",
                                  "training", "offline", "indicator", "uq", "output_dir")}

    def offline_hash(self) -> str:
        """sha256 of the settings the offline artifacts depend on."""
        d = self.to_dict()
        blob = json.dumps({k: d[k] for k in _OFFLINE_KEYS}, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def build_model(self) -> Model:
        opts = dict(self.model.options)
        if "state_box" in opts:
            opts["state_box"] = {k: tuple(v) for k, v in opts["state_box"].items()}
        return make_model(self.model.kind, **opts)

    def build_grid(self) -> Grid:
        g = self.grid
        return build_uniform_grid(g.x_min, g.x_max, g.n_cells, g.boundary)

    def build_schedule(self) -> TimeSchedule:
        return TimeSchedule(self.schedule.dt, self.schedule.n_steps)

    def build_domain(self) -> ParameterDomain:
        return ParameterDomain.from_intervals(self.parameter_domain)

    def default_mu(self) -> np.ndarray:
        dom = self.build_domain()
        return 0.5 * (np.asarray(dom.lows) + np.asarray(dom.highs))


def preset_names() -> list[str]:
    root = resources.files("hyprom.presets")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))
