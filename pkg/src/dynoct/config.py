"""Run configuration: dataclasses backed by an INI-style text file.

Floats are written with ``repr`` so parse -> serialize -> parse is exact.
"""

from __future__ import annotations

import configparser
import hashlib
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from dynoct.forward import OpticsConfig
from dynoct.medium import MetabolicMap, PixelGrid, default_phantom
from dynoct.sep import default_interval_length

log = logging.getLogger(__name__)

MAX_RECOMMENDED_SAMPLES = 1000


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GridConfig:
    rows: int = 21
    cols: int = 21


@dataclass(frozen=True)
class TimeConfig:
    samples: int = 500
    dt: float = 1.0


@dataclass(frozen=True)
class OpticsBlock:
    n_bar: float = 1.4
    c: float = 1.0
    coherence_length: float = 1.0
    # empty source_lines -> Gaussian spectrum from center/bandwidth/lines
    source_lines: tuple[tuple[float, float], ...] = ()
    center: float = 1.0
    bandwidth: float = 0.1
    lines: int = 7
    kc1: float = 1.0
    km: float = 1.0


@dataclass(frozen=True)
class MediumBlock:
    corr_len: float = 2.0
    # 0.2 L drift over the default 500 x 1.0 acquisition
    v0: float = 4e-4
    dz: float = 0.02
    collagen_mean: float = 0.0
    metabolic_map: str = "phantom"
    background_noise: float = 0.05
    dominance_target: float = 100.0


@dataclass(frozen=True)
class SeparationBlock:
    # 0 -> ceil(0.25 * n_pixels)
    interval_length: int = 0
    search_lo: int = 4
    search_hi_margin: int = 4


@dataclass(frozen=True)
class RunConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    optics: OpticsBlock = field(default_factory=OpticsBlock)
    medium: MediumBlock = field(default_factory=MediumBlock)
    separation: SeparationBlock = field(default_factory=SeparationBlock)
    seed: int = 1
    output: str = "run"
    base_dir: str = field(default=".", compare=False)

    def __post_init__(self):
        validate(self)

    # derived objects -------------------------------------------------
    @property
    def pixel_grid(self) -> PixelGrid:
        return PixelGrid(self.grid.rows, self.grid.cols)

    @property
    def times(self) -> np.ndarray:
        return self.time.dt * np.arange(self.time.samples)

    @property
    def t_total(self) -> float:
        return self.time.dt * self.time.samples

    def interval_length(self) -> int:
        n = self.separation.interval_length
        return n if n > 0 else default_interval_length(self.pixel_grid.n_pixels)

    def make_optics(self) -> OpticsConfig:
        o = self.optics
        common = dict(n_bar=o.n_bar, c=o.c, L=o.coherence_length, kc1=o.kc1, km=o.km)
        if o.source_lines:
            om, w = zip(*o.source_lines)
            return OpticsConfig(omegas=np.array(om), weights=np.array(w), **common)
        return OpticsConfig.gaussian_source(o.center, o.bandwidth, o.lines, **common)

    def make_metabolic_map(self) -> MetabolicMap:
        m = self.medium
        if m.metabolic_map == "phantom":
            return default_phantom(self.pixel_grid, m.background_noise)
        if m.metabolic_map == "zero":
            return MetabolicMap(self.pixel_grid, np.zeros(self.pixel_grid.n_pixels),
                                m.background_noise)
        from dynoct.fileio import read_map_csv

        path = Path(m.metabolic_map)
        if not path.is_absolute():
            path = Path(self.base_dir) / path
        img = read_map_csv(path)
        if img.shape != self.pixel_grid.shape:
            raise ConfigError(f"metabolic map {path} is {img.shape}, grid is {self.pixel_grid.shape}")
        return MetabolicMap.from_image(img, m.background_noise)


def _positive(name, val):
    if not val > 0:
        raise ConfigError(f"{name} must be positive, got {val}")


def _nonneg(name, val):
    if not val >= 0:
        raise ConfigError(f"{name} must be >= 0, got {val}")


def validate(cfg: RunConfig) -> None:
    _positive("grid.rows", cfg.grid.rows)
    _positive("grid.cols", cfg.grid.cols)
    _positive("time.samples", cfg.time.samples)
    _positive("time.dt", cfg.time.dt)
    o = cfg.optics
    for name in ("n_bar", "c", "coherence_length", "center", "lines"):
        _positive(f"optics.{name}", getattr(o, name))
    _nonneg("optics.bandwidth", o.bandwidth)
    _nonneg("optics.kc1", o.kc1)
    _nonneg("optics.km", o.km)
    for om, w in o.source_lines:
        _nonneg("optics.source_lines weight", w)
    m = cfg.medium
    _nonneg("medium.corr_len", m.corr_len)
    _positive("medium.dz", m.dz)
    _nonneg("medium.background_noise", m.background_noise)
    _positive("medium.dominance_target", m.dominance_target)
    s = cfg.separation
    _nonneg("separation.interval_length", s.interval_length)
    _positive("separation.search_lo", s.search_lo)
    _positive("separation.search_hi_margin", s.search_hi_margin)
    _nonneg("seed", cfg.seed)
    if cfg.time.samples > MAX_RECOMMENDED_SAMPLES:
        log.warning("%d time samples: separation degrades above %d samples",
                    cfg.time.samples, MAX_RECOMMENDED_SAMPLES)


_SECTIONS = {"grid": GridConfig, "time": TimeConfig, "optics": OpticsBlock,
             "medium": MediumBlock, "separation": SeparationBlock}


def _fmt(val) -> str:
    if isinstance(val, bool):
        return str(val).lower()
    if isinstance(val, float):
        return repr(val)
    if isinstance(val, tuple):
        return ", ".join(f"{_fmt(float(a))}:{_fmt(float(b))}" for a, b in val)
    return str(val)


def _parse(kind, raw: str, key: str):
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is str:
            return raw
        # source line table "omega:weight, omega:weight"
        pairs = [p for p in (s.strip() for s in raw.split(",")) if p]
        return tuple((float(a), float(b)) for a, b in (p.split(":") for p in pairs))
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


_KINDS = {"int": int, "float": float, "str": str}


def _field_kind(f) -> type:
    name = f.type if isinstance(f.type, str) else f.type.__name__
    return _KINDS.get(name, tuple)


def dumps(cfg: RunConfig, *, include_run: bool = True) -> str:
    lines = []
    for section, cls in _SECTIONS.items():
        block = getattr(cfg, section)
        lines.append(f"[{section}]")
        lines += [f"{f.name} = {_fmt(getattr(block, f.name))}" for f in fields(cls)]
        lines.append("")
    if include_run:
        lines += ["[run]", f"seed = {cfg.seed}", f"output = {cfg.output}", ""]
    return "\n".join(lines)


def loads(text: str, base_dir: str = ".") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    unknown = set(parser.sections()) - set(_SECTIONS) - {"run"}
    if unknown:
        raise ConfigError(f"unknown section(s): {sorted(unknown)}")
    blocks = {}
    for section, cls in _SECTIONS.items():
        kw = {}
        if parser.has_section(section):
            known = {f.name: f for f in fields(cls)}
            for key, raw in parser.items(section):
                if key not in known:
                    raise ConfigError(f"unknown key {section}.{key}")
                kw[key] = _parse(_field_kind(known[key]), raw, f"{section}.{key}")
        blocks[section] = cls(**kw)
    run = parser["run"] if parser.has_section("run") else {}
    seed = _parse(int, run.get("seed", "1"), "run.seed")
    output = run.get("output", "run")
    return RunConfig(**blocks, seed=seed, output=output, base_dir=base_dir)


def load(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads(text, base_dir=str(path.parent))


def config_hash(cfg: RunConfig) -> str:
    """Hash of everything except the seed and output location."""
    return hashlib.sha256(dumps(cfg, include_run=False).encode()).hexdigest()


def with_overrides(cfg: RunConfig, seed: int | None = None, output: str | None = None) -> RunConfig:
    kw = {}
    if seed is not None:
        kw["seed"] = seed
    if output is not None:
        kw["output"] = output
    return replace(cfg, **kw) if kw else cfg


def as_dict(cfg: RunConfig) -> dict:
    d = asdict(cfg)
    d.pop("base_dir", None)
    return d
