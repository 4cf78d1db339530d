"""Run configuration: a strict INI file with one section per concern.

Example::

    [run]
    experiment = simulate
    seed = 0

    [params]
    N = 5.0
    D1 = 50.0
    ...

    [wave.ranges]
    D1 = 20.0, 50.0

Every section and key is optional and falls back to the defaults below, but
an unknown section or key is an error. Values can be overridden from the
environment with ``BLIGHTWAVE_<SECTION>__<KEY>`` (dots in section names
become underscores), e.g. ``BLIGHTWAVE_GRID__N_CELLS=2000``.

:func:`dumps_config` writes a canonical form, so parsing and re-serialising
is idempotent, and :func:`config_hash` is the SHA-256 of that form.
"""
from __future__ import annotations

import configparser
import hashlib
import math
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping

from .errors import BlightError, ConfigError
from .model import ModelParams, figure1_params
from .sensitivity import SAMPLERS, SOBOL_RANGES, SobolConfig
from .solver import METHODS
from .waves import MAX_HALFWIDTH, WAVE_RANGES, WaveConfig

ENV_PREFIX = "BLIGHTWAVE_"
EXPERIMENTS = ("simulate", "wave", "sobol", "check")


@dataclass(frozen=True)
class GridSection:
    length: float = 1000.0
    n_cells: int = 10000


@dataclass(frozen=True)
class IntegratorSection:
    method: str = "bdf"
    dt: float = 0.1
    t_end: float = 5.5
    record_every: float | None = None
    rtol: float = 1e-6
    atol: float = 1e-6


@dataclass(frozen=True)
class InitialSection:
    b_seed: float = 1e6


@dataclass(frozen=True)
class SimulateSection:
    snapshots: tuple[float, ...] = (4.0, 4.5, 5.0, 5.5)


@dataclass(frozen=True)
class WaveSection:
    n_samples: int = 20
    t_end: float = 30.0
    track_start: float = 10.0
    track_end: float = 30.0
    n_track: int = 41
    t_ref: float = 20.0
    t_cmp_low: float = 20.1
    t_cmp_high: float = 25.0
    max_halfwidth: int = MAX_HALFWIDTH


@dataclass(frozen=True)
class SobolSection:
    n_base: int = 300
    sampler: str = "low_discrepancy"
    t_q: float = 7.0
    n_bootstrap: int = 1000


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one command invocation."""

    experiment: str = "simulate"
    seed: int = 0
    threads: int = 1
    params: ModelParams = field(default_factory=figure1_params)
    grid: GridSection = field(default_factory=GridSection)
    integrator: IntegratorSection = field(default_factory=IntegratorSection)
    initial: InitialSection = field(default_factory=InitialSection)
    simulate: SimulateSection = field(default_factory=SimulateSection)
    wave: WaveSection = field(default_factory=WaveSection)
    wave_ranges: Mapping[str, tuple[float, float]] = field(default_factory=lambda: dict(WAVE_RANGES))
    sobol: SobolSection = field(default_factory=SobolSection)
    sobol_factors: Mapping[str, tuple[float, float]] = field(
        default_factory=lambda: dict(SOBOL_RANGES))

    def wave_config(self) -> WaveConfig:
        w = self.wave
        return WaveConfig(length=self.grid.length, n_cells=self.grid.n_cells,
                          dt=self.integrator.dt, t_end=w.t_end, N=self.params.N,
                          b_seed=self.initial.b_seed, track_window=(w.track_start, w.track_end),
                          n_track=w.n_track, t_ref=w.t_ref,
                          t_cmp_window=(w.t_cmp_low, w.t_cmp_high),
                          max_halfwidth=w.max_halfwidth, rtol=self.integrator.rtol,
                          atol=self.integrator.atol,
                          fixed={k: v for k, v in self.params.as_dict().items()
                                 if k not in self.wave_ranges})

    def sobol_config(self) -> SobolConfig:
        fixed = {k: v for k, v in self.params.as_dict().items() if k not in self.sobol_factors}
        return SobolConfig(length=self.grid.length, n_cells=self.grid.n_cells,
                           t_q=self.sobol.t_q, b_seed=self.initial.b_seed,
                           dt=self.integrator.dt, rtol=self.integrator.rtol,
                           atol=self.integrator.atol, fixed=fixed)


# section name -> dataclass holding its keys
_SECTIONS = {
    "grid": GridSection,
    "integrator": IntegratorSection,
    "initial": InitialSection,
    "simulate": SimulateSection,
    "wave": WaveSection,
    "sobol": SobolSection,
}
_RUN_KEYS = ("experiment", "seed", "threads")
_RANGE_SECTIONS = {"wave.ranges": "wave_ranges", "sobol.factors": "sobol_factors"}
SECTION_ORDER = ("run", "params", *_SECTIONS, *_RANGE_SECTIONS)


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_fmt(float(v)) for v in value)
    return str(value)


def _parse_float(text: str, where: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"{where}: expected a number, got {text!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"{where}: value must be finite, got {text!r}")
    return value


def _parse_int(text: str, where: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{where}: expected an integer, got {text!r}") from None


def _parse_floats(text: str, where: str) -> tuple[float, ...]:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    return tuple(_parse_float(p, where) for p in parts)


def _coerce(cls, key: str, text: str, where: str):
    default = {f.name: f for f in fields(cls)}[key].default
    if key == "record_every":
        return None if text.strip().lower() == "none" else _parse_float(text, where)
    if isinstance(default, bool):  # pragma: no cover - no boolean keys yet
        return text.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return _parse_int(text, where)
    if isinstance(default, float):
        return _parse_float(text, where)
    if isinstance(default, tuple):
        return _parse_floats(text, where)
    return text.strip()


def _new_parser() -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None, default_section="__defaults__",
                                       inline_comment_prefixes=(";", "#"))
    parser.optionxform = str  # keep parameter names case-sensitive (N, D1, ...)
    return parser


def _apply_env(parser: configparser.ConfigParser, environ: Mapping[str, str]) -> None:
    by_env = {s.upper().replace(".", "_"): s for s in SECTION_ORDER}
    for name in sorted(environ):
        if not name.startswith(ENV_PREFIX):
            continue
        rest = name[len(ENV_PREFIX):]
        if "__" not in rest:
            raise ConfigError(f"environment override {name} must look like "
                              f"{ENV_PREFIX}<SECTION>__<KEY>")
        section_env, key_env = rest.split("__", 1)
        section = by_env.get(section_env)
        if section is None:
            raise ConfigError(f"environment override {name}: unknown section {section_env!r}")
        key = _match_key(section, key_env, name)
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, environ[name])


def _known_keys(section: str) -> tuple[str, ...]:
    if section == "run":
        return _RUN_KEYS
    if section == "params":
        return ModelParams.names()
    if section in _SECTIONS:
        return tuple(f.name for f in fields(_SECTIONS[section]))
    return ModelParams.names()  # range sections are keyed by parameter name


def _match_key(section: str, key_env: str, where: str) -> str:
    for key in _known_keys(section):
        if key.upper() == key_env.upper():
            return key
    raise ConfigError(f"{where}: unknown key {key_env!r} for section [{section}]")


def parse_config(text: str = "", environ: Mapping[str, str] | None = None) -> RunConfig:
    """Build a :class:`RunConfig` from INI text plus environment overrides."""
    parser = _new_parser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    _apply_env(parser, os.environ if environ is None else environ)

    unknown = [s for s in parser.sections() if s not in SECTION_ORDER]
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    for section in parser.sections():
        known = _known_keys(section)
        for key in parser[section]:
            if key not in known:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")

    values: dict = {}
    if parser.has_section("run"):
        run = parser["run"]
        if "experiment" in run:
            values["experiment"] = run["experiment"].strip()
        if "seed" in run:
            values["seed"] = _parse_int(run["seed"], "[run] seed")
        if "threads" in run:
            values["threads"] = _parse_int(run["threads"], "[run] threads")

    defaults = RunConfig()
    if parser.has_section("params"):
        given = {k: _parse_float(v, f"[params] {k}") for k, v in parser["params"].items()}
        try:
            values["params"] = replace(defaults.params, **given)
        except BlightError as exc:
            raise ConfigError(f"[params]: {exc}") from None
    for section, cls in _SECTIONS.items():
        if parser.has_section(section):
            given = {k: _coerce(cls, k, v, f"[{section}] {k}") for k, v in parser[section].items()}
            values[section] = cls(**given)
    for section, attr in _RANGE_SECTIONS.items():
        if parser.has_section(section):
            ranges = {}
            for k, v in parser[section].items():
                pair = _parse_floats(v, f"[{section}] {k}")
                if len(pair) != 2:
                    raise ConfigError(f"[{section}] {k}: expected 'low, high', got {v!r}")
                ranges[k] = pair
            values[attr] = ranges
    cfg = RunConfig(**values)
    validate_config(cfg)
    return cfg


def load_config(path: str | os.PathLike | None = None,
                environ: Mapping[str, str] | None = None) -> RunConfig:
    """Read ``path`` (or only defaults and environment when ``None``)."""
    text = ""
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    return parse_config(text, environ)


def validate_config(cfg: RunConfig) -> None:
    """Cross-field checks that individual sections cannot make on their own."""
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError(f"[run] experiment must be one of {EXPERIMENTS}, got {cfg.experiment!r}")
    if cfg.seed < 0:
        raise ConfigError(f"[run] seed must be >= 0, got {cfg.seed}")
    if cfg.threads < 1:
        raise ConfigError(f"[run] threads must be >= 1, got {cfg.threads}")
    g, it = cfg.grid, cfg.integrator
    if not g.length > 0 or g.n_cells < 3:
        raise ConfigError("[grid] needs length > 0 and n_cells >= 3")
    if it.method not in METHODS:
        raise ConfigError(f"[integrator] method must be one of {METHODS}, got {it.method!r}")
    if not it.dt > 0 or not it.t_end > 0 or not it.rtol > 0 or not it.atol > 0:
        raise ConfigError("[integrator] dt, t_end, rtol and atol must be > 0")
    if it.record_every is not None and it.record_every < it.dt:
        raise ConfigError("[integrator] record_every must be >= dt")
    if not cfg.initial.b_seed >= 0:
        raise ConfigError("[initial] b_seed must be >= 0")
    if any(not 0 < t <= it.t_end for t in cfg.simulate.snapshots):
        raise ConfigError(f"[simulate] snapshots must lie in (0, t_end={it.t_end}]")
    w = cfg.wave
    if w.n_samples < 1 or w.n_track < 3 or w.max_halfwidth < 1:
        raise ConfigError("[wave] needs n_samples >= 1, n_track >= 3 and max_halfwidth >= 1")
    if not (0 < w.track_start < w.track_end <= w.t_end and w.t_ref <= w.t_cmp_low <= w.t_cmp_high <= w.t_end):
        raise ConfigError("[wave] time windows must satisfy 0 < track_start < track_end <= t_end "
                          "and t_ref <= t_cmp_low <= t_cmp_high <= t_end")
    s = cfg.sobol
    if s.n_base < 2 or s.sampler not in SAMPLERS or not s.t_q > 0 or s.n_bootstrap < 0:
        raise ConfigError(f"[sobol] needs n_base >= 2, sampler in {SAMPLERS}, t_q > 0 "
                          "and n_bootstrap >= 0")
    for section, attr in _RANGE_SECTIONS.items():
        for name, (lo, hi) in getattr(cfg, attr).items():
            if not lo <= hi:
                raise ConfigError(f"[{section}] {name}: low {lo} exceeds high {hi}")
    if not cfg.sobol_factors:
        raise ConfigError("[sobol.factors] must name at least one factor")
    if "N" in cfg.wave_ranges:
        raise ConfigError("[wave.ranges] N is not sampled; set [params] N instead")


def dumps_config(cfg: RunConfig) -> str:
    """Canonical INI text for ``cfg`` (every key written, fixed order)."""
    parser = _new_parser()
    parser["run"] = {k: _fmt(getattr(cfg, k)) for k in _RUN_KEYS}
    parser["params"] = {k: _fmt(v) for k, v in cfg.params.as_dict().items()}
    for section in _SECTIONS:
        obj = getattr(cfg, section)
        parser[section] = {f.name: _fmt(getattr(obj, f.name)) for f in fields(obj)}
    for section, attr in _RANGE_SECTIONS.items():
        parser[section] = {k: _fmt(tuple(v)) for k, v in getattr(cfg, attr).items()}
    lines = []
    for section in parser.sections():
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {v}" for k, v in parser[section].items())
        lines.append("")
    return "\n".join(lines)


def config_hash(cfg: RunConfig) -> str:
    """SHA-256 of the canonical serialisation."""
    return hashlib.sha256(dumps_config(cfg).encode("utf-8")).hexdigest()
