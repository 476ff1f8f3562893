"""Scenario configuration: YAML sections mapped onto dataclasses.

All physical values are expressed in the natural units of the probe
transition (Gamma = c = lambda = 1).  Unknown keys are rejected so typos
fail loudly; every validation error names the offending `section.key`.
"""

from __future__ import annotations

import io
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import yaml

from .errors import ConfigError
from .geometry import POLARIZATION_PRESETS

BLOCKADE_CHOICES = ("full", "vdw", "off")
SCAN_CHOICES = ("none", "delta", "w0", "omega")
CHANNEL_CHOICES = ("fwd-fwd", "bwd-bwd", "fwd-bwd", "bwd-fwd")


@dataclass
class LatticeConfig:
    a_over_lambda: float = 0.75
    diameter_sites: int = 10
    polarization: object = "circular"


@dataclass
class BeamConfig:
    w0_over_lambda: float = 2.0
    power_scale: float = 1e-3          # epsilon = sqrt(P)


@dataclass
class DriveConfig:
    delta_over_gamma: float = 0.05
    omega_over_gamma: float = 0.0
    two_photon_detuning: float = 0.0
    rydberg_dephasing: float = 0.0


@dataclass
class BlockadeConfig:
    mode: str = "full"
    c6: float = 0.0


@dataclass
class TruncationConfig:
    max_excitations: int = 2
    sector2_bound: float = 1e-3


@dataclass
class ScanConfig:
    variable: str = "none"
    grid: list = field(default_factory=list)


@dataclass
class CorrelationConfig:
    channels: list = field(default_factory=lambda: ["fwd-fwd", "bwd-bwd"])
    tau_points: int = 60
    tau_span: float = 10.0             # in units of the EIT delay time
    omega_set: list = field(default_factory=lambda: [0.5, 1.0, 2.0])


@dataclass
class RunConfig:
    seed: int = 1234
    trajectories: int = 2000
    output_dir: str = "results"
    workers: int = 0


@dataclass
class ScenarioConfig:
    lattice: LatticeConfig = field(default_factory=LatticeConfig)
    beam: BeamConfig = field(default_factory=BeamConfig)
    drive: DriveConfig = field(default_factory=DriveConfig)
    blockade: BlockadeConfig = field(default_factory=BlockadeConfig)
    truncation: TruncationConfig = field(default_factory=TruncationConfig)
    scan: ScanConfig = field(default_factory=ScanConfig)
    correlation: CorrelationConfig = field(default_factory=CorrelationConfig)
    run: RunConfig = field(default_factory=RunConfig)

    @property
    def power(self) -> float:
        return self.beam.power_scale**2


_SECTIONS = {f.name: f.type for f in fields(ScenarioConfig)}
_SECTION_TYPES = {
    "lattice": LatticeConfig,
    "beam": BeamConfig,
    "drive": DriveConfig,
    "blockade": BlockadeConfig,
    "truncation": TruncationConfig,
    "scan": ScanConfig,
    "correlation": CorrelationConfig,
    "run": RunConfig,
}


def _fail(key: str, message: str):
    raise ConfigError(f"invalid configuration value {key!r}: {message}")


def _require_number(key, value, *, positive=False, nonnegative=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(key, f"expected a number, got {value!r}")
    if integer and int(value) != value:
        _fail(key, f"expected an integer, got {value!r}")
    if positive and not value > 0:
        _fail(key, f"must be positive, got {value!r}")
    if nonnegative and value < 0:
        _fail(key, f"must be nonnegative, got {value!r}")
    return int(value) if integer else float(value)


def _validate(cfg: ScenarioConfig) -> ScenarioConfig:
    lat, beam, drive = cfg.lattice, cfg.beam, cfg.drive
    lat.a_over_lambda = _require_number("lattice.a_over_lambda", lat.a_over_lambda, positive=True)
    lat.diameter_sites = _require_number(
        "lattice.diameter_sites", lat.diameter_sites, positive=True, integer=True
    )
    if isinstance(lat.polarization, str):
        if lat.polarization not in POLARIZATION_PRESETS:
            _fail("lattice.polarization", f"unknown preset {lat.polarization!r}")
    else:
        try:
            vec = np.asarray(
                [complex(re, im) for re, im in lat.polarization], dtype=complex
            )
        except (TypeError, ValueError):
            _fail("lattice.polarization", "expected a preset name or three [re, im] pairs")
        if vec.shape != (3,) or not np.linalg.norm(vec) > 0:
            _fail("lattice.polarization", "expected a nonzero 3-vector")
    beam.w0_over_lambda = _require_number("beam.w0_over_lambda", beam.w0_over_lambda, positive=True)
    beam.power_scale = _require_number("beam.power_scale", beam.power_scale, positive=True)
    drive.delta_over_gamma = _require_number("drive.delta_over_gamma", drive.delta_over_gamma)
    drive.omega_over_gamma = _require_number(
        "drive.omega_over_gamma", drive.omega_over_gamma, nonnegative=True
    )
    drive.two_photon_detuning = _require_number(
        "drive.two_photon_detuning", drive.two_photon_detuning
    )
    drive.rydberg_dephasing = _require_number(
        "drive.rydberg_dephasing", drive.rydberg_dephasing, nonnegative=True
    )
    if cfg.blockade.mode not in BLOCKADE_CHOICES:
        _fail("blockade.mode", f"must be one of {BLOCKADE_CHOICES}")
    cfg.blockade.c6 = _require_number("blockade.c6", cfg.blockade.c6, nonnegative=True)
    if cfg.truncation.max_excitations != 2:
        _fail("truncation.max_excitations", "the solver supports exactly 2")
    cfg.truncation.sector2_bound = _require_number(
        "truncation.sector2_bound", cfg.truncation.sector2_bound, positive=True
    )
    if cfg.scan.variable not in SCAN_CHOICES:
        _fail("scan.variable", f"must be one of {SCAN_CHOICES}")
    if not isinstance(cfg.scan.grid, list):
        _fail("scan.grid", "expected a list of numbers")
    cfg.scan.grid = [
        _require_number(f"scan.grid[{i}]", v) for i, v in enumerate(cfg.scan.grid)
    ]
    if cfg.scan.variable != "none":
        if not cfg.scan.grid:
            _fail("scan.grid", "scan grid must be nonempty")
        if sorted(cfg.scan.grid) != cfg.scan.grid:
            _fail("scan.grid", "scan grid must be sorted ascending")
        if cfg.scan.variable in ("w0",) and min(cfg.scan.grid) <= 0:
            _fail("scan.grid", "waist values must be positive")
    corr = cfg.correlation
    if not isinstance(corr.channels, list) or not corr.channels:
        _fail("correlation.channels", "expected a nonempty list")
    for ch in corr.channels:
        if ch not in CHANNEL_CHOICES:
            _fail("correlation.channels", f"unknown channel pair {ch!r}")
    corr.tau_points = _require_number(
        "correlation.tau_points", corr.tau_points, positive=True, integer=True
    )
    corr.tau_span = _require_number("correlation.tau_span", corr.tau_span, positive=True)
    if not isinstance(corr.omega_set, list) or not corr.omega_set:
        _fail("correlation.omega_set", "expected a nonempty list")
    corr.omega_set = [
        _require_number(f"correlation.omega_set[{i}]", v, positive=True)
        for i, v in enumerate(corr.omega_set)
    ]
    run = cfg.run
    run.seed = _require_number("run.seed", run.seed, nonnegative=True, integer=True)
    run.trajectories = _require_number(
        "run.trajectories", run.trajectories, positive=True, integer=True
    )
    run.workers = _require_number("run.workers", run.workers, nonnegative=True, integer=True)
    if not isinstance(run.output_dir, str) or not run.output_dir:
        _fail("run.output_dir", "expected a nonempty path string")
    return cfg


def config_from_mapping(data: dict) -> ScenarioConfig:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be a mapping of sections")
    cfg = ScenarioConfig()
    for section, payload in data.items():
        if section not in _SECTION_TYPES:
            raise ConfigError(f"unknown configuration section {section!r}")
        if payload is None:
            continue
        if not isinstance(payload, dict):
            raise ConfigError(f"section {section!r} must be a mapping")
        target = getattr(cfg, section)
        known = {f.name for f in fields(target)}
        for key, value in payload.items():
            if key not in known:
                raise ConfigError(f"unknown configuration key {section + '.' + key!r}")
            setattr(target, key, value)
    return _validate(cfg)


def load_config(path) -> ScenarioConfig:
    """Parse and validate a YAML scenario configuration."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration file {path}: {exc}") from exc
    return loads_config(text)


def loads_config(text: str) -> ScenarioConfig:
    try:
        data = yaml.safe_load(io.StringIO(text))
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"configuration parse error{where}: {exc}") from exc
    return config_from_mapping(data)


def dump_config(cfg: ScenarioConfig) -> str:
    """Serialize a configuration; load(dump(cfg)) round-trips identically."""
    return yaml.safe_dump(asdict(cfg), sort_keys=False)
