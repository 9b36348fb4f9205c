"""Run configuration: YAML file plus dot-path command-line overrides."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError

__all__ = ["RunConfig", "load_config", "apply_overrides", "config_hash", "file_hash"]


@dataclass
class PathsConfig:
    panel_csv: str = ""
    gdp_csv: str = ""
    output_dir: str = "out"


@dataclass
class IngestSection:
    exclude_series: list[str] = field(
        default_factory=lambda: ["ACOGNO", "ANDENOx", "TWEXAFEGSMTHx", "UMCSENTx", "VIXCLSx"]
    )
    start: str | None = None
    end: str | None = None


@dataclass
class SpectralSection:
    M_T: int = 20
    m: int = 75


@dataclass
class FactorSection:
    q: int | None = None
    r: int | None = None
    r_phi: int | None = None
    k_max: int = 10
    rank_floor: int = 1
    hl_penalty_grid: list[float] = field(default_factory=lambda: [0.25, 0.5, 0.75, 1.0, 1.5, 2.0])


@dataclass
class RollingSection:
    window_length: int = 241
    test_start: str = "1980-01"
    test_end: str = "2018-12"


@dataclass
class BootstrapSection:
    B: int = 500
    dof_rule: str = "T_over_M"
    seed: int = 20230508
    save_draws: bool = False


@dataclass
class SimulateSection:
    n: int = 50
    T: int = 480
    q: int = 2
    r: int = 2
    s: int = 6
    idio_ar: float = 0.5
    idio_cross: float = 0.5
    idio_scale: float = 1.0
    seed: int = 1
    gdp_loading: list[float] = field(default_factory=lambda: [0.5, 0.3])
    gdp_noise_sd: float = 0.5
    gdp_mu: float = 0.002


@dataclass
class TargetSection:
    half_width: int = 36
    order: str = "interpolate_first"
    wks_support: int | None = None


@dataclass
class EvaluationSection:
    # draws per rolling window for the real-time density nowcast; 0 disables
    # the PIT grid output (the rolling bootstrap is the expensive part)
    pit_B: int = 0


@dataclass
class RuntimeSection:
    n_jobs: int = 1


@dataclass
class RunConfig:
    mode: str = "fred"
    theta_c: float = float(np.pi / 6)
    methods: list[str] = field(default_factory=lambda: ["USCOIN", "BP", "CF", "SW"])
    cf_ar_override: float | None = None
    paths: PathsConfig = field(default_factory=PathsConfig)
    ingest: IngestSection = field(default_factory=IngestSection)
    spectral: SpectralSection = field(default_factory=SpectralSection)
    factors: FactorSection = field(default_factory=FactorSection)
    rolling: RollingSection = field(default_factory=RollingSection)
    bootstrap: BootstrapSection = field(default_factory=BootstrapSection)
    simulate: SimulateSection = field(default_factory=SimulateSection)
    target: TargetSection = field(default_factory=TargetSection)
    evaluation: EvaluationSection = field(default_factory=EvaluationSection)
    runtime: RuntimeSection = field(default_factory=RuntimeSection)

    def validate(self, needs_data: bool = True) -> None:
        if self.mode not in ("fred", "simulate"):
            raise ConfigError(f"mode must be 'fred' or 'simulate', got {self.mode!r}")
        if not 0.0 < self.theta_c < np.pi:
            raise ConfigError("theta_c must lie in (0, pi)")
        if self.spectral.M_T < 1 or self.spectral.m < 1:
            raise ConfigError("spectral.M_T and spectral.m must be positive")
        if not self.methods:
            raise ConfigError("methods must not be empty")
        unknown = set(self.methods) - {"USCOIN", "BP", "CF", "SW"}
        if unknown:
            raise ConfigError(f"unknown methods: {sorted(unknown)}")
        if self.bootstrap.B < 1:
            raise ConfigError("bootstrap.B must be at least 1")
        if self.mode == "fred" and needs_data:
            for label, p in (("panel_csv", self.paths.panel_csv), ("gdp_csv", self.paths.gdp_csv)):
                if not p:
                    raise ConfigError(f"paths.{label} is required in fred mode")
                if not Path(p).exists():
                    raise ConfigError(f"paths.{label} does not exist: {p}")


_SECTION_TYPES = {
    "paths": PathsConfig,
    "ingest": IngestSection,
    "spectral": SpectralSection,
    "factors": FactorSection,
    "rolling": RollingSection,
    "bootstrap": BootstrapSection,
    "simulate": SimulateSection,
    "target": TargetSection,
    "evaluation": EvaluationSection,
    "runtime": RuntimeSection,
}


def _build_section(cls, values, where):
    if not isinstance(values, dict):
        raise ConfigError(f"section {where!r} must be a mapping")
    valid = {f for f in cls.__dataclass_fields__}
    unknown = set(values) - valid
    if unknown:
        raise ConfigError(f"unknown keys in {where!r}: {sorted(unknown)}")
    return cls(**values)


def load_config(path: str | Path | None) -> RunConfig:
    """Read a YAML config; missing file or malformed content is a ConfigError."""
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config root must be a mapping, got {type(raw).__name__}")
    return _from_dict(raw)


def _from_dict(raw: dict) -> RunConfig:
    cfg = RunConfig()
    valid = set(RunConfig.__dataclass_fields__)
    unknown = set(raw) - valid
    if unknown:
        raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")
    for key, value in raw.items():
        if key in _SECTION_TYPES:
            setattr(cfg, key, _build_section(_SECTION_TYPES[key], value, key))
        else:
            setattr(cfg, key, value)
    return cfg


def apply_overrides(cfg: RunConfig, overrides: list[str]) -> RunConfig:
    """Apply "dotted.path=value" overrides; values parse as YAML scalars."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key.path=value")
        dotted, _, text = item.partition("=")
        try:
            value = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse override value {text!r}: {exc}") from exc
        node = cfg
        parts = dotted.split(".")
        for part in parts[:-1]:
            if not hasattr(node, part):
                raise ConfigError(f"unknown config path {dotted!r}")
            node = getattr(node, part)
        leaf = parts[-1]
        if not hasattr(node, leaf):
            raise ConfigError(f"unknown config path {dotted!r}")
        setattr(node, leaf, value)
    return cfg


def config_hash(cfg: RunConfig) -> str:
    blob = json.dumps(asdict(cfg), sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def file_hash(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()[:12]
