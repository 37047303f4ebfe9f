"""Experiment configuration: JSON round-trip with strict validation.

The document layout is versioned through ``schema_version``; every command
validates its configuration before doing any work.
"""

import json
from dataclasses import asdict, dataclass, field

from .errors import ConfigError

SCHEMA_VERSION = 1

EXPERIMENTS = ("verify-relations", "reconstruct", "compare-reg", "inexact-angles")
SOLVER_MODES = ("gk", "igk", "gengk", "igengk")
REG_RULES = ("none", "fixed", "optimal", "dp", "wgcv")
INEXACT_MODES = ("none", "gaussian-entry", "angle-perturbation")


@dataclass
class GeometryConfig:
    n: int = 64
    angle_start: float = 1.0
    angle_step: float = 5.0
    angle_count: int = 36
    nrays: int = None

    def validate(self):
        if self.n < 16:
            raise ConfigError("geometry.n must be at least 16")
        if self.angle_count < 1:
            raise ConfigError("geometry.angle_count must be positive")
        if self.nrays is not None and self.nrays < 1:
            raise ConfigError("geometry.nrays must be positive")


@dataclass
class PriorConfig:
    nu: float = 1.5
    ell: float = 0.01

    def validate(self):
        if self.nu <= 0 or self.ell <= 0:
            raise ConfigError("prior.nu and prior.ell must be positive")


@dataclass
class InexactConfig:
    mode: str = "gaussian-entry"
    beta: float = 1e-2
    seed: int = None  # defaults to the experiment seed

    def validate(self):
        if self.mode not in INEXACT_MODES:
            raise ConfigError(f"unknown inexactness mode {self.mode!r}")
        if self.beta < 0:
            raise ConfigError("inexactness.beta must be nonnegative")


@dataclass
class RegConfig:
    rule: str = "none"
    lambda_fixed: float = None
    nu_dp: float = 1.0
    omega: float = 1.0
    omega_mode: str = "fixed"

    def validate(self):
        if self.rule not in REG_RULES:
            raise ConfigError(f"unknown regularization rule {self.rule!r}")
        if self.rule == "fixed" and self.lambda_fixed is None:
            raise ConfigError("reg.rule 'fixed' requires reg.lambda_fixed")
        if not 0.0 < self.omega <= 1.0:
            raise ConfigError("reg.omega must lie in (0, 1]")
        if self.omega_mode not in ("fixed", "adaptive"):
            raise ConfigError(f"unknown reg.omega_mode {self.omega_mode!r}")
        if self.nu_dp <= 0:
            raise ConfigError("reg.nu_dp must be positive")


@dataclass
class ExperimentConfig:
    experiment: str = "reconstruct"
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    prior: PriorConfig = field(default_factory=PriorConfig)
    noise_level: float = 0.04
    noise_sigma: float = 1.0
    inexactness: InexactConfig = field(default_factory=InexactConfig)
    mode: str = "igengk"
    reg: RegConfig = field(default_factory=RegConfig)
    max_iter: int = 50
    seed: int = 1234
    output_dir: str = "out"
    betas: tuple = (1e-2, 1e-4, 1e-6)
    angle_schedules: tuple = ((1e-1, 1e-6), (1e0, 1e-6))
    schema_version: int = SCHEMA_VERSION

    def validate(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(
                f"schema_version {self.schema_version} not supported (expected {SCHEMA_VERSION})"
            )
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.mode not in SOLVER_MODES:
            raise ConfigError(f"unknown solver mode {self.mode!r}")
        if self.noise_level < 0:
            raise ConfigError("noise_level must be nonnegative")
        if self.noise_sigma <= 0:
            raise ConfigError("noise_sigma must be positive")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be at least 1")
        for b in self.betas:
            if b < 0:
                raise ConfigError("betas must be nonnegative")
        for sched in self.angle_schedules:
            if len(sched) != 2 or sched[0] <= 0 or sched[1] <= 0:
                raise ConfigError("angle_schedules entries must be (start, end) positives")
        self.geometry.validate()
        self.prior.validate()
        self.inexactness.validate()
        self.reg.validate()
        return self

    def to_dict(self):
        d = asdict(self)
        d["betas"] = list(self.betas)
        d["angle_schedules"] = [list(s) for s in self.angle_schedules]
        return d

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w", encoding="ascii") as fh:
                fh.write(text + "\n")
        return text


_SECTIONS = {
    "geometry": GeometryConfig,
    "prior": PriorConfig,
    "inexactness": InexactConfig,
    "reg": RegConfig,
}


def _build_section(cls, data, name):
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be an object")
    fields = {f for f in cls.__dataclass_fields__}
    unknown = set(data) - fields
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    return cls(**data)


def config_from_dict(data):
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be an object")
    fields = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(data) - fields
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS:
            kwargs[key] = _build_section(_SECTIONS[key], value, key)
        elif key == "betas":
            kwargs[key] = tuple(value)
        elif key == "angle_schedules":
            kwargs[key] = tuple(tuple(s) for s in value)
        else:
            kwargs[key] = value
    try:
        cfg = ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"malformed configuration: {exc}") from exc
    return cfg.validate()


def config_from_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse configuration {path}: {exc}") from exc
    return config_from_dict(data)


def preset(name):
    """Built-in configurations: 'desk' runs in minutes, 'paper' at full scale."""
    if name == "desk":
        return ExperimentConfig()
    if name == "paper":
        return ExperimentConfig(geometry=GeometryConfig(n=128), max_iter=50)
    raise ConfigError(f"unknown preset {name!r}")
