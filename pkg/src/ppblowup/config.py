"""Experiment configuration, loaded from a TOML file.

Every physical and numerical parameter lives in the file; the command line
only picks the subcommand, the config path and the output directory.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .bounds import Tolerances
from .dynamics import TimeStepConfig
from .model import ModelParams

PROFILES = ("GroundStateRay", "PolynomialBump")
SWEEPABLE = ("s", "p", "lambda", "J_ratio")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MeshConfig:
    M: int = 200
    grading: float = 2.0
    quad_order: int = 6

    def __post_init__(self):
        if not isinstance(self.M, int) or self.M < 4:
            raise ConfigError("mesh.M must be an integer >= 4")
        if not self.grading > 0:
            raise ConfigError("mesh.grading must be positive")
        if not isinstance(self.quad_order, int) or self.quad_order < 4:
            raise ConfigError("mesh.quad_order must be an integer >= 4")


@dataclass(frozen=True)
class InitialConfig:
    """Initial datum ``scale · φ``.

    φ is the discrete ground state (GroundStateRay) or ``(1 − (r/R)²)^q``
    (PolynomialBump). Either give ``scale`` (λ or A) directly, or give
    ``J_ratio`` and the scale is found by bisection so that ``J(u0) = J_ratio·d``
    with ``I(u0) < 0``: a negative ratio asks for negative energy, a ratio in
    [0, 1) for the subcritical regime.
    """

    profile: str = "GroundStateRay"
    scale: float | None = None
    J_ratio: float | None = -1.0
    q: float = 2.0

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ConfigError(f"unknown profile {self.profile!r}; expected one of {PROFILES}")
        if (self.scale is None) == (self.J_ratio is None):
            raise ConfigError("give exactly one of initial.scale (lambda / A) or initial.J_ratio")
        if self.scale is not None and self.scale < 0:
            raise ConfigError("initial scale must be nonnegative")
        if self.J_ratio is not None and not self.J_ratio < 1:
            raise ConfigError("J_ratio must be < 1 (J(u0) < d)")
        if not self.q > 0:
            raise ConfigError("profile exponent q must be positive")


@dataclass(frozen=True)
class EstimatorConfig:
    tol_Cstar: float = 1e-11
    tol_Cstarstar: float = 1e-13
    eps_I: float = 0.0


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "out"
    csv: bool = True
    json: bool = True
    # rows are thinned on export: a row is kept when log H moved by csv_dlogH
    # or t moved by csv_dt_frac·horizon since the last kept row (0 keeps all)
    csv_dlogH: float = 1e-3
    csv_dt_frac: float = 1e-4


@dataclass(frozen=True)
class SweepConfig:
    s: list | None = None
    p: list | None = None
    lam: list | None = None
    J_ratio: list | None = None
    workers: int | None = None

    def axes(self) -> dict:
        out = {}
        for key, attr in (("s", "s"), ("p", "p"), ("lambda", "lam"), ("J_ratio", "J_ratio")):
            v = getattr(self, attr)
            if v is not None:
                out[key] = list(v)
        return out


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelParams = field(default_factory=ModelParams)
    mesh: MeshConfig = field(default_factory=MeshConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    stepping: TimeStepConfig = field(default_factory=TimeStepConfig)
    estimators: EstimatorConfig = field(default_factory=EstimatorConfig)
    verify: Tolerances = field(default_factory=Tolerances)
    output: OutputConfig = field(default_factory=OutputConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def replace(self, **sections) -> "ExperimentConfig":
        return dataclasses.replace(self, **sections)

    def with_overrides(self, s=None, p=None, lam=None, J_ratio=None) -> "ExperimentConfig":
        """Copy with one sweep point applied."""
        model = self.model
        if s is not None or p is not None:
            model = ModelParams(model.n, model.s if s is None else s, model.p if p is None else p, model.R)
        initial = self.initial
        if lam is not None:
            initial = dataclasses.replace(initial, scale=lam, J_ratio=None)
        elif J_ratio is not None:
            initial = dataclasses.replace(initial, scale=None, J_ratio=J_ratio)
        return dataclasses.replace(self, model=model, initial=initial)


def _build(cls, table: dict, section: str, rename=None):
    rename = rename or {}
    kwargs = {}
    names = {f.name for f in dataclasses.fields(cls)}
    for key, value in table.items():
        attr = rename.get(key, key)
        if attr not in names:
            raise ConfigError(f"unknown key {section}.{key}")
        kwargs[attr] = value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {exc}") from None


def config_from_dict(data: dict) -> ExperimentConfig:
    known = {"model", "mesh", "initial", "stepping", "estimators", "verify", "output", "sweep"}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown sections: {sorted(extra)}")
    initial = dict(data.get("initial", {}))
    for alias in ("lambda", "A"):
        if alias in initial:
            if "scale" in initial:
                raise ConfigError(f"initial.{alias} and initial.scale both given")
            initial["scale"] = initial.pop(alias)
    if "scale" in initial and "J_ratio" not in initial:
        initial["J_ratio"] = None
    return ExperimentConfig(
        model=_build(ModelParams, data.get("model", {}), "model"),
        mesh=_build(MeshConfig, data.get("mesh", {}), "mesh"),
        initial=_build(InitialConfig, initial, "initial"),
        stepping=_build(TimeStepConfig, data.get("stepping", {}), "stepping"),
        estimators=_build(EstimatorConfig, data.get("estimators", {}), "estimators"),
        verify=_build(Tolerances, data.get("verify", {}), "verify"),
        output=_build(OutputConfig, data.get("output", {}), "output"),
        sweep=_build(SweepConfig, data.get("sweep", {}), "sweep", rename={"lambda": "lam"}),
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return config_from_dict(data)
