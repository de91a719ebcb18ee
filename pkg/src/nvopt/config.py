"""Strict JSON configuration.

Unknown keys are rejected and every violation is reported by its dotted
path. Spin-system frequencies are given in GHz and always mean 2pi * GHz;
laser amplitudes and detunings follow ``convention``.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .harness import METHODS, STIRAP_AMPLITUDES, ExperimentSpec
from .model import TWO_PI, PhysicalConstants
from .pulses import CONVENTIONS, DEFAULT_CONVENTION

SCHEMA_VERSION = 1

#: Keys left out of the config hash because they cannot change any result.
_UNHASHED = ("output_dir", "workers")


class ConfigError(ValueError):
    """Raised with one message per schema violation."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid configuration:\n  " + "\n  ".join(problems))


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ConstantsConfig(_Strict):
    D_gs_GHz: float = Field(2.88, ge=0)
    g_gs: float = Field(2.01, ge=0)
    D_es_GHz: float = Field(1.42, ge=0)
    Delta_ss_GHz: float = Field(1.55, ge=0)
    Delta_pp_GHz: float = Field(0.2, ge=0)
    l_z_GHz: float = Field(5.3, ge=0)
    g_es: float = Field(2.01, ge=0)
    E_g_eV: float = Field(1.94, ge=0)


class VariantConfig(_Strict):
    dims: Literal[3, 4, 10] = 10
    dissipation: bool = True


class SimulateConfig(VariantConfig):
    a: float = Field(5.0, ge=0)
    T: float = Field(100.0, gt=0)
    mu_plus: Optional[float] = None
    mu_minus: Optional[float] = None
    sigma: Optional[float] = Field(None, gt=0)
    pulse_file: Optional[str] = None
    stride: int = Field(100, ge=1)


class StirapScanConfig(_Strict):
    T_list: list[float] = [10.0, 20.0, 50.0, 100.0]
    amplitudes: list[float] = list(STIRAP_AMPLITUDES)
    variants: list[VariantConfig] = [
        VariantConfig(dims=4, dissipation=False),
        VariantConfig(dims=10, dissipation=False),
        VariantConfig(dims=4, dissipation=True),
        VariantConfig(dims=10, dissipation=True),
    ]


class OptimizeConfig(VariantConfig):
    T_list: list[float] = [1.0]
    methods: list[str] = list(METHODS)
    n_restarts: int = Field(50, ge=1)
    max_iters: int = Field(300, ge=1)
    nm_max_evals: int = Field(300, ge=4)
    amplitude_cap: float = Field(12.0, gt=0)
    start_amplitude: tuple[float, float] = (0.0, 3.0)
    start_detuning: tuple[float, float] = (0.0, 3.0)
    lam: float = Field(0.0, le=0)
    lam_E: float = Field(0.0, le=0)
    resolution: Optional[float] = Field(None, gt=0)

    @field_validator("methods")
    @classmethod
    def _known_methods(cls, v):
        bad = [m for m in v if m not in METHODS]
        if bad:
            raise ValueError(f"unknown method(s) {bad}; allowed: {', '.join(METHODS)}")
        return v


class ResolutionConfig(OptimizeConfig):
    resolution: Optional[float] = Field(0.05, gt=0)


class GridConfig(_Strict):
    min: float
    max: float
    n: int = Field(11, ge=1)

    @model_validator(mode="after")
    def _ordered(self):
        if self.max < self.min:
            raise ValueError("grid max must be >= min")
        return self

    def values(self) -> list[float]:
        if self.n == 1:
            return [self.min]
        step = (self.max - self.min) / (self.n - 1)
        return [round(self.min + i * step, 12) for i in range(self.n)]


class RobustnessConfig(OptimizeConfig):
    n_restarts: int = Field(10, ge=1)
    pulse_file: Optional[str] = None
    dOmega: GridConfig = GridConfig(min=-0.1, max=0.1, n=11)
    dDelta_GHz: GridConfig = GridConfig(min=-0.2, max=0.2, n=11)


class DtConvergenceConfig(VariantConfig):
    a: float = Field(5.0, ge=0)
    T: float = Field(100.0, gt=0)
    ladder: list[float] = [0.02, 0.01, 0.005, 0.0025]
    rk4: bool = True
    rk4_substeps: int = Field(10, ge=1)


class ExperimentsConfig(_Strict):
    simulate: SimulateConfig = SimulateConfig()
    stirap_scan: StirapScanConfig = StirapScanConfig()
    optimize: OptimizeConfig = OptimizeConfig()
    resolution: ResolutionConfig = ResolutionConfig()
    robustness: RobustnessConfig = RobustnessConfig()
    dt_convergence: DtConvergenceConfig = DtConvergenceConfig()


class Config(_Strict):
    schema_version: Literal[1] = SCHEMA_VERSION
    constants: ConstantsConfig = ConstantsConfig()
    B_gauss: float = 200.0
    dt: float = Field(0.005, gt=0)
    convention: str = DEFAULT_CONVENTION
    seed: int = Field(0, ge=0)
    output_dir: str = "nvopt-out"
    workers: int = Field(1, ge=1)
    experiments: ExperimentsConfig = ExperimentsConfig()

    @field_validator("convention")
    @classmethod
    def _known_convention(cls, v):
        if v not in CONVENTIONS:
            raise ValueError(f"convention must be one of {sorted(CONVENTIONS)}")
        return v

    def physical_constants(self) -> PhysicalConstants:
        c = self.constants
        return PhysicalConstants.with_field_gauss(
            self.B_gauss,
            D_gs=TWO_PI * c.D_gs_GHz,
            g_gs=c.g_gs,
            D_es=TWO_PI * c.D_es_GHz,
            Delta_ss=TWO_PI * c.Delta_ss_GHz,
            Delta_pp=TWO_PI * c.Delta_pp_GHz,
            l_z=TWO_PI * c.l_z_GHz,
            g_es=c.g_es,
            E_g_eV=c.E_g_eV,
        )

    def experiment_spec(self, kind: str) -> ExperimentSpec:
        """Harness spec for ``kind`` (one of ``harness.KINDS``)."""
        e = self.experiments
        common = dict(kind=kind, rng_seed=self.seed, dt=self.dt, convention=self.convention)
        if kind == "stirap-scan":
            s = e.stirap_scan
            return ExperimentSpec(T_list=tuple(s.T_list), amplitudes=tuple(s.amplitudes), **common)
        if kind == "dt-convergence":
            s = e.dt_convergence
            return ExperimentSpec(dims=s.dims, dissipation=s.dissipation, T_list=(s.T,),
                                  dt_ladder=tuple(s.ladder), **common)
        block = {"optimize": e.optimize, "resolution": e.resolution, "robustness": e.robustness}[kind]
        extra = {}
        if kind == "robustness":
            extra = dict(dOmega=tuple(block.dOmega.values()), dDelta=tuple(block.dDelta_GHz.values()))
        return ExperimentSpec(
            dims=block.dims,
            dissipation=block.dissipation,
            T_list=tuple(block.T_list),
            methods=tuple(block.methods),
            n_restarts=block.n_restarts,
            resolution=block.resolution,
            start_amplitude=tuple(block.start_amplitude),
            start_detuning=tuple(block.start_detuning),
            amplitude_cap=block.amplitude_cap,
            max_iters=block.max_iters,
            nm_max_evals=block.nm_max_evals,
            lam=block.lam,
            lam_E=block.lam_E,
            **extra,
            **common,
        )


def _problems(err: ValidationError) -> list[str]:
    out = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        if e["type"] == "extra_forbidden":
            out.append(f"{loc}: unknown key")
        else:
            out.append(f"{loc}: {e['msg']}")
    return out


def load_config(data: dict) -> Config:
    try:
        return Config.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_problems(err)) from None


def parse_config(path: str | Path | None) -> Config:
    """Read and validate a JSON config; ``None`` gives all defaults."""
    if path is None:
        return Config()
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"{path}: config file not found"])
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise ConfigError([f"{path}: not valid JSON ({err})"]) from None
    if not isinstance(data, dict):
        raise ConfigError([f"{path}: top level must be an object"])
    return load_config(data)


def emit_config(cfg: Config) -> dict:
    """Effective configuration as plain JSON data; ``load_config`` inverts it."""
    return cfg.model_dump(mode="json")


def config_hash(cfg: Config) -> str:
    """sha256 of the canonical JSON of every result-affecting setting."""
    data = emit_config(cfg)
    for key in _UNHASHED:
        data.pop(key, None)
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
