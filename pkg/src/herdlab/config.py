"""Experiment configuration: one YAML file per experiment.

Schema (all keys optional except ``model`` and ``params``)::

    model: sde-two-state-full     # see MODELS
    params: {eps1: 0.1, eps2: 2.0, alpha: 1.0}
    t_end: 1000.0
    burn_in: 0.1                  # fraction of t_end
    sample_dt: 0.01
    ensemble: 1
    seed: 0                       # member i uses seed + i
    x0: null                      # list; model default when null
    output_dir: out
    format: csv                   # or binary
    simulator: {kind: gillespie, step_dt: 0.001}
    integrator: {kappa: 0.05, max_dt: null, boundaries: null}
    analysis:
      observable: auto            # auto | value | y | abs_return | abs_price | <column>
      window_T: 1.0
      psd_segment_len: 16384
      psd_overlap: 0.5
      psd_fit_range: null         # [fmin, fmax]
      pdf_bins_per_decade: 10
      pdf_fit_quantiles: [0.5, 0.999]
      pdf_fit_range: null         # overrides the quantile window
      fracture: false
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml

from .model import GeneralThreeStateParams, ThreeStateParams, TwoStateParams
from .sde import Boundary, GeneralClassParams, IntegratorConfig, SdeModel, YParams

__all__ = ["MODELS", "AnalysisConfig", "SimulatorConfig", "ExperimentConfig", "load_config", "build_params"]

MODELS = (
    "jump-two-state",
    "jump-three-state",
    "sde-two-state-full",
    "sde-two-state-asymptotic",
    "sde-general-class",
    "sde-three-state-fp",
    "sde-three-state-transformed",
)


def _tuple(v):
    return None if v is None else tuple(v)


@dataclass
class AnalysisConfig:
    observable: str = "auto"
    window_T: float = 1.0
    psd_segment_len: int = 2**14
    psd_overlap: float = 0.5
    psd_fit_range: Optional[Tuple[float, float]] = None
    pdf_bins_per_decade: int = 10
    pdf_fit_quantiles: Tuple[float, float] = (0.5, 0.999)
    pdf_fit_range: Optional[Tuple[float, float]] = None
    fracture: bool = False

    def __post_init__(self):
        self.psd_fit_range = _tuple(self.psd_fit_range)
        self.pdf_fit_range = _tuple(self.pdf_fit_range)
        self.pdf_fit_quantiles = tuple(self.pdf_fit_quantiles)


@dataclass
class SimulatorConfig:
    kind: str = "gillespie"
    step_dt: float = 1e-3

    def __post_init__(self):
        if self.kind not in ("gillespie", "fixed-dt"):
            raise ValueError(f"unknown simulator {self.kind!r}")


@dataclass
class ExperimentConfig:
    model: str
    params: Dict[str, Any]
    t_end: float = 1000.0
    burn_in: float = 0.1
    sample_dt: float = 1.0
    ensemble: int = 1
    seed: int = 0
    x0: Optional[List[float]] = None
    output_dir: str = "out"
    format: str = "csv"
    simulator: SimulatorConfig = field(default_factory=SimulatorConfig)
    integrator: Dict[str, Any] = field(default_factory=dict)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; choose from {MODELS}")
        if isinstance(self.simulator, dict):
            self.simulator = SimulatorConfig(**self.simulator)
        if isinstance(self.analysis, dict):
            self.analysis = AnalysisConfig(**self.analysis)
        if self.t_end <= 0 or self.sample_dt <= 0:
            raise ValueError("t_end and sample_dt must be positive")
        if not 0 <= self.burn_in < 1:
            raise ValueError("burn_in must be in [0, 1)")
        if self.ensemble < 1:
            raise ValueError("ensemble must be >= 1")
        if self.seed < 0 or self.seed >= 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.format not in ("csv", "binary"):
            raise ValueError("format must be csv or binary")
        unknown = set(self.integrator) - {f.name for f in fields(IntegratorConfig)}
        if unknown:
            raise ValueError(f"unknown integrator keys {sorted(unknown)}")
        build_params(self.model, self.params)

    @property
    def is_sde(self) -> bool:
        return self.model.startswith("sde-")

    def seeds(self) -> List[int]:
        return [self.seed + i for i in range(self.ensemble)]

    def build(self):
        return build_params(self.model, self.params)

    def sde_model(self) -> SdeModel:
        return SdeModel(self.model[4:], self.build())

    def integrator_config(self) -> IntegratorConfig:
        kw = dict(self.integrator)
        if kw.get("boundaries") is not None:
            kw["boundaries"] = tuple(Boundary(*b) for b in kw["boundaries"])
        return IntegratorConfig(sample_dt=self.sample_dt, burn_in=self.burn_in, **kw)

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        for key in ("psd_fit_range", "pdf_fit_range", "pdf_fit_quantiles"):
            v = d["analysis"][key]
            d["analysis"][key] = None if v is None else list(v)
        return d

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "ExperimentConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys {sorted(extra)}")
        return cls(**d)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_yaml(cls, text: str) -> "ExperimentConfig":
        data = yaml.safe_load(text)
        if not isinstance(data, dict):
            raise ValueError("config must be a mapping")
        return cls.from_dict(data)


def load_config(path) -> ExperimentConfig:
    return ExperimentConfig.from_yaml(Path(path).read_text())


def build_params(model: str, params: Dict[str, Any]):
    """Instantiate the parameter bundle a model id expects."""
    p = dict(params)
    if model == "jump-two-state":
        return TwoStateParams(**p)
    if model == "jump-three-state":
        if "sigma" in p:
            return GeneralThreeStateParams(**p)
        return ThreeStateParams(**p)
    if model in ("sde-two-state-full", "sde-two-state-asymptotic"):
        return YParams(**p)
    if model == "sde-general-class":
        return GeneralClassParams(**p)
    if model in ("sde-three-state-fp", "sde-three-state-transformed"):
        return ThreeStateParams(**p)
    raise ValueError(f"unknown model {model!r}")
