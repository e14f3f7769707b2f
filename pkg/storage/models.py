"""
Pydantic models for everything read from or written to disk: the run
config, loss feedback lines, per-step proportion manifests and the
scheduler state file.
"""

import json
from pathlib import Path
from typing import Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationInfo, field_validator, model_validator

from config import (
    DEFAULT_BUDGET, DEFAULT_DELTA, DEFAULT_DOMAINS, DEFAULT_EPSILON, DEFAULT_SEED, DEFAULT_SIGMA,
    DEFAULT_TARGET_CAP, DEFAULT_TOTAL_STEPS, MAX_TARGET_CAP, SIM_SEEDS, SIM_STEPS,
)
from composer.core.distribution import Distribution, DomainSet, LossVector
from composer.detector.classifier import ClassifierEndpointConfig
from composer.metrics.signals import SignalVector
from composer.scheduler.models import (
    ExpansionAdjustment, HistoryEntry, SchedulerConfig, SchedulerMode, SchedulerState,
)

STATE_VERSION = 1


def _resolve(value: Optional[str], info: ValidationInfo) -> Optional[str]:
    if value is None:
        return None
    base = (info.context or {}).get('base_dir')
    path = Path(value)
    if base is not None and not path.is_absolute():
        path = Path(base) / path
    return str(path)


def _existing(value: Optional[str], info: ValidationInfo) -> Optional[str]:
    resolved = _resolve(value, info)
    if resolved is not None and not Path(resolved).exists():
        raise ValueError(f"path does not exist: {resolved}")
    return resolved


class PathsConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    samples: list[str] = Field(default_factory=list)
    pools: dict[str, str] = Field(default_factory=dict)
    feedback: Optional[str] = None
    detection: Optional[str] = None
    world: Optional[str] = None
    output_dir: str = 'runs'

    @field_validator('samples')
    @classmethod
    def _samples_exist(cls, value, info: ValidationInfo):
        return [_existing(v, info) for v in value]

    @field_validator('pools')
    @classmethod
    def _pools_exist(cls, value, info: ValidationInfo):
        return {name: _existing(v, info) for name, v in value.items()}

    @field_validator('feedback', 'detection', 'world')
    @classmethod
    def _file_exists(cls, value, info: ValidationInfo):
        return _existing(value, info)

    @field_validator('output_dir')
    @classmethod
    def _output_dir(cls, value, info: ValidationInfo):
        return _resolve(value, info)


class SchedulerSettings(BaseModel):
    """Scheduler section of the run config; the target may be a domain name."""
    model_config = ConfigDict(extra='forbid')

    mode: SchedulerMode = SchedulerMode.ROBUSTNESS
    sigma: float = Field(DEFAULT_SIGMA, ge=0)
    total_steps: int = Field(DEFAULT_TOTAL_STEPS, ge=1)
    delta: float = Field(DEFAULT_DELTA, gt=0, lt=1)
    epsilon: float = Field(DEFAULT_EPSILON, gt=0)
    target_domain: Optional[Union[int, str]] = None
    target_cap: float = Field(DEFAULT_TARGET_CAP, gt=0, le=MAX_TARGET_CAP)
    uncapped: bool = False


class SimulationSettings(BaseModel):
    model_config = ConfigDict(extra='forbid')

    strategies: list[str] = Field(default_factory=lambda: ['adaptive', 'uniform', 'inverse', 'constant'])
    steps: int = Field(SIM_STEPS, ge=1)
    seeds: int = Field(SIM_SEEDS, ge=1)
    target: Optional[str] = None
    order: Optional[list[str]] = None
    csv: bool = False


class RunConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    domains: list[str] = Field(default_factory=lambda: list(DEFAULT_DOMAINS))
    classifier: Optional[ClassifierEndpointConfig] = None
    scheduler: SchedulerSettings = Field(default_factory=SchedulerSettings)
    reference_losses: Optional[Union[dict[str, float], str]] = None
    budget: int = Field(DEFAULT_BUDGET, gt=0)
    seed: int = DEFAULT_SEED
    paths: PathsConfig = Field(default_factory=PathsConfig)
    simulation: SimulationSettings = Field(default_factory=SimulationSettings)

    @field_validator('reference_losses')
    @classmethod
    def _reference_path_exists(cls, value, info: ValidationInfo):
        if isinstance(value, str):
            return _existing(value, info)
        return value

    @model_validator(mode='after')
    def _check_domains(self):
        domains = self.domain_set()
        unknown = sorted(set(self.paths.pools) - set(domains.names))
        if unknown:
            raise ValueError(f"pools configured for unknown domains {unknown}")
        if isinstance(self.reference_losses, dict):
            domains.vector(self.reference_losses, 'reference_losses')
        self.scheduler_config()
        return self

    def domain_set(self) -> DomainSet:
        return DomainSet(tuple(self.domains))

    def target_index(self) -> Optional[int]:
        target = self.scheduler.target_domain
        if target is None or isinstance(target, int):
            return target
        return self.domain_set().index(target)

    def scheduler_config(self) -> SchedulerConfig:
        settings = self.scheduler.model_dump()
        settings['target_domain'] = self.target_index()
        config = SchedulerConfig(**settings)
        if config.target_domain is not None and config.target_domain >= len(self.domains):
            raise ValueError(f"target_domain {config.target_domain} is out of range for {len(self.domains)} domains")
        return config


class FeedbackLine(BaseModel):
    model_config = ConfigDict(extra='forbid')

    step: int = Field(ge=1)
    losses: dict[str, float]

    def to_loss_vector(self, domains: DomainSet) -> LossVector:
        return LossVector(self.step, domains.vector(self.losses, f"losses of step {self.step}"))


class ProportionsManifest(BaseModel):
    step: int
    proportions: dict[str, float]
    gamma: dict[str, float]
    phi: dict[str, float]
    gate: Optional[bool] = None
    cap_blocked: bool = False

    @classmethod
    def from_entry(cls, entry: HistoryEntry, domains: DomainSet) -> 'ProportionsManifest':
        return cls(
            step=entry.step,
            proportions=domains.mapping(entry.proportions.weights),
            gamma=domains.mapping(entry.gamma.values),
            phi=domains.mapping(entry.phi.values),
            gate=entry.gate,
            cap_blocked=entry.cap_blocked,
        )

    def distribution(self, domains: DomainSet) -> Distribution:
        return Distribution(domains.vector(self.proportions, 'manifest proportions'))


class LossRecord(BaseModel):
    step: int
    losses: list[float]


class HistoryRecord(BaseModel):
    step: int
    proportions: list[float]
    losses: list[float]
    gamma: list[float]
    phi: list[float]
    gate: Optional[bool] = None
    cap_blocked: bool = False
    alpha: Optional[float] = None
    beta_share: Optional[float] = None


class StateFile(BaseModel):
    model_config = ConfigDict(extra='forbid')

    version: int = STATE_VERSION
    domains: list[str]
    config: SchedulerConfig
    step: int = Field(ge=0)
    proportions: list[float]
    prev_losses: Optional[LossRecord] = None
    history: list[HistoryRecord] = Field(default_factory=list)

    @classmethod
    def from_state(cls, state: SchedulerState, domains: DomainSet) -> 'StateFile':
        history = []
        for entry in state.history:
            adjustment = entry.adjustment
            history.append(HistoryRecord(
                step=entry.step,
                proportions=entry.proportions.tolist(),
                losses=entry.losses.losses.tolist(),
                gamma=entry.gamma.tolist(),
                phi=entry.phi.tolist(),
                gate=entry.gate,
                cap_blocked=entry.cap_blocked,
                alpha=None if adjustment is None else adjustment.alpha,
                beta_share=None if adjustment is None else adjustment.beta_share,
            ))
        prev = state.prev_losses
        return cls(
            domains=list(domains.names),
            config=state.config,
            step=state.step,
            proportions=state.proportions.tolist(),
            prev_losses=None if prev is None else LossRecord(step=prev.step, losses=prev.losses.tolist()),
            history=history,
        )

    def to_state(self) -> SchedulerState:
        history = []
        for record in self.history:
            adjustment = None
            if record.beta_share is not None:
                adjustment = ExpansionAdjustment(alpha=record.alpha, beta_share=record.beta_share)
            history.append(HistoryEntry(
                step=record.step,
                proportions=Distribution(record.proportions),
                losses=LossVector(record.step, record.losses),
                gamma=SignalVector(record.gamma),
                phi=SignalVector(record.phi),
                gate=record.gate,
                cap_blocked=record.cap_blocked,
                adjustment=adjustment,
            ))
        prev = self.prev_losses
        return SchedulerState(
            step=self.step,
            proportions=Distribution(self.proportions),
            config=self.config,
            prev_losses=None if prev is None else LossVector(prev.step, prev.losses),
            history=tuple(history),
        )


def load_run_config(path: Optional[Path] = None, seed: Optional[int] = None,
                    out_dir: Optional[Path] = None) -> RunConfig:
    """Validate a JSON run config; relative paths resolve against the config's directory."""
    raw = {}
    base_dir = Path.cwd()
    if path is not None:
        raw = json.loads(Path(path).read_text(encoding='utf-8'))
        if not isinstance(raw, dict):
            raise ValueError(f"{path}: run config must be a JSON object")
        base_dir = Path(path).resolve().parent
    if seed is not None:
        raw['seed'] = seed
    if out_dir is not None:
        raw.setdefault('paths', {})['output_dir'] = str(Path(out_dir).resolve())
    return RunConfig.model_validate(raw, context={'base_dir': base_dir})
