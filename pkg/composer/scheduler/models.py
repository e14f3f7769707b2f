from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from config import (
    DEFAULT_DELTA, DEFAULT_EPSILON, DEFAULT_SIGMA, DEFAULT_TARGET_CAP, DEFAULT_TOTAL_STEPS, MAX_TARGET_CAP,
)
from composer.core.distribution import Distribution, LossVector
from composer.metrics.signals import SignalVector


class SchedulerMode(str, Enum):
    ROBUSTNESS = 'robustness'
    EXPANSION = 'expansion'


class SchedulerConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')

    mode: SchedulerMode = SchedulerMode.ROBUSTNESS
    sigma: float = Field(DEFAULT_SIGMA, ge=0)
    total_steps: int = Field(DEFAULT_TOTAL_STEPS, ge=1)
    delta: float = Field(DEFAULT_DELTA, gt=0, lt=1)
    epsilon: float = Field(DEFAULT_EPSILON, gt=0)
    target_domain: Optional[int] = Field(None, ge=0)
    target_cap: float = Field(DEFAULT_TARGET_CAP, gt=0, le=MAX_TARGET_CAP)
    # Skip the forgetting gate and the target cap (threshold ablation)
    uncapped: bool = False

    @model_validator(mode='after')
    def _check_expansion(self):
        if self.mode is SchedulerMode.EXPANSION:
            if self.target_domain is None:
                raise ValueError("expansion mode needs a target_domain")
            if not self.delta < self.target_cap:
                raise ValueError(f"delta ({self.delta}) must be below target_cap ({self.target_cap})")
        return self

    @property
    def effective_cap(self) -> float:
        return 1.0 if self.uncapped else self.target_cap


@dataclass(frozen=True)
class ExpansionAdjustment:
    """Realized increase factor of the target and the prior share of the rest."""
    alpha: Optional[float]
    beta_share: float


@dataclass(frozen=True)
class HistoryEntry:
    step: int
    proportions: Distribution
    losses: LossVector
    gamma: SignalVector
    phi: SignalVector
    gate: Optional[bool] = None
    cap_blocked: bool = False
    adjustment: Optional[ExpansionAdjustment] = None


@dataclass(frozen=True)
class SchedulerState:
    step: int
    proportions: Distribution
    config: SchedulerConfig
    prev_losses: Optional[LossVector] = None
    history: tuple[HistoryEntry, ...] = field(default_factory=tuple)
