import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from config import SIM_MAX_WORKERS
from composer.core.distribution import Distribution, DomainSet, LossVector, inverse, uniform
from composer.core.errors import ConfigError, DataError
from composer.metrics.signals import ReferenceLossTable
from composer.scheduler.models import SchedulerConfig, SchedulerMode
from composer.scheduler.steps import apply_step, init_state
from composer.simulator.world import SimWorld, sim_step

logger = logging.getLogger(__name__)


class StrategyKind(str, Enum):
    UNIFORM = 'uniform'
    INVERSE = 'inverse'
    ADAPTIVE = 'adaptive'
    CONSTANT = 'constant'
    SINGLE = 'single'
    EXPANSION = 'expansion'
    EXPANSION_UNCAPPED = 'expansion-uncapped'


TARGETED = {StrategyKind.SINGLE, StrategyKind.EXPANSION, StrategyKind.EXPANSION_UNCAPPED}


@dataclass(frozen=True)
class Strategy:
    kind: StrategyKind
    target: Optional[int] = None
    target_name: Optional[str] = None

    @property
    def label(self) -> str:
        if self.kind in TARGETED:
            return f"{self.kind.value}:{self.target_name}"
        return self.kind.value


def parse_strategy(text: str, domains: DomainSet) -> Strategy:
    """'adaptive', 'uniform', 'single:medicine', 'expansion:code', ..."""
    name, _, target = text.strip().partition(':')
    try:
        kind = StrategyKind(name.lower())
    except ValueError:
        known = ', '.join(k.value for k in StrategyKind)
        raise ConfigError(f"unknown strategy {text!r}; expected one of {known}") from None
    if kind in TARGETED:
        if not target:
            raise ConfigError(f"strategy {name!r} needs a target domain, e.g. {name}:{domains.names[0]}")
        index = int(target) if target.isdigit() else domains.index(target)
        if not 0 <= index < domains.k:
            raise ConfigError(f"strategy target {target!r} is out of range")
        return Strategy(kind, index, domains.names[index])
    if target:
        raise ConfigError(f"strategy {name!r} takes no target")
    return Strategy(kind)


@dataclass(frozen=True)
class TrajectoryStep:
    step: int
    proportions: Distribution
    losses: LossVector


@dataclass(frozen=True)
class Trajectory:
    strategy: Strategy
    domains: DomainSet
    initial: LossVector
    steps: list[TrajectoryStep] = field(default_factory=list)
    seed: int = 0

    @property
    def label(self) -> str:
        return self.strategy.label

    @property
    def final(self) -> LossVector:
        return self.steps[-1].losses if self.steps else self.initial

    def rows(self) -> list[dict]:
        return [{'step': s.step,
                 'proportions': self.domains.mapping(s.proportions.weights),
                 'losses': self.domains.mapping(s.losses.losses)} for s in self.steps]


def _scheduler_config(strategy: Strategy, steps: int, base: SchedulerConfig) -> SchedulerConfig:
    settings = base.model_dump()
    settings.update(total_steps=steps)
    if strategy.kind is StrategyKind.ADAPTIVE:
        settings.update(mode=SchedulerMode.ROBUSTNESS, uncapped=False)
    else:
        settings.update(mode=SchedulerMode.EXPANSION, target_domain=strategy.target,
                        uncapped=strategy.kind is StrategyKind.EXPANSION_UNCAPPED)
    return SchedulerConfig(**settings)


def fixed_proportions(strategy: Strategy, knowledge: Distribution) -> Distribution:
    k = knowledge.k
    if strategy.kind is StrategyKind.UNIFORM:
        return uniform(k)
    if strategy.kind is StrategyKind.INVERSE:
        return inverse(knowledge)
    if strategy.kind is StrategyKind.CONSTANT:
        return knowledge
    if strategy.kind is StrategyKind.SINGLE:
        weights = np.zeros(k)
        weights[strategy.target] = 1.0
        return Distribution(weights)
    raise DataError(f"strategy {strategy.label} is scheduled, not fixed")


def run_strategy(world: SimWorld, strategy: Strategy, ref: ReferenceLossTable, steps: int,
                 scheduler: Optional[SchedulerConfig] = None) -> Trajectory:
    """
    Closed loop over the world: observe losses, schedule, train one step

    Args:
        world: starting world; its knowledge distribution seeds the detected-distribution strategies
        strategy: proportion rule to apply
        ref: reference losses fed to the scheduler
        steps: number of training steps
        scheduler: sigma/delta/epsilon/cap settings for scheduled strategies

    Returns:
        Trajectory of (proportions used, resulting losses) per step
    """
    if steps < 1:
        raise ConfigError(f"steps must be >= 1, got {steps}")
    knowledge = world.knowledge if world.knowledge is not None else uniform(world.k)

    state = None
    fixed = None
    if strategy.kind in (StrategyKind.ADAPTIVE, StrategyKind.EXPANSION, StrategyKind.EXPANSION_UNCAPPED):
        state = init_state(knowledge, _scheduler_config(strategy, steps, scheduler or SchedulerConfig()))
    else:
        fixed = fixed_proportions(strategy, knowledge)

    trajectory = Trajectory(strategy=strategy, domains=world.domains, initial=LossVector(0, world.losses),
                            seed=world.rng_seed)
    for t in range(1, steps + 1):
        if state is not None:
            state = apply_step(state, LossVector(t, world.losses), ref)
            proportions = state.proportions
        else:
            proportions = fixed
        world = sim_step(world, proportions, world.noise_scale)
        trajectory.steps.append(TrajectoryStep(step=t, proportions=proportions, losses=LossVector(t, world.losses)))
    return trajectory


def run_sweep(world: SimWorld, strategies: Sequence[Strategy], ref: ReferenceLossTable, steps: int,
              seeds: Sequence[int], scheduler: Optional[SchedulerConfig] = None,
              max_workers: int = SIM_MAX_WORKERS) -> list[Trajectory]:
    """Every strategy on every reseeded world, ordered by seed then strategy."""
    jobs = [(world.reseeded(seed), strategy) for seed in seeds for strategy in strategies]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = [pool.submit(run_strategy, w, s, ref, steps, scheduler) for w, s in jobs]
        trajectories = [f.result() for f in futures]
    logger.info("simulated %d strategies over %d seeds", len(strategies), len(seeds))
    return trajectories
