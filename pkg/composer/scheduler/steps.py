"""
Proportion scheduling state machines.

Robustness mode reweights every domain by its learnable potential; expansion
mode additionally pushes one target domain up by a fixed increment while the
non-target domains are not forgetting faster than the target can still learn.
"""

import logging
from dataclasses import replace
from typing import Iterable, Iterator, Optional

import numpy as np

from composer.core.distribution import Distribution, LossVector, normalize
from composer.core.errors import (
    ConfigError, DimensionMismatchError, FeedbackExhaustedError, InvalidKError, StepOrderViolationError,
)
from composer.metrics.signals import (
    ReferenceLossTable, SignalVector, forgetting_vector, potential_vector,
)
from composer.scheduler.models import (
    ExpansionAdjustment, HistoryEntry, SchedulerConfig, SchedulerMode, SchedulerState,
)

logger = logging.getLogger(__name__)


def init_state(detected: Distribution, config: SchedulerConfig) -> SchedulerState:
    if config.mode is SchedulerMode.EXPANSION and config.target_domain >= detected.k:
        raise ConfigError(f"target_domain {config.target_domain} is out of range for {detected.k} domains")
    return SchedulerState(step=0, proportions=detected, config=config)


def _check_feedback(state: SchedulerState, losses: LossVector, ref: ReferenceLossTable, config: SchedulerConfig):
    if state.step >= config.total_steps:
        raise StepOrderViolationError(
            state.step + 1, losses.step,
            f"schedule already completed {state.step} of {config.total_steps} steps",
        )
    if losses.step != state.step + 1:
        raise StepOrderViolationError(state.step + 1, losses.step)
    if losses.k != state.proportions.k:
        raise DimensionMismatchError(state.proportions.k, losses.k, 'loss vector')
    if ref.k != state.proportions.k:
        raise DimensionMismatchError(state.proportions.k, ref.k, 'reference loss table')


def _signals(state: SchedulerState, losses: LossVector, ref: ReferenceLossTable):
    gamma = potential_vector(losses, ref)
    if state.prev_losses is None:
        # no earlier snapshot, so no evidence of forgetting
        phi = SignalVector(np.zeros(losses.k))
    else:
        phi = forgetting_vector(losses, state.prev_losses)
    return gamma, phi


def _advance(state: SchedulerState, losses: LossVector, entry: HistoryEntry) -> SchedulerState:
    return replace(
        state,
        step=losses.step,
        proportions=entry.proportions,
        prev_losses=losses,
        history=state.history + (entry,),
    )


def step_robustness(state: SchedulerState, losses: LossVector, ref: ReferenceLossTable,
                    config: Optional[SchedulerConfig] = None) -> SchedulerState:
    config = config or state.config
    _check_feedback(state, losses, ref, config)
    gamma, phi = _signals(state, losses, ref)

    reweighted = state.proportions.weights * (1.0 + config.sigma * gamma.values)
    proportions = normalize(reweighted)

    entry = HistoryEntry(step=losses.step, proportions=proportions, losses=losses, gamma=gamma, phi=phi)
    return _advance(state, losses, entry)


def expansion_gate(phi: SignalVector, gamma_target: float, epsilon: float, k: int, target: int) -> bool:
    """(1/k) * sum of non-target forgetting must stay strictly below epsilon * target potential."""
    if k < 2:
        raise InvalidKError(f"expansion gate needs k >= 2, got {k}")
    others = np.delete(phi.values, target)
    return float(others.sum()) / k < epsilon * gamma_target


def step_expansion(state: SchedulerState, losses: LossVector, ref: ReferenceLossTable,
                   config: Optional[SchedulerConfig] = None) -> SchedulerState:
    config = config or state.config
    if config.mode is not SchedulerMode.EXPANSION:
        raise ConfigError("step_expansion needs a scheduler config in expansion mode")
    _check_feedback(state, losses, ref, config)
    gamma, phi = _signals(state, losses, ref)

    e = config.target_domain
    k = losses.k
    previous = state.proportions.weights
    reweighted = previous * (1.0 + config.sigma * gamma.values)

    if config.uncapped:
        gate = True
    else:
        gate = expansion_gate(phi, gamma[e], config.epsilon, k, e)

    target_prev = float(previous[e])
    raised = target_prev + config.delta
    cap_blocked = gate and raised > config.effective_cap
    adjustment = None

    if gate and not cap_blocked:
        rest = np.delete(reweighted, e)
        weights = reweighted / rest.sum() * (1.0 - target_prev - config.delta)
        weights[e] = raised
        proportions = Distribution(weights)
        adjustment = ExpansionAdjustment(
            alpha=raised / target_prev if target_prev > 0 else None,
            beta_share=1.0 - target_prev,
        )
    else:
        if cap_blocked:
            logger.info("step %d: target increment to %.4f blocked by cap %.4f",
                        losses.step, raised, config.effective_cap)
        proportions = normalize(reweighted)

    entry = HistoryEntry(
        step=losses.step, proportions=proportions, losses=losses, gamma=gamma, phi=phi,
        gate=gate, cap_blocked=cap_blocked, adjustment=adjustment,
    )
    return _advance(state, losses, entry)


def apply_step(state: SchedulerState, losses: LossVector, ref: ReferenceLossTable) -> SchedulerState:
    if state.config.mode is SchedulerMode.EXPANSION:
        return step_expansion(state, losses, ref)
    return step_robustness(state, losses, ref)


def iter_schedule(initial: SchedulerState, feedback: Iterable[LossVector], ref: ReferenceLossTable,
                  config: Optional[SchedulerConfig] = None) -> Iterator[SchedulerState]:
    """Yield the state after each step until `total_steps`; callers can persist between steps."""
    state = replace(initial, config=config) if config is not None else initial
    snapshots = iter(feedback)
    while state.step < state.config.total_steps:
        try:
            losses = next(snapshots)
        except StopIteration:
            raise FeedbackExhaustedError(
                f"feedback ended after step {state.step}; expected {state.config.total_steps} steps"
            ) from None
        state = apply_step(state, losses, ref)
        logger.debug("step %d -> %s", state.step, state.proportions)
        yield state
    if next(snapshots, None) is not None:
        logger.warning("feedback has snapshots beyond step %d; ignored", state.config.total_steps)


def run_schedule(initial: SchedulerState, feedback: Iterable[LossVector], ref: ReferenceLossTable,
                 config: Optional[SchedulerConfig] = None) -> SchedulerState:
    state = replace(initial, config=config) if config is not None else initial
    for state in iter_schedule(state, feedback, ref):
        pass
    return state
