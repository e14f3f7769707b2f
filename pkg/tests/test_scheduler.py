import numpy as np
import pytest
from pydantic import ValidationError

from composer.core.distribution import Distribution, LossVector, normalize, uniform
from composer.core.errors import (
    ConfigError, FeedbackExhaustedError, InvalidKError, StepOrderViolationError,
)
from composer.metrics.signals import ReferenceLossTable, SignalVector
from composer.scheduler.models import SchedulerConfig, SchedulerMode
from composer.scheduler.steps import (
    apply_step, expansion_gate, init_state, iter_schedule, run_schedule, step_expansion, step_robustness,
)


def robustness(**kwargs) -> SchedulerConfig:
    return SchedulerConfig(mode=SchedulerMode.ROBUSTNESS, **kwargs)


def expansion(target: int = 0, **kwargs) -> SchedulerConfig:
    return SchedulerConfig(mode=SchedulerMode.EXPANSION, target_domain=target, **kwargs)


def losses_for_gamma(gamma, step=1):
    """Losses against a unit reference that produce the requested potentials."""
    return LossVector(step, 1.0 / (1.0 - np.asarray(gamma, dtype=float)))


UNIT_REF_2 = ReferenceLossTable([1.0, 1.0])
UNIT_REF_6 = ReferenceLossTable([1.0] * 6)


def test_config_defaults_and_validation():
    config = SchedulerConfig()
    assert (config.sigma, config.delta, config.epsilon, config.total_steps) == (0.5, 0.1, 1.0, 4)
    assert config.target_cap == 0.95
    with pytest.raises(ValidationError):
        SchedulerConfig(mode=SchedulerMode.EXPANSION)
    with pytest.raises(ValidationError):
        expansion(delta=0.5, target_cap=0.4)
    with pytest.raises(ValidationError):
        SchedulerConfig(sigma=-0.1)
    with pytest.raises(ValidationError):
        expansion(target_cap=0.999)


def test_init_state():
    detected = Distribution([0.3, 0.7])
    state = init_state(detected, robustness())
    assert state.step == 0
    assert state.proportions == detected
    assert state.history == ()
    with pytest.raises(ConfigError):
        init_state(detected, expansion(target=2))


def test_robustness_zero_and_equal_gamma_keep_proportions():
    state = init_state(Distribution([0.3, 0.7]), robustness())
    after = step_robustness(state, LossVector(1, [1.0, 1.0]), UNIT_REF_2)
    np.testing.assert_allclose(after.proportions.weights, [0.3, 0.7], atol=1e-12)
    after = step_robustness(state, losses_for_gamma([0.4, 0.4]), UNIT_REF_2)
    np.testing.assert_allclose(after.proportions.weights, [0.3, 0.7], atol=1e-12)


def test_robustness_worked_example():
    state = init_state(uniform(2), robustness(sigma=0.5))
    after = step_robustness(state, LossVector(1, [2.0, 1.0]), ReferenceLossTable([1.2, 1.0]))
    np.testing.assert_allclose(after.proportions.weights, [6 / 11, 5 / 11], atol=1e-12)
    assert after.step == 1
    assert len(after.history) == 1
    assert after.history[0].gate is None


def test_robustness_matches_naive_loop():
    rng = np.random.default_rng(42)
    for _ in range(1000):
        k = int(rng.integers(2, 8))
        p = normalize(rng.uniform(0.01, 1.0, size=k))
        gamma = rng.uniform(0.0, 0.9, size=k)
        sigma = float(rng.uniform(0.0, 2.0))
        state = init_state(p, robustness(sigma=sigma))
        after = step_robustness(state, losses_for_gamma(gamma), ReferenceLossTable([1.0] * k))
        used = after.history[0].gamma.values
        raw = [p[j] * (1 + sigma * used[j]) for j in range(k)]
        total = sum(raw)
        for j in range(k):
            assert abs(after.proportions[j] - raw[j] / total) <= 1e-12


def test_robustness_prefers_higher_potential_at_equal_weight():
    state = init_state(uniform(3), robustness())
    after = step_robustness(state, losses_for_gamma([0.5, 0.2, 0.0]), ReferenceLossTable([1.0] * 3))
    w = after.proportions.weights
    assert w[0] > w[1] > w[2]


def test_step_order_violations():
    state = init_state(uniform(2), robustness(total_steps=1))
    with pytest.raises(StepOrderViolationError):
        step_robustness(state, LossVector(2, [1.0, 1.0]), UNIT_REF_2)
    done = step_robustness(state, LossVector(1, [1.0, 1.0]), UNIT_REF_2)
    with pytest.raises(StepOrderViolationError):
        step_robustness(done, LossVector(2, [1.0, 1.0]), UNIT_REF_2)


@pytest.mark.parametrize('phi, gamma_e, expected', [
    ([0.0] * 6, 0.1, True),
    ([0.0] + [0.2] * 5, 0.1, False),
    ([0.0] * 6, 0.0, False),
])
def test_expansion_gate_examples(phi, gamma_e, expected):
    assert expansion_gate(SignalVector(phi), gamma_e, 1.0, 6, 0) is expected


def test_expansion_gate_divides_by_k():
    # sum over non-targets 0.5; 0.5/5 = 0.1 would fail, 0.5/6 passes
    phi = SignalVector([0.0, 0.1, 0.1, 0.1, 0.1, 0.1])
    assert expansion_gate(phi, 0.1, 1.0, 6, 0) is True
    with pytest.raises(InvalidKError):
        expansion_gate(SignalVector([0.0]), 0.1, 1.0, 1, 0)


def test_expansion_first_step_increments_target():
    state = init_state(uniform(6), expansion(target=2))
    after = step_expansion(state, losses_for_gamma([0.3, 0.1, 0.2, 0.0, 0.4, 0.1]), UNIT_REF_6)
    assert after.proportions[2] == pytest.approx(1 / 6 + 0.1, abs=1e-15)
    assert after.proportions[2] - 1 / 6 == pytest.approx(0.1, abs=1e-15)
    assert abs(after.proportions.weights.sum() - 1.0) <= 1e-12
    entry = after.history[0]
    assert entry.gate is True and entry.cap_blocked is False
    assert entry.phi.tolist() == [0.0] * 6
    assert entry.adjustment.beta_share == pytest.approx(5 / 6)
    assert entry.adjustment.alpha == pytest.approx((1 / 6 + 0.1) * 6)


def test_expansion_non_target_rescale_uses_reweighted_proportions():
    state = init_state(Distribution([0.2, 0.3, 0.5]), expansion(target=0, sigma=1.0))
    after = step_expansion(state, losses_for_gamma([0.5, 0.5, 0.0]), ReferenceLossTable([1.0] * 3))
    reweighted = np.array([0.2 * 1.5, 0.3 * 1.5, 0.5])
    expected_rest = reweighted[1:] / reweighted[1:].sum() * (1 - 0.2 - 0.1)
    np.testing.assert_allclose(after.proportions.weights, [0.3, *expected_rest], atol=1e-12)


def test_expansion_closed_gate_matches_robustness():
    start = Distribution([0.2, 0.3, 0.5])
    ref = ReferenceLossTable([1.0] * 3)
    exp_state = step_expansion(init_state(start, expansion(target=0)), LossVector(1, [2.0, 2.0, 2.0]), ref)
    rob_state = step_robustness(init_state(start, robustness()), LossVector(1, [2.0, 2.0, 2.0]), ref)
    # the target has no potential left at step 2 while others regress
    second = LossVector(2, [1.0, 3.0, 3.0])
    exp_state = step_expansion(exp_state, second, ref)
    assert exp_state.history[-1].gate is False
    rob_from_same = step_robustness(
        init_state(exp_state.history[0].proportions, robustness()), LossVector(1, [1.0, 3.0, 3.0]), ref,
    )
    np.testing.assert_array_equal(exp_state.proportions.weights, rob_from_same.proportions.weights)
    assert rob_state.step == 1


def test_expansion_cap_blocks_increment():
    start = Distribution([0.92, 0.04, 0.04])
    state = init_state(start, expansion(target=0, delta=0.1, target_cap=0.95))
    gamma = [0.5, 0.2, 0.1]
    after = step_expansion(state, losses_for_gamma(gamma), ReferenceLossTable([1.0] * 3))
    entry = after.history[0]
    assert entry.gate is True
    assert entry.cap_blocked is True
    assert entry.adjustment is None
    used = entry.gamma.values
    np.testing.assert_allclose(after.proportions.weights, normalize(start.weights * (1 + 0.5 * used)).weights,
                               atol=1e-15)


def test_uncapped_expansion_ignores_gate():
    state = init_state(uniform(3), expansion(target=0, uncapped=True))
    ref = ReferenceLossTable([1.0] * 3)
    state = step_expansion(state, LossVector(1, [1.0, 2.0, 2.0]), ref)
    assert state.proportions[0] == pytest.approx(1 / 3 + 0.1)
    gated = init_state(uniform(3), expansion(target=0))
    gated = step_expansion(gated, LossVector(1, [1.0, 2.0, 2.0]), ref)
    assert gated.history[0].gate is False


def test_target_rises_by_delta_each_open_step():
    state = init_state(uniform(6), expansion(target=4))
    trace = [LossVector(t, [2.5 - 0.1 * t] * 6) for t in range(1, 5)]
    final = run_schedule(state, trace, UNIT_REF_6)
    targets = [uniform(6)[4]] + [entry.proportions[4] for entry in final.history]
    assert all(entry.gate for entry in final.history)
    for before, after in zip(targets, targets[1:]):
        assert after - before == pytest.approx(0.1, abs=1e-12)


def test_sum_and_positivity_preserved_over_random_traces():
    rng = np.random.default_rng(99)
    for mode in (robustness(total_steps=6), expansion(target=1, total_steps=6)):
        for _ in range(50):
            start = normalize(rng.uniform(0.05, 1.0, size=5))
            trace = [LossVector(t, rng.uniform(0.5, 3.0, size=5)) for t in range(1, 7)]
            final = run_schedule(init_state(start, mode), trace, ReferenceLossTable([0.8] * 5))
            for entry in final.history:
                assert abs(entry.proportions.weights.sum() - 1) <= 1e-9
                assert np.all(entry.proportions.weights > 0)


def test_sigma_sweep_keeps_domain_ranking():
    ref = ReferenceLossTable([1.0] * 6)
    # every step ranks the domains' potentials the same way
    trace = [LossVector(t, [(3.5 - 0.3 * j) * (1 - 0.1 * t) for j in range(6)]) for t in range(1, 5)]
    orderings = []
    for sigma in (0.1, 0.3, 0.5, 0.8, 1.0):
        final = run_schedule(init_state(uniform(6), robustness(sigma=sigma)), trace, ref)
        orderings.append([tuple(np.argsort(entry.proportions.weights)) for entry in final.history])
    assert all(ordering == orderings[0] for ordering in orderings)


def test_run_schedule_fold_matches_loop():
    rng = np.random.default_rng(4)
    ref = ReferenceLossTable([1.1] * 4)
    trace = [LossVector(t, rng.uniform(1.0, 3.0, size=4)) for t in range(1, 5)]
    for config in (robustness(), expansion(target=3)):
        start = init_state(normalize([1, 2, 3, 4]), config)
        folded = run_schedule(start, trace, ref)
        looped = start
        for losses in trace:
            looped = apply_step(looped, losses, ref)
        np.testing.assert_array_equal(folded.proportions.weights, looped.proportions.weights)
        assert len(folded.history) == 4


def test_run_schedule_constant_reference_losses_is_fixed_point():
    start = Distribution([0.1, 0.2, 0.7])
    trace = [LossVector(t, [1.0, 1.0, 1.0]) for t in range(1, 5)]
    final = run_schedule(init_state(start, robustness()), trace, ReferenceLossTable([1.0] * 3))
    for entry in final.history:
        np.testing.assert_allclose(entry.proportions.weights, start.weights, atol=1e-15)


def test_run_schedule_single_step_and_exhaustion():
    state = init_state(uniform(2), robustness(total_steps=1))
    final = run_schedule(state, [LossVector(1, [1.5, 1.5])], UNIT_REF_2)
    assert len(final.history) == 1
    with pytest.raises(FeedbackExhaustedError):
        run_schedule(init_state(uniform(2), robustness(total_steps=3)), [LossVector(1, [1.5, 1.5])], UNIT_REF_2)


def test_schedule_is_deterministic():
    trace = [LossVector(t, [2.0 + 0.1 * t, 1.5, 1.8]) for t in range(1, 5)]
    ref = ReferenceLossTable([1.0, 1.2, 1.1])
    runs = [run_schedule(init_state(uniform(3), expansion(target=1)), trace, ref) for _ in range(2)]
    for a, b in zip(runs[0].history, runs[1].history):
        assert a.proportions.weights.tobytes() == b.proportions.weights.tobytes()
        assert a.gate == b.gate


def test_iter_schedule_yields_each_state_before_failing():
    trace = [LossVector(1, [1.5, 1.5]), LossVector(2, [1.4, 1.5]), LossVector(4, [1.3, 1.5])]
    seen = []
    with pytest.raises(StepOrderViolationError):
        for state in iter_schedule(init_state(uniform(2), robustness()), trace, UNIT_REF_2):
            seen.append(state.step)
    assert seen == [1, 2]
