import json
from collections import Counter

import numpy as np
import pytest

from composer.core.distribution import Distribution, DomainSet, normalize, uniform
from composer.core.errors import EmptyPoolError, InvalidBudgetError, MissingPoolError, PoolSizeMismatchError
from composer.mixer.materialize import DomainPool, materialize, select_indices
from composer.mixer.plan import build_mix_plan
from composer.utils.seeding import derive_rng
from tests.conftest import write_jsonl


@pytest.mark.parametrize('weights, budget, expected', [
    ([1 / 6] * 6, 60_000, [10_000] * 6),
    ([0.5, 0.3, 0.2], 10, [5, 3, 2]),
    ([1 / 3, 1 / 3, 1 / 3], 10, [4, 3, 3]),
])
def test_build_mix_plan_examples(weights, budget, expected):
    plan = build_mix_plan(Distribution(weights), budget, seed=1)
    assert list(plan.counts) == expected
    assert plan.budget == budget


def test_build_mix_plan_rejects_small_budget():
    with pytest.raises(InvalidBudgetError):
        build_mix_plan(uniform(6), 5, seed=0)


def test_random_plans_are_exact_and_close():
    rng = np.random.default_rng(31)
    for _ in range(500):
        k = int(rng.integers(2, 9))
        budget = int(rng.integers(5 * k, 100_000))
        # every domain gets at least one sample's worth of weight
        proportions = normalize(rng.uniform(0.2, 1.0, size=k))
        plan = build_mix_plan(proportions, budget, seed=0)
        counts = np.array(plan.counts)
        assert counts.sum() == budget
        assert np.abs(counts / budget - proportions.weights).sum() <= k / budget



def test_tiny_proportions_still_get_one_sample():
    rng = np.random.default_rng(32)
    for _ in range(500):
        k = int(rng.integers(2, 9))
        budget = int(rng.integers(k, 20 * k))
        weights = rng.uniform(0.2, 1.0, size=k)
        tiny = rng.random(k) < 0.5
        tiny[int(rng.integers(k))] = False
        weights[tiny] = rng.uniform(1e-6, 1e-3, size=int(tiny.sum()))
        proportions = normalize(weights)
        counts = np.array(build_mix_plan(proportions, budget, seed=0).counts)
        assert counts.sum() == budget
        assert np.all(counts >= 1)
        # each forced sample moves one count away from the largest domain
        assert np.abs(counts / budget - proportions.weights).sum() <= 3 * k / budget


def test_min_one_rule_can_exceed_rounding_bound():
    proportions = normalize([0.99] + [0.002] * 5)
    counts = build_mix_plan(proportions, 100, seed=0).counts
    assert counts == (95, 1, 1, 1, 1, 1)
    # rounding alone would stay within k / budget = 0.06
    assert np.abs(np.array(counts) / 100 - proportions.weights).sum() == pytest.approx(0.08)


def test_plan_converges_with_budget():
    d = Distribution([0.37, 0.21, 0.17, 0.25])
    for budget in (60, 600, 60_000):
        counts = np.array(build_mix_plan(d, budget, seed=0).counts)
        assert np.abs(counts / budget - d.weights).sum() <= d.k / budget


def test_zero_weight_domains_only_get_zero():
    plan = build_mix_plan(Distribution([0.0, 0.999, 0.001]), 10, seed=0)
    assert plan.counts[0] == 0
    assert plan.counts[2] >= 1
    assert sum(plan.counts) == 10


def test_seed_changes_selection_not_counts():
    d = Distribution([0.5, 0.25, 0.25])
    assert build_mix_plan(d, 100, seed=1).counts == build_mix_plan(d, 100, seed=2).counts


def test_select_indices_downsample_is_distinct():
    picks = select_indices(2, 5, derive_rng(0, 'mixer', 0))
    assert len(picks) == 2 and len(set(picks.tolist())) == 2


def test_select_indices_upsample_is_balanced():
    picks = select_indices(7, 3, derive_rng(0, 'mixer', 0))
    multiplicity = Counter(picks.tolist())
    assert sorted(multiplicity.values()) == [2, 2, 3]


@pytest.fixture
def pools(tmp_path):
    domains = DomainSet(('law', 'code', 'other'))
    paths = []
    for j, (name, size) in enumerate([('law', 5), ('code', 3), ('other', 4)]):
        rows = [{'instruction': f'{name} question {i}', 'output': f'{name} answer {i}'} for i in range(size)]
        paths.append(write_jsonl(tmp_path / f'{name}.jsonl', rows))
    return domains, [DomainPool(domain=j, path=p) for j, p in enumerate(paths)]


async def test_materialize_counts_and_domain_field(pools, tmp_path):
    domains, domain_pools = pools
    plan = build_mix_plan(Distribution([0.2, 0.7, 0.1]), 10, seed=5)
    epoch = await materialize(plan, domain_pools, domains, tmp_path / 'out' / 'epoch_1.jsonl')
    lines = epoch.path.read_text(encoding='utf-8').splitlines()
    assert len(lines) == 10


    rows = [json.loads(line) for line in lines]
    per_domain = Counter(row['domain'] for row in rows)
    assert per_domain == {'law': 2, 'code': 7, 'other': 1}
    law = [row['instruction'] for row in rows if row['domain'] == 'law']
    assert len(set(law)) == 2
    code = Counter(row['instruction'] for row in rows if row['domain'] == 'code')
    assert sorted(code.values()) == [2, 2, 3]


async def test_materialize_is_byte_deterministic(pools, tmp_path):
    domains, domain_pools = pools
    plan = build_mix_plan(Distribution([0.3, 0.3, 0.4]), 20, seed=11)
    first = await materialize(plan, domain_pools, domains, tmp_path / 'a.jsonl')
    second = await materialize(plan, domain_pools, domains, tmp_path / 'b.jsonl')
    assert first.path.read_bytes() == second.path.read_bytes()
    other_seed = build_mix_plan(Distribution([0.3, 0.3, 0.4]), 20, seed=12)
    third = await materialize(other_seed, domain_pools, domains, tmp_path / 'c.jsonl')
    assert third.path.read_bytes() != first.path.read_bytes()


async def test_materialize_skips_zero_domains_without_pool(pools, tmp_path):
    domains, domain_pools = pools
    plan = build_mix_plan(Distribution([0.5, 0.5, 0.0]), 6, seed=0)
    epoch = await materialize(plan, domain_pools[:2], domains, tmp_path / 'e.jsonl')
    assert '"other"' not in epoch.path.read_text(encoding='utf-8')


async def test_materialize_pool_errors(pools, tmp_path):
    domains, domain_pools = pools
    plan = build_mix_plan(Distribution([0.4, 0.3, 0.3]), 10, seed=0)
    with pytest.raises(MissingPoolError):
        await materialize(plan, domain_pools[:2], domains, tmp_path / 'x.jsonl')
    empty = tmp_path / 'empty.jsonl'
    empty.write_text('', encoding='utf-8')
    with pytest.raises(EmptyPoolError):
        await materialize(plan, [*domain_pools[:2], DomainPool(domain=2, path=empty)], domains, tmp_path / 'y.jsonl')
    with pytest.raises(PoolSizeMismatchError):
        await materialize(plan, [*domain_pools[:2], DomainPool(domain=2, path=domain_pools[2].path, size=9)],
                          domains, tmp_path / 'z.jsonl')
