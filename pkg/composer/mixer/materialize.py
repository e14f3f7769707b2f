"""
Epoch dataset materialization.

Each domain is down-sampled without replacement or up-sampled by balanced
duplication to its planned count, then all records are shuffled together.
"""

import asyncio
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from composer.core.distribution import DomainSet
from composer.core.errors import (
    ConfigError, DimensionMismatchError, EmptyPoolError, MissingPoolError, PoolSizeMismatchError,
)
from composer.mixer.plan import MixPlan
from composer.utils.jsonl import read_jsonl
from composer.utils.seeding import derive_rng
from storage.repositories.artifacts import ArtifactRepository

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DomainPool:
    domain: int
    path: Path
    size: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, 'path', Path(self.path))
        if self.size is not None and self.size < 1:
            raise EmptyPoolError(f"pool {self.path} declares size {self.size}")


@dataclass(frozen=True)
class EpochDataset:
    path: Path
    counts: tuple[int, ...]
    pool_sizes: dict[int, int]


def select_indices(count: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Indices into a pool of `size` records yielding exactly `count` picks."""
    if count <= size:
        return rng.choice(size, size=count, replace=False)
    repeats, rest = divmod(count, size)
    return np.concatenate([np.tile(np.arange(size), repeats), rng.choice(size, size=rest, replace=False)])


async def _load_pool(pool: DomainPool) -> list[dict]:
    records = [obj for _, obj in await read_jsonl(pool.path)]
    if not records:
        raise EmptyPoolError(f"pool {pool.path} has no records")
    if pool.size is not None and pool.size != len(records):
        raise PoolSizeMismatchError(f"pool {pool.path} declares {pool.size} records but holds {len(records)}")
    return records


async def materialize(plan: MixPlan, pools: Sequence[DomainPool], domains: DomainSet,
                      out_path: Union[str, Path]) -> EpochDataset:
    if len(plan.counts) != domains.k:
        raise DimensionMismatchError(domains.k, len(plan.counts), 'mix plan')

    by_domain = {}
    for pool in pools:
        if pool.domain in by_domain:
            raise ConfigError(f"domain {domains.names[pool.domain]!r} has more than one pool")
        if not 0 <= pool.domain < domains.k:
            raise ConfigError(f"pool {pool.path} names domain index {pool.domain} outside {domains.k} domains")
        by_domain[pool.domain] = pool

    demanded = [j for j, count in enumerate(plan.counts) if count > 0]
    missing = [domains.names[j] for j in demanded if j not in by_domain]
    if missing:
        raise MissingPoolError(f"no pool configured for domains {missing}")

    loaded = await asyncio.gather(*(_load_pool(by_domain[j]) for j in demanded))

    rows = []
    pool_sizes = {}
    for j, records in zip(demanded, loaded):
        count = plan.counts[j]
        pool_sizes[j] = len(records)
        picks = select_indices(count, len(records), derive_rng(plan.seed, 'mixer', j))
        mode = 'down' if count <= len(records) else 'up'
        logger.info("%s: %d of %d records (%s-sampled)", domains.names[j], count, len(records), mode)
        for i in picks:
            rows.append({**records[i], 'domain': domains.names[j]})

    order = derive_rng(plan.seed, 'shuffle').permutation(len(rows))
    out_path = Path(out_path)
    await ArtifactRepository(out_path.parent).write_jsonl(out_path.name, (rows[i] for i in order))
    return EpochDataset(path=out_path, counts=plan.counts, pool_sizes=pool_sizes)
