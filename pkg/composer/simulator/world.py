"""
Synthetic loss-dynamics world standing in for a fine-tuning run.

Each step, domain j receives an exposure from the mixed proportions through
the affinity matrix; exposed domains move toward their floor, unexposed ones
drift toward their ceiling.
"""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from config import (
    DEFAULT_DOMAINS, SIM_AFFINITY, SIM_CEILING, SIM_FLOOR, SIM_FORGET_RATE, SIM_INITIAL_LOSS, SIM_KNOWLEDGE,
    SIM_LEARN_RATE, SIM_NOISE_SCALE, SIM_REFERENCE_MARGIN, SIM_SATURATION,
)
from composer.core.distribution import Distribution, DomainSet
from composer.core.errors import ConfigError, DimensionMismatchError
from composer.metrics.signals import ReferenceLossTable
from composer.utils.seeding import derive_rng


def _vector(values, k: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.shape != (k,):
        raise DimensionMismatchError(k, arr.size, f"world {name}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"world {name} has non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SimWorld:
    domains: DomainSet
    losses: np.ndarray
    floor: np.ndarray
    ceiling: np.ndarray
    learn_rate: np.ndarray
    forget_rate: np.ndarray
    affinity: np.ndarray
    rng_seed: int = 0
    saturation: float = SIM_SATURATION
    noise_scale: float = SIM_NOISE_SCALE
    knowledge: Optional[Distribution] = None
    step: int = 0

    def __post_init__(self):
        if not isinstance(self.domains, DomainSet):
            object.__setattr__(self, 'domains', DomainSet(tuple(self.domains)))
        k = self.domains.k
        for name in ('losses', 'floor', 'ceiling', 'learn_rate', 'forget_rate'):
            object.__setattr__(self, name, _vector(getattr(self, name), k, name))

        affinity = np.array(self.affinity, dtype=np.float64)
        if affinity.shape != (k, k):
            raise DimensionMismatchError(k * k, affinity.size, 'world affinity')
        if not np.all(np.diag(affinity) == 1.0):
            raise ConfigError("affinity diagonal must be 1")
        if np.any(affinity < 0) or np.any(affinity > 1):
            raise ConfigError("affinity entries must lie in [0, 1]")
        affinity.setflags(write=False)
        object.__setattr__(self, 'affinity', affinity)

        if self.knowledge is not None and not isinstance(self.knowledge, Distribution):
            object.__setattr__(self, 'knowledge', Distribution(self.knowledge))
        if self.knowledge is not None and self.knowledge.k != k:
            raise DimensionMismatchError(k, self.knowledge.k, 'world knowledge')

        if np.any(self.floor <= 0):
            raise ConfigError("world floors must be > 0")
        if np.any(self.floor >= self.ceiling):
            raise ConfigError("world floors must lie below ceilings")
        if self.step == 0 and (np.any(self.losses <= self.floor) or np.any(self.losses > self.ceiling)):
            raise ConfigError("initial losses must lie in (floor, ceiling]")
        if np.any(self.losses < self.floor) or np.any(self.losses > self.ceiling):
            raise ConfigError("losses left [floor, ceiling]")
        if np.any(self.learn_rate <= 0) or np.any(self.learn_rate > 1):
            raise ConfigError("learn_rate must lie in (0, 1]")
        if np.any(self.forget_rate < 0) or np.any(self.forget_rate >= 1):
            raise ConfigError("forget_rate must lie in [0, 1)")
        if self.saturation < 0 or self.noise_scale < 0:
            raise ConfigError("saturation and noise_scale must be >= 0")

    @property
    def k(self) -> int:
        return self.domains.k

    def reference_losses(self, margin: float = SIM_REFERENCE_MARGIN) -> ReferenceLossTable:
        return ReferenceLossTable(self.floor + margin)

    def reseeded(self, seed: int) -> 'SimWorld':
        return replace(self, rng_seed=seed)

    def to_dict(self) -> dict:
        return {
            'domains': list(self.domains.names),
            'losses': self.losses.tolist(),
            'floor': self.floor.tolist(),
            'ceiling': self.ceiling.tolist(),
            'learn_rate': self.learn_rate.tolist(),
            'forget_rate': self.forget_rate.tolist(),
            'affinity': self.affinity.tolist(),
            'rng_seed': self.rng_seed,
            'saturation': self.saturation,
            'noise_scale': self.noise_scale,
            'knowledge': None if self.knowledge is None else self.knowledge.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> 'SimWorld':
        fields = {'domains', 'losses', 'floor', 'ceiling', 'learn_rate', 'forget_rate', 'affinity',
                  'rng_seed', 'saturation', 'noise_scale', 'knowledge'}
        unknown = set(payload) - fields
        if unknown:
            raise ConfigError(f"unknown world fields: {sorted(unknown)}")
        missing = {'domains', 'losses', 'floor', 'ceiling', 'learn_rate', 'forget_rate', 'affinity'} - set(payload)
        if missing:
            raise ConfigError(f"world is missing fields: {sorted(missing)}")
        k = len(payload['domains'])
        data = dict(payload)
        # scalars broadcast to every domain
        for name in ('losses', 'floor', 'ceiling', 'learn_rate', 'forget_rate'):
            if isinstance(data[name], (int, float)):
                data[name] = [float(data[name])] * k
        return cls(**data)


def exposure(world: SimWorld, proportions: Distribution) -> np.ndarray:
    """Effective per-domain exposure in [0, 1], after saturation."""
    x = np.clip(world.affinity @ proportions.weights, 0.0, 1.0)
    if world.saturation == 0:
        return x
    kappa = world.saturation
    return (1.0 - np.exp(-kappa * x)) / (1.0 - np.exp(-kappa))


def sim_step(world: SimWorld, proportions: Distribution, noise_scale: float) -> SimWorld:
    if proportions.k != world.k:
        raise DimensionMismatchError(world.k, proportions.k, 'proportions')
    if noise_scale < 0:
        raise ConfigError("noise_scale must be >= 0")

    e = exposure(world, proportions)
    loss = world.losses
    updated = (loss
               - world.learn_rate * e * (loss - world.floor)
               + world.forget_rate * (1.0 - e) * (world.ceiling - loss))
    if noise_scale > 0:
        updated = updated + noise_scale * derive_rng(world.rng_seed, 'sim-noise', world.step).standard_normal(world.k)
    updated = np.clip(updated, world.floor, world.ceiling)
    return replace(world, losses=updated, step=world.step + 1)


def default_world(seed: int = 0) -> SimWorld:
    domains = DomainSet(tuple(DEFAULT_DOMAINS))
    k = domains.k
    affinity = np.eye(k)
    for receiver, source, strength in SIM_AFFINITY:
        affinity[domains.index(receiver), domains.index(source)] = strength
    return SimWorld(
        domains=domains,
        losses=np.full(k, SIM_INITIAL_LOSS),
        floor=np.full(k, SIM_FLOOR),
        ceiling=np.full(k, SIM_CEILING),
        learn_rate=np.full(k, SIM_LEARN_RATE),
        forget_rate=np.full(k, SIM_FORGET_RATE),
        affinity=affinity,
        rng_seed=seed,
        saturation=SIM_SATURATION,
        noise_scale=SIM_NOISE_SCALE,
        knowledge=Distribution(SIM_KNOWLEDGE),
    )
