"""
Domain registry and probability-vector arithmetic.

Every vector in the toolkit is indexed against a DomainSet; values are
immutable, so all functions here are safe to call from any thread.
"""

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from config import DEFAULT_INVERSE_FLOOR, SUM_TOLERANCE
from composer.core.errors import (
    AllZeroError, ConfigError, DataError, DimensionMismatchError, InvalidDomainSetError, InvalidKError,
    NegativeWeightError, NonFiniteError, NonPositiveLossError, NotNormalizedError,
)


def _frozen_array(values: Iterable[float]) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatchError(1, arr.ndim, 'array rank')
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DomainSet:
    names: tuple[str, ...]

    def __post_init__(self):
        names = tuple(self.names)
        object.__setattr__(self, 'names', names)
        if len(names) < 2:
            raise InvalidKError(f"a domain set needs at least 2 domains, got {len(names)}")
        if any(not isinstance(n, str) or not n.strip() for n in names):
            raise InvalidDomainSetError("domain names must be non-empty strings")
        if len(set(names)) != len(names):
            raise InvalidDomainSetError(f"domain names must be unique: {list(names)}")

    @property
    def k(self) -> int:
        return len(self.names)

    def __len__(self) -> int:
        return len(self.names)

    def __iter__(self):
        return iter(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise InvalidDomainSetError(f"unknown domain {name!r}; known: {list(self.names)}") from None

    def vector(self, mapping: Mapping[str, float], what: str = 'mapping') -> np.ndarray:
        """Order a {domain: value} mapping by this set; keys must match exactly."""
        missing = [n for n in self.names if n not in mapping]
        extra = [key for key in mapping if key not in self.names]
        if missing or extra:
            raise DimensionMismatchError(
                self.k, len(mapping), f"{what} (missing {missing}, unexpected {extra})"
            )
        return np.array([float(mapping[n]) for n in self.names], dtype=np.float64)

    def mapping(self, values: Sequence[float]) -> dict[str, float]:
        if len(values) != self.k:
            raise DimensionMismatchError(self.k, len(values))
        return {n: float(v) for n, v in zip(self.names, values)}


@dataclass(frozen=True, eq=False)
class Distribution:
    weights: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.weights)
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError(f"distribution has non-finite weights: {arr.tolist()}")
        if np.any(arr < 0):
            raise NegativeWeightError(f"distribution has negative weights: {arr.tolist()}")
        total = float(arr.sum())
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise NotNormalizedError(f"weights sum to {total!r}, not 1")
        object.__setattr__(self, 'weights', arr)

    @property
    def k(self) -> int:
        return int(self.weights.shape[0])

    def __len__(self) -> int:
        return self.k

    def __getitem__(self, j: int) -> float:
        return float(self.weights[j])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Distribution):
            return NotImplemented
        return np.array_equal(self.weights, other.weights)

    def __hash__(self):
        return hash(self.weights.tobytes())

    def __repr__(self) -> str:
        return f"Distribution({[round(w, 6) for w in self.weights.tolist()]})"

    def tolist(self) -> list[float]:
        return self.weights.tolist()


@dataclass(frozen=True, eq=False)
class LossVector:
    step: int
    losses: np.ndarray

    def __post_init__(self):
        if self.step < 0:
            raise DataError(f"loss step must be non-negative, got {self.step}")
        arr = _frozen_array(self.losses)
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError(f"step {self.step}: non-finite losses {arr.tolist()}")
        if np.any(arr <= 0):
            raise NonPositiveLossError(f"step {self.step}: losses must be > 0, got {arr.tolist()}")
        object.__setattr__(self, 'losses', arr)

    @property
    def k(self) -> int:
        return int(self.losses.shape[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, LossVector):
            return NotImplemented
        return self.step == other.step and np.array_equal(self.losses, other.losses)

    def __hash__(self):
        return hash((self.step, self.losses.tobytes()))


def normalize(raw: Sequence[float]) -> Distribution:
    arr = np.asarray(raw, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"cannot normalize non-finite weights {arr.tolist()}")
    if np.any(arr < 0):
        raise NegativeWeightError(f"cannot normalize negative weights {arr.tolist()}")
    total = arr.sum()
    if total == 0:
        raise AllZeroError("cannot normalize an all-zero vector")
    return Distribution(arr / total)


def uniform(k: int) -> Distribution:
    if k < 2:
        raise InvalidKError(f"uniform distribution needs k >= 2, got {k}")
    return Distribution(np.full(k, 1.0 / k))


def inverse(d: Distribution, floor: float = DEFAULT_INVERSE_FLOOR) -> Distribution:
    """Reciprocal weighting: weight_j proportional to 1 / max(d_j, floor)."""
    if not floor > 0:
        raise ConfigError(f"inverse floor must be > 0, got {floor}")
    return normalize(1.0 / np.maximum(d.weights, floor))


def l1_distance(a: Distribution, b: Distribution) -> float:
    if a.k != b.k:
        raise DimensionMismatchError(a.k, b.k, 'distribution')
    return float(np.abs(a.weights - b.weights).sum())
