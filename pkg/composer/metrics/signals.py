"""
Scheduling signals: learnable potential, forgetting degree and the
reference-model mastery ceiling.
"""

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from composer.core.distribution import DomainSet, LossVector
from composer.core.errors import (
    DimensionMismatchError, EmptyEpochsError, NonConsecutiveStepsError, NonFiniteError, NonPositiveLossError,
)


@dataclass(frozen=True, eq=False)
class ReferenceLossTable:
    losses: np.ndarray

    def __post_init__(self):
        arr = np.array(self.losses, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError(f"reference losses must be finite, got {arr.tolist()}")
        if np.any(arr <= 0):
            raise NonPositiveLossError(f"reference losses must be > 0, got {arr.tolist()}")
        arr.setflags(write=False)
        object.__setattr__(self, 'losses', arr)

    @property
    def k(self) -> int:
        return int(self.losses.shape[0])


@dataclass(frozen=True, eq=False)
class SignalVector:
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64)
        arr.setflags(write=False)
        object.__setattr__(self, 'values', arr)

    @property
    def k(self) -> int:
        return int(self.values.shape[0])

    def __getitem__(self, j: int) -> float:
        return float(self.values[j])

    def tolist(self) -> list[float]:
        return self.values.tolist()


def _check_positive(*values: float):
    for v in values:
        if not v > 0:
            raise NonPositiveLossError(f"losses must be > 0, got {v!r}")


def learnable_potential(loss_theta: float, loss_ref: float) -> float:
    """max{(loss_theta - loss_ref) / loss_theta, 0}"""
    _check_positive(loss_theta, loss_ref)
    return max((loss_theta - loss_ref) / loss_theta, 0.0)


def forgetting_degree(loss_t: float, loss_prev: float) -> float:
    """max{(loss_t - loss_prev) / loss_prev, 0}"""
    _check_positive(loss_t, loss_prev)
    return max((loss_t - loss_prev) / loss_prev, 0.0)


def potential_vector(losses: LossVector, ref: ReferenceLossTable) -> SignalVector:
    if losses.k != ref.k:
        raise DimensionMismatchError(ref.k, losses.k, 'loss vector')
    theta = losses.losses
    return SignalVector(np.maximum((theta - ref.losses) / theta, 0.0))


def forgetting_vector(losses: LossVector, prev: LossVector) -> SignalVector:
    if losses.k != prev.k:
        raise DimensionMismatchError(prev.k, losses.k, 'loss vector')
    if prev.step != losses.step - 1:
        raise NonConsecutiveStepsError(f"forgetting needs consecutive steps, got {prev.step} then {losses.step}")
    return SignalVector(np.maximum((losses.losses - prev.losses) / prev.losses, 0.0))


def mastery_ceiling(epoch_losses: Sequence[Sequence[float]]) -> ReferenceLossTable:
    """
    Per-domain minimum of the reference model's per-epoch average losses

    Args:
        epoch_losses: one list of per-epoch average losses per domain, in domain order

    Returns:
        ReferenceLossTable of the lowest loss each domain reached
    """
    ceiling = []
    for j, epochs in enumerate(epoch_losses):
        if len(epochs) == 0:
            raise EmptyEpochsError(f"domain {j} has no epoch losses")
        _check_positive(*epochs)
        ceiling.append(min(float(v) for v in epochs))
    return ReferenceLossTable(ceiling)


def mastery_ceiling_from_records(records: Sequence[Mapping], domains: DomainSet) -> ReferenceLossTable:
    """Group {"domain", "epoch", "avg_loss"} records by domain, then take the ceiling."""
    grouped: dict[str, list[tuple[int, float]]] = {name: [] for name in domains}
    for record in records:
        name = record['domain']
        if name not in grouped:
            raise DimensionMismatchError(domains.k, domains.k + 1, f"epoch record for unknown domain {name!r}")
        grouped[name].append((int(record['epoch']), float(record['avg_loss'])))
    for name, epochs in grouped.items():
        if not epochs:
            raise EmptyEpochsError(f"domain {name!r} has no epoch losses")
    return mastery_ceiling([[loss for _, loss in sorted(grouped[name])] for name in domains])
