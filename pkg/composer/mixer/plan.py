import heapq
import logging
from dataclasses import dataclass

import numpy as np

from composer.core.distribution import Distribution, DomainSet
from composer.core.errors import InvalidBudgetError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MixPlan:
    budget: int
    counts: tuple[int, ...]
    seed: int

    def to_dict(self, domains: DomainSet) -> dict:
        return {'budget': self.budget, 'counts': dict(zip(domains.names, self.counts)), 'seed': self.seed}


def build_mix_plan(proportions: Distribution, budget: int, seed: int) -> MixPlan:
    """Integer per-domain counts by largest remainder; ties go to the lower domain index."""
    k = proportions.k
    if budget < k:
        raise InvalidBudgetError(f"budget {budget} is smaller than the number of domains ({k})")

    exact = proportions.weights * budget
    counts = np.floor(exact).astype(np.int64)
    fractions = exact - counts
    remainder = int(budget - counts.sum())
    for j in heapq.nsmallest(remainder, range(k), key=lambda j: (-fractions[j], j)):
        counts[j] += 1

    # a domain with positive weight never goes empty
    for j in range(k):
        if proportions.weights[j] > 0 and counts[j] == 0:
            donor = int(np.argmax(counts))
            counts[donor] -= 1
            counts[j] += 1
            logger.debug("moved one sample from domain %d to zero-count domain %d", donor, j)

    if int(counts.sum()) != budget:
        raise InvalidBudgetError(f"cannot apportion budget {budget} over {proportions}")
    return MixPlan(budget=budget, counts=tuple(int(c) for c in counts), seed=seed)
