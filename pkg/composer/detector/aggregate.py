from typing import Sequence

import numpy as np

from composer.core.distribution import Distribution, normalize
from composer.core.errors import DimensionMismatchError, EmptyInputError
from composer.detector.models import DetectionReport, ProbabilityAnnotation


def aggregate_probabilities(matrix) -> Distribution:
    """Column mean of an N x k matrix of per-sample domain probabilities."""
    arr = np.asarray(matrix, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise EmptyInputError("no annotations to aggregate")
    return normalize(arr.mean(axis=0))


def aggregate_iteration(annotations: Sequence[ProbabilityAnnotation]) -> Distribution:
    if not annotations:
        raise EmptyInputError("no annotations to aggregate")
    k = annotations[0].probs.k
    for annotation in annotations:
        if annotation.probs.k != k:
            raise DimensionMismatchError(k, annotation.probs.k, f"annotation {annotation.sample_id!r}")
    return aggregate_probabilities(np.stack([a.probs.weights for a in annotations]))


def detect(iteration_results: Sequence[Distribution]) -> DetectionReport:
    """Average per-iteration distributions and report their spread (sample stddev)."""
    if not iteration_results:
        raise EmptyInputError("detection needs at least one iteration")
    k = iteration_results[0].k
    for d in iteration_results:
        if d.k != k:
            raise DimensionMismatchError(k, d.k, 'iteration distribution')

    matrix = np.stack([d.weights for d in iteration_results])
    if len(iteration_results) > 1:
        stddev = matrix.std(axis=0, ddof=1)
    else:
        stddev = np.zeros(k)
    return DetectionReport(
        per_iteration=list(iteration_results),
        mean=normalize(matrix.mean(axis=0)),
        per_domain_stddev=stddev,
        max_stddev_pct=100.0 * float(stddev.max()),
    )
