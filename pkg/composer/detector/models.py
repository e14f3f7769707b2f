import json
from dataclasses import dataclass, field

import numpy as np

from composer.core.distribution import Distribution, DomainSet
from composer.core.errors import EmptyInputError


@dataclass(frozen=True)
class SampleRecord:
    id: str
    text: str

    def __post_init__(self):
        if not isinstance(self.text, str) or not self.text.strip():
            raise EmptyInputError(f"sample {self.id!r} has empty text")


@dataclass(frozen=True)
class ProbabilityAnnotation:
    sample_id: str
    probs: Distribution


@dataclass(frozen=True)
class AnnotationRun:
    annotations: list[ProbabilityAnnotation]
    attempted: int
    dropped_ids: list[str] = field(default_factory=list)

    @property
    def dropped(self) -> int:
        return len(self.dropped_ids)

    def summary(self) -> dict:
        return {'attempted': self.attempted, 'annotated': len(self.annotations), 'dropped': self.dropped,
                'dropped_ids': self.dropped_ids}


@dataclass(frozen=True, eq=False)
class DetectionReport:
    per_iteration: list[Distribution]
    mean: Distribution
    per_domain_stddev: np.ndarray
    max_stddev_pct: float

    def to_dict(self) -> dict:
        return {
            'per_iteration': [d.tolist() for d in self.per_iteration],
            'mean': self.mean.tolist(),
            'stddev': [float(s) for s in self.per_domain_stddev],
            'max_stddev_pct': float(self.max_stddev_pct),
        }

    def to_json(self, domains: DomainSet | None = None) -> str:
        payload = self.to_dict()
        if domains is not None:
            payload['domains'] = list(domains.names)
        return json.dumps(payload, indent=2)

    @classmethod
    def from_dict(cls, payload: dict) -> 'DetectionReport':
        return cls(
            per_iteration=[Distribution(w) for w in payload['per_iteration']],
            mean=Distribution(payload['mean']),
            per_domain_stddev=np.asarray(payload['stddev'], dtype=np.float64),
            max_stddev_pct=float(payload['max_stddev_pct']),
        )
