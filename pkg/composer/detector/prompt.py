"""
Classifier prompt construction and reply parsing.

The six-domain prompt is used whenever the configured domains are the
default six (case-insensitive); any other domain set gets the same wording
with its own names and JSON keys.
"""

import json
import math

from config import CLASSIFIER_SUM_TOLERANCE
from composer.core.distribution import Distribution, DomainSet, normalize
from composer.core.errors import (
    MissingKeyError, NoJsonFoundError, NonNumericValueError, SumOutOfToleranceError, UnexpectedKeyError,
)
from composer.detector.models import SampleRecord

SIX_DOMAIN_LABELS = ('Law', 'Medicine', 'Finance', 'Science', 'Code', 'Other')

SIX_DOMAIN_INTRO = (
    "You are a data domain annotation expert, and you currently have the following six data domains: "
    "law, medical && health care, finance, science, code, and other."
)

CLASSIFY_INSTRUCTION = (
    "Please classify the following text fragment based on their topic and structure by providing the "
    "probability distribution of its belonging to each category, where the sum of probabilities across "
    "all domain categories equals 1, without additional commentary:"
)

# Sums this close to 1 are taken as-is so formatted distributions parse back unchanged
EXACT_SUM_TOLERANCE = 1e-12


def is_six_domain_layout(domains: DomainSet) -> bool:
    return sorted(n.casefold() for n in domains) == sorted(label.casefold() for label in SIX_DOMAIN_LABELS)


def prompt_labels(domains: DomainSet) -> list[str]:
    """JSON keys the classifier is asked to fill, in domain order."""
    if is_six_domain_layout(domains):
        by_fold = {label.casefold(): label for label in SIX_DOMAIN_LABELS}
        return [by_fold[n.casefold()] for n in domains]
    return list(domains.names)


def _json_skeleton(labels: list[str]) -> str:
    body = ',\n'.join(f'    {json.dumps(label)}: ""' for label in labels)
    return '```json\n{\n' + body + '\n}\n```'


def _enumerate(names: list[str]) -> str:
    if len(names) == 2:
        return f"{names[0]} and {names[1]}"
    return ', '.join(names[:-1]) + f", and {names[-1]}"


def build_prompt(sample: SampleRecord, domains: DomainSet) -> str:
    if is_six_domain_layout(domains):
        intro = SIX_DOMAIN_INTRO
    else:
        intro = (
            f"You are a data domain annotation expert, and you currently have the following {domains.k} "
            f"data domains: {_enumerate(list(domains.names))}."
        )
    return (
        f"{intro} {CLASSIFY_INSTRUCTION}\n\n"
        f"# Text\n{sample.text}\n\n"
        f"Output Format:\n{_json_skeleton(prompt_labels(domains))}"
    )


def _first_json_object(raw: str) -> dict:
    decoder = json.JSONDecoder()
    start = raw.find('{')
    while start != -1:
        try:
            obj, _ = decoder.raw_decode(raw, start)
        except json.JSONDecodeError:
            obj = None
        if isinstance(obj, dict):
            return obj
        start = raw.find('{', start + 1)
    raise NoJsonFoundError(f"no JSON object in classifier output: {raw[:120]!r}")


def _as_probability(key: str, value) -> float:
    if isinstance(value, bool):
        raise NonNumericValueError(f"value for {key!r} is not a number: {value!r}")
    if isinstance(value, (int, float)):
        number = float(value)
    elif isinstance(value, str):
        try:
            number = float(value.strip())
        except ValueError:
            raise NonNumericValueError(f"value for {key!r} is not a number: {value!r}") from None
    else:
        raise NonNumericValueError(f"value for {key!r} is not a number: {value!r}")
    if not math.isfinite(number) or number < 0:
        raise NonNumericValueError(f"value for {key!r} is not a probability: {value!r}")
    return number


def _match_keys(obj: dict, domains: DomainSet) -> dict[int, object]:
    exact = {name: j for j, name in enumerate(domains)}
    folded = {name.casefold(): j for j, name in enumerate(domains)}
    matched: dict[int, object] = {}
    for key, value in obj.items():
        j = exact.get(key)
        if j is None:
            j = folded.get(str(key).casefold())
        if j is None:
            raise UnexpectedKeyError(f"classifier output has unknown key {key!r}")
        if j in matched:
            raise UnexpectedKeyError(f"classifier output repeats domain {domains.names[j]!r} as {key!r}")
        matched[j] = value
    return matched


def parse_classifier_output(raw: str, domains: DomainSet) -> Distribution:
    obj = _first_json_object(raw)
    matched = _match_keys(obj, domains)
    for j, name in enumerate(domains):
        if j not in matched:
            raise MissingKeyError(name)

    values = [_as_probability(domains.names[j], matched[j]) for j in range(domains.k)]
    total = math.fsum(values)
    if abs(total - 1.0) > CLASSIFIER_SUM_TOLERANCE:
        raise SumOutOfToleranceError(f"classifier probabilities sum to {total:.4f}")
    if abs(sum(values) - 1.0) <= EXACT_SUM_TOLERANCE:
        return Distribution(values)
    return normalize(values)


def format_classifier_output(d: Distribution, domains: DomainSet) -> str:
    """Render a distribution the way the classifier is asked to answer."""
    payload = {label: repr(float(w)) for label, w in zip(prompt_labels(domains), d.weights)}
    return '```json\n' + json.dumps(payload, indent=4) + '\n```'
