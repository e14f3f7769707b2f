import json
from pathlib import Path
from typing import Mapping, Union

import aiofiles
from pydantic import ValidationError

from composer.core.distribution import DomainSet, LossVector
from composer.core.errors import DataError, MalformedRecordError
from composer.metrics.signals import ReferenceLossTable, mastery_ceiling_from_records
from composer.utils.jsonl import read_jsonl
from storage.models import FeedbackLine


class FeedbackRepository:
    """Reads loss feedback and reference-model losses for one domain set."""

    def __init__(self, domains: DomainSet):
        self.domains = domains

    def parse_line(self, obj: dict, path='<feedback>', line_no: int = 1) -> LossVector:
        try:
            return FeedbackLine.model_validate(obj).to_loss_vector(self.domains)
        except ValidationError as exc:
            raise MalformedRecordError(path, line_no, f"invalid feedback line: {exc.errors()[0]['msg']}") from None
        except DataError as exc:
            raise MalformedRecordError(path, line_no, str(exc)) from None

    async def load_feedback(self, path: Union[str, Path]) -> list[LossVector]:
        return [self.parse_line(obj, path, line_no) for line_no, obj in await read_jsonl(path)]

    async def load_reference(self, source: Union[Mapping[str, float], str, Path]) -> ReferenceLossTable:
        """
        Reference losses from an inline mapping, a {domain: loss} JSON file, or
        a JSONL of {"domain", "epoch", "avg_loss"} lines reduced to the mastery ceiling.
        """
        if isinstance(source, Mapping):
            return ReferenceLossTable(self.domains.vector(source, 'reference_losses'))
        path = Path(source)
        if path.suffix == '.jsonl':
            rows = await read_jsonl(path)
            for line_no, obj in rows:
                if not {'domain', 'epoch', 'avg_loss'} <= set(obj):
                    raise MalformedRecordError(path, line_no, "expected domain, epoch and avg_loss")
            return mastery_ceiling_from_records([obj for _, obj in rows], self.domains)
        async with aiofiles.open(path, mode='r', encoding='utf-8') as fh:
            try:
                payload = json.loads(await fh.read())
            except json.JSONDecodeError as exc:
                raise MalformedRecordError(path, exc.lineno, f"invalid JSON ({exc.msg})") from None
        if not isinstance(payload, dict):
            raise MalformedRecordError(path, 1, "expected a {domain: loss} object")
        return ReferenceLossTable(self.domains.vector(payload, f'reference losses in {path}'))
