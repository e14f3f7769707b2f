from composer.core.errors import EmptyInputError, MalformedRecordError
from composer.detector.models import SampleRecord
from composer.utils.jsonl import PathType, read_jsonl


async def load_samples(path: PathType) -> list[SampleRecord]:
    """Load {"id", "text"} generations; ids must be unique within the file."""
    samples = []
    seen = set()
    for line_no, obj in await read_jsonl(path):
        sample_id, text = obj.get('id'), obj.get('text')
        if not isinstance(sample_id, (str, int)) or isinstance(sample_id, bool):
            raise MalformedRecordError(path, line_no, "missing or invalid 'id'")
        sample_id = str(sample_id)
        if sample_id in seen:
            raise MalformedRecordError(path, line_no, f"duplicate id {sample_id!r}")
        try:
            samples.append(SampleRecord(id=sample_id, text=text))
        except EmptyInputError:
            raise MalformedRecordError(path, line_no, f"sample {sample_id!r} has empty text") from None
        seen.add(sample_id)
    if not samples:
        raise EmptyInputError(f"{path}: no samples")
    return samples
