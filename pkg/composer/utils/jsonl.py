import json
from os import PathLike
from typing import Union

import aiofiles

from composer.core.errors import MalformedRecordError

PathType = Union[str, PathLike]


async def read_jsonl(path: PathType) -> list[tuple[int, dict]]:
    """
    Read a JSONL file of objects

    Args:
        path: file to read; blank lines are skipped

    Returns:
        (line number, object) pairs, line numbers starting at 1

    Raises:
        MalformedRecordError: a line is not a JSON object, naming file and line
    """
    records = []
    async with aiofiles.open(path, mode='r', encoding='utf-8') as fh:
        line_no = 0
        async for line in fh:
            line_no += 1
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecordError(path, line_no, f"invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise MalformedRecordError(path, line_no, "expected a JSON object")
            records.append((line_no, obj))
    return records


def dumps_line(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(',', ':')) + '\n'
