import json
import os
from pathlib import Path
from typing import Iterable, Union

import aiofiles

from composer.utils.jsonl import dumps_line


class ArtifactRepository:
    """Writes run outputs under one directory; every write is temp-file then rename."""

    def __init__(self, out_dir: Union[str, Path]):
        self.out_dir = Path(out_dir)

    def path(self, name: Union[str, Path]) -> Path:
        return self.out_dir / name

    async def write_text(self, name: Union[str, Path], text: str) -> Path:
        target = self.path(name)
        target.parent.mkdir(parents=True, exist_ok=True)
        tmp = target.with_name(target.name + '.tmp')
        async with aiofiles.open(tmp, mode='w', encoding='utf-8', newline='\n') as fh:
            await fh.write(text)
            await fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, target)
        return target

    async def write_json(self, name: Union[str, Path], payload) -> Path:
        return await self.write_text(name, json.dumps(payload, indent=2, ensure_ascii=False) + '\n')

    async def write_jsonl(self, name: Union[str, Path], rows: Iterable) -> Path:
        return await self.write_text(name, ''.join(dumps_line(row) for row in rows))

    async def read_json(self, name: Union[str, Path]):
        async with aiofiles.open(self.path(name), mode='r', encoding='utf-8') as fh:
            return json.loads(await fh.read())
