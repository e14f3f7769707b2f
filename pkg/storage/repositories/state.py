import json
import logging
from pathlib import Path
from typing import Optional, Union

import aiofiles
from pydantic import ValidationError

from composer.core.distribution import DomainSet
from composer.core.errors import CorruptStateError
from composer.scheduler.models import SchedulerState
from storage.models import STATE_VERSION, StateFile
from storage.repositories.artifacts import ArtifactRepository

logger = logging.getLogger(__name__)


class StateRepository:
    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)

    async def load(self, domains: DomainSet) -> Optional[SchedulerState]:
        if not self.path.exists():
            return None
        async with aiofiles.open(self.path, mode='r', encoding='utf-8') as fh:
            text = await fh.read()
        try:
            state_file = StateFile.model_validate(json.loads(text))
            state = state_file.to_state()
        except (json.JSONDecodeError, ValidationError, ValueError) as exc:
            raise CorruptStateError(f"state file {self.path} is unreadable: {exc}") from None
        if state_file.version != STATE_VERSION:
            raise CorruptStateError(f"state file {self.path} has version {state_file.version}, expected {STATE_VERSION}")
        if tuple(state_file.domains) != domains.names:
            raise CorruptStateError(f"state file {self.path} was written for domains {state_file.domains}")
        if len(state.history) != state.step:
            raise CorruptStateError(f"state file {self.path} has {len(state.history)} history entries at step {state.step}")
        return state

    async def save(self, state: SchedulerState, domains: DomainSet) -> Path:
        payload = StateFile.from_state(state, domains).model_dump(mode='json')
        await ArtifactRepository(self.path.parent).write_json(self.path.name, payload)
        logger.debug("saved state at step %d to %s", state.step, self.path)
        return self.path
