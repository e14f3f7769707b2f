import json

import httpx
import pytest

from composer.core.distribution import DomainSet
from config import DEFAULT_DOMAINS


@pytest.fixture
def six_domains() -> DomainSet:
    return DomainSet(tuple(DEFAULT_DOMAINS))


def chat_completion(content: str) -> dict:
    return {
        'id': 'chatcmpl-mock',
        'object': 'chat.completion',
        'created': 0,
        'model': 'mock-classifier',
        'choices': [{
            'index': 0,
            'message': {'role': 'assistant', 'content': content},
            'finish_reason': 'stop',
        }],
    }


@pytest.fixture
def mock_classifier():
    """Build an httpx client whose handler maps each prompt to (status, reply text)."""
    calls = []

    def factory(reply):
        def handler(request: httpx.Request) -> httpx.Response:
            body = json.loads(request.content)
            calls.append((request, body))
            status, content = reply(body['messages'][0]['content'])
            if status != 200:
                return httpx.Response(status, json={'error': {'message': 'mock failure'}})
            return httpx.Response(200, json=chat_completion(content))

        return httpx.AsyncClient(transport=httpx.MockTransport(handler))

    factory.calls = calls
    return factory


def write_jsonl(path, rows):
    with open(path, 'w', encoding='utf-8') as fh:
        for row in rows:
            fh.write(json.dumps(row) + '\n')
    return path
