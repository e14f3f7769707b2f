"""
Classifier Client - annotate base-model generations with domain probabilities
through an OpenAI-compatible chat-completions endpoint
"""

import asyncio
import logging
import os
from typing import Optional, Sequence

import backoff
import httpx
import openai
from openai import AsyncOpenAI
from pydantic import BaseModel, ConfigDict, Field
from tqdm.asyncio import tqdm_asyncio

from config import (
    CLASSIFIER_API_KEY_ENV, CLASSIFIER_BACKOFF_FACTOR_S, CLASSIFIER_MAX_PARALLEL, CLASSIFIER_MAX_RETRIES,
    CLASSIFIER_TIMEOUT_S, MAX_DROP_FRACTION,
)
from composer.core.distribution import Distribution, DomainSet
from composer.core.errors import (
    ClassifierOutputError, EmptyInputError, EndpointUnreachableError, NoJsonFoundError, TooManyDroppedError,
)
from composer.detector.models import AnnotationRun, ProbabilityAnnotation, SampleRecord
from composer.detector.prompt import build_prompt, parse_classifier_output

logger = logging.getLogger(__name__)

RETRYABLE_ERRORS = (openai.APIError, ClassifierOutputError)


class ClassifierEndpointConfig(BaseModel):
    model_config = ConfigDict(extra='forbid', frozen=True)

    base_url: str
    model_name: str
    api_key_env: str = CLASSIFIER_API_KEY_ENV
    max_parallel: int = Field(CLASSIFIER_MAX_PARALLEL, ge=1)
    timeout_s: float = Field(CLASSIFIER_TIMEOUT_S, gt=0)
    max_retries: int = Field(CLASSIFIER_MAX_RETRIES, ge=0)
    backoff_factor_s: float = Field(CLASSIFIER_BACKOFF_FACTOR_S, ge=0)
    max_drop_fraction: float = Field(MAX_DROP_FRACTION, ge=0, le=1)


class ClassifierClient:
    """
    Client for the domain classifier endpoint

    Each sample is sent as a single user message at temperature 0; the first
    choice's content is parsed into a Distribution over the configured domains.
    """

    def __init__(self, endpoint: ClassifierEndpointConfig, domains: DomainSet,
                 http_client: Optional[httpx.AsyncClient] = None):
        """
        Initialize classifier client

        Args:
            endpoint: endpoint settings; the API key is read from the variable it names
            domains: domain set the classifier output is parsed against
            http_client: optional transport override (tests inject a mock transport here)
        """
        self.endpoint = endpoint
        self.domains = domains

        api_key = os.getenv(endpoint.api_key_env)
        if not api_key:
            logger.warning("%s is not set; calling %s without a key", endpoint.api_key_env, endpoint.base_url)
            api_key = 'EMPTY'

        # retries are owned by backoff below, not by the SDK
        self.client = AsyncOpenAI(
            base_url=endpoint.base_url,
            api_key=api_key,
            timeout=endpoint.timeout_s,
            max_retries=0,
            http_client=http_client,
        )
        self._classify = backoff.on_exception(
            backoff.expo,
            RETRYABLE_ERRORS,
            max_tries=endpoint.max_retries + 1,
            factor=endpoint.backoff_factor_s,
            jitter=None,
            on_backoff=self._log_retry,
        )(self.classify_once)

    @staticmethod
    def _log_retry(details):
        sample = details['args'][0]
        logger.debug("retrying sample %s (attempt %d) after %s", sample.id, details['tries'], details['exception'])

    async def classify_once(self, sample: SampleRecord) -> Distribution:
        response = await self.client.chat.completions.create(
            model=self.endpoint.model_name,
            messages=[{'role': 'user', 'content': build_prompt(sample, self.domains)}],
            temperature=0,
        )
        if not response.choices:
            raise NoJsonFoundError(f"empty reply for sample {sample.id!r}")
        return parse_classifier_output(response.choices[0].message.content or '', self.domains)

    async def annotate(self, samples: Sequence[SampleRecord], progress: bool = False) -> AnnotationRun:
        if not samples:
            raise EmptyInputError("no samples to annotate")

        sem = asyncio.Semaphore(self.endpoint.max_parallel)

        async def annotate_one(sample: SampleRecord):
            async with sem:
                try:
                    return sample.id, await self._classify(sample)
                except RETRYABLE_ERRORS as exc:
                    logger.warning("dropping sample %s after %d attempts: %s",
                                   sample.id, self.endpoint.max_retries + 1, exc)
                    return sample.id, None

        results = await tqdm_asyncio.gather(
            *(annotate_one(s) for s in samples), desc='annotate', unit='sample', disable=not progress,
        )

        annotations = [ProbabilityAnnotation(sample_id=sid, probs=probs) for sid, probs in results if probs is not None]
        dropped_ids = [sid for sid, probs in results if probs is None]
        run = AnnotationRun(annotations=annotations, attempted=len(samples), dropped_ids=dropped_ids)

        if not annotations:
            raise EndpointUnreachableError(
                f"all {len(samples)} classifier requests to {self.endpoint.base_url} failed"
            )
        if run.dropped / run.attempted > self.endpoint.max_drop_fraction:
            raise TooManyDroppedError(run.dropped, run.attempted, self.endpoint.max_drop_fraction)
        if run.dropped:
            logger.info("annotated %d of %d samples, dropped %d", len(annotations), run.attempted, run.dropped)
        return run

    async def close(self):
        await self.client.close()


async def annotate(samples: Sequence[SampleRecord], endpoint: ClassifierEndpointConfig, domains: DomainSet,
                   http_client: Optional[httpx.AsyncClient] = None, progress: bool = False) -> AnnotationRun:
    client = ClassifierClient(endpoint, domains, http_client=http_client)
    try:
        return await client.annotate(samples, progress=progress)
    finally:
        # an injected http client belongs to the caller
        if http_client is None:
            await client.close()
