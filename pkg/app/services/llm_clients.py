"""Completion and summarization clients.

Every model-backed step talks to a ``CompletionClient``: the HTTP chat client in
production and deterministic stand-ins in tests and offline runs.
"""

import logging
import time
from typing import Dict, List, Optional, Protocol

from app.config import ClientSettings
from app.constants.llm_model import ClientRole
from app.prompts import format_prompt
from app.prompts.summary_prompts import DESCRIPTION_SUMMARY_PROMPT
from app.services.ai_service import get_openai_client
from app.utils.exceptions import ClientFailureException, SummarizerFailureException
from app.utils.text_utils import first_sentence, sha256_text

logger = logging.getLogger(__name__)


class CompletionClient(Protocol):
    provider: str

    def complete(self, prompt: str) -> str: ...


class Summarizer(Protocol):
    def summarize(self, element_name: str, observations: List[str]) -> str: ...


class OpenAIChatClient:
    provider = "openai"

    def __init__(self, settings: ClientSettings, role: ClientRole):
        self.settings = settings
        self.role = role
        self.model = settings.model_for(role)
        self.temperature = settings.temperature_for(role)
        self._client = None

    @property
    def client(self):
        if self._client is None:
            self._client = get_openai_client(
                self.role.value,
                base_url=self.settings.base_url,
                timeout=self.settings.timeout_seconds,
            )
        return self._client

    def complete(self, prompt: str) -> str:
        attempts = self.settings.max_retries + 1
        last_error: Optional[Exception] = None
        for attempt in range(attempts):
            try:
                response = self.client.chat.completions.create(
                    model=self.model,
                    messages=[{"role": "user", "content": prompt}],
                    temperature=self.temperature,
                )
                return response.choices[0].message.content or ""
            except ClientFailureException:
                raise
            except Exception as e:
                last_error = e
                logger.warning(
                    f"{self.role.value} completion failed (attempt {attempt + 1}/{attempts}): {e}"
                )
                if attempt + 1 < attempts:
                    time.sleep(min(2**attempt, 8))
        raise ClientFailureException(
            f"{self.role.value} client failed after {attempts} attempts: {last_error}"
        )


class ScriptedMockClient:
    """Replays canned completions keyed by the SHA-256 of the prompt."""

    provider = "mock"

    def __init__(
        self,
        script: Optional[Dict[str, str]] = None,
        default_reply: str = "",
        failure: Optional[str] = None,
    ):
        self.script = dict(script or {})
        self.default_reply = default_reply
        self.failure = failure
        self.calls: List[str] = []

    def add(self, prompt: str, reply: str):
        self.script[sha256_text(prompt)] = reply

    def complete(self, prompt: str) -> str:
        self.calls.append(prompt)
        if self.failure:
            raise ClientFailureException(self.failure)
        return self.script.get(sha256_text(prompt), self.default_reply)


class FirstSentenceSummarizer:
    """Deterministic summarizer: the first sentence of every observation, in order."""

    def summarize(self, element_name: str, observations: List[str]) -> str:
        sentences = [first_sentence(text) for text in observations]
        return " ".join(sentence for sentence in sentences if sentence)


class LLMSummarizer:
    def __init__(self, client: CompletionClient, language: str = "English"):
        self.client = client
        self.language = language

    def summarize(self, element_name: str, observations: List[str]) -> str:
        prompt = format_prompt(
            DESCRIPTION_SUMMARY_PROMPT,
            element_name=element_name,
            language=self.language,
            observations="\n".join(f"- {text}" for text in observations),
        )
        try:
            summary = self.client.complete(prompt).strip()
        except ClientFailureException as e:
            raise SummarizerFailureException(f"summarizing {element_name}: {e.message}")
        if not summary:
            raise SummarizerFailureException(f"summarizing {element_name}: empty reply")
        return summary
