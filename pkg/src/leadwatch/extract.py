"""Prompt assembly, chat-completion requests and schema-checked parsing of model output."""

from __future__ import annotations

import json
import logging
import os
import time
from collections.abc import Callable
from dataclasses import dataclass
from importlib import resources
from typing import Any

import httpx

from .errors import (
    ConfigError,
    CredentialError,
    ExtractionError,
    LLMRequestError,
    OutputParseError,
    RetriesExhaustedError,
    TransientLLMError,
)
from .models import ARTICLE_JSON_SCHEMA, Article, Scale, article_from_dict, normalize_rating
from .retry import Backoff, call_with_retry

__all__ = [
    "Completion",
    "ExtractionResult",
    "ModelConfig",
    "PromptTemplate",
    "build_prompt",
    "extract_article",
    "load_prompt",
    "normalize_rating",
    "parse_article_output",
    "request_extraction",
]

logger = logging.getLogger(__name__)

DEFAULT_PROMPT_VERSION = "monitor-v2"
DEFAULT_MAX_CHARS = 30_000
TRUNCATION_MARKER = "\n\n[... article truncated ...]"
JSON_ONLY_LINE = (
    "Respond with a single JSON object only, with keys summary, usefulness_rating and "
    "use_cases (each use case: name, description, ai_model_used, strengths, challenges, "
    "newsroom_impact, link_to_demo, is_original, comparison_to_other_use_cases, "
    "newsworthiness_rating). No prose outside the JSON."
)

# prompt version -> (resource file, scale the prompt asks usefulness on)
PROMPTS: dict[str, tuple[str, Scale]] = {
    "monitor-v1": ("monitor-v1.txt", "ten"),
    "monitor-v2": ("monitor-v2.txt", "auto"),
}


@dataclass(frozen=True)
class PromptTemplate:
    system_text: str
    version: str
    usefulness_scale: Scale = "auto"

    def __post_init__(self) -> None:
        if not self.version or not self.version.strip():
            raise ConfigError("prompt template version must be non-empty")
        if not self.system_text or not self.system_text.strip():
            raise ConfigError(f"prompt template {self.version!r} has empty text")


def load_prompt(version: str = DEFAULT_PROMPT_VERSION) -> PromptTemplate:
    if not version:
        raise ConfigError("prompt version must be non-empty")
    try:
        filename, scale = PROMPTS[version]
    except KeyError:
        raise ConfigError(f"unknown prompt version {version!r}; known: {sorted(PROMPTS)}") from None
    text = resources.files("leadwatch.prompts").joinpath(filename).read_text(encoding="utf-8")
    return PromptTemplate(text.strip(), version, scale)


@dataclass(frozen=True)
class ModelConfig:
    model_name: str
    endpoint_url: str = "https://api.openai.com/v1"
    max_output_tokens: int = 16_000
    request_timeout: float = 300.0
    temperature: float | None = None
    api_key_env: str = "OPENAI_API_KEY"
    structured_output: bool = True
    # newer reasoning models reject "max_tokens"
    max_tokens_param: str = "max_completion_tokens"
    attempts: int = 3
    backoff_base: float = 1.0
    backoff_factor: float = 2.0

    def __post_init__(self) -> None:
        if not self.model_name or not self.model_name.strip():
            raise ConfigError("model_name must be non-empty")
        if self.max_output_tokens <= 0:
            raise ConfigError("max_output_tokens must be positive")

    @property
    def chat_url(self) -> str:
        url = self.endpoint_url.rstrip("/")
        return url if url.endswith("/chat/completions") else url + "/chat/completions"


def _truncate(text: str, max_chars: int) -> str:
    if len(text) <= max_chars:
        return text
    cut = text[:max_chars]
    if not text[max_chars].isspace():
        # back off to the last whitespace so no word is split
        space = max(cut.rfind(" "), cut.rfind("\n"), cut.rfind("\t"))
        if space > 0:
            cut = cut[:space]
    return cut.rstrip() + TRUNCATION_MARKER


def build_prompt(
    article_text: str,
    template: PromptTemplate,
    max_chars: int = DEFAULT_MAX_CHARS,
    *,
    json_only_line: bool = False,
) -> list[dict[str, str]]:
    """Two messages: the monitoring instructions, then the (possibly truncated) article."""
    if not article_text:
        raise ValueError("article_text must be non-empty")
    system = template.system_text
    if json_only_line:
        system = f"{system}\n\n{JSON_ONLY_LINE}"
    return [
        {"role": "system", "content": system},
        {"role": "user", "content": _truncate(article_text, max_chars)},
    ]


@dataclass(frozen=True)
class Completion:
    content: str
    input_tokens: int
    output_tokens: int
    attempts: int
    latency: float


def _retry_after(resp: httpx.Response) -> float | None:
    value = resp.headers.get("retry-after")
    if value is None:
        return None
    try:
        return max(0.0, float(value))
    except ValueError:
        return None


def _post_once(client: httpx.Client, config: ModelConfig, payload: dict[str, Any], api_key: str) -> dict[str, Any]:
    headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
    try:
        resp = client.post(config.chat_url, json=payload, headers=headers, timeout=config.request_timeout)
    except httpx.TimeoutException as exc:
        raise TransientLLMError(f"request timed out: {exc}") from exc
    except httpx.TransportError as exc:
        raise TransientLLMError(f"transport error: {exc}") from exc
    status = resp.status_code
    if status in (401, 403):
        raise CredentialError(f"endpoint rejected credentials (HTTP {status})")
    if status == 429 or status >= 500:
        raise TransientLLMError(f"HTTP {status}", retry_after=_retry_after(resp))
    if status != 200:
        raise LLMRequestError(f"HTTP {status}: {resp.text[:500]}")
    try:
        return resp.json()
    except ValueError as exc:
        raise LLMRequestError("endpoint returned a non-JSON body") from exc


def request_extraction(
    messages: list[dict[str, str]],
    config: ModelConfig,
    client: httpx.Client | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> Completion:
    """Issue one chat-completion request (with retries) and return the message content."""
    api_key = os.environ.get(config.api_key_env, "")
    if not api_key:
        raise CredentialError(f"environment variable {config.api_key_env} is not set")
    payload: dict[str, Any] = {
        "model": config.model_name,
        "messages": messages,
        config.max_tokens_param: config.max_output_tokens,
    }
    if config.temperature is not None:
        payload["temperature"] = config.temperature
    if config.structured_output:
        payload["response_format"] = {
            "type": "json_schema",
            "json_schema": {"name": "article", "strict": True, "schema": ARTICLE_JSON_SCHEMA},
        }

    attempts = 0

    def count(n: int) -> None:
        nonlocal attempts
        attempts = n

    own = client is None
    if client is None:
        client = httpx.Client()
    start = time.monotonic()
    try:
        data = call_with_retry(
            lambda: _post_once(client, config, payload, api_key),
            Backoff(config.attempts, config.backoff_base, config.backoff_factor),
            lambda exc: isinstance(exc, TransientLLMError),
            hint=lambda exc: getattr(exc, "retry_after", None),
            sleep=sleep,
            on_attempt=count,
        )
    except TransientLLMError as exc:
        raise RetriesExhaustedError(f"gave up after {attempts} attempts: {exc}", attempts) from exc
    finally:
        if own:
            client.close()
    latency = time.monotonic() - start

    try:
        message = data["choices"][0]["message"]
    except (KeyError, IndexError, TypeError) as exc:
        raise LLMRequestError("response has no choices[0].message") from exc
    content = message.get("content")
    if not content:
        refusal = message.get("refusal")
        raise OutputParseError(f"empty model content{f' (refusal: {refusal})' if refusal else ''}")
    usage = data.get("usage") or {}
    return Completion(
        content=content,
        input_tokens=int(usage.get("prompt_tokens") or 0),
        output_tokens=int(usage.get("completion_tokens") or 0),
        attempts=attempts,
        latency=latency,
    )


def parse_article_output(raw: str, usefulness_scale: Scale = "auto") -> Article:
    """Decode model content and validate it into an ``Article``.

    Raises ``OutputParseError`` for non-JSON and ``SchemaError`` for JSON
    that does not satisfy the schema.
    """
    try:
        data = json.loads(raw)
    except (TypeError, ValueError) as exc:
        raise OutputParseError(f"model output is not JSON: {exc}") from exc
    return article_from_dict(data, usefulness_scale)


@dataclass(frozen=True)
class ExtractionResult:
    article: Article
    input_tokens: int
    output_tokens: int
    latency: float
    raw_response: str
    attempts: int = 1


def extract_article(
    article_text: str,
    template: PromptTemplate,
    config: ModelConfig,
    *,
    max_chars: int = DEFAULT_MAX_CHARS,
    client: httpx.Client | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> ExtractionResult:
    messages = build_prompt(article_text, template, max_chars, json_only_line=not config.structured_output)
    completion = request_extraction(messages, config, client, sleep)
    try:
        article = parse_article_output(completion.content, template.usefulness_scale)
    except ExtractionError as exc:
        # keep the raw text around for auditing failed parses
        exc.raw_response = completion.content  # type: ignore[attr-defined]
        raise
    return ExtractionResult(
        article=article,
        input_tokens=completion.input_tokens,
        output_tokens=completion.output_tokens,
        latency=completion.latency,
        raw_response=completion.content,
        attempts=completion.attempts,
    )
