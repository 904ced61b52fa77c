"""Pipeline configuration: a JSON file mapped onto dataclasses."""

from __future__ import annotations

import json
import os
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

from .digest import DigestSpec
from .errors import ConfigError
from .extract import DEFAULT_MAX_CHARS, DEFAULT_PROMPT_VERSION, ModelConfig, load_prompt
from .feeds import FeedSpec, check_unique_ids
from .fetch import FetchPolicy
from .store import DEFAULT_THETA
from .urls import DEFAULT_REDIRECTORS

CONFIG_ENV = "LEADWATCH_CONFIG"
DEFAULT_CONFIG_NAME = "leadwatch.json"
_HHMM = re.compile(r"^([01]\d|2[0-3]):([0-5]\d)$")

# keyword combinations for the alert feeds; each needs its own alert feed URL
DEFAULT_KEYWORDS = (
    "AI, Journalism",
    "AI, Journalism, Use Cases",
    "AI, Newsroom, Use Cases",
    "Generative AI, Journalism",
    "Generative AI, Journalism, Use Cases",
    "Generative AI, Newsroom",
    "Generative AI, Newsroom, Use Cases",
)


def parse_hhmm(value: str) -> tuple[int, int]:
    m = _HHMM.match(value or "")
    if not m:
        raise ConfigError(f"schedule {value!r} is not HH:MM (24h, UTC)")
    return int(m.group(1)), int(m.group(2))


@dataclass(frozen=True)
class PipelineConfig:
    feeds: tuple[FeedSpec, ...] = ()
    fetch: FetchPolicy = field(default_factory=FetchPolicy)
    model: ModelConfig = field(default_factory=lambda: ModelConfig("o3"))
    prompt_version: str = DEFAULT_PROMPT_VERSION
    max_chars: int = DEFAULT_MAX_CHARS
    dedup_theta: float = DEFAULT_THETA
    digest: DigestSpec = field(default_factory=DigestSpec)
    schedule: str = "07:00"
    price_in_per_million: float = 0.0
    price_out_per_million: float = 0.0
    llm_concurrency: int = 4
    db_path: str = "leadwatch.db"
    log_path: str | None = "leadwatch.log"
    redirectors: tuple[tuple[str, str], ...] = DEFAULT_REDIRECTORS

    def __post_init__(self) -> None:
        object.__setattr__(self, "feeds", tuple(self.feeds))
        object.__setattr__(self, "redirectors", tuple(tuple(r) for r in self.redirectors))
        check_unique_ids(self.feeds)
        parse_hhmm(self.schedule)
        load_prompt(self.prompt_version)
        if not 0.0 <= self.dedup_theta <= 1.0:
            raise ConfigError(f"dedup_theta {self.dedup_theta} outside [0, 1]")
        if self.max_chars <= 0:
            raise ConfigError("max_chars must be positive")
        if self.llm_concurrency < 1:
            raise ConfigError("llm_concurrency must be >= 1")
        if self.price_in_per_million < 0 or self.price_out_per_million < 0:
            raise ConfigError("prices must be non-negative")

    @property
    def schedule_time(self) -> tuple[int, int]:
        return parse_hhmm(self.schedule)

    def estimated_cost(self, input_tokens: int, output_tokens: int) -> float:
        return (input_tokens * self.price_in_per_million + output_tokens * self.price_out_per_million) / 1e6

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["feeds"] = [{**asdict(f), "keywords": list(f.keywords)} for f in self.feeds]
        d["redirectors"] = [list(r) for r in self.redirectors]
        d["digest"] = {
            "threshold": self.digest.threshold,
            "format": self.digest.format,
            "include_duplicates": self.digest.include_duplicates,
        }
        return d


def _build(cls, data: Any, where: str):
    if data is None:
        return cls() if cls is not ModelConfig else ModelConfig("o3")
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(data: dict[str, Any], base_dir: Path | None = None) -> PipelineConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    data = dict(data)
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    feeds = []
    for i, f in enumerate(data.pop("feeds", []) or []):
        feeds.append(_build(FeedSpec, f, f"feeds[{i}]"))
    data["feeds"] = feeds
    data["fetch"] = _build(FetchPolicy, data.get("fetch"), "fetch")
    data["model"] = _build(ModelConfig, data.get("model"), "model")
    data["digest"] = _build(DigestSpec, data.get("digest"), "digest")
    if "redirectors" in data:
        data["redirectors"] = tuple(tuple(r) for r in data["redirectors"])
    if base_dir is not None:
        for key in ("db_path", "log_path"):
            value = data.get(key, getattr(PipelineConfig, key, None))
            if value and value != ":memory:" and not os.path.isabs(value):
                data[key] = str(base_dir / value)
    try:
        return PipelineConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data, path.resolve().parent)


def resolve_config_path(flag: str | None) -> Path | None:
    """Config path from the flag, else the environment, else ./leadwatch.json if present."""
    if flag:
        return Path(flag)
    if os.environ.get(CONFIG_ENV):
        return Path(os.environ[CONFIG_ENV])
    default = Path(DEFAULT_CONFIG_NAME)
    return default if default.exists() else None


def default_config_dict() -> dict[str, Any]:
    feeds = [
        {
            "id": f"alert-{i}",
            "url": "https://www.google.com/alerts/feeds/REPLACE_ME/REPLACE_ME",
            "keywords": [k.strip() for k in kw.split(",")],
            "enabled": False,
        }
        for i, kw in enumerate(DEFAULT_KEYWORDS, 1)
    ]
    d = PipelineConfig().to_dict()
    d["feeds"] = feeds
    return d
