"""Article fetching with bounded redirects, body caps, retries and per-host pacing."""

from __future__ import annotations

import logging
import re
import threading
import time
from collections.abc import Callable
from dataclasses import dataclass
from datetime import datetime, timezone
from urllib.parse import urlsplit

import httpx

from .errors import FetchError, PermanentFetchError, RetryableFetchError, UnsupportedContentError
from .htmltext import extract_text, word_count
from .retry import Backoff, call_with_retry
from .urls import canonicalize_url

logger = logging.getLogger(__name__)

HTML_TYPES = ("text/html", "application/xhtml+xml")
DEFAULT_USER_AGENT = "leadwatch/0.1 (+news monitoring)"
_META_CHARSET = re.compile(rb"""<meta[^>]+charset=["']?([\w-]+)""", re.I)


@dataclass(frozen=True)
class FetchPolicy:
    timeout: float = 20.0
    max_redirects: int = 5
    max_body_bytes: int = 2_000_000
    attempts: int = 3
    backoff_base: float = 1.0
    backoff_factor: float = 2.0
    user_agent: str = DEFAULT_USER_AGENT
    min_host_interval: float = 1.0
    thin_word_threshold: int = 50
    max_concurrency: int = 4

    @property
    def backoff(self) -> Backoff:
        return Backoff(self.attempts, self.backoff_base, self.backoff_factor)


@dataclass(frozen=True)
class ArticleDocument:
    url: str
    fetched_at: datetime
    http_status: int
    html: str
    title: str
    text: str
    word_count: int
    final_url: str = ""
    redirects: int = 0
    truncated: bool = False

    def is_thin(self, threshold: int) -> bool:
        return self.word_count < threshold


class HostThrottle:
    """Serialize requests per host and space them at least ``interval`` seconds apart."""

    def __init__(
        self,
        interval: float,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.interval = interval
        self._clock = clock
        self._sleep = sleep
        self._guard = threading.Lock()
        self._locks: dict[str, threading.Lock] = {}
        self._last: dict[str, float] = {}

    def _lock(self, host: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(host, threading.Lock())

    def run(self, url: str, fn: Callable[[], object]):
        host = (urlsplit(url).hostname or "").lower()
        with self._lock(host):
            last = self._last.get(host)
            if last is not None:
                wait = self.interval - (self._clock() - last)
                if wait > 0:
                    self._sleep(wait)
            try:
                return fn()
            finally:
                self._last[host] = self._clock()


def _decode(body: bytes, content_type: str) -> str:
    charset = None
    m = re.search(r"charset=([\w-]+)", content_type, re.I)
    if m:
        charset = m.group(1)
    else:
        m2 = _META_CHARSET.search(body[:4096])
        if m2:
            charset = m2.group(1).decode("ascii", "ignore")
    try:
        return body.decode(charset or "utf-8", errors="replace")
    except LookupError:
        return body.decode("utf-8", errors="replace")


@dataclass
class _Raw:
    status: int
    final_url: str
    redirects: int
    content_type: str
    body: bytes
    truncated: bool = False


def _get_once(client: httpx.Client, url: str, policy: FetchPolicy) -> _Raw:
    try:
        with client.stream("GET", url, follow_redirects=True, timeout=policy.timeout) as resp:
            status = resp.status_code
            if 400 <= status < 500:
                raise PermanentFetchError(f"HTTP {status} for {url}", url=url, status=status)
            if status >= 500:
                raise RetryableFetchError(f"HTTP {status} for {url}", url=url, status=status)
            if status != 200:
                raise PermanentFetchError(f"unexpected HTTP {status} for {url}", url=url, status=status)
            ctype = resp.headers.get("content-type", "")
            mime = ctype.split(";", 1)[0].strip().lower()
            if mime and mime not in HTML_TYPES:
                raise UnsupportedContentError(f"content type {mime!r} for {url}", url=url, status=status)
            chunks: list[bytes] = []
            size = 0
            truncated = False
            for chunk in resp.iter_bytes():
                room = policy.max_body_bytes - size
                if len(chunk) > room:
                    chunks.append(chunk[:room])
                    size += room
                    truncated = True
                    break
                chunks.append(chunk)
                size += len(chunk)
            return _Raw(status, str(resp.url), len(resp.history), ctype, b"".join(chunks), truncated)
    except httpx.TooManyRedirects as exc:
        raise PermanentFetchError(f"more than {policy.max_redirects} redirects for {url}", url=url) from exc
    except httpx.TimeoutException as exc:
        raise RetryableFetchError(f"timeout fetching {url}", url=url) from exc
    except httpx.TransportError as exc:
        raise RetryableFetchError(f"network error fetching {url}: {exc}", url=url) from exc


def make_client(policy: FetchPolicy) -> httpx.Client:
    return httpx.Client(
        headers={"User-Agent": policy.user_agent},
        timeout=policy.timeout,
        max_redirects=policy.max_redirects,
        follow_redirects=True,
    )


def fetch_article(
    url: str,
    policy: FetchPolicy,
    client: httpx.Client | None = None,
    throttle: HostThrottle | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> ArticleDocument:
    """Fetch ``url`` and return the document with extracted text.

    Raises ``RetryableFetchError`` once retries are exhausted on timeouts and
    5xx, ``PermanentFetchError`` on 4xx or redirect overflow, and
    ``UnsupportedContentError`` for non-HTML responses.
    """
    own = client is None
    if client is None:
        client = make_client(policy)
    try:
        def once() -> _Raw:
            if throttle is not None:
                return throttle.run(url, lambda: _get_once(client, url, policy))
            return _get_once(client, url, policy)

        raw = call_with_retry(
            once,
            policy.backoff,
            lambda exc: isinstance(exc, FetchError) and exc.retryable,
            sleep=sleep,
        )
    finally:
        if own:
            client.close()

    html = _decode(raw.body, raw.content_type)
    title, text = extract_text(html)
    return ArticleDocument(
        url=canonicalize_url(url),
        fetched_at=datetime.now(timezone.utc),
        http_status=raw.status,
        html=html,
        title=title,
        text=text,
        word_count=word_count(text),
        final_url=raw.final_url,
        redirects=raw.redirects,
        truncated=raw.truncated,
    )
