"""Alert feed ingestion: RSS 2.0 / Atom 1.0 parsing and new-URL filtering."""

from __future__ import annotations

import logging
import re
import xml.etree.ElementTree as ET
from collections.abc import Iterable
from dataclasses import dataclass, field
from datetime import datetime, timezone
from email.utils import parsedate_to_datetime
from html import unescape

import httpx

from .errors import ConfigError, FeedError, FeedParseError, ResolutionError, UnsupportedFeedError
from .urls import DEFAULT_REDIRECTORS, is_absolute_url, resolve_alert_link

logger = logging.getLogger(__name__)

ATOM_NS = "{http://www.w3.org/2005/Atom}"
_TAG_RE = re.compile(r"<[^>]*>")


@dataclass(frozen=True)
class FeedSpec:
    id: str
    url: str
    keywords: tuple[str, ...] = ()
    enabled: bool = True

    def __post_init__(self) -> None:
        if not self.id:
            raise ConfigError("feed id must be non-empty")
        if not is_absolute_url(self.url):
            raise ConfigError(f"feed {self.id!r}: url {self.url!r} is not an absolute URL")
        object.__setattr__(self, "keywords", tuple(self.keywords))


@dataclass(frozen=True)
class FeedEntry:
    feed_id: str
    raw_link: str
    resolved_url: str
    title: str = ""
    published_at: datetime | None = None

    @property
    def key(self) -> tuple[str, str]:
        return (self.feed_id, self.resolved_url)


def check_unique_ids(feeds: Iterable[FeedSpec]) -> None:
    seen: set[str] = set()
    for f in feeds:
        if f.id in seen:
            raise ConfigError(f"duplicate feed id {f.id!r}")
        seen.add(f.id)


def _byte_offset(data: bytes, line: int, column: int) -> int:
    lines = data.split(b"\n")
    before = sum(len(l) + 1 for l in lines[: line - 1])
    current = lines[line - 1] if 0 < line <= len(lines) else b""
    # expat columns count characters, not bytes
    prefix = current.decode("utf-8", errors="replace")[:column]
    return before + len(prefix.encode("utf-8", errors="replace"))


def _plain(text: str | None) -> str:
    if not text:
        return ""
    return " ".join(unescape(_TAG_RE.sub("", text)).split())


def _parse_rfc822(value: str | None) -> datetime | None:
    if not value:
        return None
    try:
        dt = parsedate_to_datetime(value.strip())
    except (TypeError, ValueError):
        return None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def _parse_iso(value: str | None) -> datetime | None:
    if not value:
        return None
    value = value.strip()
    if value.endswith(("Z", "z")):
        value = value[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(value)
    except ValueError:
        return None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def _atom_link(entry: ET.Element) -> str | None:
    fallback = None
    for link in entry.findall(f"{ATOM_NS}link"):
        href = link.get("href")
        if not href:
            continue
        rel = link.get("rel", "alternate")
        if rel == "alternate":
            return href.strip()
        fallback = fallback or href.strip()
    return fallback


def _raw_items(root: ET.Element) -> list[tuple[str | None, str, datetime | None]]:
    if root.tag == f"{ATOM_NS}feed":
        items = []
        for entry in root.findall(f"{ATOM_NS}entry"):
            items.append(
                (
                    _atom_link(entry),
                    _plain(entry.findtext(f"{ATOM_NS}title")),
                    _parse_iso(entry.findtext(f"{ATOM_NS}published")),
                )
            )
        return items
    if root.tag == "rss" and root.get("version", "").startswith("2."):
        channel = root.find("channel")
        if channel is None:
            raise UnsupportedFeedError("RSS document has no <channel>")
        return [
            (
                (item.findtext("link") or "").strip() or None,
                _plain(item.findtext("title")),
                _parse_rfc822(item.findtext("pubDate")),
            )
            for item in channel.findall("item")
        ]
    raise UnsupportedFeedError(f"unsupported feed format: root element {root.tag!r}")


def parse_feed(
    feed_xml: str | bytes,
    feed_id: str,
    redirectors: Iterable[tuple[str, str]] = DEFAULT_REDIRECTORS,
) -> list[FeedEntry]:
    """Parse an RSS 2.0 or Atom 1.0 document into entries, in document order.

    Items lacking a usable link are skipped with a warning.
    """
    data = feed_xml.encode("utf-8") if isinstance(feed_xml, str) else feed_xml
    if isinstance(feed_xml, str):
        # the text is already decoded; a stale encoding declaration would mislead expat
        data = re.sub(rb"^(\s*<\?xml[^>]*?)\s+encoding=(['\"])[^'\"]*\2", rb"\1", data)
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        line, col = exc.position
        raise FeedParseError(f"malformed feed XML: {exc}", offset=_byte_offset(data, line, col)) from exc

    redirectors = tuple(redirectors)
    entries = []
    for link, title, published in _raw_items(root):
        if not link:
            logger.warning("feed %s: item %r has no link, skipped", feed_id, title)
            continue
        try:
            resolved = resolve_alert_link(link, redirectors)
        except ResolutionError as exc:
            logger.warning("feed %s: %s, skipped", feed_id, exc)
            continue
        entries.append(FeedEntry(feed_id, link, resolved, title, published))
    return entries


def filter_new(entries: Iterable[FeedEntry], seen: set[str] | frozenset[str]) -> list[FeedEntry]:
    """Entries whose resolved_url is not in ``seen``; first occurrence wins within the batch."""
    taken: set[str] = set()
    out = []
    for e in entries:
        if e.resolved_url in seen or e.resolved_url in taken:
            continue
        taken.add(e.resolved_url)
        out.append(e)
    return out


@dataclass
class FeedCache:
    """Validators from the last successful poll, keyed by feed id."""

    etag: dict[str, str] = field(default_factory=dict)
    last_modified: dict[str, str] = field(default_factory=dict)


def poll_feed(
    spec: FeedSpec,
    client: httpx.Client,
    cache: FeedCache | None = None,
    redirectors: Iterable[tuple[str, str]] = DEFAULT_REDIRECTORS,
) -> list[FeedEntry]:
    """GET one feed, honoring ETag/Last-Modified; 304 yields no entries."""
    headers = {}
    if cache is not None:
        if spec.id in cache.etag:
            headers["If-None-Match"] = cache.etag[spec.id]
        if spec.id in cache.last_modified:
            headers["If-Modified-Since"] = cache.last_modified[spec.id]
    try:
        resp = client.get(spec.url, headers=headers, follow_redirects=True)
    except httpx.HTTPError as exc:
        raise FeedError(f"feed {spec.id}: request failed: {exc}") from exc
    if resp.status_code == 304:
        return []
    if resp.status_code != 200:
        raise FeedError(f"feed {spec.id}: HTTP {resp.status_code}")
    if cache is not None:
        if "etag" in resp.headers:
            cache.etag[spec.id] = resp.headers["etag"]
        if "last-modified" in resp.headers:
            cache.last_modified[spec.id] = resp.headers["last-modified"]
    return parse_feed(resp.content, spec.id, redirectors)
