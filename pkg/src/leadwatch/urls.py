"""URL helpers: alert-redirect unwrapping and canonical forms."""

from __future__ import annotations

import fnmatch
from collections.abc import Iterable
from urllib.parse import parse_qs, urlsplit, urlunsplit

from .errors import InvalidURLError, ResolutionError

# (host glob, path) pairs whose ``url`` query parameter holds the real target
DEFAULT_REDIRECTORS: tuple[tuple[str, str], ...] = (
    ("google.com", "/url"),
    ("*.google.com", "/url"),
)

TRACKING_PARAMS = frozenset({"gclid", "fbclid"})
DEFAULT_PORTS = {"http": 80, "https": 443}
_MAX_UNWRAP = 8


def is_absolute_url(url: str) -> bool:
    try:
        parts = urlsplit(url)
        parts.port  # noqa: B018 - raises on a malformed port
    except ValueError:
        return False
    return parts.scheme.lower() in ("http", "https") and bool(parts.hostname)


def _is_redirector(url: str, redirectors: Iterable[tuple[str, str]]) -> bool:
    parts = urlsplit(url)
    host = (parts.hostname or "").lower()
    return any(fnmatch.fnmatchcase(host, pat) and parts.path == path for pat, path in redirectors)


def resolve_alert_link(
    raw_link: str, redirectors: Iterable[tuple[str, str]] = DEFAULT_REDIRECTORS
) -> str:
    """Return the target of an alert redirect link, or ``raw_link`` unchanged.

    Nested wrappers are unwrapped until a non-redirector URL remains, which
    makes the function idempotent.
    """
    redirectors = tuple(redirectors)
    url = raw_link
    for _ in range(_MAX_UNWRAP):
        if not _is_redirector(url, redirectors):
            return url
        values = parse_qs(urlsplit(url).query, keep_blank_values=True).get("url")
        if not values:
            return url
        target = values[0].strip()
        if not is_absolute_url(target):
            raise ResolutionError(f"redirect target {target!r} is not an absolute URL")
        url = target
    raise ResolutionError(f"too many nested redirect wrappers in {raw_link!r}")


def _is_tracking(pair: str) -> bool:
    key = pair.split("=", 1)[0].lower()
    return key.startswith("utm_") or key in TRACKING_PARAMS


def canonicalize_url(url: str) -> str:
    """Normalize a URL for identity comparisons.

    Lowercases scheme and host, drops default ports, tracking parameters and
    the fragment, and gives an empty path a single slash. Remaining query
    parameters keep their order and encoding.
    """
    if not is_absolute_url(url):
        raise InvalidURLError(f"not an absolute http(s) URL: {url!r}")
    parts = urlsplit(url.strip())
    scheme = parts.scheme.lower()
    host = parts.hostname or ""
    if ":" in host:
        host = f"[{host}]"
    port = parts.port
    netloc = host
    if port is not None and port != DEFAULT_PORTS.get(scheme):
        netloc = f"{host}:{port}"
    if "@" in parts.netloc:
        netloc = parts.netloc.rsplit("@", 1)[0] + "@" + netloc
    path = parts.path or "/"
    query = "&".join(p for p in parts.query.split("&") if p and not _is_tracking(p))
    return urlunsplit((scheme, netloc, path, query, ""))
