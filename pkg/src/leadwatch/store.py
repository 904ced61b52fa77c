"""SQLite persistence for runs, articles and leads, with cross-article lead dedup."""

from __future__ import annotations

import hashlib
import json
import re
import sqlite3
import threading
import uuid
from collections.abc import Iterable, Iterator
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Literal

from .errors import StoreError
from .models import UseCase, use_case_from_dict

SCHEMA_VERSION = 1
DEFAULT_THETA = 0.6

_TOKEN_RE = re.compile(r"[^\W_]+")

_SCHEMA = """
CREATE TABLE IF NOT EXISTS meta (key TEXT PRIMARY KEY, value TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS runs (
    run_id TEXT PRIMARY KEY,
    started_at TEXT NOT NULL,
    finished_at TEXT,
    status TEXT NOT NULL,
    articles_seen INTEGER NOT NULL DEFAULT 0,
    articles_processed INTEGER NOT NULL DEFAULT 0,
    articles_failed INTEGER NOT NULL DEFAULT 0,
    leads_extracted INTEGER NOT NULL DEFAULT 0,
    input_tokens INTEGER NOT NULL DEFAULT 0,
    output_tokens INTEGER NOT NULL DEFAULT 0,
    estimated_cost REAL NOT NULL DEFAULT 0
);
CREATE TABLE IF NOT EXISTS articles (
    url TEXT PRIMARY KEY,
    status TEXT NOT NULL,
    run_id TEXT NOT NULL,
    feed_id TEXT,
    title TEXT,
    fetched_at TEXT,
    word_count INTEGER,
    summary TEXT,
    usefulness_rating REAL,
    raw_response TEXT,
    error TEXT
);
CREATE TABLE IF NOT EXISTS leads (
    seq INTEGER PRIMARY KEY AUTOINCREMENT,
    lead_id TEXT NOT NULL UNIQUE,
    dedup_key TEXT NOT NULL,
    name TEXT NOT NULL,
    description TEXT NOT NULL,
    newsworthiness_rating REAL NOT NULL,
    use_case TEXT NOT NULL,
    source_url TEXT NOT NULL,
    article_summary TEXT NOT NULL,
    run_id TEXT NOT NULL,
    first_seen TEXT NOT NULL,
    duplicate_of TEXT REFERENCES leads(lead_id)
);
CREATE INDEX IF NOT EXISTS leads_key ON leads(dedup_key);
CREATE TABLE IF NOT EXISTS feed_state (feed_id TEXT PRIMARY KEY, etag TEXT, last_modified TEXT);
"""

# article statuses that count as "seen" and are not refetched
SEEN_STATUSES = ("processed", "thin", "rejected")


def tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def dedup_key(u: UseCase) -> str:
    """Lowercased name tokens, punctuation stripped, sorted and space-joined."""
    return " ".join(sorted(tokens(u.name)))


def jaccard(a: set[str], b: set[str]) -> float:
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def token_set(u: UseCase) -> set[str]:
    return set(tokens(f"{u.name} {u.description}"))


def near_duplicate(a: UseCase, b: UseCase, theta: float = DEFAULT_THETA) -> bool:
    return jaccard(token_set(a), token_set(b)) >= theta


def make_lead_id(key: str, source_url: str) -> str:
    return hashlib.sha256(f"{key}\n{source_url}".encode()).hexdigest()[:20]


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


def _ts(dt: datetime | None) -> str | None:
    if dt is None:
        return None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).isoformat(timespec="microseconds")


def _parse_ts(value: str | None) -> datetime | None:
    return datetime.fromisoformat(value) if value else None


@dataclass(frozen=True)
class LeadRecord:
    lead_id: str
    use_case: UseCase
    source_url: str
    article_summary: str
    run_id: str
    first_seen: datetime
    duplicate_of: str | None = None

    @classmethod
    def create(
        cls,
        use_case: UseCase,
        source_url: str,
        article_summary: str,
        run_id: str,
        first_seen: datetime | None = None,
    ) -> LeadRecord:
        return cls(
            make_lead_id(dedup_key(use_case), source_url),
            use_case,
            source_url,
            article_summary,
            run_id,
            first_seen or utcnow(),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "lead_id": self.lead_id,
            "use_case": self.use_case.to_dict(),
            "source_url": self.source_url,
            "article_summary": self.article_summary,
            "run_id": self.run_id,
            "first_seen": _ts(self.first_seen),
            "duplicate_of": self.duplicate_of,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> LeadRecord:
        return cls(
            lead_id=d["lead_id"],
            use_case=use_case_from_dict(d["use_case"]),
            source_url=d["source_url"],
            article_summary=d["article_summary"],
            run_id=d["run_id"],
            first_seen=_parse_ts(d["first_seen"]),
            duplicate_of=d.get("duplicate_of"),
        )


@dataclass
class RunRecord:
    run_id: str = field(default_factory=lambda: uuid.uuid4().hex[:12])
    started_at: datetime = field(default_factory=utcnow)
    finished_at: datetime | None = None
    status: str = "running"
    articles_seen: int = 0
    articles_processed: int = 0
    articles_failed: int = 0
    leads_extracted: int = 0
    input_tokens: int = 0
    output_tokens: int = 0
    estimated_cost: float = 0.0

    def check(self) -> None:
        if self.articles_processed + self.articles_failed > self.articles_seen:
            raise StoreError(
                f"run {self.run_id}: processed+failed exceeds seen "
                f"({self.articles_processed}+{self.articles_failed} > {self.articles_seen})"
            )


@dataclass(frozen=True)
class InsertOutcome:
    kind: Literal["inserted", "duplicate"]
    lead_id: str
    duplicate_of: str | None = None

    @property
    def is_primary(self) -> bool:
        return self.kind == "inserted"


class LeadStore:
    """Single-writer store over one SQLite file.

    Writes go through one connection guarded by a lock; use ``transaction``
    to group an article's writes so a failure rolls them all back.
    """

    def __init__(self, path: str | Path = ":memory:", theta: float = DEFAULT_THETA) -> None:
        self.path = str(path)
        self.theta = theta
        if self.path != ":memory:":
            Path(self.path).parent.mkdir(parents=True, exist_ok=True)
        try:
            self._conn = sqlite3.connect(self.path, check_same_thread=False, isolation_level=None)
            self._conn.row_factory = sqlite3.Row
            self._conn.execute("PRAGMA foreign_keys = ON")
            self._conn.executescript(_SCHEMA)
            self._init_meta()
        except sqlite3.Error as exc:
            raise StoreError(f"cannot open store {self.path}: {exc}") from exc
        self._lock = threading.RLock()
        self._depth = 0
        self._primaries: list[tuple[int, str, str, set[str]]] | None = None

    def _init_meta(self) -> None:
        row = self._conn.execute("SELECT value FROM meta WHERE key = 'schema_version'").fetchone()
        if row is None:
            self._conn.execute("INSERT INTO meta VALUES ('schema_version', ?)", (str(SCHEMA_VERSION),))
        elif int(row[0]) != SCHEMA_VERSION:
            raise StoreError(f"store schema version {row[0]} != supported {SCHEMA_VERSION}")

    def close(self) -> None:
        self._conn.close()

    def __enter__(self) -> LeadStore:
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()

    @contextmanager
    def transaction(self) -> Iterator[None]:
        with self._lock:
            outer = self._depth == 0
            if outer:
                self._conn.execute("BEGIN IMMEDIATE")
            self._depth += 1
            try:
                yield
            except BaseException:
                self._depth -= 1
                if outer:
                    self._conn.execute("ROLLBACK")
                    self._primaries = None
                raise
            else:
                self._depth -= 1
                if outer:
                    self._conn.execute("COMMIT")

    def _execute(self, sql: str, params: Iterable[Any] = ()) -> sqlite3.Cursor:
        try:
            return self._conn.execute(sql, tuple(params))
        except sqlite3.Error as exc:
            raise StoreError(f"store write failed: {exc}") from exc

    # leads

    def _primary_index(self) -> list[tuple[int, str, str, set[str]]]:
        if self._primaries is None:
            rows = self._conn.execute(
                "SELECT seq, lead_id, dedup_key, name, description FROM leads "
                "WHERE duplicate_of IS NULL ORDER BY seq"
            ).fetchall()
            self._primaries = [
                (r["seq"], r["lead_id"], r["dedup_key"], set(tokens(f"{r['name']} {r['description']}")))
                for r in rows
            ]
        return self._primaries

    def find_primary_match(self, use_case: UseCase) -> str | None:
        """Earliest non-duplicate lead matching by dedup key or Jaccard >= theta."""
        key = dedup_key(use_case)
        toks = token_set(use_case)
        for _seq, lead_id, other_key, other_toks in self._primary_index():
            if other_key == key or jaccard(toks, other_toks) >= self.theta:
                return lead_id
        return None

    def insert_lead(self, lead: LeadRecord) -> InsertOutcome:
        with self._lock, self.transaction():
            existing = self._conn.execute(
                "SELECT lead_id, duplicate_of FROM leads WHERE lead_id = ?", (lead.lead_id,)
            ).fetchone()
            if existing is not None:
                # re-submission of a stored lead: nothing new is written
                return InsertOutcome("duplicate", lead.lead_id, existing["duplicate_of"] or existing["lead_id"])
            match = self.find_primary_match(lead.use_case)
            key = dedup_key(lead.use_case)
            cur = self._execute(
                "INSERT INTO leads (lead_id, dedup_key, name, description, newsworthiness_rating, use_case, "
                "source_url, article_summary, run_id, first_seen, duplicate_of) VALUES (?,?,?,?,?,?,?,?,?,?,?)",
                (
                    lead.lead_id,
                    key,
                    lead.use_case.name,
                    lead.use_case.description,
                    lead.use_case.newsworthiness_rating,
                    json.dumps(lead.use_case.to_dict(), sort_keys=True),
                    lead.source_url,
                    lead.article_summary,
                    lead.run_id,
                    _ts(lead.first_seen),
                    match,
                ),
            )
            if match is not None:
                return InsertOutcome("duplicate", lead.lead_id, match)
            self._primary_index().append((cur.lastrowid, lead.lead_id, key, token_set(lead.use_case)))
            return InsertOutcome("inserted", lead.lead_id)

    def _lead(self, row: sqlite3.Row) -> LeadRecord:
        return LeadRecord(
            lead_id=row["lead_id"],
            use_case=use_case_from_dict(json.loads(row["use_case"])),
            source_url=row["source_url"],
            article_summary=row["article_summary"],
            run_id=row["run_id"],
            first_seen=_parse_ts(row["first_seen"]),
            duplicate_of=row["duplicate_of"],
        )

    def leads(self, *, include_duplicates: bool = True) -> list[LeadRecord]:
        sql = "SELECT * FROM leads"
        if not include_duplicates:
            sql += " WHERE duplicate_of IS NULL"
        rows = self._conn.execute(sql + " ORDER BY seq").fetchall()
        return [self._lead(r) for r in rows]

    def get_lead(self, lead_id: str) -> LeadRecord | None:
        row = self._conn.execute("SELECT * FROM leads WHERE lead_id = ?", (lead_id,)).fetchone()
        return self._lead(row) if row else None

    def count_primaries(self) -> int:
        return self._conn.execute("SELECT COUNT(*) FROM leads WHERE duplicate_of IS NULL").fetchone()[0]

    def duplicate_depth(self) -> int:
        """Longest duplicate_of chain, found by a full scan (0 when no duplicates)."""
        parent = {r[0]: r[1] for r in self._conn.execute("SELECT lead_id, duplicate_of FROM leads")}
        depth = 0
        for lead_id in parent:
            d, cur = 0, lead_id
            while parent.get(cur) is not None and d <= len(parent):
                cur = parent[cur]
                d += 1
            depth = max(depth, d)
        return depth

    # articles

    def seen_urls(self) -> frozenset[str]:
        marks = ",".join("?" * len(SEEN_STATUSES))
        rows = self._conn.execute(f"SELECT url FROM articles WHERE status IN ({marks})", SEEN_STATUSES)
        return frozenset(r[0] for r in rows)

    def record_article(
        self,
        url: str,
        status: str,
        run_id: str,
        *,
        feed_id: str | None = None,
        title: str | None = None,
        fetched_at: datetime | None = None,
        word_count: int | None = None,
        summary: str | None = None,
        usefulness_rating: float | None = None,
        raw_response: str | None = None,
        error: str | None = None,
    ) -> None:
        with self._lock, self.transaction():
            self._execute(
                "INSERT OR REPLACE INTO articles VALUES (?,?,?,?,?,?,?,?,?,?,?)",
                (url, status, run_id, feed_id, title, _ts(fetched_at), word_count, summary,
                 usefulness_rating, raw_response, error),
            )

    def article_status(self, url: str) -> str | None:
        row = self._conn.execute("SELECT status FROM articles WHERE url = ?", (url,)).fetchone()
        return row[0] if row else None

    # runs

    def save_run(self, run: RunRecord) -> None:
        run.check()
        with self._lock, self.transaction():
            self._execute(
                "INSERT OR REPLACE INTO runs VALUES (?,?,?,?,?,?,?,?,?,?,?)",
                (run.run_id, _ts(run.started_at), _ts(run.finished_at), run.status, run.articles_seen,
                 run.articles_processed, run.articles_failed, run.leads_extracted, run.input_tokens,
                 run.output_tokens, run.estimated_cost),
            )

    def runs(self) -> list[RunRecord]:
        rows = self._conn.execute("SELECT * FROM runs ORDER BY started_at").fetchall()
        return [
            RunRecord(
                run_id=r["run_id"],
                started_at=_parse_ts(r["started_at"]),
                finished_at=_parse_ts(r["finished_at"]),
                status=r["status"],
                articles_seen=r["articles_seen"],
                articles_processed=r["articles_processed"],
                articles_failed=r["articles_failed"],
                leads_extracted=r["leads_extracted"],
                input_tokens=r["input_tokens"],
                output_tokens=r["output_tokens"],
                estimated_cost=r["estimated_cost"],
            )
            for r in rows
        ]

    def last_run(self) -> RunRecord | None:
        runs = self.runs()
        return runs[-1] if runs else None

    # feed validators for conditional requests

    def feed_validators(self) -> dict[str, tuple[str | None, str | None]]:
        rows = self._conn.execute("SELECT feed_id, etag, last_modified FROM feed_state")
        return {r[0]: (r[1], r[2]) for r in rows}

    def save_feed_validators(self, feed_id: str, etag: str | None, last_modified: str | None) -> None:
        with self._lock, self.transaction():
            self._execute("INSERT OR REPLACE INTO feed_state VALUES (?,?,?)", (feed_id, etag, last_modified))
