"""End-to-end runs and the daily scheduler."""

from __future__ import annotations

import fcntl
import logging
import threading
import time
from collections.abc import Callable, Iterator
from concurrent.futures import Future, ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, replace
from datetime import datetime, timedelta
from pathlib import Path

import httpx

from .config import PipelineConfig
from .errors import (
    CredentialError,
    ExtractionError,
    FeedError,
    FetchError,
    InvalidURLError,
    LeadwatchError,
    PermanentFetchError,
    RunInProgressError,
    StoreError,
)
from .extract import ExtractionResult, PromptTemplate, extract_article, load_prompt
from .feeds import FeedCache, FeedEntry, filter_new, poll_feed
from .fetch import ArticleDocument, HostThrottle, fetch_article, make_client
from .store import LeadRecord, LeadStore, RunRecord, utcnow
from .urls import canonicalize_url

logger = logging.getLogger(__name__)

_process_locks: dict[str, threading.Lock] = {}
_process_guard = threading.Lock()


class RunAborted(LeadwatchError):
    def __init__(self, message: str, run: RunRecord) -> None:
        super().__init__(message)
        self.run = run


@contextmanager
def run_lock(db_path: str) -> Iterator[None]:
    """Exclusive, non-blocking: at most one run per store, across threads and processes."""
    with _process_guard:
        lock = _process_locks.setdefault(db_path, threading.Lock())
    if not lock.acquire(blocking=False):
        raise RunInProgressError(f"a run is already in progress for {db_path}")
    fh = None
    try:
        if db_path != ":memory:":
            Path(db_path).parent.mkdir(parents=True, exist_ok=True)
            fh = open(f"{db_path}.lock", "w")
            try:
                fcntl.flock(fh, fcntl.LOCK_EX | fcntl.LOCK_NB)
            except BlockingIOError:
                raise RunInProgressError(f"another process is running against {db_path}") from None
        yield
    finally:
        if fh is not None:
            fh.close()
        lock.release()


@dataclass
class _Outcome:
    entry: FeedEntry
    doc: ArticleDocument | None = None
    result: ExtractionResult | None = None
    thin: bool = False
    error: Exception | None = None


def _poll_all(config: PipelineConfig, store: LeadStore, client: httpx.Client) -> list[FeedEntry]:
    feeds = [f for f in config.feeds if f.enabled]
    validators = store.feed_validators()
    cache = FeedCache(
        etag={k: v[0] for k, v in validators.items() if v[0]},
        last_modified={k: v[1] for k, v in validators.items() if v[1]},
    )
    entries: list[FeedEntry] = []
    if not feeds:
        return entries
    with ThreadPoolExecutor(max_workers=min(len(feeds), 8)) as pool:
        futures = [(f, pool.submit(poll_feed, f, client, cache, config.redirectors)) for f in feeds]
        for feed, fut in futures:
            try:
                got = fut.result()
            except FeedError as exc:
                logger.warning("feed poll failed", extra={"feed_id": feed.id, "error": str(exc)})
                continue
            logger.info("feed polled", extra={"feed_id": feed.id, "entries": len(got)})
            entries += got
    for feed in feeds:
        if feed.id in cache.etag or feed.id in cache.last_modified:
            store.save_feed_validators(feed.id, cache.etag.get(feed.id), cache.last_modified.get(feed.id))
    return entries


def _canonical(entries: list[FeedEntry]) -> list[FeedEntry]:
    out = []
    for e in entries:
        try:
            out.append(replace(e, resolved_url=canonicalize_url(e.resolved_url)))
        except InvalidURLError as exc:
            logger.warning("entry skipped", extra={"feed_id": e.feed_id, "error": str(exc)})
    return out


def run_once(
    config: PipelineConfig,
    store: LeadStore | None = None,
    *,
    http_client: httpx.Client | None = None,
    llm_client: httpx.Client | None = None,
    template: PromptTemplate | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> RunRecord:
    """Poll, fetch, extract and store leads for every unseen article.

    Per-article failures are recorded and skipped. Credential and store
    failures abort the run with ``RunAborted``; leads of the article being
    written are rolled back.
    """
    own_store = store is None
    if store is None:
        store = LeadStore(config.db_path, theta=config.dedup_theta)
    template = template or load_prompt(config.prompt_version)
    own_http = http_client is None
    http_client = http_client or make_client(config.fetch)
    own_llm = llm_client is None
    llm_client = llm_client or httpx.Client()
    try:
        with run_lock(store.path):
            return _run(config, store, http_client, llm_client, template, sleep)
    finally:
        if own_http:
            http_client.close()
        if own_llm:
            llm_client.close()
        if own_store:
            store.close()


def _run(
    config: PipelineConfig,
    store: LeadStore,
    http_client: httpx.Client,
    llm_client: httpx.Client,
    template: PromptTemplate,
    sleep: Callable[[float], None],
) -> RunRecord:
    run = RunRecord()
    store.save_run(run)
    logger.info("run started", extra={"run_id": run.run_id})

    entries = _canonical(_poll_all(config, store, http_client))
    unique = filter_new(entries, frozenset())
    run.articles_seen = len(unique)
    new = filter_new(unique, store.seen_urls())
    logger.info("articles discovered", extra={"run_id": run.run_id, "seen": len(unique), "new": len(new)})

    throttle = HostThrottle(config.fetch.min_host_interval, sleep=sleep)
    fetch_slots = threading.BoundedSemaphore(config.fetch.max_concurrency)
    abort = threading.Event()

    def work(entry: FeedEntry) -> _Outcome:
        out = _Outcome(entry)
        if abort.is_set():
            out.error = RunInProgressError("run aborted before this article was processed")
            return out
        try:
            with fetch_slots:
                out.doc = fetch_article(entry.resolved_url, config.fetch, http_client, throttle, sleep)
            if out.doc.is_thin(config.fetch.thin_word_threshold):
                out.thin = True
                return out
            out.result = extract_article(
                out.doc.text, template, config.model, max_chars=config.max_chars, client=llm_client, sleep=sleep
            )
        except CredentialError as exc:
            abort.set()
            out.error = exc
        except (FetchError, ExtractionError) as exc:
            out.error = exc
        return out

    with ThreadPoolExecutor(max_workers=config.llm_concurrency) as pool:
        futures: list[Future[_Outcome]] = [pool.submit(work, e) for e in new]
        try:
            for fut in futures:
                _commit(fut.result(), run, store)
        except (CredentialError, StoreError) as exc:
            abort.set()
            for f in futures:
                f.cancel()
            run.status = "aborted"
            _finish(run, config, store)
            logger.error("run aborted", extra={"run_id": run.run_id, "error": str(exc)})
            raise RunAborted(str(exc), run) from exc

    run.status = "completed"
    _finish(run, config, store)
    logger.info(
        "run finished",
        extra={k: getattr(run, k) for k in (
            "run_id", "articles_seen", "articles_processed", "articles_failed", "leads_extracted",
            "input_tokens", "output_tokens", "estimated_cost")},
    )
    return run


def _finish(run: RunRecord, config: PipelineConfig, store: LeadStore) -> None:
    run.finished_at = utcnow()
    run.estimated_cost = config.estimated_cost(run.input_tokens, run.output_tokens)
    try:
        store.save_run(run)
    except StoreError:
        logger.exception("could not save run record", extra={"run_id": run.run_id})
        if run.status != "aborted":
            raise


def _commit(out: _Outcome, run: RunRecord, store: LeadStore) -> None:
    url = out.entry.resolved_url
    feed_id = out.entry.feed_id
    if isinstance(out.error, CredentialError):
        raise out.error
    if out.error is not None:
        raw = getattr(out.error, "raw_response", None)
        status = "rejected" if isinstance(out.error, PermanentFetchError) else "failed"
        store.record_article(url, status, run.run_id, feed_id=feed_id, error=str(out.error), raw_response=raw)
        run.articles_failed += 1
        logger.warning("article failed", extra={"run_id": run.run_id, "url": url, "error": str(out.error)})
        return
    doc = out.doc
    assert doc is not None
    if out.thin:
        store.record_article(
            url, "thin", run.run_id, feed_id=feed_id, title=doc.title, fetched_at=doc.fetched_at,
            word_count=doc.word_count, error="thin article",
        )
        logger.info("article skipped", extra={"run_id": run.run_id, "url": url, "reason": "thin",
                                              "word_count": doc.word_count})
        return
    result = out.result
    assert result is not None
    article = result.article
    with store.transaction():
        for uc in article.use_cases:
            store.insert_lead(LeadRecord.create(uc, url, article.summary, run.run_id))
        store.record_article(
            url, "processed", run.run_id, feed_id=feed_id, title=doc.title, fetched_at=doc.fetched_at,
            word_count=doc.word_count, summary=article.summary, usefulness_rating=article.usefulness_rating,
            raw_response=result.raw_response,
        )
    run.articles_processed += 1
    run.leads_extracted += len(article.use_cases)
    run.input_tokens += result.input_tokens
    run.output_tokens += result.output_tokens
    logger.info("article processed", extra={"run_id": run.run_id, "url": url, "use_cases": len(article.use_cases),
                                            "input_tokens": result.input_tokens,
                                            "output_tokens": result.output_tokens})


def _window(day: datetime, hhmm: tuple[int, int]) -> datetime:
    return day.replace(hour=hhmm[0], minute=hhmm[1], second=0, microsecond=0)


class Scheduler:
    """Fire ``run`` once per day at a fixed UTC time.

    On start, a window already passed today with no run since triggers one
    catch-up run. A firing while a run is active is skipped with a warning.
    """

    def __init__(
        self,
        hhmm: tuple[int, int],
        run: Callable[[], RunRecord],
        last_run_started: Callable[[], datetime | None],
        *,
        now: Callable[[], datetime] = utcnow,
        sleep: Callable[[float], None] = time.sleep,
        stop: threading.Event | None = None,
        max_nap: float = 60.0,
    ) -> None:
        self.hhmm = hhmm
        self._run = run
        self._last_run_started = last_run_started
        self._now = now
        self._sleep = sleep
        self.stop = stop or threading.Event()
        self.max_nap = max_nap
        self._busy = threading.Lock()
        self.fired = 0
        self.skipped = 0

    def next_window(self, after: datetime) -> datetime:
        w = _window(after, self.hhmm)
        return w if w > after else w + timedelta(days=1)

    def needs_catch_up(self) -> bool:
        now = self._now()
        today = _window(now, self.hhmm)
        if now < today:
            return False
        last = self._last_run_started()
        return last is None or last < today

    def fire(self) -> RunRecord | None:
        if not self._busy.acquire(blocking=False):
            self.skipped += 1
            logger.warning("scheduled run skipped: previous run still active")
            return None
        try:
            self.fired += 1
            return self._run()
        except RunInProgressError:
            self.skipped += 1
            logger.warning("scheduled run skipped: another run holds the store")
            return None
        except RunAborted as exc:
            logger.error("scheduled run aborted", extra={"error": str(exc)})
            return exc.run
        finally:
            self._busy.release()

    def loop(self, max_fires: int | None = None) -> None:
        """Run until ``stop`` is set (or ``max_fires`` firings, for tests)."""
        if self.needs_catch_up():
            logger.info("catch-up run: today's window already passed")
            self.fire()
        target = self.next_window(self._now())
        while not self.stop.is_set():
            if max_fires is not None and self.fired >= max_fires:
                return
            remaining = (target - self._now()).total_seconds()
            if remaining > 0:
                self._sleep(min(remaining, self.max_nap))
                continue
            self.fire()
            target = self.next_window(max(self._now(), target))


def schedule_loop(config: PipelineConfig, *, stop: threading.Event | None = None, **kwargs) -> Scheduler:
    """Block running ``run_once`` daily until ``stop`` is set; returns the scheduler afterwards."""

    def last_started() -> datetime | None:
        with LeadStore(config.db_path, theta=config.dedup_theta) as store:
            last = store.last_run()
        return last.started_at if last else None

    sched = Scheduler(config.schedule_time, lambda: run_once(config), last_started, stop=stop, **kwargs)
    sched.loop()
    return sched
