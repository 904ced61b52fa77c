from __future__ import annotations

import logging
import time
from collections.abc import Callable
from dataclasses import dataclass
from typing import TypeVar

T = TypeVar("T")
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Backoff:
    """Exponential backoff: delay before retry ``k`` (1-based) is base * factor**(k-1)."""

    attempts: int = 3
    base: float = 1.0
    factor: float = 2.0
    max_delay: float = 60.0

    def delay(self, retry: int, hint: float | None = None) -> float:
        d = self.base * self.factor ** (retry - 1)
        if hint is not None:
            d = max(d, hint)
        return min(d, self.max_delay)


def call_with_retry(
    fn: Callable[[], T],
    backoff: Backoff,
    is_retryable: Callable[[BaseException], bool],
    *,
    hint: Callable[[BaseException], float | None] = lambda exc: None,
    sleep: Callable[[float], None] = time.sleep,
    on_attempt: Callable[[int], None] | None = None,
) -> T:
    """Run ``fn`` up to ``backoff.attempts`` times; the last error propagates."""
    attempt = 0
    while True:
        attempt += 1
        if on_attempt is not None:
            on_attempt(attempt)
        try:
            return fn()
        except Exception as exc:
            if attempt >= backoff.attempts or not is_retryable(exc):
                raise
            delay = backoff.delay(attempt, hint(exc))
            logger.info("attempt %d failed (%s); retrying in %.2fs", attempt, exc, delay)
            sleep(delay)
