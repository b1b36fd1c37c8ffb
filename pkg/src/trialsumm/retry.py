"""Exponential backoff with full jitter, shared by the registry and LLM clients."""

from __future__ import annotations

import logging
import random
import time
from typing import Callable, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")

MAX_ATTEMPTS = 5


def backoff_delay(attempt: int, base: float = 0.5, cap: float = 30.0, rng: Callable[[], float] = random.random) -> float:
    """Delay before retry number ``attempt`` (0-based): uniform in [0, min(cap, base * 2**attempt)]."""
    return rng() * min(cap, base * (2**attempt))


def call_with_retry(
    fn: Callable[[], T],
    retryable: Callable[[BaseException], bool],
    *,
    max_attempts: int = MAX_ATTEMPTS,
    base_delay: float = 0.5,
    max_delay: float = 30.0,
    sleep: Callable[[float], None] = time.sleep,
    rng: Callable[[], float] = random.random,
) -> T:
    """Call ``fn`` until it succeeds, retrying only errors ``retryable`` accepts.

    An exception carrying a numeric ``retry_after`` attribute waits at least
    that long. The last error is re-raised once ``max_attempts`` is used up.
    """
    for attempt in range(max_attempts):
        try:
            return fn()
        except Exception as exc:
            if not retryable(exc) or attempt == max_attempts - 1:
                raise
            delay = backoff_delay(attempt, base_delay, max_delay, rng)
            retry_after = getattr(exc, "retry_after", None)
            if retry_after is not None:
                delay = max(delay, float(retry_after))
            logger.warning("attempt %d/%d failed (%s); retrying in %.2fs", attempt + 1, max_attempts, exc, delay)
            sleep(delay)
    raise AssertionError("unreachable")
