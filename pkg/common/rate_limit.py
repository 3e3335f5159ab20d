"""Shared outbound rate limiting built on the ``limits`` package."""
from __future__ import annotations

import time

from limits import RateLimitItem, parse
from limits.storage import MemoryStorage
from limits.strategies import MovingWindowRateLimiter


class OutboundLimiter:
    """Blocking limiter shared by every worker thread that talks to one endpoint."""

    def __init__(self, rule: str, key: str = "llm") -> None:
        self.rule: RateLimitItem = parse(rule)
        self.key = key
        self._limiter = MovingWindowRateLimiter(MemoryStorage())

    def acquire(self) -> None:
        while not self._limiter.hit(self.rule, self.key):
            stats = self._limiter.get_window_stats(self.rule, self.key)
            time.sleep(max(0.05, stats.reset_time - time.time()))
