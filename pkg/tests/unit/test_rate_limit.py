"""Unit tests for the outbound rate limiter."""
import time

from common.rate_limit import OutboundLimiter


class TestOutboundLimiter:
    """Test the shared moving-window limiter."""

    def test_parses_rule(self):
        limiter = OutboundLimiter("60/minute")
        assert limiter.rule.amount == 60
        assert limiter.key == "llm"

    def test_within_limit_does_not_block(self):
        """Hits within the window return immediately."""
        limiter = OutboundLimiter("5/second")
        start = time.monotonic()
        for _ in range(5):
            limiter.acquire()
        assert time.monotonic() - start < 0.5

    def test_blocks_past_limit(self):
        """The hit past the limit waits for the window to move."""
        limiter = OutboundLimiter("2/second", key="probe")
        limiter.acquire()
        limiter.acquire()
        start = time.monotonic()
        limiter.acquire()
        assert time.monotonic() - start >= 0.05
