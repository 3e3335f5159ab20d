"""Unit tests for the error hierarchy."""
import pytest

from common.errors import BackendError, DataError, PathOclError, ReplayMissError, UsageError


class TestErrors:
    """Test exit codes and messages."""

    @pytest.mark.parametrize("error,code", [(UsageError, 1), (DataError, 2), (BackendError, 3), (PathOclError, 2)])
    def test_exit_codes(self, error, code):
        assert error("x").exit_code == code

    def test_location_prefix(self):
        """The location leads the message."""
        assert str(DataError("unknown class 'Plane'", location="m.json:classes[0]")) == "m.json:classes[0]: unknown class 'Plane'"
        assert str(DataError("plain")) == "plain"

    def test_replay_miss(self):
        """A replay miss is a backend error naming the hash."""
        error = ReplayMissError("abc123")
        assert isinstance(error, BackendError)
        assert error.exit_code == 3
        assert "abc123" in str(error)
