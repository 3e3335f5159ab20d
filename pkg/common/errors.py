"""Exception hierarchy shared by every stage; each error knows its CLI exit code."""
from __future__ import annotations


class PathOclError(Exception):
    exit_code = 2

    def __init__(self, message: str, location: str | None = None) -> None:
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class UsageError(PathOclError):
    """Bad flags or an inconsistent run configuration."""

    exit_code = 1


class DataError(PathOclError):
    """Unreadable input, schema or invariant violation, unknown class, path cap exceeded."""

    exit_code = 2


class BackendError(PathOclError):
    """Network, auth or circuit-open failure talking to the chat or embedding endpoint."""

    exit_code = 3


class ReplayMissError(BackendError):
    """The prompt hash is absent from the replay fixture."""

    def __init__(self, prompt_hash: str) -> None:
        self.prompt_hash = prompt_hash
        super().__init__(f"no replay entry for prompt hash {prompt_hash}")
