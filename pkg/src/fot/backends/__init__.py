"""Thought-generator backends: scripted mock, record/replay, HTTP, oracles."""

from fot.backends.base import (
    GenRequest,
    GenResponse,
    PriceTable,
    TextBackend,
    ThoughtGenerator,
    count_tokens,
    normalize_request,
    request_hash,
)
from fot.backends.mock import MockBackend
from fot.backends.replay import RecordingBackend, ReplayBackend
from fot.backends.http import HttpBackend
from fot.backends.oracles import Go24OracleBackend, SortingOracleBackend

__all__ = [
    "GenRequest",
    "GenResponse",
    "PriceTable",
    "TextBackend",
    "ThoughtGenerator",
    "count_tokens",
    "normalize_request",
    "request_hash",
    "MockBackend",
    "RecordingBackend",
    "ReplayBackend",
    "HttpBackend",
    "Go24OracleBackend",
    "SortingOracleBackend",
]
