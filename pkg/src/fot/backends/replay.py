"""Record/replay: capture backend traffic as JSONL, replay it without network.

Record files hold one ``{"request_hash", "request", "response"}`` object per
line; requests are whitespace-normalized before hashing so cosmetic template
edits do not invalidate a recording.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path

from fot.backends.base import GenRequest, GenResponse, ThoughtGenerator, request_hash
from fot.errors import ReplayMissError


class RecordingBackend:
    """Wraps another backend and appends every exchange to a JSONL file."""

    def __init__(self, inner: ThoughtGenerator, path):
        self.inner = inner
        self.path = Path(path)
        self.namespace = inner.namespace
        self._lock = threading.Lock()

    def generate(self, req: GenRequest) -> GenResponse:
        resp = self.inner.generate(req)
        line = json.dumps(
            {
                "request_hash": request_hash(req),
                "request": req.to_json(),
                "response": resp.to_json(),
            },
            sort_keys=True,
        )
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
        return resp


class ReplayBackend:
    """Serves recorded responses; any unrecorded request is an error.

    Replay never opens a socket: everything is read from the record file up
    front.
    """

    def __init__(self, path):
        self.path = Path(path)
        self.namespace = "replay"
        self._table: dict[str, dict] = {}
        with open(self.path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                entry = json.loads(line)
                # first occurrence wins; repeated identical requests replay the
                # same response, matching deterministic re-execution
                self._table.setdefault(entry["request_hash"], entry["response"])

    def generate(self, req: GenRequest) -> GenResponse:
        key = request_hash(req)
        entry = self._table.get(key)
        if entry is None:
            raise ReplayMissError(f"no recorded response for request hash {key[:12]}...")
        return GenResponse.from_json(entry)
