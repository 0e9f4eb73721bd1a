"""Process (in-run) and persistent (cross-run) memoization of backend calls.

Keys are content-addressed: a fingerprint of the call semantics (backend
namespace, temperature, kind-specific extras), a hash of the normalized
request messages, and a sample index. Sample indices are prefix-stable, so
lowering a sample count keeps reusing indices 0..k-1.

The persistent layout is one JSON file per entry at
``<cache_dir>/<first two hash chars>/<hash>.json`` plus an append-only
``index.log``. Writes go to a temp file and are atomically renamed. Entries
carry a checksum over their canonical body; ``verify`` re-hashes everything.
"""

from __future__ import annotations

import logging
import os
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from fot.canonical import canonical_bytes, parse_canonical, value_hash

logger = logging.getLogger(__name__)

MISS = None


@dataclass(frozen=True)
class CacheKey:
    fingerprint: str
    inputs_hash: str
    sample_index: int

    def hash(self) -> str:
        return value_hash([self.fingerprint, self.inputs_hash, self.sample_index])

    def to_json(self) -> dict:
        return {
            "fingerprint": self.fingerprint,
            "inputs_hash": self.inputs_hash,
            "sample_index": self.sample_index,
        }

    @classmethod
    def from_json(cls, data: dict) -> "CacheKey":
        return cls(data["fingerprint"], data["inputs_hash"], data["sample_index"])


@dataclass(frozen=True)
class CacheEntry:
    key: CacheKey
    outputs: dict
    cost_usd: float
    duration_ms: int
    created_at: float
    backend_id: str

    def body(self) -> dict:
        return {
            "key": self.key.to_json(),
            "outputs": self.outputs,
            "cost_usd": self.cost_usd,
            "duration_ms": self.duration_ms,
            "created_at": self.created_at,
            "backend_id": self.backend_id,
        }

    def to_json(self) -> dict:
        body = self.body()
        return {"entry": body, "checksum": value_hash(body)}

    @classmethod
    def from_json(cls, data: dict) -> "CacheEntry":
        body = data["entry"]
        if value_hash(body) != data.get("checksum"):
            raise ValueError("cache entry checksum mismatch")
        return cls(
            key=CacheKey.from_json(body["key"]),
            outputs=body["outputs"],
            cost_usd=body["cost_usd"],
            duration_ms=body["duration_ms"],
            created_at=body["created_at"],
            backend_id=body["backend_id"],
        )


@dataclass
class CacheStats:
    hits: int = 0
    misses: int = 0
    cost_saved_usd: float = 0.0
    time_saved_ms: int = 0

    def to_json(self) -> dict:
        return {
            "hits": self.hits,
            "misses": self.misses,
            "cost_saved_usd": self.cost_saved_usd,
            "time_saved_ms": self.time_saved_ms,
        }


class ProcessCache:
    """In-memory store scoped to one run handle."""

    def __init__(self):
        self._entries: dict[str, CacheEntry] = {}
        self._lock = threading.Lock()

    def lookup(self, key: CacheKey) -> CacheEntry | None:
        with self._lock:
            return self._entries.get(key.hash())

    def store(self, key: CacheKey, entry: CacheEntry) -> None:
        with self._lock:
            self._entries.setdefault(key.hash(), entry)

    def __len__(self) -> int:
        return len(self._entries)


class PersistentCache:
    """Durable store: content-addressed files plus an append-only index log."""

    def __init__(self, cache_dir):
        self.root = Path(cache_dir)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._mem: dict[str, CacheEntry] = {}

    def _path(self, key_hash: str) -> Path:
        return self.root / key_hash[:2] / f"{key_hash}.json"

    def lookup(self, key: CacheKey) -> CacheEntry | None:
        key_hash = key.hash()
        with self._lock:
            cached = self._mem.get(key_hash)
        if cached is not None:
            return cached
        path = self._path(key_hash)
        if not path.exists():
            return MISS
        try:
            entry = CacheEntry.from_json(parse_canonical(path.read_bytes()))
        except (ValueError, KeyError, TypeError) as exc:
            logger.warning("corrupt cache entry %s treated as miss: %s", path, exc)
            return MISS
        with self._lock:
            self._mem[key_hash] = entry
        return entry

    def store(self, key: CacheKey, entry: CacheEntry) -> None:
        key_hash = key.hash()
        path = self._path(key_hash)
        with self._lock:
            existing = self._mem.get(key_hash)
            if existing is None and path.exists():
                try:
                    existing = CacheEntry.from_json(parse_canonical(path.read_bytes()))
                    self._mem[key_hash] = existing
                except (ValueError, KeyError, TypeError):
                    existing = None
            if existing is not None:
                if existing.outputs != entry.outputs:
                    logger.warning(
                        "conflicting store for cache key %s ignored (first writer wins); "
                        "this usually indicates a fingerprinting bug",
                        key_hash[:12],
                    )
                return
            path.parent.mkdir(parents=True, exist_ok=True)
            data = canonical_bytes(entry.to_json())
            fd, tmp_name = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
            try:
                with os.fdopen(fd, "wb") as fh:
                    fh.write(data)
                    fh.flush()
                    os.fsync(fh.fileno())
                os.replace(tmp_name, path)
            finally:
                if os.path.exists(tmp_name):
                    os.unlink(tmp_name)
            with open(self.root / "index.log", "a", encoding="utf-8") as fh:
                fh.write(f"{key_hash} {entry.created_at}\n")
            self._mem[key_hash] = entry

    def entry_paths(self) -> list[Path]:
        return sorted(self.root.glob("??/*.json"))

    def verify(self) -> list[Path]:
        """Re-hash every entry; returns the paths of corrupt files."""
        corrupt = []
        for path in self.entry_paths():
            try:
                entry = CacheEntry.from_json(parse_canonical(path.read_bytes()))
                if entry.key.hash() != path.stem:
                    raise ValueError("entry stored under the wrong key hash")
            except (ValueError, KeyError, TypeError):
                corrupt.append(path)
        return corrupt

    def gc(self, older_than_s: float, now: float | None = None) -> int:
        """Delete entries created more than ``older_than_s`` seconds ago."""
        cutoff = (now if now is not None else time.time()) - older_than_s
        removed = 0
        for path in self.entry_paths():
            try:
                entry = CacheEntry.from_json(parse_canonical(path.read_bytes()))
                created = entry.created_at
            except (ValueError, KeyError, TypeError):
                created = path.stat().st_mtime
            if created < cutoff:
                path.unlink()
                removed += 1
        with self._lock:
            self._mem.clear()
        return removed

    def __len__(self) -> int:
        return len(self.entry_paths())


TIERS = ("none", "process", "persistent")


@dataclass
class CacheFacade:
    """Tier-selecting front used by operation contexts.

    ``none`` always misses and stores nothing, ``process`` lives for one run,
    ``persistent`` is backed by a store directory.
    """

    tier: str = "none"
    process: ProcessCache | None = None
    persistent: PersistentCache | None = None
    stats: CacheStats = field(default_factory=CacheStats)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @classmethod
    def create(cls, tier: str, cache_dir=None) -> "CacheFacade":
        if tier not in TIERS:
            raise ValueError(f"unknown cache tier {tier!r}")
        facade = cls(tier=tier)
        if tier == "process":
            facade.process = ProcessCache()
        elif tier == "persistent":
            if cache_dir is None:
                raise ValueError("persistent tier needs a cache directory")
            facade.persistent = PersistentCache(cache_dir)
        return facade

    def _store_backend(self):
        if self.tier == "process":
            return self.process
        if self.tier == "persistent":
            return self.persistent
        return None

    def lookup(self, key: CacheKey) -> CacheEntry | None:
        store = self._store_backend()
        entry = store.lookup(key) if store is not None else MISS
        with self._lock:
            if entry is None:
                self.stats.misses += 1
            else:
                self.stats.hits += 1
                self.stats.cost_saved_usd += entry.cost_usd
                self.stats.time_saved_ms += entry.duration_ms
        return entry

    def store(self, key: CacheKey, entry: CacheEntry) -> None:
        store = self._store_backend()
        if store is not None:
            store.store(key, entry)
