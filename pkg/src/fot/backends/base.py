"""Request/response types and the backend contract.

Token counts in mock and replay backends use a documented proxy (unicode word
count x 1.3, rounded up); only conservation laws are asserted on top of it,
never absolute token fidelity.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Protocol

from fot.canonical import value_hash
from fot.errors import ConfigError

_ROLES = ("system", "user")
_WORD = re.compile(r"\w+", re.UNICODE)
_WS = re.compile(r"\s+")


def count_tokens(text: str) -> int:
    """Token-count proxy: unicode word count x 1.3, rounded up."""
    words = len(_WORD.findall(text))
    return math.ceil(words * 1.3)


@dataclass(frozen=True)
class GenRequest:
    """One generation request.

    ``ordinal`` is the sample offset: a request with ``n`` completions covers
    sample ordinals ordinal .. ordinal+n-1, which keeps scripted backends pure
    functions of (script, request, ordinal).
    """

    messages: tuple[tuple[str, str], ...]
    temperature: float = 0.0
    n: int = 1
    max_tokens: int | None = None
    want_logprobs: bool = False
    ordinal: int = 0

    def __post_init__(self):
        object.__setattr__(
            self, "messages", tuple((role, content) for role, content in self.messages)
        )
        if self.n < 1:
            raise ConfigError("GenRequest.n must be >= 1")
        if self.temperature < 0:
            raise ConfigError("temperature must be nonnegative")
        for role, _ in self.messages:
            if role not in _ROLES:
                raise ConfigError(f"unsupported role {role!r}")

    def prompt_text(self) -> str:
        return "\n".join(content for _, content in self.messages)

    def to_json(self) -> dict:
        return {
            "messages": [list(m) for m in self.messages],
            "temperature": self.temperature,
            "n": self.n,
            "max_tokens": self.max_tokens,
            "want_logprobs": self.want_logprobs,
            "ordinal": self.ordinal,
        }

    @classmethod
    def from_json(cls, data: dict) -> "GenRequest":
        return cls(
            messages=tuple((m[0], m[1]) for m in data["messages"]),
            temperature=data.get("temperature", 0.0),
            n=data.get("n", 1),
            max_tokens=data.get("max_tokens"),
            want_logprobs=data.get("want_logprobs", False),
            ordinal=data.get("ordinal", 0),
        )


@dataclass(frozen=True)
class GenResponse:
    texts: tuple[str, ...]
    prompt_tokens: int
    completion_tokens: int
    cost_usd: float
    latency_ms: int
    logprobs: tuple | None = None

    def to_json(self) -> dict:
        return {
            "texts": list(self.texts),
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "cost_usd": self.cost_usd,
            "latency_ms": self.latency_ms,
            "logprobs": list(self.logprobs) if self.logprobs is not None else None,
        }

    @classmethod
    def from_json(cls, data: dict) -> "GenResponse":
        logprobs = data.get("logprobs")
        return cls(
            texts=tuple(data["texts"]),
            prompt_tokens=data["prompt_tokens"],
            completion_tokens=data["completion_tokens"],
            cost_usd=data["cost_usd"],
            latency_ms=data["latency_ms"],
            logprobs=tuple(logprobs) if logprobs is not None else None,
        )


@dataclass(frozen=True)
class PriceTable:
    """USD per 1M tokens. Defaults are public list-price placeholders for a
    mid-size chat model, not measured values; override via --price-table."""

    input_per_1m: float = 2.50
    output_per_1m: float = 10.00

    def cost(self, prompt_tokens: int, completion_tokens: int) -> float:
        return (
            prompt_tokens * self.input_per_1m / 1_000_000
            + completion_tokens * self.output_per_1m / 1_000_000
        )

    @classmethod
    def from_file(cls, path) -> "PriceTable":
        import json

        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        return cls(
            input_per_1m=float(data["input_per_1m"]),
            output_per_1m=float(data["output_per_1m"]),
        )


def normalize_request(req: GenRequest) -> dict:
    """Whitespace-collapsed view of the request, used for hashing so cosmetic
    template edits do not invalidate recordings or cache entries."""
    return {
        "messages": [[role, _WS.sub(" ", content).strip()] for role, content in req.messages],
        "temperature": req.temperature,
        "n": req.n,
        "max_tokens": req.max_tokens,
        "want_logprobs": req.want_logprobs,
        "ordinal": req.ordinal,
    }


def request_hash(req: GenRequest) -> str:
    return value_hash(normalize_request(req))


def prompt_hash(messages: tuple[tuple[str, str], ...]) -> str:
    return value_hash([[role, _WS.sub(" ", content).strip()] for role, content in messages])


class ThoughtGenerator(Protocol):
    namespace: str

    def generate(self, req: GenRequest) -> GenResponse: ...


@dataclass
class TextBackend:
    """Base for backends that derive everything from a text-level responder.

    Subclasses implement ``respond(messages, ordinal) -> str``; token counts
    use the proxy and costs come from the price table.
    """

    price_table: PriceTable = field(default_factory=PriceTable)
    latency_ms: int = 0
    namespace: str = "text"

    def respond(self, messages: tuple[tuple[str, str], ...], ordinal: int) -> str:
        raise NotImplementedError

    def generate(self, req: GenRequest) -> GenResponse:
        texts = tuple(self.respond(req.messages, req.ordinal + i) for i in range(req.n))
        prompt_tokens = count_tokens(req.prompt_text())
        completion_tokens = sum(count_tokens(t) for t in texts)
        return GenResponse(
            texts=texts,
            prompt_tokens=prompt_tokens,
            completion_tokens=completion_tokens,
            cost_usd=self.price_table.cost(prompt_tokens, completion_tokens),
            latency_ms=self.latency_ms * req.n,
        )
