"""Deterministic scripted backend for tests and desk-scale runs."""

from __future__ import annotations

from dataclasses import dataclass, field

from fot.backends.base import TextBackend, prompt_hash
from fot.errors import MockScriptMissError


@dataclass
class MockBackend(TextBackend):
    """Script-table backend: responses are looked up by the normalized prompt
    hash and the sample ordinal. A pure function of (script, request, ordinal).

    Scripting by ordinal: ``add(prompt, ["a", "b"])`` answers ordinal 0 with
    "a", ordinal 1 with "b"; ordinals past the end cycle when ``cycle=True``
    (the default) or miss otherwise.
    """

    namespace: str = "mock"
    cycle: bool = True
    script: dict[str, list[str]] = field(default_factory=dict)

    def add(self, prompt, responses) -> None:
        """Register responses for a prompt (a string or a messages tuple)."""
        if isinstance(prompt, str):
            messages = (("user", prompt),)
        else:
            messages = tuple(prompt)
        if isinstance(responses, str):
            responses = [responses]
        self.script[prompt_hash(messages)] = list(responses)

    def respond(self, messages, ordinal: int) -> str:
        key = prompt_hash(messages)
        entries = self.script.get(key)
        if not entries:
            preview = " | ".join(content[:60] for _, content in messages)
            raise MockScriptMissError(f"no script entry for prompt: {preview!r}")
        if ordinal >= len(entries):
            if not self.cycle:
                raise MockScriptMissError(f"no script entry for ordinal {ordinal}")
            ordinal = ordinal % len(entries)
        return entries[ordinal]
