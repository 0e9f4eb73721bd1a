"""Oracle test doubles: exact answers computed instead of sampled.

The game-of-24 oracle answers Propose prompts by exhaustive arithmetic search
(steps that keep 24 reachable come first, emulating a strong model) and Value
prompts with "sure" iff the remaining numbers can still reach 24. The sorting
oracle sorts, merges, and repairs lists exactly, optionally dropping elements
with a seeded probability to emulate a sloppy model.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from fractions import Fraction

from fot import go24
from fot.backends.base import TextBackend, prompt_hash
from fot.errors import MockScriptMissError

_INPUT_LINE = re.compile(r"Input:\s*(.+)")
_BRACKET_LIST = re.compile(r"\[([^\]]*)\]")


def _numbers_from(text: str) -> list[Fraction]:
    return [go24.parse_number(tok) for tok in text.split()]


@dataclass
class Go24OracleBackend(TextBackend):
    namespace: str = "oracle:go24"

    def respond(self, messages, ordinal: int) -> str:
        text = "\n".join(content for _, content in messages)
        if "Possible next steps:" in text:
            return self._propose(text, ordinal)
        if "give a judgement (sure/impossible)" in text:
            return self._judge(text)
        if "Evaluate if given numbers can reach 24" in text:
            return self._value(text)
        raise MockScriptMissError("unrecognized prompt for the game-of-24 oracle")

    def _propose(self, text: str, ordinal: int) -> str:
        inputs = _INPUT_LINE.findall(text)
        if not inputs:
            raise MockScriptMissError("propose prompt without an Input line")
        numbers = _numbers_from(inputs[-1])
        steps = go24.next_steps(numbers)
        line, left = steps[ordinal % len(steps)]
        remaining = " ".join(go24.fmt_number(v) for v in left)
        return f"{line} (left: {remaining})"

    def _value(self, text: str) -> str:
        last = [line for line in text.splitlines() if line.strip()][-1]
        try:
            numbers = _numbers_from(last)
        except ValueError:
            return "impossible"
        return "sure" if go24.reachable_24(numbers) else "impossible"

    def _judge(self, text: str) -> str:
        inputs = _INPUT_LINE.findall(text)
        answers = re.findall(r"Answer:\s*(.+)", text)
        if not inputs or not answers:
            return "impossible"
        try:
            numbers = [int(tok) for tok in inputs[-1].split()]
        except ValueError:
            return "impossible"
        return "sure" if go24.check_expression(numbers, answers[-1]) else "impossible"


def _parse_list(text: str) -> list[int]:
    return [int(tok) for tok in text.replace(",", " ").split()]


def _fmt_list(values: list[int]) -> str:
    return "[" + ", ".join(str(v) for v in values) + "]"


@dataclass
class SortingOracleBackend(TextBackend):
    """Perfect sorter/merger/repairer; ``noise_p`` drops each element of the
    produced list with the given probability, deterministically per request."""

    namespace: str = "oracle:sort"
    noise_p: float = 0.0
    seed: int = 0

    def _noisy(self, values: list[int], messages, ordinal: int) -> list[int]:
        if self.noise_p <= 0:
            return values
        rng = random.Random(f"{self.seed}:{prompt_hash(messages)}:{ordinal}")
        kept = [v for v in values if rng.random() >= self.noise_p]
        return kept if kept else values[:1]

    def respond(self, messages, ordinal: int) -> str:
        text = "\n".join(content for _, content in messages)
        lists = [_parse_list(group) for group in _BRACKET_LIST.findall(text)]
        if "Merge the following" in text:
            if len(lists) < 2:
                raise MockScriptMissError("merge prompt without two lists")
            merged = sorted(lists[-2] + lists[-1])
            return _fmt_list(self._noisy(merged, messages, ordinal))
        if "Incorrectly Sorted:" in text:
            inputs = _INPUT_LINE.findall(text)
            reference = _parse_list(_BRACKET_LIST.search(inputs[-1]).group(1))
            return _fmt_list(self._noisy(sorted(reference), messages, ordinal))
        if "Sort the following list" in text:
            if not lists:
                raise MockScriptMissError("sort prompt without a list")
            return _fmt_list(self._noisy(sorted(lists[-1]), messages, ordinal))
        raise MockScriptMissError("unrecognized prompt for the sorting oracle")
