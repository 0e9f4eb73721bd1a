"""Evolutionary instruction optimization.

Each generation asks the proposal backend for ``breadth`` variations of every
surviving instruction, scores all new candidates with the metric, keeps the
``keep_top`` best of the pool, and repeats ``depth`` times. Unusable proposals
(empty after cleanup) are skipped, never fatal.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

from fot.backends.base import GenRequest
from fot.ops import load_template, template_messages

logger = logging.getLogger(__name__)

PROPOSAL_TEMPERATURE = 1.6


@dataclass
class CoproCandidate:
    instruction: str
    score: float
    generation: int
    parent: str | None = None

    def to_json(self) -> dict:
        return {
            "instruction": self.instruction,
            "score": self.score,
            "generation": self.generation,
            "parent": self.parent,
        }


@dataclass
class CoproResult:
    best: CoproCandidate
    history: list[CoproCandidate] = field(default_factory=list)


def _clean_proposal(text: str) -> str | None:
    cleaned = text.strip().strip('"').strip()
    return cleaned or None


def optimize_prompt_copro(
    seed_instruction: str,
    breadth: int,
    depth: int,
    keep_top: int,
    metric: Callable[[str], float],
    proposal_backend,
    temperature: float = PROPOSAL_TEMPERATURE,
) -> CoproResult:
    seed_cand = CoproCandidate(instruction=seed_instruction, score=metric(seed_instruction), generation=0)
    history = [seed_cand]
    survivors = [seed_cand]
    seen = {seed_instruction}

    for generation in range(1, depth + 1):
        offspring: list[CoproCandidate] = []
        for parent in survivors:
            messages = template_messages(
                load_template("copro_propose"), {"instruction": parent.instruction}
            )
            for b in range(breadth):
                response = proposal_backend.generate(
                    GenRequest(messages=messages, temperature=temperature, n=1, ordinal=b)
                )
                proposal = _clean_proposal(response.texts[0])
                if proposal is None:
                    logger.warning("generation %d: unusable proposal skipped", generation)
                    continue
                if proposal in seen:
                    continue
                seen.add(proposal)
                offspring.append(
                    CoproCandidate(
                        instruction=proposal,
                        score=metric(proposal),
                        generation=generation,
                        parent=parent.instruction,
                    )
                )
        history.extend(offspring)
        pool = survivors + offspring
        pool.sort(key=lambda c: -c.score)  # stable: earlier candidates win ties
        survivors = pool[:keep_top]

    best = max(history, key=lambda c: c.score)
    return CoproResult(best=best, history=history)
