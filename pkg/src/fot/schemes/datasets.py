"""Dataset loaders and desk-scale fixture generators.

Dataset files are JSONL, one instance per line: {"id", "input", "ground_truth"?}.
Game-of-24 fixtures are labeled by the exhaustive rational enumerator; sorting
instances are seeded uniform digits.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

from fot import go24


def load_jsonl(path) -> list[dict]:
    instances = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                instances.append(json.loads(line))
    return instances


def save_jsonl(path, instances: list[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for instance in instances:
            fh.write(json.dumps(instance, sort_keys=True) + "\n")


def gen_go24_dataset(n: int, seed: int = 0, solvable_only: bool = False) -> list[dict]:
    """Random 4-number draws from 1..13 with exact solvability labels."""
    rng = random.Random(seed)
    instances = []
    serial = 0
    while len(instances) < n:
        numbers = sorted(rng.randint(1, 13) for _ in range(4))
        solvable = go24.reachable_24(numbers)
        if solvable_only and not solvable:
            continue
        instances.append(
            {"id": f"go24-{seed}-{serial:04d}", "input": numbers, "ground_truth": solvable}
        )
        serial += 1
    return instances


def gen_sorting_dataset(n: int, seed: int = 0, length: int = 128) -> list[dict]:
    rng = random.Random(seed)
    return [
        {
            "id": f"sort-{seed}-{i:04d}",
            "input": [rng.randint(0, 9) for _ in range(length)],
        }
        for i in range(n)
    ]


DEFAULT_DECOMP_FIXTURES = [
    {
        "id": "decomp-0000",
        "input": "Which of the two front-door colors was painted first?",
        "fixture": {
            "q": "Which of the two front-door colors was painted first?",
            "children": [
                {
                    "q": "What are the two front-door colors?",
                    "children": [
                        {"q": "What color is the left front door?", "answer": "red"},
                        {"q": "What color is the right front door?", "answer": "blue"},
                    ],
                },
                {"q": "Which color was painted first?", "answer": "blue"},
            ],
        },
        "ground_truth": "red; blue; blue",
    },
    {
        "id": "decomp-0001",
        "input": "How many moons does the planet have?",
        "fixture": {
            "q": "How many moons does the planet have?",
            "children": [],
        },
        "ground_truth": "How many moons does the planet have?",
    },
]


def gen_decomp_dataset() -> list[dict]:
    return [dict(instance) for instance in DEFAULT_DECOMP_FIXTURES]
