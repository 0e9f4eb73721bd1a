"""Hyperparameter studies: sample, evaluate a scheme over a dataset, record.

Failed evaluations become failed trials and never abort the study; trials over
the cost ceiling are recorded as infeasible and can never be reported best.
Trial-level parallelism runs whole batches against one history snapshot.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

from fot.canonical import value_hash
from fot.errors import ConfigError
from fot.optimize.space import HyperparameterSpace, sample_random
from fot.optimize.tpe import TPESampler
from fot.runtime.controller import RunConfig
from fot.schemes.base import SchemeSpec, run_instance

logger = logging.getLogger(__name__)


@dataclass
class Trial:
    id: int
    assignment: dict
    objective: float | None = None
    score: float | None = None
    cost_usd: float = 0.0
    runtime_ms: float = 0.0
    backend_calls: int = 0
    feasible: bool = True
    status: str = "ok"
    error: str | None = None

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "assignment": self.assignment,
            "objective": self.objective,
            "score": self.score,
            "cost_usd": self.cost_usd,
            "runtime_ms": self.runtime_ms,
            "backend_calls": self.backend_calls,
            "feasible": self.feasible,
            "status": self.status,
            "error": self.error,
        }


@dataclass
class Objective:
    """Scalarized objective: weighted score/cost/runtime with a direction and
    an optional hard cost ceiling."""

    direction: str = "maximize"
    weights: dict = field(default_factory=lambda: {"score": 1.0, "cost": 0.0, "runtime": 0.0})
    cost_ceiling_usd: float | None = None

    def value(self, score: float, cost_usd: float, runtime_ms: float) -> float:
        return (
            self.weights.get("score", 0.0) * score
            + self.weights.get("cost", 0.0) * cost_usd
            + self.weights.get("runtime", 0.0) * runtime_ms
        )

    def better(self, a: float, b: float) -> bool:
        return a > b if self.direction == "maximize" else a < b


@dataclass
class StudyReport:
    best: Trial | None
    trials: list[Trial]
    sampler: str
    seed: int
    cache_stats: dict = field(default_factory=dict)
    backend_calls: int = 0

    def to_json(self) -> dict:
        return {
            "best": self.best.to_json() if self.best else None,
            "trials": [t.to_json() for t in self.trials],
            "sampler": self.sampler,
            "seed": self.seed,
            "cache_stats": self.cache_stats,
            "backend_calls": self.backend_calls,
        }


def _trial_seed(study_seed: int, trial_id: int) -> int:
    return int(value_hash([study_seed, trial_id])[:12], 16)


def run_study(
    scheme: SchemeSpec,
    dataset: list[dict],
    space: HyperparameterSpace,
    objective: Objective,
    n_trials: int,
    sampler: str = "tpe",
    seed: int = 0,
    make_run_config: Callable[[int], RunConfig] | None = None,
    evaluate: Callable[[dict, int], dict] | None = None,
    trial_concurrency: int = 1,
    cache=None,
) -> StudyReport:
    """Run ``n_trials`` evaluations of ``scheme`` over ``dataset``.

    ``make_run_config(trial_seed)`` supplies the backend/cache/runtime wiring
    per trial; a custom ``evaluate(assignment, trial_seed)`` (returning score/
    cost/runtime/backend_calls) replaces the default dataset sweep entirely,
    which is how synthetic objectives are plugged in.
    """
    if sampler not in ("tpe", "random"):
        raise ConfigError(f"unknown sampler {sampler!r}")
    tpe = TPESampler(space=space, direction=objective.direction)

    def default_evaluate(assignment: dict, trial_seed: int) -> dict:
        if make_run_config is None:
            raise ConfigError("run_study needs make_run_config (or a custom evaluate)")
        config = make_run_config(trial_seed)
        scores = []
        cost = 0.0
        runtime = 0.0
        calls = 0
        for instance in dataset:
            score, _, result = run_instance(scheme, instance, assignment, config)
            scores.append(score)
            cost += result.metrics.total_cost_usd
            runtime += result.metrics.wall_ms
            calls += result.metrics.backend_calls
        mean_score = sum(scores) / len(scores) if scores else 0.0
        return {
            "score": mean_score,
            "cost_usd": cost,
            "runtime_ms": runtime,
            "backend_calls": calls,
            "cache_stats": config.cache.stats.to_json() if config.cache else {},
        }

    evaluate_fn = evaluate or default_evaluate

    def run_one(trial_id: int, history_snapshot: list[Trial]) -> Trial:
        trial_seed = _trial_seed(seed, trial_id)
        if sampler == "random":
            assignment = sample_random(space, trial_seed)
        else:
            assignment = tpe.sample(history_snapshot, trial_seed)
        trial = Trial(id=trial_id, assignment=assignment)
        try:
            outcome = evaluate_fn(assignment, trial_seed)
            trial.score = float(outcome["score"])
            trial.cost_usd = float(outcome.get("cost_usd", 0.0))
            trial.runtime_ms = float(outcome.get("runtime_ms", 0.0))
            trial.backend_calls = int(outcome.get("backend_calls", 0))
            trial.objective = objective.value(trial.score, trial.cost_usd, trial.runtime_ms)
            if objective.cost_ceiling_usd is not None:
                trial.feasible = trial.cost_usd <= objective.cost_ceiling_usd
        except Exception as exc:
            logger.warning("trial %d failed: %s", trial_id, exc)
            trial.status = "failed"
            trial.feasible = False
            trial.error = str(exc)
        return trial

    trials: list[Trial] = []
    next_id = 0
    while next_id < n_trials:
        batch_ids = list(range(next_id, min(next_id + max(1, trial_concurrency), n_trials)))
        history_snapshot = list(trials)
        if len(batch_ids) == 1:
            batch = [run_one(batch_ids[0], history_snapshot)]
        else:
            with ThreadPoolExecutor(max_workers=len(batch_ids)) as pool:
                batch = list(pool.map(lambda tid: run_one(tid, history_snapshot), batch_ids))
        trials.extend(batch)
        next_id = batch_ids[-1] + 1

    best: Trial | None = None
    for trial in trials:
        if trial.status != "ok" or not trial.feasible or trial.objective is None:
            continue
        if best is None or objective.better(trial.objective, best.objective):
            best = trial
    cache_stats = cache.stats.to_json() if cache is not None else {}
    return StudyReport(
        best=best,
        trials=trials,
        sampler=sampler,
        seed=seed,
        cache_stats=cache_stats,
        backend_calls=sum(t.backend_calls for t in trials),
    )
