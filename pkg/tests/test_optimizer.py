from __future__ import annotations

import random

import pytest

from fot.errors import ConfigError
from fot.optimize import (
    HyperparameterSpace,
    Objective,
    Param,
    TPESampler,
    run_study,
    sample_random,
    sample_tpe,
)
from fot.optimize.study import Trial


def quad_space() -> HyperparameterSpace:
    return HyperparameterSpace([Param(name="x", kind="float", domain=(-10.0, 10.0))])


def mixed_space() -> HyperparameterSpace:
    return HyperparameterSpace(
        [
            Param(name="mode", kind="categorical", domain=["a", "b"]),
            Param(name="k", kind="int", domain=(2, 7)),
            Param(
                name="alpha", kind="float", domain=(0.001, 10.0), log_scale=True,
                condition={"param": "mode", "equals": "a"},
            ),
        ]
    )


def make_history(space, fn, n, seed=0) -> list[Trial]:
    history = []
    for i in range(n):
        assignment = sample_random(space, seed * 10_000 + i)
        history.append(Trial(id=i, assignment=assignment, objective=fn(assignment), score=0.0))
    return history


# -- random sampler ----------------------------------------------------------------

def test_random_categorical_frequencies_are_uniform():
    space = HyperparameterSpace([Param(name="c", kind="categorical", domain=["a", "b"])])
    hits = sum(1 for seed in range(10_000) if sample_random(space, seed)["c"] == "a")
    assert abs(hits / 10_000 - 0.5) < 0.02


def test_random_respects_conditions_and_domains():
    space = mixed_space()
    for seed in range(2_000):
        assignment = sample_random(space, seed)
        assert 2 <= assignment["k"] <= 7
        if assignment["mode"] == "a":
            assert 0.001 <= assignment["alpha"] <= 10.0
        else:
            assert "alpha" not in assignment
        assert space.validate(assignment)


def test_random_is_deterministic_per_seed():
    space = mixed_space()
    assert sample_random(space, 42) == sample_random(space, 42)


def test_space_rejects_forward_conditions():
    with pytest.raises(ConfigError):
        HyperparameterSpace(
            [
                Param(name="a", kind="int", domain=(0, 1), condition={"param": "b", "equals": 1}),
                Param(name="b", kind="int", domain=(0, 1)),
            ]
        )


def test_space_rejects_empty_domains():
    with pytest.raises(ConfigError):
        Param(name="c", kind="categorical", domain=[])
    with pytest.raises(ConfigError):
        Param(name="x", kind="float", domain=(3.0, 1.0))


# -- TPE ----------------------------------------------------------------------------

def test_tpe_empty_history_equals_random_for_same_seed():
    space = quad_space()
    sampler = TPESampler(space=space)
    assert sampler.sample([], 123) == sample_random(space, 123)
    assert sampler.last_fallback


def test_tpe_all_equal_objectives_stays_in_domain():
    space = quad_space()
    history = make_history(space, lambda a: 1.0, 30)
    assignment = sample_tpe(space, history, seed=5, direction="minimize")
    assert -10.0 <= assignment["x"] <= 10.0


def test_tpe_empty_good_split_falls_back():
    space = quad_space()
    sampler = TPESampler(space=space, gamma=0.0)
    history = make_history(space, lambda a: a["x"], 30)
    assignment = sampler.sample(history, 3)
    assert sampler.last_fallback
    assert assignment == sample_random(space, random.Random(3))


def test_tpe_outputs_respect_conditions_under_fuzz():
    space = mixed_space()
    sampler = TPESampler(space=space, direction="minimize")
    history = make_history(space, lambda a: a["k"] + a.get("alpha", 0.0), 40)
    for seed in range(500):
        assignment = sampler.sample(history, seed)
        assert space.validate(assignment)


def test_tpe_concentrates_on_quadratic():
    space = quad_space()
    objective = Objective(direction="minimize")

    def evaluate(assignment, trial_seed):
        return {"score": (assignment["x"] - 3.0) ** 2}

    hits = 0
    for seed in range(6):
        report = run_study(None, [], space, objective, 100, sampler="tpe", seed=seed, evaluate=evaluate)
        if abs(report.best.assignment["x"] - 3.0) <= 0.1:
            hits += 1
    assert hits >= 5


# -- studies -----------------------------------------------------------------------------

def test_single_trial_study_best_is_that_trial():
    space = quad_space()
    report = run_study(
        None, [], space, Objective(direction="minimize"), 1,
        sampler="random", seed=3, evaluate=lambda a, s: {"score": a["x"] ** 2},
    )
    assert len(report.trials) == 1
    assert report.best is report.trials[0]


def test_study_is_deterministic_per_seed():
    space = quad_space()

    def evaluate(a, s):
        return {"score": (a["x"] - 1) ** 2, "cost_usd": abs(a["x"])}

    r1 = run_study(None, [], space, Objective(direction="minimize"), 20, seed=9, evaluate=evaluate)
    r2 = run_study(None, [], space, Objective(direction="minimize"), 20, seed=9, evaluate=evaluate)
    assert [t.to_json() for t in r1.trials] == [t.to_json() for t in r2.trials]


def test_infeasible_trials_recorded_but_never_best():
    space = quad_space()
    objective = Objective(direction="maximize", cost_ceiling_usd=1.0)

    def evaluate(assignment, trial_seed):
        x = assignment["x"]
        # the highest scores cost the most, crossing the ceiling
        return {"score": x, "cost_usd": 10.0 if x > 0 else 0.5}

    report = run_study(None, [], space, objective, 40, sampler="random", seed=2, evaluate=evaluate)
    assert any(not t.feasible for t in report.trials)
    assert report.best is not None
    assert report.best.feasible
    assert report.best.cost_usd <= 1.0
    assert all(t.feasible or t.cost_usd > 1.0 or t.status == "failed" for t in report.trials)


def test_failed_trials_do_not_abort_study():
    space = quad_space()
    calls = {"n": 0}

    def evaluate(assignment, trial_seed):
        calls["n"] += 1
        if calls["n"] % 3 == 0:
            raise RuntimeError("backend down")
        return {"score": assignment["x"]}

    report = run_study(None, [], space, Objective(), 9, sampler="random", seed=0, evaluate=evaluate)
    assert len(report.trials) == 9
    failed = [t for t in report.trials if t.status == "failed"]
    assert len(failed) == 3
    assert all(t.error == "backend down" for t in failed)
    assert report.best is not None and report.best.status == "ok"


def test_unknown_sampler_rejected():
    with pytest.raises(ConfigError):
        run_study(None, [], quad_space(), Objective(), 1, sampler="grid", evaluate=lambda a, s: {"score": 0})
