"""Tree-structured Parzen estimator over a conditional space.

History below the startup count falls back to uniform random sampling. Past
it, trials are split at the gamma-quantile of the objective into good and bad
sets; per-parameter kernel density estimators (Gaussian for numeric values
with Scott's-rule bandwidth floored at 1e-3 of the domain width, add-one
smoothed frequencies for categoricals) model both sets, candidates are drawn
from the good density, and the one maximizing the good/bad density ratio wins.
Densities are per-parameter (univariate), not multivariate.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from fot.optimize.space import HyperparameterSpace, Param, sample_random

GAMMA = 0.25
N_STARTUP = 10
N_EI = 24
_BW_FLOOR_FRACTION = 1e-3
_EPS = 1e-12


def _transform(param: Param, value: float) -> float:
    return math.log(value) if param.log_scale else float(value)


def _untransform(param: Param, raw: float):
    value = math.exp(raw) if param.log_scale else raw
    low, high = param.domain
    value = min(float(high), max(float(low), value))
    if param.kind == "int":
        return min(int(high), max(int(low), round(value)))
    return value


def _domain_width(param: Param) -> float:
    low, high = param.domain
    width = (math.log(high) - math.log(low)) if param.log_scale else float(high - low)
    return max(width, _EPS)


def _bandwidth(param: Param, values: list[float]) -> float:
    """Scott's rule, floored at 1e-3 of the domain width and additionally
    clipped from below at width/(n+1) so the estimator cannot collapse onto
    its own samples (the standard stabilizer clip)."""
    width = _domain_width(param)
    floor = max(_BW_FLOOR_FRACTION * width, width / (min(100, len(values)) + 1), _EPS)
    if len(values) < 2:
        return floor
    mean = sum(values) / len(values)
    var = sum((v - mean) ** 2 for v in values) / len(values)
    scott = math.sqrt(var) * len(values) ** (-0.2)
    return max(scott, floor)


def _normal_pdf(x: float, mu: float, sigma: float) -> float:
    z = (x - mu) / sigma
    return math.exp(-0.5 * z * z) / (sigma * math.sqrt(2 * math.pi))


def _numeric_density(param: Param, x: float, values: list[float], bw: float) -> float:
    """Kernel mixture with one uniform prior component over the domain."""
    prior = 1.0 / _domain_width(param)
    if not values:
        return prior
    kernels = sum(_normal_pdf(x, v, bw) for v in values)
    return (kernels + prior) / (len(values) + 1)


def _categorical_weights(param: Param, values: list) -> dict:
    choices = list(param.domain)
    counts = {c: 1.0 for c in choices}  # add-one smoothing
    for v in values:
        if v in counts:
            counts[v] += 1.0
    total = sum(counts.values())
    return {c: counts[c] / total for c in choices}


@dataclass
class TPESampler:
    space: HyperparameterSpace
    direction: str = "maximize"
    gamma: float = GAMMA
    n_startup: int = N_STARTUP
    n_ei: int = N_EI
    last_fallback: bool = field(default=False, init=False)

    def _losses(self, history) -> list[tuple[float, dict]]:
        usable = []
        for trial in history:
            objective = getattr(trial, "objective", None)
            if objective is None or not getattr(trial, "feasible", True):
                continue
            if getattr(trial, "status", "ok") != "ok":
                continue
            loss = objective if self.direction == "minimize" else -objective
            usable.append((loss, getattr(trial, "assignment")))
        return usable

    def sample(self, history, seed: int) -> dict:
        rng = random.Random(seed)
        usable = self._losses(history)
        n_good = math.ceil(self.gamma * len(usable))
        if len(usable) < self.n_startup or n_good == 0 or n_good == len(usable):
            self.last_fallback = True
            return sample_random(self.space, rng)
        self.last_fallback = False
        ranked = sorted(usable, key=lambda item: item[0])
        good = [assignment for _, assignment in ranked[:n_good]]
        bad = [assignment for _, assignment in ranked[n_good:]]

        candidates = [self._draw_candidate(good, rng) for _ in range(self.n_ei)]
        scored = [(self._log_ratio(c, good, bad), i, c) for i, c in enumerate(candidates)]
        scored.sort(key=lambda item: (-item[0], item[1]))
        return scored[0][2]

    def _values_for(self, param: Param, assignments: list[dict]) -> list:
        return [a[param.name] for a in assignments if param.name in a]

    def _draw_candidate(self, good: list[dict], rng: random.Random) -> dict:
        assignment: dict = {}
        for param in self.space:
            if not param.active(assignment):
                continue
            values = self._values_for(param, good)
            if not values:
                assignment[param.name] = param.draw_uniform(rng)
            elif param.kind == "categorical":
                weights = _categorical_weights(param, values)
                choices = list(param.domain)
                assignment[param.name] = rng.choices(
                    choices, weights=[weights[c] for c in choices]
                )[0]
            else:
                # the prior component keeps one uniform draw in n+1 alive
                if rng.random() < 1.0 / (len(values) + 1):
                    assignment[param.name] = param.draw_uniform(rng)
                else:
                    raw_values = [_transform(param, v) for v in values]
                    bw = _bandwidth(param, raw_values)
                    anchor = rng.choice(raw_values)
                    assignment[param.name] = _untransform(param, rng.gauss(anchor, bw))
        return assignment

    def _log_ratio(self, assignment: dict, good: list[dict], bad: list[dict]) -> float:
        total = 0.0
        for param in self.space:
            if param.name not in assignment:
                continue
            value = assignment[param.name]
            good_values = self._values_for(param, good)
            bad_values = self._values_for(param, bad)
            if param.kind == "categorical":
                l = _categorical_weights(param, good_values).get(value, _EPS)
                g = _categorical_weights(param, bad_values).get(value, _EPS)
            else:
                x = _transform(param, value)
                good_raw = [_transform(param, v) for v in good_values]
                bad_raw = [_transform(param, v) for v in bad_values]
                l = _numeric_density(param, x, good_raw, _bandwidth(param, good_raw))
                g = _numeric_density(param, x, bad_raw, _bandwidth(param, bad_raw))
            total += math.log(max(l, _EPS)) - math.log(max(g, _EPS))
        return total


def sample_tpe(
    space: HyperparameterSpace, history, seed: int, direction: str = "maximize"
) -> dict:
    """Functional form of the sampler; see TPESampler for the knobs."""
    return TPESampler(space=space, direction=direction).sample(history, seed)
