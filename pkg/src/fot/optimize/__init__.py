"""Hyperparameter search (random + tree-structured Parzen estimator) and
evolutionary prompt optimization over scheme runs."""

from fot.optimize.space import HyperparameterSpace, Param, sample_random
from fot.optimize.tpe import TPESampler, sample_tpe
from fot.optimize.study import Objective, StudyReport, Trial, run_study
from fot.optimize.copro import CoproCandidate, CoproResult, optimize_prompt_copro

__all__ = [
    "HyperparameterSpace",
    "Param",
    "sample_random",
    "TPESampler",
    "sample_tpe",
    "Objective",
    "StudyReport",
    "Trial",
    "run_study",
    "CoproCandidate",
    "CoproResult",
    "optimize_prompt_copro",
]
