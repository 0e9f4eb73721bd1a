"""Reference schemes: game-of-24 tree search, list sorting (divide-and-conquer
and iterative-refinement variants), and a dynamic question-decomposition demo."""

from fot.schemes.base import SCHEMES, SchemeSpec, get_scheme, run_instance
from fot.schemes import go24 as _go24  # noqa: F401  (registers kinds + scheme)
from fot.schemes import sorting as _sorting  # noqa: F401
from fot.schemes import decomp as _decomp  # noqa: F401
from fot.schemes.go24 import build_tot_go24, go24_check
from fot.schemes.sorting import build_got_sorting, build_tot_sorting, count_mistakes
from fot.schemes.decomp import build_dynamic_decomp, make_decomp_backend

__all__ = [
    "SCHEMES",
    "SchemeSpec",
    "get_scheme",
    "run_instance",
    "build_tot_go24",
    "go24_check",
    "build_got_sorting",
    "build_tot_sorting",
    "count_mistakes",
    "build_dynamic_decomp",
    "make_decomp_backend",
]
