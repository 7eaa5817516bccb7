"""A small user-schedulable array language.

Algorithms are pure integer funcs with update stages; schedules rewrite the
lowered loop nests; bounds inference fills in the loop and allocation extents.
The harness checks that every scheduled program agrees with the algorithm.
"""

from .alg import FuncDef, Pipeline, RealizeInput, Stage, realize_alg, validate
from .bounds import ENGINES, extract, infer, lift_beta0
from .harness import FuzzConfig, Verdict, check_confluence, check_engine_quality, fuzz
from .lower import lower
from .parse import ParseError, parse_pipeline, parse_schedule
from .sched import apply_schedule, validate_schedule
from .tir import run_ir

__all__ = [
    "ENGINES",
    "FuncDef",
    "FuzzConfig",
    "ParseError",
    "Pipeline",
    "RealizeInput",
    "Stage",
    "Verdict",
    "apply_schedule",
    "check_confluence",
    "check_engine_quality",
    "extract",
    "fuzz",
    "infer",
    "lift_beta0",
    "lower",
    "parse_pipeline",
    "parse_schedule",
    "realize_alg",
    "run_ir",
    "validate",
    "validate_schedule",
]
