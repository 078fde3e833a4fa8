"""tileproof: prove universally quantified array assertions in loop programs
by tiling array accesses per loop iteration and composing per-segment proofs.
"""

from .driver import RunPlan, Verdict, report, report_json, tiled_verify
from .interp import RunConfig, eval_assertion, run_random
from .lang import Program, QuantAssertion, SourceError, validate
from .parser import desugar_general_loop, parse, parse_file
from .smt import Solver, SolverConfigError, find_solver

__all__ = [
    "RunPlan", "Verdict", "report", "report_json", "tiled_verify",
    "RunConfig", "eval_assertion", "run_random",
    "Program", "QuantAssertion", "SourceError", "validate",
    "desugar_general_loop", "parse", "parse_file",
    "Solver", "SolverConfigError", "find_solver",
]

__version__ = "0.1.0"
