import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from tileproof import smt  # noqa: E402

BENCH_DIR = os.path.join(os.path.dirname(__file__), "..", "benchmarks")


def solver_available():
    try:
        smt.find_solver()
        return True
    except smt.SolverConfigError:
        return False


needs_solver = pytest.mark.skipif(
    not solver_available(),
    reason="no SMT solver (install z3 on PATH or npm install z3-solver in tools/)")


@pytest.fixture(scope="session")
def solver():
    if not solver_available():
        pytest.skip("no SMT solver configured")
    return smt.Solver()


def bench(name):
    return os.path.join(BENCH_DIR, name + ".tla")
