"""tileproof command line: verify .tla programs and dump internals.

Exit codes: 0 Verified, 1 Violated, 2 Inconclusive/Timeout, 3 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import smt
from .cfg import build_cfg, segments
from .driver import RunPlan, report, tiled_verify
from .interp import RunConfig, dump_traces, run_random
from .lang import SourceError
from .parser import parse_file

EXIT = {"Verified": 0, "Violated": 1, "Inconclusive": 2, "Timeout": 2}


def make_parser():
    ap = argparse.ArgumentParser(
        prog="tileproof",
        description="Prove quantified array assertions in loop programs by tiling.")
    sub = ap.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", help="verify a .tla program")
    v.add_argument("file", help="source program (.tla)")
    v.add_argument("--unwind", type=int, default=3, metavar="N",
                   help="loop unrollings for the counterexample phase (default 3)")
    v.add_argument("--rounds", type=int, default=3, metavar="R",
                   help="candidate refinement rounds (default 3)")
    v.add_argument("--runs", type=int, default=10, metavar="K",
                   help="random executions for invariant mining (default 10)")
    v.add_argument("--seed", type=int, default=2024, metavar="S")
    v.add_argument("--size", type=int, default=8, metavar="N",
                   help="concrete array size used while mining (default 8)")
    v.add_argument("--solver", metavar="PATH",
                   help="SMT solver binary (default: $TILEPROOF_SOLVER, z3, tools/z3smt)")
    v.add_argument("--strict-tiles", action="store_true",
                   help="run the advisory strict tile validations")
    v.add_argument("--timeout", type=float, default=900.0, metavar="SEC",
                   help="global timeout in seconds (default 900)")
    v.add_argument("--task-timeout", type=float, default=10.0, metavar="SEC",
                   help="per-task solver timeout in seconds (default 10)")
    v.add_argument("--json", metavar="OUT", help="write the JSON report to OUT")
    v.add_argument("--dump-cfg", action="store_true", help="print the CFG in DOT format")
    v.add_argument("--dump-tiles", action="store_true", help="print tiles per segment/array")
    v.add_argument("--dump-candidates", action="store_true",
                   help="print mined candidate invariants with provenance")
    v.add_argument("--dump-smt", metavar="DIR",
                   help="write one SMT-LIB2 file per task into DIR")
    v.add_argument("--trace-out", metavar="FILE",
                   help="dump mining trace tuples as line-delimited JSON")
    return ap


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        program = parse_file(args.file)
    except SourceError as err:
        print(err.render(args.file), file=sys.stderr)
        return 3
    except OSError as err:
        print("tileproof: %s" % err, file=sys.stderr)
        return 3

    if args.dump_cfg:
        print(build_cfg(program).to_dot())

    if args.trace_out:
        tuples = run_random(program, RunConfig(array_size=args.size,
                                               runs=args.runs, seed=args.seed))
        dump_traces(tuples, args.trace_out)

    plan = RunPlan(unwind=args.unwind, rounds=args.rounds, runs=args.runs,
                   seed=args.seed, array_size=args.size,
                   task_timeout_ms=int(args.task_timeout * 1000),
                   global_timeout_s=args.timeout,
                   strict_tiles=args.strict_tiles)
    try:
        solver = smt.Solver(args.solver, default_timeout_ms=plan.task_timeout_ms)
    except smt.SolverConfigError as err:
        print("tileproof: %s" % err, file=sys.stderr)
        return 3

    if args.dump_smt:
        os.makedirs(args.dump_smt, exist_ok=True)
        solver = _DumpingSolver(solver, args.dump_smt, program.name)

    verdict = tiled_verify(program, plan, solver)
    doc = report(program, verdict)

    if args.dump_tiles:
        for sid, arr, tile in verdict.tiles:
            shown = tile.describe() if tile is not None else "<no tile>"
            print("tile %s %s: %s" % (sid, arr, shown))
    if args.dump_candidates:
        for c in verdict.candidates:
            print("candidate @%s: %s  [%s; %s]" %
                  (c.cutpoint, c.formula_str, c.provenance, c.status))

    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")

    print("%s: %s (%s; %d tasks, %.1fs)" %
          (program.name, verdict.status, verdict.reason,
           len(verdict.tasks), verdict.wall_ms / 1000.0))
    for note in verdict.notes:
        print("note: %s" % note, file=sys.stderr)
    return EXIT[verdict.status]


class _DumpingSolver:
    """Wraps a Solver, writing each emitted script next to the answer."""

    def __init__(self, inner, outdir, benchmark):
        self.inner = inner
        self.outdir = outdir
        self.benchmark = benchmark
        self.n = 0

    @property
    def default_timeout_ms(self):
        return self.inner.default_timeout_ms

    def check_script(self, script, timeout_ms=None):
        text = smt.emit(script)
        tag = "".join(ch if ch.isalnum() or ch in "._-" else "_"
                      for ch in (script.comment.split("\n")[0] or "task"))[:80]
        path = os.path.join(self.outdir, "%s.%03d.%s.smt2" % (self.benchmark, self.n, tag))
        self.n += 1
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        return self.inner.check(text, timeout_ms)

    def check(self, text, timeout_ms=None):
        return self.inner.check(text, timeout_ms)


if __name__ == "__main__":
    sys.exit(main())
