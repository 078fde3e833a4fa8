"""End-to-end verification: shallow BMC, candidate mining, tiling, check
dispatch, refinement rounds with candidate dropping, and the final verdict.

Phases, in order: (1) bounded model checking for a shallow counterexample;
(2) candidate mid-conditions mined from randomized traces, attached to the
cut-point after the loop that observed them; (3) per loop-body segment a
heuristic tile, then T1 / T2* / T3* against the targets at the following
cut-point; out-of-loop segments get T2**.  When a check for a candidate
target fails, the candidate is dropped and the round repeats (tiles are
computed once and never updated).  Verified requires every required task to
pass; an unknown or timed-out task never verifies.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from . import miner as miner_mod
from . import smt
from .cfg import END, START, build_cfg, next_cut_point, segments
from .interp import (
    MiningUnavailable, RunConfig, RunRejected, Store, eval_assertion,
    run_program, run_random,
)
from .lang import QuantAssertion, assertion_str, expr_str, has_nested_loop, iter_loops
from .symexec import scalar_terms, translate_expr
from .tiler import TileError, find_heuristic_tile, strict_validate
from .vcgen import (
    CheckTask, TaskResult, discharge, encode_bmc_cex, encode_t1, encode_t2dstar,
    encode_t2star, encode_t3star, encode_tightness, global_assumptions,
)


@dataclass
class RunPlan:
    unwind: int = 3
    rounds: int = 3
    runs: int = 10
    seed: int = 2024
    array_size: int = 8
    value_range: tuple = (-10, 10)
    task_timeout_ms: int = 10000
    global_timeout_s: float = 900.0
    strict_tiles: bool = False
    workers: int = 8

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.task_timeout_ms <= 0 or self.global_timeout_s <= 0:
            raise ValueError("timeouts must be positive")


@dataclass
class Verdict:
    status: str  # Verified | Violated | Inconclusive | Timeout
    reason: str = ""
    tasks: list = field(default_factory=list)  # TaskResult, final round + BMC
    tiles: list = field(default_factory=list)  # (segment id, array, TilePredicate|None)
    candidates: list = field(default_factory=list)
    cex: dict | None = None
    rounds_used: int = 0
    wall_ms: float = 0.0
    strict_reports: list = field(default_factory=list)
    notes: list = field(default_factory=list)


class _Deadline:
    def __init__(self, seconds):
        self.t0 = time.monotonic()
        self.limit = seconds

    def remaining_ms(self):
        return (self.limit - (time.monotonic() - self.t0)) * 1000.0

    @property
    def expired(self):
        return self.remaining_ms() <= 0

    def elapsed_ms(self):
        return (time.monotonic() - self.t0) * 1000.0


def tiled_verify(p, plan=None, solver=None):
    """Run the full pipeline on a validated program; returns a Verdict."""
    plan = plan or RunPlan()
    solver = solver or smt.Solver(default_timeout_ms=plan.task_timeout_ms)
    clock = _Deadline(plan.global_timeout_s)
    verdict = Verdict(status="Inconclusive")

    g = build_cfg(p)
    segs = segments(g)
    body_segs = [s for s in segs if s.is_loop_body]
    linear_segs = [s for s in segs if not s.is_loop_body]
    heads = [s.source for s in body_segs]

    # Phase 1: shallow counterexample search
    bmc = encode_bmc_cex(p, plan.unwind)
    bmc_result = discharge(solver, bmc, min(plan.task_timeout_ms,
                                            max(1, int(clock.remaining_ms()))))
    verdict.tasks.append(bmc_result)
    if bmc_result.status == "cex":
        cex = _replay_counterexample(p, bmc_result.model)
        if cex is not None:
            verdict.status = "Violated"
            verdict.reason = "bounded model checking found a violating run"
            verdict.cex = cex
            verdict.wall_ms = clock.elapsed_ms()
            return verdict
        verdict.notes.append("BMC model failed concrete replay; ignored")

    if has_nested_loop(p):
        verdict.status = "Inconclusive"
        verdict.reason = ("program has nested loops; automated tiling covers "
                          "non-nested loops only")
        verdict.wall_ms = clock.elapsed_ms()
        return verdict

    # Phase 2: candidate mid-conditions (useful only with >= 2 loops)
    slots = {h: [] for h in heads}
    all_candidates = []
    if len(heads) >= 2:
        try:
            traces = run_random(p, RunConfig(array_size=plan.array_size,
                                             runs=plan.runs, seed=plan.seed,
                                             value_range=plan.value_range))
            mined = miner_mod.mine(traces, p, min_support=min(plan.runs, 10))
        except MiningUnavailable as err:
            mined = []
            verdict.notes.append("mining unavailable: %s" % err)
        head_of = {g.loop_of_head[h].counter: h for h in heads}
        for cand in mined:
            h = head_of.get(cand.cutpoint)
            nxt = next_cut_point(g, segs, h) if h is not None else END
            if nxt == END or nxt not in slots:
                continue  # Start and End invariants are pinned, never mined
            cand.cutpoint = _slot_name(g, nxt)
            if all(cand.key() != c.key() for c in slots[nxt]):
                slots[nxt].append(cand)
                all_candidates.append(cand)
    verdict.candidates = all_candidates

    # Phase 3: tiles, computed once (failing checks drop candidates, not tiles)
    env = scalar_terms(p)
    globals_terms = global_assumptions(p, env)
    tiles = {}
    for seg in body_segs:
        try:
            tiles[seg.id] = find_heuristic_tile(g, seg, solver, globals_terms)
        except TileError as err:
            tiles[seg.id] = {}
            verdict.notes.append("tiling failed for %s: %s" % (seg.id, err))
    verdict.tiles = [(sid, arr, t) for sid, m in sorted(tiles.items())
                     for arr, t in sorted(m.items())]
    _note_tile_size_mismatch(verdict, tiles)

    strict_results = []
    if plan.strict_tiles:
        for seg in body_segs:
            etrip = translate_expr(seg.loop.trip, env)
            for arr, tile in sorted(tiles[seg.id].items()):
                if tile is None:
                    continue
                rep = strict_validate(tile, etrip, env, solver, globals_terms)
                verdict.strict_reports.append((seg.id, arr, rep))
                for which in ("disjoint", "range_like", "compact"):
                    task = CheckTask(
                        id="STRICT:%s:%s:%s" % (seg.id, arr, which),
                        kind="STRICT", segment=seg.id, array=arr,
                        target=which, script=smt.CheckScript([]),
                        expect="unsat-means-pass", advisory=True)
                    strict_results.append(TaskResult(
                        task, getattr(rep, which), "strict", 0.0))

    # Phase 4: obligations and refinement rounds
    final_results = []
    for round_no in range(1, plan.rounds + 1):
        verdict.rounds_used = round_no
        if clock.expired:
            verdict.status = "Timeout"
            verdict.reason = "global timeout during round %d" % round_no
            verdict.tasks = [bmc_result] + final_results
            verdict.wall_ms = clock.elapsed_ms()
            return verdict
        tasks, task_targets, synthetic = _build_round_tasks(
            p, g, segs, body_segs, linear_segs, slots, tiles, plan)
        results = _dispatch(solver, tasks, plan, clock)
        if results is None:
            verdict.status = "Timeout"
            verdict.reason = "global timeout while discharging tasks"
            verdict.tasks = [bmc_result] + final_results
            verdict.wall_ms = clock.elapsed_ms()
            return verdict
        results.extend(synthetic)
        final_results = results
        dropped = _drop_failed_candidates(results, task_targets, slots)
        if not dropped:
            break

    verdict.tasks = [bmc_result] + strict_results + final_results
    required = [r for r in final_results if not r.task.advisory]
    if required and all(r.ok for r in required):
        for cand in all_candidates:
            if cand.status == "untried":
                cand.status = "proven"
        verdict.status = "Verified"
        verdict.reason = "all tiling obligations discharged"
    elif not required:
        verdict.status = "Verified" if _trivial_post(p) else "Inconclusive"
        verdict.reason = "no obligations generated"
    else:
        first_bad = next(r for r in required if not r.ok)
        verdict.status = "Inconclusive"
        verdict.reason = "task %s: %s (%s)" % (
            first_bad.task.id, first_bad.status, first_bad.solver_status)
    verdict.wall_ms = clock.elapsed_ms()
    return verdict


def _trivial_post(p):
    return p.post.is_trivial()


def _slot_name(g, head):
    return "head(%s)" % g.loop_of_head[head].counter


def _alive(cands):
    return [c.assertion for c in cands if c.status != "dropped"]


def _build_round_tasks(p, g, segs, body_segs, linear_segs, slots, tiles, plan):
    """All required (and advisory) tasks for the current candidate sets."""
    tasks = []
    task_targets = {}  # task id -> list of candidates it may refute
    synthetic = []  # TaskResults fabricated without a solver call (no tile)
    env = scalar_terms(p)

    def targets_at(sink):
        if sink == END:
            return ([p.post] if not p.post.is_trivial() else []), []
        cands = [c for c in slots.get(sink, []) if c.status != "dropped"]
        return [c.assertion for c in cands], cands

    def invs_at(source, seg):
        if source == START:
            return [p.pre] if not p.pre.is_trivial() else []
        invs = _alive(slots.get(source, []))
        if source == (body_segs[0].source if body_segs else None):
            pre_ok = _pre_transported(p, g, segs)
            if pre_ok and not p.pre.is_trivial():
                invs = [p.pre] + invs
        return invs

    for seg in linear_segs:
        targets, cands = targets_at(seg.sink)
        if not targets:
            continue
        pre_invs = invs_at(seg.source, seg)
        established = targets if seg.source != START else []
        task = encode_t2dstar(g, seg, pre_invs, targets, established)
        if task is not None:
            tasks.append(task)
            task_targets[task.id] = cands

    for seg in body_segs:
        head = seg.source
        nxt = next_cut_point(g, segs, head)
        targets, cands = targets_at(nxt)
        invs = invs_at(head, seg)
        etrip = translate_expr(seg.loop.trip, env)
        ztask = encode_t2dstar(
            g, None, invs, targets, established=(),
            extra_assumptions=[smt.le(etrip, smt.mk_int(0))],
            label="zerotrip(%s)" % seg.loop.counter)
        if ztask is not None:
            tasks.append(ztask)
            task_targets[ztask.id] = cands
        for qa in targets:
            cand = next((c for c in cands if c.assertion == qa), None)
            refutes = [cand] if cand is not None else []
            if qa.index_vars and len(qa.index_vars) == 1:
                tile = _tile_for(p, qa, seg, tiles[seg.id])
                if tile is None:
                    synthetic.append(_no_tile_result(seg, qa))
                    task_targets[synthetic[-1].task.id] = refutes
                    continue
                t1 = encode_t1(g, seg, tile, qa, p.array_decl(tile.array).size)
                t2 = encode_t2star(g, seg, tile, qa, invs)
                t3 = encode_t3star(g, seg, tile, qa, invs)
                for t in (t1, t2, t3):
                    tasks.append(t)
                    task_targets[t.id] = refutes
            elif not qa.index_vars:
                t2 = encode_t2star(g, seg, None, qa, invs)
                tasks.append(t2)
                task_targets[t2.id] = refutes
            else:
                synthetic.append(_unsupported_result(seg, qa))
                task_targets[synthetic[-1].task.id] = refutes
        if plan.strict_tiles:
            for arr, tile in sorted(tiles[seg.id].items()):
                if tile is None:
                    continue
                tasks.append(encode_tightness(g, seg, tile, invs))
    return tasks, task_targets, synthetic


def _pre_transported(p, g, segs):
    """Pre survives to the first loop head when the prelude writes nothing
    mentioned by it."""
    from .lang import bool_vars, stmt_write_set

    prelude = next((s for s in segs if s.source == START), None)
    if prelude is None:
        return False
    touched = set()
    for nid in prelude.nodes:
        node = g.nodes[nid]
        if node.kind in ("assign", "array_assign", "init", "incr"):
            touched.add(getattr(node.stmt, "name", None) or node.stmt.array)
    mentioned = bool_vars(p.pre.range) | bool_vars(p.pre.body)
    for b in (p.pre.range, p.pre.body):
        mentioned |= _arrays_of_bool(b)
    return not (touched & mentioned)


def _arrays_of_bool(b):
    from .lang import bool_exprs
    from .tiler import _arrays_in

    out = set()
    for e in bool_exprs(b):
        out |= _arrays_in(e)
    return out


def _tile_for(p, target, seg, seg_tiles):
    """Tile used to slice a target in this segment.

    Preference: the single updated array also mentioned by the target, then
    the segment's single tiled array; equal-formula tiles collapse.
    """
    from .tiler import _arrays_in
    from .lang import bool_exprs

    mentioned = set()
    for e in bool_exprs(target.body):
        mentioned |= _arrays_in(e)
    usable = {a: t for a, t in seg_tiles.items() if t is not None}
    if not usable:
        return None
    both = [usable[a] for a in sorted(usable) if a in mentioned]
    pool = both or [usable[a] for a in sorted(usable)]
    formulas = {tuple(expr_str(e) for e in t.update_exprs) for t in pool}
    if len(formulas) == 1:
        return pool[0]
    return None


def _no_tile_result(seg, qa):
    task = CheckTask(
        id="T2STAR:%s:%s" % (seg.id, assertion_str(qa)), kind="T2STAR",
        segment=seg.id, array=None, target=assertion_str(qa),
        script=smt.CheckScript([]), expect="unsat-means-pass")
    return TaskResult(task, "fail", "no-tile", 0.0)


def _unsupported_result(seg, qa):
    task = CheckTask(
        id="T2STAR:%s:%s" % (seg.id, assertion_str(qa)), kind="T2STAR",
        segment=seg.id, array=None, target=assertion_str(qa),
        script=smt.CheckScript([]), expect="unsat-means-pass")
    return TaskResult(task, "unknown", "multi-index targets unsupported", 0.0)


def _dispatch(solver, tasks, plan, clock):
    """Discharge tasks concurrently; None when the global deadline expires."""
    results = []
    if not tasks:
        return results
    budget = clock.remaining_ms()
    if budget <= 0:
        return None
    timeout = max(1, min(plan.task_timeout_ms, int(budget)))
    with ThreadPoolExecutor(max_workers=max(1, plan.workers)) as pool:
        futures = [pool.submit(discharge, solver, t, timeout) for t in tasks]
        for f in futures:
            results.append(f.result())
    if clock.expired:
        return None
    results.sort(key=lambda r: r.task.id)
    return results


def _drop_failed_candidates(results, task_targets, slots):
    """Alg. 1 refinement: failing checks discard candidate mid-conditions."""
    dropped = []
    for r in results:
        if r.ok or r.task.advisory:
            continue
        for cand in task_targets.get(r.task.id, []):
            if cand is not None and cand.status != "dropped":
                miner_mod.drop(cand)
                dropped.append(cand)
    return dropped


# ---------------------------------------------------------------------------
# Counterexample replay

def _replay_counterexample(p, model):
    """Re-run the program on the model's inputs; confirm the post fails."""
    if model is None:
        return None
    scalars = {}
    for v in p.scalars:
        val = model.get(v, 0)
        scalars[v] = val if isinstance(val, int) else 0
    store = Store(scalars, {})
    try:
        from .interp import eval_expr
        for a in p.arrays:
            n = eval_expr(a.size, store)
            if n < 1 or n > 10 ** 6:
                return None
            cells = model.get(a.name)
            get = cells.get if hasattr(cells, "get") else lambda i: 0
            store.arrays[a.name] = [_as_int(get(i)) for i in range(n)]
        final = run_program(p, store)
        if eval_assertion(p, final):
            return None
    except Exception:
        return None
    witness = {k: v for k, v in model.items() if k.startswith("cex_")}
    return {
        "model": {
            "scalars": {k: scalars[k] for k in sorted(scalars)},
            "arrays": {a: list(store.arrays[a]) for a in sorted(store.arrays)},
            "witness": {k: _as_int(v) for k, v in sorted(witness.items())},
        }
    }


def _as_int(v):
    return v if isinstance(v, int) else 0


def _note_tile_size_mismatch(verdict, tiles):
    widths = {}
    for sid, m in tiles.items():
        for arr, t in m.items():
            if t is not None and t.closed_form is not None:
                widths[(sid, arr)] = t.closed_form[1]
    if len(set(widths.values())) > 1:
        verdict.notes.append(
            "tile sizes differ across loops: %s" %
            ", ".join("%s/%s=%d" % (sid, arr, w)
                      for (sid, arr), w in sorted(widths.items())))


# ---------------------------------------------------------------------------
# Machine-readable report

def report(p, verdict):
    """JSON-ready document with stable key order."""
    tiles = []
    for sid, arr, t in verdict.tiles:
        entry = {"segment": sid, "array": arr}
        if t is None:
            entry["formula"] = None
            entry["closed_form"] = None
        else:
            entry["formula"] = " || ".join(
                "j == %s" % expr_str(e) for e in t.update_exprs)
            entry["closed_form"] = (t.describe() if t.closed_form is not None else None)
        tiles.append(entry)
    tasks = [{"kind": r.task.kind, "segment": r.task.segment,
              "status": r.status, "time_ms": round(r.time_ms, 3)}
             for r in sorted(verdict.tasks, key=lambda r: r.task.id)]
    candidates = [{"cutpoint": c.cutpoint, "formula": c.formula_str,
                   "status": c.status}
                  for c in sorted(verdict.candidates,
                                  key=lambda c: (c.cutpoint, c.formula_str))]
    doc = {
        "benchmark": p.name,
        "status": verdict.status,
        "tiles": tiles,
        "tasks": tasks,
        "candidates": candidates,
    }
    if verdict.cex is not None:
        doc["cex"] = verdict.cex
    return doc


def report_json(p, verdict):
    return json.dumps(report(p, verdict), indent=2)
