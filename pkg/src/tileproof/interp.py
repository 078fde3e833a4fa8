"""Concrete interpreter with randomized runs and cut-point trace recording.

Programs run over 64-bit integers; a run that overflows, divides by zero,
indexes out of bounds, fails an assume, or exceeds the step budget is
rejected and redrawn.  At the end of every loop-body iteration a trace tuple
is recorded (the dummy-call instrumentation): the loop counter, the live
scalars, and for each update index expression of the surrounding segment the
value of every array at that index.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from .lang import (
    ArrayAssign, ArrayRead, Assign, Assume, BinOp, Block, BoolLit, BoolOp,
    Cmp, For, If, Not, Num, Var, expr_str, iter_loops,
)

INT64_MIN = -(2 ** 63)
INT64_MAX = 2 ** 63 - 1
STEP_BUDGET = 1_000_000


class RunRejected(Exception):
    """Run hit overflow / div-by-zero / out-of-bounds / failed assume."""


class MiningUnavailable(Exception):
    """All randomized runs were rejected; no traces available."""


class AssertionEvalError(Exception):
    """Quantifier expansion impossible over the concrete store."""


@dataclass
class RunConfig:
    array_size: int = 8
    runs: int = 10
    seed: int = 2024
    value_range: tuple = (-10, 10)
    max_retries: int = 100

    def __post_init__(self):
        if self.array_size < 1:
            raise ValueError("array_size must be >= 1")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")


@dataclass
class TraceTuple:
    cutpoint: str  # loop counter naming the cut-point
    run: int
    values: dict

    def to_json(self):
        return json.dumps({"cutpoint": self.cutpoint, "run": self.run,
                           "values": self.values}, sort_keys=True)


@dataclass
class Store:
    scalars: dict
    arrays: dict  # name -> list[int]

    def copy(self):
        return Store(dict(self.scalars), {k: list(v) for k, v in self.arrays.items()})


def _check64(v):
    if v < INT64_MIN or v > INT64_MAX:
        raise RunRejected("64-bit overflow")
    return v


def py_ediv(a, b):
    if b == 0:
        raise RunRejected("division by zero")
    return a // b if b > 0 else -(a // -b)


def eval_expr(e, store, extra=None):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        if extra and e.name in extra:
            return extra[e.name]
        try:
            return store.scalars[e.name]
        except KeyError:
            raise RunRejected("unbound scalar %s" % e.name)
    if isinstance(e, ArrayRead):
        arr = store.arrays[e.array]
        idx = eval_expr(e.index, store, extra)
        if not 0 <= idx < len(arr):
            raise RunRejected("index %d out of bounds for %s" % (idx, e.array))
        return arr[idx]
    if isinstance(e, BinOp):
        a = eval_expr(e.left, store, extra)
        b = eval_expr(e.right, store, extra)
        if e.op == "+":
            return _check64(a + b)
        if e.op == "-":
            return _check64(a - b)
        if e.op == "*":
            return _check64(a * b)
        if e.op == "/":
            return _check64(py_ediv(a, b))
        if e.op == "%":
            return a - b * py_ediv(a, b)
    raise TypeError(e)


def eval_bool(b, store, extra=None):
    if isinstance(b, BoolLit):
        return b.value
    if isinstance(b, Cmp):
        x = eval_expr(b.left, store, extra)
        y = eval_expr(b.right, store, extra)
        return {"<": x < y, "<=": x <= y, "==": x == y,
                "!=": x != y, ">=": x >= y, ">": x > y}[b.op]
    if isinstance(b, BoolOp):
        if b.op == "and":
            return all(eval_bool(a, store, extra) for a in b.args)
        return any(eval_bool(a, store, extra) for a in b.args)
    if isinstance(b, Not):
        return not eval_bool(b.arg, store, extra)
    raise TypeError(b)


class _Exec:
    def __init__(self, store, observe=None, obs_exprs=None):
        self.store = store
        self.observe = observe  # callback(counter, values-dict)
        self.obs_exprs = obs_exprs or {}
        self.steps = 0
        self.loop_stack = []

    def tick(self):
        self.steps += 1
        if self.steps > STEP_BUDGET:
            raise RunRejected("step budget exceeded")

    def run(self, s):
        self.tick()
        st = self.store
        if isinstance(s, Block):
            for x in s.stmts:
                self.run(x)
        elif isinstance(s, Assign):
            st.scalars[s.name] = eval_expr(s.value, st)
        elif isinstance(s, ArrayAssign):
            arr = st.arrays[s.array]
            idx = eval_expr(s.index, st)
            if not 0 <= idx < len(arr):
                raise RunRejected("index %d out of bounds for %s" % (idx, s.array))
            arr[idx] = eval_expr(s.value, st)
        elif isinstance(s, Assume):
            if not eval_bool(s.cond, st):
                raise RunRejected("assume failed")
        elif isinstance(s, If):
            if eval_bool(s.cond, st):
                self.run(s.then)
            elif s.orelse is not None:
                self.run(s.orelse)
        elif isinstance(s, For):
            trips = eval_expr(s.trip, st)
            st.scalars[s.counter] = 0
            self.loop_stack.append(s.counter)
            for it in range(max(0, trips)):
                st.scalars[s.counter] = it
                snapshot = dict(st.scalars) if self.observe else None
                self.run(s.body)
                if self.observe:
                    self._record(s.counter, snapshot)
                st.scalars[s.counter] = it + 1
            if trips <= 0:
                st.scalars[s.counter] = 0
            self.loop_stack.pop()
        else:
            raise TypeError(s)

    def _record(self, counter, snapshot):
        st = self.store
        counters = set(self.all_counters)
        in_scope = set(self.loop_stack)
        values = {}
        for name, v in st.scalars.items():
            # live scalars: non-counters, plus the counters currently in scope
            if name not in counters or name in in_scope:
                values[name] = v
        snap_store = Store(snapshot, st.arrays)
        for e in self.obs_exprs.get(counter, ()):
            try:
                idx = eval_expr(e, snap_store)
            except RunRejected:
                continue
            for aname, arr in st.arrays.items():
                if 0 <= idx < len(arr):
                    values["%s[%s]" % (aname, expr_str(e))] = arr[idx]
        self.observe(counter, values)

    all_counters = ()


def run_program(p, store, observe=None, obs_exprs=None):
    """Execute p over a copy of store; return the final store."""
    final = store.copy()
    ex = _Exec(final, observe, obs_exprs)
    ex.all_counters = tuple(loop.counter for loop in iter_loops(p.body))
    ex.run(p.body)
    return final


def run_stmt(stmt, store):
    """Execute one statement in place (used by enumeration oracles)."""
    _Exec(store).run(stmt)
    return store


def initial_store(p, config, rng):
    """Random initial store with size parameters fixed to config.array_size."""
    params = set(p.size_params())
    lo, hi = config.value_range
    scalars = {}
    for v in p.scalars:
        scalars[v] = config.array_size if v in params else rng.randint(lo, hi)
    store = Store(scalars, {})
    for a in p.arrays:
        n = eval_expr(a.size, store)
        if n < 1:
            raise RunRejected("array %s has non-positive size %d" % (a.name, n))
        store.arrays[a.name] = [rng.randint(lo, hi) for _ in range(n)]
    return store


def observation_exprs(p):
    """Per-loop index expressions observed by the dummy instrumentation."""
    from .cfg import build_cfg, segments
    from .tiler import collect_update_exprs, collect_read_exprs

    g = build_cfg(p)
    out = {}
    for sg in segments(g):
        if not sg.is_loop_body:
            continue
        exprs = []
        seen = set()
        per_array = collect_update_exprs(g, sg)
        pools = list(per_array.values())
        if not any(pools):
            pools = [[e for _a, e in collect_read_exprs(g, sg)]]
        for pool in pools:
            for e in pool:
                key = expr_str(e)
                if key not in seen:
                    seen.add(key)
                    exprs.append(e)
        out[sg.loop.counter] = exprs
    return out


def run_random(p, config):
    """Randomized executions of p; returns the recorded trace tuples.

    Deterministic for a given seed.  Rejected runs (overflow, failed
    assume, out-of-bounds) are redrawn up to config.max_retries times each.
    """
    rng = random.Random(config.seed)
    obs = observation_exprs(p)
    tuples = []
    for run_idx in range(config.runs):
        for _attempt in range(config.max_retries):
            try:
                store = initial_store(p, config, rng)
                recorded = []

                def observe(counter, values):
                    recorded.append(TraceTuple(counter, run_idx, values))

                run_program(p, store, observe, obs)
                tuples.extend(recorded)
                break
            except RunRejected:
                continue
        else:
            raise MiningUnavailable(
                "all %d retries rejected for run %d" % (config.max_retries, run_idx))
    return tuples


def eval_assertion(p, store, which="post"):
    """Ground-truth check of the pre/post condition on a final concrete store.

    The quantifier is expanded over a finite index window covering every
    array index plus a small margin.
    """
    qa = p.post if which == "post" else p.pre
    margin = 4
    hi = max((len(v) for v in store.arrays.values()), default=margin) + margin
    domain = range(-margin, hi)
    if qa.index_vars and not store.arrays:
        # no array to bound the range: only a provably bounded (or empty)
        # range can be expanded
        for probe in (-(2 ** 20), 2 ** 20):
            extra = {v: probe for v in qa.index_vars}
            try:
                if eval_bool(qa.range, store, extra):
                    raise AssertionEvalError(
                        "unbounded quantifier range with no concrete array size")
            except RunRejected:
                pass

    def check(vals):
        extra = dict(zip(qa.index_vars, vals))
        try:
            if not eval_bool(qa.range, store, extra):
                return True
            return eval_bool(qa.body, store, extra)
        except RunRejected as err:
            raise AssertionEvalError(str(err))

    def rec(i, vals):
        if i == len(qa.index_vars):
            return check(vals)
        return all(rec(i + 1, vals + [j]) for j in domain)

    return rec(0, [])


def dump_traces(tuples, path):
    with open(path, "w", encoding="utf-8") as fh:
        for t in tuples:
            fh.write(t.to_json() + "\n")
