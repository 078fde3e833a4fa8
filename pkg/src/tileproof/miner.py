"""Daikon-lite: linear candidate relations over trace tuples, lifted to
quantified candidate mid-conditions.

Templates over the dummy-call arguments (array cells at the observed update
indices, live scalars, the loop counter): v1 = v2 + c, v1 <= v2 + c,
v1 = c, v1 != v2, with |c| <= 8 minimized over the data.  An instance is
reported only when it holds on every tuple of its cut-point and the tuple
count reaches the support threshold.  Relations among array observations
are lifted by quantifying the loop counter over [0, E); relations that
involve the counter but no array cell are not lifted (they say nothing
once the loop has exited).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .interp import observation_exprs
from .lang import (
    ArrayRead, BinOp, BoolLit, Cmp, Num, QuantAssertion, Var, assertion_str,
    expr_str, iter_loops, subst_expr,
)

MAX_ABS_CONST = 8
MAX_CANDIDATES_PER_CUTPOINT = 24


@dataclass
class CandidateInvariant:
    cutpoint: str  # cut-point the lifted assertion is attached to
    assertion: QuantAssertion
    provenance: str  # template instance and support count
    status: str = "untried"  # untried | proven | dropped

    @property
    def formula_str(self):
        return assertion_str(self.assertion)

    def key(self):
        return (self.cutpoint, self.formula_str)


def drop(c):
    """Mark a candidate as dropped; later rounds exclude it."""
    c.status = "dropped"
    return c


def mine(tuples, program, min_support=10, max_candidates=MAX_CANDIDATES_PER_CUTPOINT):
    """Candidate invariants per observing cut-point from trace tuples.

    The returned candidates carry the observing loop's counter as their
    cutpoint; the driver re-attaches them to the cut-point that follows the
    loop.  Deterministic for identical input.
    """
    by_cp = {}
    for t in tuples:
        by_cp.setdefault(t.cutpoint, []).append(t)

    obs_map = _observation_map(program)
    trips = {loop.counter: loop.trip for loop in iter_loops(program.body)}
    size_params = set(program.size_params())

    out = []
    for cp in sorted(by_cp):
        rows = by_cp[cp]
        if len(rows) < min_support:
            continue
        names = sorted(set.intersection(*[set(r.values) for r in rows]))
        names = [n for n in names if n not in size_params]
        cols = {n: [r.values[n] for r in rows] for n in names}
        found = _instances(names, cols, cp)
        lifted = []
        for inst in found:
            qa = _lift(inst, cp, obs_map.get(cp, {}), trips[cp], program)
            if qa is not None:
                lifted.append(CandidateInvariant(
                    cutpoint=cp, assertion=qa,
                    provenance="%s; support=%d" % (inst[4], len(rows))))
        seen = set()
        for c in lifted:
            if c.key() not in seen:
                seen.add(c.key())
                out.append(c)
                if len(seen) >= max_candidates:
                    break
    return out


def _instances(names, cols, cp):
    """(template, v1, v2, c, description) tuples holding on all rows."""
    found = []
    for v in names:
        vals = cols[v]
        if all(x == vals[0] for x in vals) and abs(vals[0]) <= MAX_ABS_CONST:
            found.append(("const", v, None, vals[0], "%s == %d" % (v, vals[0])))
    for i, v1 in enumerate(names):
        for v2 in names[i + 1:]:
            a, b = cols[v1], cols[v2]
            diffs = [x - y for x, y in zip(a, b)]
            if all(d == diffs[0] for d in diffs) and abs(diffs[0]) <= MAX_ABS_CONST:
                found.append(("eq_offset", v1, v2, diffs[0],
                              "%s == %s + %d" % (v1, v2, diffs[0])))
                continue  # equality suppresses <= and != for the pair
            hi = max(diffs)
            if abs(hi) <= MAX_ABS_CONST:
                found.append(("le_offset", v1, v2, hi,
                              "%s <= %s + %d" % (v1, v2, hi)))
            lo = min(diffs)
            if abs(lo) <= MAX_ABS_CONST:
                found.append(("le_offset", v2, v1, -lo,
                              "%s <= %s + %d" % (v2, v1, -lo)))
            if all(d != 0 for d in diffs):
                found.append(("neq", v1, v2, None, "%s != %s" % (v1, v2)))
    return found


def _observation_map(program):
    """cutpoint -> {observed name: (array, index expr)}."""
    out = {}
    for counter, exprs in observation_exprs(program).items():
        m = {}
        for e in exprs:
            for a in program.arrays:
                m["%s[%s]" % (a.name, expr_str(e))] = (a.name, e)
        out[counter] = m
    return out


def _lift(inst, counter, obs, trip, program):
    """Replace observations A[e(l)] by A[e(t)] and quantify t over [0, E)."""
    template, v1, v2, c, _desc = inst
    involves_obs = (v1 in obs) or (v2 in obs)
    involves_counter = counter in (v1, v2)
    if involves_counter and not involves_obs:
        return None  # pure counter relations are meaningless after exit
    if not involves_obs:
        # scalar fact
        lhs, rhs = Var(v1), _rhs(template, v2, c, None, None)
        if rhs is None:
            return None
        return QuantAssertion((), BoolLit(True), _cmp(template, lhs, rhs))

    ivar = _fresh_index_name(program)
    t = Var(ivar)

    def as_expr(v):
        if v is None:
            return None
        if v in obs:
            arr, e = obs[v]
            return ArrayRead(arr, subst_expr(e, counter, t))
        if v == counter:
            return t
        return Var(v)

    lhs = as_expr(v1)
    rhs = _rhs(template, v2, c, as_expr, t)
    if lhs is None or rhs is None:
        return None
    rng = _and(Cmp("<=", Num(0), t), Cmp("<", t, trip))
    return QuantAssertion((ivar,), rng, _cmp(template, lhs, rhs))


def _rhs(template, v2, c, as_expr, t):
    if template == "const":
        return Num(c)
    base = as_expr(v2) if as_expr else Var(v2)
    if base is None:
        return None
    if template == "neq":
        return base
    if c == 0:
        return base
    return BinOp("+", base, Num(c))


def _cmp(template, lhs, rhs):
    op = {"const": "==", "eq_offset": "==", "le_offset": "<=", "neq": "!="}[template]
    return Cmp(op, lhs, rhs)


def _and(a, b):
    from .lang import conj
    return conj([a, b])


def _fresh_index_name(program):
    taken = set(program.scalars) | {a.name for a in program.arrays}
    name = "i"
    while name in taken:
        name += "q"
    return name


def recheck(candidate, tuples, program):
    """A mined candidate must hold on every tuple it was mined from.

    Substituting the observing counter back for the bound index variable
    turns every lifted array access A[e(t)] into the exact observation name
    A[e(l)] recorded in the trace tuples.
    """
    from .lang import subst_bool

    qa = candidate.assertion
    counter = candidate.cutpoint
    body = qa.body
    if qa.index_vars:
        body = subst_bool(body, qa.index_vars[0], Var(counter))
    for row in tuples:
        if row.cutpoint != counter:
            continue
        if not _eval_on_row(body, row.values):
            return False
    return True


def _eval_on_row(b, values):
    from .lang import BoolOp, Not

    if isinstance(b, Cmp):
        x = _row_expr(b.left, values)
        y = _row_expr(b.right, values)
        if x is None or y is None:
            return True  # observation missing in this tuple
        return {"<": x < y, "<=": x <= y, "==": x == y,
                "!=": x != y, ">=": x >= y, ">": x > y}[b.op]
    if isinstance(b, BoolOp):
        vals = [_eval_on_row(a, values) for a in b.args]
        return all(vals) if b.op == "and" else any(vals)
    if isinstance(b, Not):
        return not _eval_on_row(b.arg, values)
    if isinstance(b, BoolLit):
        return b.value
    raise TypeError(b)


def _row_expr(e, values):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, ArrayRead):
        return values.get("%s[%s]" % (e.array, expr_str(e.index)))
    if isinstance(e, Var):
        return values.get(e.name)
    if isinstance(e, BinOp):
        x = _row_expr(e.left, values)
        y = _row_expr(e.right, values)
        if x is None or y is None or e.op not in "+-*":
            return None
        return {"+": x + y, "-": x - y, "*": x * y}[e.op]
    return None
