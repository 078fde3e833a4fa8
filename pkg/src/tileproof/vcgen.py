"""Proof-obligation encoders: T1, T2*, T3*, T2**, shallow BMC, tightness.

Every obligation is a self-contained CheckScript whose negation is sent to
the solver: unsat means the obligation holds.  The shallow BMC query is the
one sat-means-counterexample task.  T1 carries an exact quantifier-free
fallback built from the inverted affine tile (used when the quantified
query comes back unknown).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import smt
from .lang import Assume, Block, For, QuantAssertion, bool_vars, stmt_write_set
from .symexec import (
    exec_segment, exec_unrolled, initial_state, translate_assertion_forall,
    translate_bool, translate_expr,
)
from .tiler import collect_read_exprs

MAX_INSTANCE_POINTS = 16


@dataclass
class CheckTask:
    id: str
    kind: str  # T1 | T2STAR | T3STAR | T2DSTAR | BMC_CEX | TIGHTNESS | STRICT
    segment: str
    array: str | None
    target: str  # which assertion this task is about ("Post", candidate text, ...)
    script: smt.CheckScript
    expect: str  # "unsat-means-pass" | "sat-means-cex"
    fallback: smt.CheckScript | None = None
    advisory: bool = False


@dataclass
class TaskResult:
    task: CheckTask
    status: str  # pass | fail | cex | no-cex | unknown
    solver_status: str
    time_ms: float
    model: dict | None = None
    used_fallback: bool = False

    @property
    def ok(self):
        return self.status in ("pass", "no-cex")


def discharge(solver, task, timeout_ms):
    """Run a task (and its fallback, if any) and interpret the answer."""
    primary_budget = timeout_ms
    if task.fallback is not None:
        primary_budget = min(timeout_ms, 2500)
    res = solver.check_script(task.script, primary_budget)
    used_fallback = False
    if res.status in ("unknown", "timeout", "crash") and task.fallback is not None:
        res = solver.check_script(task.fallback, timeout_ms)
        used_fallback = True
    if task.expect == "sat-means-cex":
        if res.is_sat:
            ok_model = res.model is not None and smt.model_satisfies(
                (task.fallback if used_fallback else task.script), res.model)
            return TaskResult(task, "cex" if ok_model else "unknown",
                              res.status, res.time_ms, res.model, used_fallback)
        if res.is_unsat:
            return TaskResult(task, "no-cex", res.status, res.time_ms)
        return TaskResult(task, "unknown", res.status, res.time_ms)
    if res.is_unsat:
        return TaskResult(task, "pass", res.status, res.time_ms, None, used_fallback)
    if res.is_sat:
        model = res.model
        if model is None:
            # get-model is only emitted on sat-means-cex scripts; re-query
            # the failing obligation once for a diagnostic witness
            script = task.fallback if used_fallback else task.script
            diag = smt.CheckScript(list(script.assertions), want_model=True,
                                   comment=script.comment)
            redo = solver.check_script(diag, timeout_ms)
            if redo.is_sat:
                model = redo.model
        return TaskResult(task, "fail", res.status, res.time_ms, model, used_fallback)
    return TaskResult(task, "unknown", res.status, res.time_ms)


# ---------------------------------------------------------------------------
# Shared context

def global_assumptions(p, env, state=None):
    """Size positivity plus top-level assumes over never-written variables."""
    out = []
    for a in p.arrays:
        out.append(smt.ge(translate_expr(a.size, env), smt.mk_int(1)))
    writes = stmt_write_set(p.body)
    stmts = p.body.stmts if isinstance(p.body, Block) else (p.body,)
    for s in stmts:
        if isinstance(s, For):
            break
        if isinstance(s, Assume) and not (bool_vars(s.cond) & writes):
            out.append(translate_bool(s.cond, env, state))
    return out


def _instance_points(reads_terms, extra_terms):
    points, seen = [], set()
    for t in list(extra_terms) + list(reads_terms):
        key = smt.term_to_sexpr(t)
        if key not in seen:
            seen.add(key)
            points.append(t)
        if len(points) >= MAX_INSTANCE_POINTS:
            break
    return points


def _assume_invariants(script, invs, points, env):
    """Instantiate quantified invariants at the given index terms (pre-state)."""
    from .symexec import translate_assertion_at
    for qa in invs:
        if not qa.index_vars:
            script.add(*translate_assertion_at(qa, [], env))
        elif len(qa.index_vars) == 1:
            script.add(*translate_assertion_at(qa, [(pt,) for pt in points], env))
        else:
            tuples = [tuple([pt] * len(qa.index_vars)) for pt in points]
            script.add(*translate_assertion_at(qa, tuples, env))


def _range_at(qa, terms, env):
    env2 = dict(env)
    for name, t in zip(qa.index_vars, terms):
        env2[name] = t
    return translate_bool(qa.range, env2)


def _body_at(qa, terms, env):
    env2 = dict(env)
    for name, t in zip(qa.index_vars, terms):
        env2[name] = t
    return translate_bool(qa.body, env2)


# ---------------------------------------------------------------------------
# T1: covers range

def encode_t1(g, seg, tile, target, ind_size_expr):
    """eta1 /\\ eta2 for one tile against one quantified target.

    eta1: every index of interest lies in some tile of an iteration in
    [0, E); eta2: tiles only contain valid indices.  Negation checked.
    """
    p = g.program
    ng = smt.NameGen()
    env = initial_state(p).env
    etrip = translate_expr(seg.loop.trip, env)
    size_t = translate_expr(ind_size_expr, env)

    def ind(j):
        return smt.and_(smt.le(smt.mk_int(0), j), smt.lt(j, size_t))

    base = smt.CheckScript([], comment="T1 covers-range for %s / %s" % (seg.id, tile.array))
    base.add(*global_assumptions(p, env))
    base.add(smt.ge(etrip, smt.mk_int(1)))

    j1 = ng.fresh("j")
    lb = ng.fresh("lq")
    covered_q = smt.exists([(smt.var_name(lb), smt.INT)], smt.and_(
        smt.le(smt.mk_int(0), lb), smt.lt(lb, etrip), tile.formula(lb, j1, env)))
    not_eta1 = smt.and_(ind(j1), _range_at(target, [j1], env), smt.not_(covered_q))
    j2 = ng.fresh("j")
    l2 = ng.fresh("l")
    not_eta2 = smt.and_(smt.le(smt.mk_int(0), l2), smt.lt(l2, etrip),
                        tile.formula(l2, j2, env), smt.not_(ind(j2)))
    primary = smt.CheckScript(list(base.assertions), comment=base.comment)
    primary.add(smt.or_(not_eta1, not_eta2))

    fallback = None
    witness = tile.coverage_witness(j1, etrip, env)
    if witness is not None:
        fb = smt.CheckScript(list(base.assertions), comment=base.comment + " (witness form)")
        not_eta1_w = smt.and_(ind(j1), _range_at(target, [j1], env), smt.not_(witness))
        fb.add(smt.or_(not_eta1_w, not_eta2))
        fallback = fb
    return CheckTask(
        id="T1:%s:%s:%s" % (seg.id, tile.array, _target_key(target)),
        kind="T1", segment=seg.id, array=tile.array, target=_target_key(target),
        script=primary, expect="unsat-means-pass", fallback=fallback)


def _target_key(qa):
    from .lang import assertion_str
    return assertion_str(qa)


# ---------------------------------------------------------------------------
# T2* / T3*: inductive slice and non-interference over the loop-free body

def _loop_context(g, seg, state):
    env = state.env
    lterm = env[seg.ell]
    etrip = translate_expr(seg.loop.trip, env)
    reads = []
    for arr, e in collect_read_exprs(g, seg):
        reads.append(translate_expr(e, env))
    return lterm, etrip, reads


def _tile_iteration_witnesses(tile, e_term, lterm, env):
    """Candidate iterations whose tile can contain the index value e_term.

    For an affine tile expression a*l + b the only candidate is
    (e - b) div a; a constant expression is written by every iteration, so
    l - 1 is the strongest earlier witness.
    """
    from .tiler import affine_in, poly_to_expr

    out = []
    for u in tile.update_exprs:
        ab = affine_in(u, tile.counter)
        if ab is None:
            continue
        a, base = ab
        b_t = translate_expr(poly_to_expr(base), env)
        if a == 0:
            out.append(smt.sub(lterm, smt.mk_int(1)))
        else:
            out.append(smt.ediv(smt.sub(e_term, b_t), smt.mk_int(a)))
    return out


def encode_t2star(g, seg, tile, target, invs):
    """{Inv ∧ 0<=l<E ∧ zeta(l) ∧ tau(l,j) ∧ Phi(j)} body {Inv' ∧ Psi'(j)}.

    Invariants are instantiated in the pre-state at the body's read indices,
    the fresh j, and the fresh indices used to re-establish them afterwards.
    """
    p = g.program
    ng = smt.NameGen()
    state = initial_state(p)
    env0 = dict(state.env)
    lterm, etrip, reads = _loop_context(g, seg, state)

    script = smt.CheckScript([], comment="T2* sliced-post for %s" % seg.id)
    script.add(*global_assumptions(p, env0, state))
    script.add(smt.le(smt.mk_int(0), lterm), smt.lt(lterm, etrip))

    inv_ks = [(qa, [ng.fresh("k") for _ in qa.index_vars]) for qa in invs]
    kflat = [t for _, ks in inv_ks for t in ks]

    if target.index_vars:
        j = ng.fresh("j")
        script.add(tile.formula(lterm, j, env0))
        script.add(_range_at(target, [j], env0))
        # zeta: earlier-tile slices assumed at every read access index; the
        # earlier iteration l_k is pinned to the inverted tile (the only
        # witness), keeping the instance quantifier-free
        for e_t in reads:
            for lk in _tile_iteration_witnesses(tile, e_t, lterm, env0):
                script.add(smt.implies(
                    smt.and_(smt.le(smt.mk_int(0), lk), smt.lt(lk, lterm),
                             tile.formula(lk, e_t, env0),
                             _range_at(target, [e_t], env0)),
                    _body_at(target, [e_t], env0)))
        points = _instance_points(reads, [j] + kflat)
    else:
        # scalar target: plain inductive preservation through the body
        script.add(smt.implies(_range_at(target, [], env0), _body_at(target, [], env0)))
        points = _instance_points(reads, kflat)
    _assume_invariants(script, invs, points, env0)

    final, reach = exec_segment(g, seg, state, skip_incr=True)
    envf = final.env
    script.assertions.extend(state.assumptions)
    script.add(reach)
    post_parts = []
    if target.index_vars:
        post_parts.append(_body_at(target, [j], envf))
    else:
        post_parts.append(smt.implies(_range_at(target, [], envf),
                                      _body_at(target, [], envf)))
    for qa, ks in inv_ks:
        post_parts.append(smt.implies(_range_at(qa, ks, envf), _body_at(qa, ks, envf)))
    script.add(smt.not_(smt.and_(*post_parts)))
    return CheckTask(
        id="T2STAR:%s:%s" % (seg.id, _target_key(target)),
        kind="T2STAR", segment=seg.id, array=tile.array if tile else None,
        target=_target_key(target), script=script, expect="unsat-means-pass")


def encode_t3star(g, seg, tile, target, invs):
    """{Inv ∧ 0<=l'<l<E ∧ tau(l',j') ∧ Phi(j') ∧ Psi(j')} body {Psi'(j')}."""
    p = g.program
    ng = smt.NameGen()
    state = initial_state(p)
    env0 = dict(state.env)
    lterm, etrip, reads = _loop_context(g, seg, state)

    script = smt.CheckScript([], comment="T3* non-interference for %s" % seg.id)
    script.add(*global_assumptions(p, env0, state))
    lp = ng.fresh("lp")
    jp = ng.fresh("jp")
    script.add(smt.le(smt.mk_int(0), lp), smt.lt(lp, lterm), smt.lt(lterm, etrip))
    script.add(tile.formula(lp, jp, env0))
    script.add(_range_at(target, [jp], env0))
    script.add(_body_at(target, [jp], env0))
    _assume_invariants(script, invs, _instance_points(reads, [jp]), env0)

    final, reach = exec_segment(g, seg, state, skip_incr=True)
    script.assertions.extend(state.assumptions)
    script.add(reach)
    script.add(smt.not_(_body_at(target, [jp], final.env)))
    return CheckTask(
        id="T3STAR:%s:%s" % (seg.id, _target_key(target)),
        kind="T3STAR", segment=seg.id, array=tile.array,
        target=_target_key(target), script=script, expect="unsat-means-pass")


# ---------------------------------------------------------------------------
# T2**: out-of-loop segments (and the zero-trip loop check)

def encode_t2dstar(g, seg, pre_invs, targets, established=(), extra_assumptions=(),
                   label=None):
    """{pre_invs ∧ path} segment {targets}, all quantifiers instanced away.

    ``established`` carries assertions already proven to hold at the
    segment's entry (a preceding loop's tiled post-condition); they are
    assumed alongside pre_invs.  With seg=None the segment body is empty
    (used for the zero-trip-loop side condition).
    """
    p = g.program
    ng = smt.NameGen()
    state = initial_state(p)
    env0 = dict(state.env)
    seg_id = label or (seg.id if seg is not None else "<empty>")

    script = smt.CheckScript([], comment="T2** Hoare check for %s" % seg_id)
    script.add(*global_assumptions(p, env0, state))
    script.add(*extra_assumptions)

    reads = []
    if seg is not None:
        for arr, e in collect_read_exprs(g, seg):
            reads.append(translate_expr(e, env0))

    post_targets = []
    kpoints = []
    for qa in targets:
        ks = [ng.fresh("k") for _ in qa.index_vars]
        kpoints.extend(ks)
        post_targets.append((qa, ks))

    points = _instance_points(reads, kpoints)
    _assume_invariants(script, list(pre_invs) + list(established), points, env0)

    if seg is not None:
        final, reach = exec_segment(g, seg, state, skip_incr=False)
        envf = final.env
        script.assertions.extend(state.assumptions)
        script.add(reach)
    else:
        envf = env0
        script.assertions.extend(state.assumptions)

    parts = [smt.implies(_range_at(qa, ks, envf), _body_at(qa, ks, envf))
             for qa, ks in post_targets]
    if not parts:
        return None
    script.add(smt.not_(smt.and_(*parts)))
    return CheckTask(
        id="T2DSTAR:%s:%s" % (seg_id, ";".join(_target_key(t) for t, _ in post_targets)),
        kind="T2DSTAR", segment=seg_id, array=None,
        target=";".join(_target_key(t) for t, _ in post_targets),
        script=script, expect="unsat-means-pass")


# ---------------------------------------------------------------------------
# Shallow bounded model checking

def encode_bmc_cex(p, unwind):
    """Unroll every loop `unwind` times and search for a post violation."""
    if unwind < 1:
        raise ValueError("unwind must be >= 1")
    ng = smt.NameGen()
    state = initial_state(p)
    env0 = dict(state.env)
    script = smt.CheckScript([], comment="BMC counterexample search (unwind=%d)" % unwind)
    for a in p.arrays:
        script.add(smt.ge(translate_expr(a.size, env0), smt.mk_int(1)))
    if not p.pre.is_trivial():
        script.add(translate_assertion_forall(p.pre, env0, ng))
    final = exec_unrolled(p, state, unwind)
    script.assertions.extend(state.assumptions)
    jvs = [ng.fresh("cex_j") for _ in p.post.index_vars]
    script.add(_range_at(p.post, jvs, final.env))
    script.add(smt.not_(_body_at(p.post, jvs, final.env)))
    script.want_model = True
    return CheckTask(
        id="BMC:unwind=%d" % unwind, kind="BMC_CEX", segment="<program>",
        array=None, target="Post", script=script, expect="sat-means-cex")


# ---------------------------------------------------------------------------
# Tightness (strict mode): every tile index is written in its iteration

def encode_tightness(g, seg, tile, invs):
    p = g.program
    ng = smt.NameGen()
    state = initial_state(p)
    env0 = dict(state.env)
    lterm, etrip, reads = _loop_context(g, seg, state)

    script = smt.CheckScript([], comment="tightness (all tile indices written) for %s" % seg.id)
    script.add(*global_assumptions(p, env0, state))
    script.add(smt.le(smt.mk_int(0), lterm), smt.lt(lterm, etrip))
    jp = ng.fresh("jt")
    script.add(tile.formula(lterm, jp, env0))
    _assume_invariants(script, invs, _instance_points(reads, [jp]), env0)

    final, reach = exec_segment(g, seg, state, skip_incr=True)
    script.assertions.extend(state.assumptions)
    script.add(reach)
    flag = smt.or_(*[smt.and_(guard, smt.eq(idx, jp))
                     for arr, idx, guard in state.writes if arr == tile.array])
    script.add(smt.not_(flag))
    return CheckTask(
        id="TIGHTNESS:%s:%s" % (seg.id, tile.array),
        kind="TIGHTNESS", segment=seg.id, array=tile.array, target="tile",
        script=script, expect="unsat-means-pass", advisory=True)
