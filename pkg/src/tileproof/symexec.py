"""Symbolic execution into the SMT term language.

Segment sub-DAGs are executed in topological order with path conditions
folded into if-then-else terms (no path enumeration); arrays go through
select/store.  Whole programs are executed with bounded loop unrolling for
the counterexample phase.  Division guards and array-bounds conditions are
gathered as side assumptions: executions that divide by zero or index out
of bounds are rejected runs, not behaviors to verify.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import smt
from .lang import (
    ArrayAssign, ArrayRead, Assign, Assume, BinOp, Block, BoolLit, BoolOp,
    Cmp, For, If, Not, Num, Var,
)


def scalar_terms(p, suffix=""):
    """Initial symbolic constants for every scalar and array of p."""
    env = {}
    for v in p.scalars:
        env[v] = smt.mk_var(v + suffix)
    for a in p.arrays:
        env[a.name] = smt.mk_var(a.name + suffix, smt.ARRAY)
    return env


@dataclass
class SymState:
    env: dict  # name -> Term (scalars Int, arrays (Array Int Int))
    sizes: dict  # array name -> Term for its declared size
    assumptions: list = field(default_factory=list)
    reads: list = field(default_factory=list)  # (array, index Term)
    writes: list = field(default_factory=list)  # (array, index Term, guard Term)

    def copy(self):
        return SymState(dict(self.env), self.sizes, self.assumptions,
                        self.reads, self.writes)


def initial_state(p, extra_env=None):
    env = scalar_terms(p)
    if extra_env:
        env.update(extra_env)
    st = SymState(env, {})
    for a in p.arrays:
        st.sizes[a.name] = translate_expr(a.size, env)
    return st


def translate_expr(e, env, state=None, guard=smt.TRUE):
    """Expression -> Term; collects bounds/divisor side conditions on state."""
    if isinstance(e, Num):
        return smt.mk_int(e.value)
    if isinstance(e, Var):
        if e.name not in env:
            raise KeyError("unbound name %s in symbolic env" % e.name)
        return env[e.name]
    if isinstance(e, ArrayRead):
        idx = translate_expr(e.index, env, state, guard)
        if state is not None:
            state.reads.append((e.array, idx))
            _bounds_assumption(state, e.array, idx, guard)
        return smt.select(env[e.array], idx)
    if isinstance(e, BinOp):
        a = translate_expr(e.left, env, state, guard)
        b = translate_expr(e.right, env, state, guard)
        if e.op == "+":
            return smt.add(a, b)
        if e.op == "-":
            return smt.sub(a, b)
        if e.op == "*":
            return smt.mul(a, b)
        if e.op in ("/", "%"):
            if state is not None and not (b.op == "int" and b.val != 0):
                state.assumptions.append(smt.implies(guard, smt.ne(b, smt.mk_int(0))))
            return smt.ediv(a, b) if e.op == "/" else smt.emod(a, b)
    raise TypeError(e)


def translate_bool(b, env, state=None, guard=smt.TRUE):
    if isinstance(b, BoolLit):
        return smt.TRUE if b.value else smt.FALSE
    if isinstance(b, Cmp):
        x = translate_expr(b.left, env, state, guard)
        y = translate_expr(b.right, env, state, guard)
        return {"<": smt.lt, "<=": smt.le, "==": smt.eq, "!=": smt.ne,
                ">=": smt.ge, ">": smt.gt}[b.op](x, y)
    if isinstance(b, BoolOp):
        parts = [translate_bool(a, env, state, guard) for a in b.args]
        return smt.and_(*parts) if b.op == "and" else smt.or_(*parts)
    if isinstance(b, Not):
        return smt.not_(translate_bool(b.arg, env, state, guard))
    raise TypeError(b)


def translate_assertion_at(qa, points, env, state=None):
    """Instances of a quantified assertion at the given index terms.

    points is a list of term tuples (one term per bound index variable).
    For a scalar assertion (no index vars) the single instance is returned.
    """
    if not qa.index_vars:
        inst = smt.implies(translate_bool(qa.range, env, state),
                           translate_bool(qa.body, env, state))
        return [inst]
    out = []
    for pt in points:
        env2 = dict(env)
        for name, term in zip(qa.index_vars, pt):
            env2[name] = term
        out.append(smt.implies(translate_bool(qa.range, env2, state),
                               translate_bool(qa.body, env2, state)))
    return out


def translate_assertion_forall(qa, env, ng):
    """The assertion as a real universally quantified term (for BMC pre)."""
    if not qa.index_vars:
        return smt.implies(translate_bool(qa.range, env),
                           translate_bool(qa.body, env))
    bound = []
    env2 = dict(env)
    for name in qa.index_vars:
        t = ng.fresh("q" + name)
        bound.append((smt.var_name(t), smt.INT))
        env2[name] = t
    return smt.forall(bound, smt.implies(translate_bool(qa.range, env2),
                                         translate_bool(qa.body, env2)))


def _bounds_assumption(state, array, idx, guard):
    size = state.sizes.get(array)
    if size is not None:
        state.assumptions.append(smt.implies(guard, smt.and_(
            smt.le(smt.mk_int(0), idx), smt.lt(idx, size))))


# ---------------------------------------------------------------------------
# Segment execution (gated SSA over the sub-DAG)

def exec_segment(g, seg, state, skip_incr=False):
    """Run a segment symbolically from `state` at its source.

    Returns (final_state, reach_condition).  Node effects merge through
    if-then-else terms keyed on the branch conditions; assume statements
    become guarded assumptions on the shared state.
    """
    in_pc = {seg.source: smt.TRUE}
    in_env = {seg.source: dict(state.env)}
    contributions = {}  # node -> list of (guard, env)

    node_order = list(seg.nodes)
    terminals = []
    edges_from = {}
    for e in seg.edges:
        edges_from.setdefault(e.src, []).append(e)

    for nid in node_order:
        if nid not in in_pc:
            # merge contributions
            contrib = contributions.get(nid)
            if not contrib:
                continue  # unreachable within segment
            pc = smt.or_(*[gcond for gcond, _ in contrib])
            envm = dict(contrib[-1][1])
            for gcond, envc in reversed(contrib[:-1]):
                for name in envm:
                    if envc[name] != envm[name]:
                        envm[name] = smt.ite(gcond, envc[name], envm[name])
            in_pc[nid], in_env[nid] = pc, envm
        pc, env = in_pc[nid], in_env[nid]
        node = g.nodes[nid]
        out_env = env
        if node.kind in ("assign", "init", "incr"):
            if not (skip_incr and node.kind == "incr"):
                st = node.stmt
                out_env = dict(env)
                out_env[st.name] = translate_expr(st.value, env, state, pc)
        elif node.kind == "array_assign":
            st = node.stmt
            idx = translate_expr(st.index, env, state, pc)
            val = translate_expr(st.value, env, state, pc)
            _bounds_assumption(state, st.array, idx, pc)
            state.writes.append((st.array, idx, pc))
            out_env = dict(env)
            out_env[st.array] = smt.store(env[st.array], idx, val)
        elif node.kind == "assume":
            cond = translate_bool(node.stmt.cond, env, state, pc)
            state.assumptions.append(smt.implies(pc, cond))
        outs = edges_from.get(nid, [])
        if not outs:
            terminals.append((pc, out_env))
            continue
        branch = None
        if node.kind == "cond":
            branch = translate_bool(node.stmt, env, state, pc)
        for e in outs:
            if e.label == "tt":
                gcond = smt.and_(pc, branch)
            elif e.label == "ff":
                gcond = smt.and_(pc, smt.not_(branch))
            else:
                gcond = pc
            contributions.setdefault(e.dst, []).append((gcond, out_env))

    if not terminals:
        return SymState(dict(state.env), state.sizes, state.assumptions,
                        state.reads, state.writes), smt.TRUE
    reach = smt.or_(*[pc for pc, _ in terminals])
    envm = dict(terminals[-1][1])
    for gcond, envc in reversed(terminals[:-1]):
        for name in envm:
            if envc[name] != envm[name]:
                envm[name] = smt.ite(gcond, envc[name], envm[name])
    final = SymState(envm, state.sizes, state.assumptions, state.reads, state.writes)
    return final, reach


# ---------------------------------------------------------------------------
# Whole-program execution with bounded unrolling (BMC)

class UnrollBudget(Exception):
    pass


def exec_unrolled(p, state, unwind):
    """Execute p with every loop unrolled `unwind` times.

    Writes are guarded by the path condition; after the unrolled iterations
    the loop-exit condition (trip count <= unwind) is assumed, so a sat
    model corresponds to a complete concrete execution.
    """
    env = state.env

    def run(stmt, pc):
        if isinstance(stmt, Block):
            for s in stmt.stmts:
                run(s, pc)
        elif isinstance(stmt, Assign):
            val = translate_expr(stmt.value, env, state, pc)
            env[stmt.name] = smt.ite(pc, val, env[stmt.name])
        elif isinstance(stmt, ArrayAssign):
            idx = translate_expr(stmt.index, env, state, pc)
            val = translate_expr(stmt.value, env, state, pc)
            _bounds_assumption(state, stmt.array, idx, pc)
            env[stmt.array] = smt.ite(pc, smt.store(env[stmt.array], idx, val),
                                      env[stmt.array])
        elif isinstance(stmt, Assume):
            cond = translate_bool(stmt.cond, env, state, pc)
            state.assumptions.append(smt.implies(pc, cond))
        elif isinstance(stmt, If):
            cond = translate_bool(stmt.cond, env, state, pc)
            run(stmt.then, smt.and_(pc, cond))
            if stmt.orelse is not None:
                run(stmt.orelse, smt.and_(pc, smt.not_(cond)))
        elif isinstance(stmt, For):
            trips = translate_expr(stmt.trip, env, state, pc)
            for k in range(unwind):
                iter_pc = smt.and_(pc, smt.lt(smt.mk_int(k), trips))
                env[stmt.counter] = smt.ite(iter_pc, smt.mk_int(k), env[stmt.counter])
                run(stmt.body, iter_pc)
            state.assumptions.append(
                smt.implies(pc, smt.le(trips, smt.mk_int(unwind))))
            final = smt.ite(smt.gt(trips, smt.mk_int(0)), trips, smt.mk_int(0))
            env[stmt.counter] = smt.ite(pc, final, env[stmt.counter])
        else:
            raise TypeError(stmt)

    run(p.body, smt.TRUE)
    return state
