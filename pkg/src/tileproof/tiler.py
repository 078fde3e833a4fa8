"""Heuristic tile construction for loop-body segments.

For every array updated in a segment, the update index expressions are
rewritten in terms of the loop counter and segment-entry values by walking
each path of the sub-DAG (backward-substitution through assignments).  The
initial tile is the disjunction of ``j = e`` over those expressions; an
expression is removed when a later iteration can produce the same index
value (checked as a satisfiability query), so an index always belongs to
the tile of the largest counter value that writes it.  A run of consecutive
affine expressions is simplified to a closed-form interval.

Also implements the strict tile validations (disjoint / range-like /
compact), which are advisory.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import smt
from .lang import (
    ArrayAssign, ArrayRead, Assign, Assume, BinOp, BoolLit, BoolOp, Cmp, Num,
    Var, bool_exprs, expr_str,
)

PATH_LIMIT = 256


class TileError(Exception):
    pass


# ---------------------------------------------------------------------------
# Polynomial normal form (integer coefficients, monomials over scalar names)

class NotPolynomial(Exception):
    pass


def to_poly(e):
    """Expression -> {monomial: coeff} with monomial a sorted name tuple."""
    if isinstance(e, Num):
        return {(): e.value} if e.value else {}
    if isinstance(e, Var):
        return {(e.name,): 1}
    if isinstance(e, BinOp):
        if e.op in ("+", "-"):
            a, b = to_poly(e.left), to_poly(e.right)
            out = dict(a)
            for m, c in b.items():
                out[m] = out.get(m, 0) + (c if e.op == "+" else -c)
                if out[m] == 0:
                    del out[m]
            return out
        if e.op == "*":
            a, b = to_poly(e.left), to_poly(e.right)
            out = {}
            for m1, c1 in a.items():
                for m2, c2 in b.items():
                    m = tuple(sorted(m1 + m2))
                    out[m] = out.get(m, 0) + c1 * c2
                    if out[m] == 0:
                        del out[m]
            return out
        if e.op == "/":
            # exact constant division only (e.g. (4*x)/2); otherwise opaque
            a, b = to_poly(e.left), to_poly(e.right)
            if list(b.keys()) in ([], [()]):
                d = b.get((), 0)
                if d != 0 and all(c % d == 0 for c in a.values()):
                    return {m: c // d for m, c in a.items()}
            raise NotPolynomial(e)
        raise NotPolynomial(e)
    raise NotPolynomial(e)


def poly_to_expr(p):
    """Canonical expression for a polynomial (deterministic monomial order)."""
    if not p:
        return Num(0)
    items = sorted(p.items(), key=lambda mc: (-len(mc[0]), mc[0]))
    expr = None
    for mono, coeff in items:
        term = None
        for name in mono:
            term = Var(name) if term is None else BinOp("*", term, Var(name))
        if term is None:
            term = Num(abs(coeff))
        elif abs(coeff) != 1:
            term = BinOp("*", Num(abs(coeff)), term)
        if expr is None:
            expr = term if coeff > 0 else BinOp("-", Num(0), term)
        else:
            expr = BinOp("+" if coeff > 0 else "-", expr, term)
    return expr


def normalize_expr(e):
    """Canonical form of e when polynomial; e unchanged otherwise."""
    try:
        return poly_to_expr(to_poly(e))
    except NotPolynomial:
        return e


def affine_in(e, counter):
    """Return (a, base_poly) when e == a*counter + base with integer a."""
    try:
        p = to_poly(e)
    except NotPolynomial:
        return None
    a = 0
    base = {}
    for mono, c in p.items():
        deg = sum(1 for n in mono if n == counter)
        if deg == 0:
            base[mono] = c
        elif deg == 1 and len(mono) == 1:
            a = c
        else:
            return None  # counter*counter or counter*scalar
    return a, base


# ---------------------------------------------------------------------------
# Path walking: update / read index expressions in segment-entry terms

def _segment_paths(g, seg):
    adj = {}
    for e in seg.edges:
        adj.setdefault(e.src, []).append(e)
    paths = []

    def dfs(nid, acc):
        if len(paths) > PATH_LIMIT:
            raise TileError("path limit exceeded in segment %s" % seg.id)
        outs = adj.get(nid, [])
        if not outs:
            paths.append(acc)
            return
        for e in outs:
            dfs(e.dst, acc + [(e, e.dst)])

    dfs(seg.source, [])
    return paths


def _subst_env(e, env):
    if isinstance(e, Num):
        return e
    if isinstance(e, Var):
        return env.get(e.name, e)
    if isinstance(e, BinOp):
        return BinOp(e.op, _subst_env(e.left, env), _subst_env(e.right, env))
    if isinstance(e, ArrayRead):
        return ArrayRead(e.array, _subst_env(e.index, env))
    return e


def _arrays_in(e):
    out = set()

    def walk(x):
        if isinstance(x, ArrayRead):
            out.add(x.array)
            walk(x.index)
        elif isinstance(x, BinOp):
            walk(x.left)
            walk(x.right)

    walk(e)
    return out


def _walk_segment(g, seg):
    """Per path, fold scalar assignments forward; yield update/read records.

    Records are (kind, array, expr, opaque) where expr is in terms of the
    loop counter, scalars and array values at segment entry.  ``opaque``
    marks expressions that depend on an array cell already written on the
    same path (not rewritable to entry terms).
    """
    records = []
    for path in _segment_paths(g, seg):
        env = {}
        written = set()

        def reads_of(expr):
            out = []

            def walk(x):
                if isinstance(x, ArrayRead):
                    out.append(x)
                    walk(x.index)
                elif isinstance(x, BinOp):
                    walk(x.left)
                    walk(x.right)

            walk(expr)
            return out

        def note_reads(expr):
            # a read index only needs to be expressible in entry terms; the
            # cell value having changed on the path does not matter here
            sub = _subst_env(expr, env)
            for r in reads_of(sub):
                opaque = bool(_arrays_in(r.index) & written)
                records.append(("read", r.array, r.index, opaque))

        for _edge, nid in path:
            node = g.nodes[nid]
            if node.kind in ("assign", "init", "incr"):
                st = node.stmt
                note_reads(st.value)
                env[st.name] = _subst_env(st.value, env)
            elif node.kind == "array_assign":
                st = node.stmt
                note_reads(st.index)
                note_reads(st.value)
                idx = _subst_env(st.index, env)
                opaque = bool(_arrays_in(idx) & written)
                records.append(("update", st.array, idx, opaque))
                written.add(st.array)
            elif node.kind == "assume":
                note_reads_bool(records, env, written, node.stmt.cond, reads_of)
            elif node.kind == "cond":
                note_reads_bool(records, env, written, node.stmt, reads_of)
    return records


def note_reads_bool(records, env, written, cond, reads_of):
    for e in bool_exprs(cond):
        sub = _subst_env(e, env)
        for r in reads_of(sub):
            opaque = bool(_arrays_in(r.index) & written)
            records.append(("read", r.array, r.index, opaque))


def collect_update_exprs(g, seg, array=None):
    """Update index expressions per array, deduplicated and normalized.

    With ``array`` given, returns the list for that array (raising TileError
    when an expression is opaque); otherwise a dict over all updated arrays
    with opaque entries dropped and noted under key ``None``.
    """
    per_array = {}
    opaque_arrays = set()
    for kind, arr, expr, opaque in _walk_segment(g, seg):
        if kind != "update":
            continue
        if opaque:
            opaque_arrays.add(arr)
            continue
        norm = normalize_expr(expr)
        bucket = per_array.setdefault(arr, [])
        if all(expr_str(norm) != expr_str(x) for x in bucket):
            bucket.append(norm)
    if array is not None:
        if array in opaque_arrays:
            raise TileError("opaque update index for array %s" % array)
        return per_array.get(array, [])
    for arr in opaque_arrays:
        per_array[arr] = None  # flagged: tiling for this array fails gracefully
    return per_array


def collect_read_exprs(g, seg):
    """(array, expr) read-access pairs in entry terms, deduplicated."""
    seen = []
    keys = set()
    for kind, arr, expr, opaque in _walk_segment(g, seg):
        if kind != "read" or opaque:
            continue
        norm = normalize_expr(expr)
        key = (arr, expr_str(norm))
        if key not in keys:
            keys.add(key)
            seen.append((arr, norm))
    return seen


# ---------------------------------------------------------------------------
# Tile predicate

@dataclass
class TilePredicate:
    counter: str
    array: str
    update_exprs: tuple  # surviving expressions (lang.Expr over counter+scalars)
    closed_form: tuple | None = None  # (lo_expr, width)
    from_reads: bool = False

    def formula(self, lterm, jterm, env):
        """tau(l, j) as an SMT term; env maps scalar names to terms."""
        from .symexec import translate_expr
        env2 = dict(env)
        env2[self.counter] = lterm
        if self.closed_form is not None:
            lo, width = self.closed_form
            lo_t = translate_expr(lo, env2)
            return smt.and_(smt.le(lo_t, jterm),
                            smt.lt(jterm, smt.add(lo_t, smt.mk_int(width))))
        parts = [smt.eq(jterm, translate_expr(e, env2)) for e in self.update_exprs]
        return smt.or_(*parts)

    def coverage_witness(self, jterm, e_term, env):
        """Exact quantifier-free form of  exists l in [0,E): tau(l, j).

        Uses the inverted counter (l := (j - b) div a) per affine disjunct;
        None when some disjunct is not affine in the counter.
        """
        from .symexec import translate_expr
        parts = []
        for e in self.update_exprs:
            ab = affine_in(e, self.counter)
            if ab is None:
                return None
            a, base = ab
            b_t = translate_expr(poly_to_expr(base), env)
            if a == 0:
                parts.append(smt.and_(smt.eq(jterm, b_t),
                                      smt.ge(e_term, smt.mk_int(1))))
                continue
            diff = smt.sub(jterm, b_t)
            ell = smt.ediv(diff, smt.mk_int(a))
            parts.append(smt.and_(
                smt.eq(smt.emod(diff, smt.mk_int(a)), smt.mk_int(0)),
                smt.le(smt.mk_int(0), ell),
                smt.lt(ell, e_term)))
        return smt.or_(*parts)

    def describe(self, jname="j", source_coords=None):
        """Human-readable tau, optionally in source loop coordinates."""
        ctr = self.counter
        lo_w = self.closed_form
        if source_coords is not None and lo_w is not None:
            # counter = (src - base) / coeff: render in terms of the source var
            name, coeff, base = source_coords.name, source_coords.coeff, source_coords.base
            inv = BinOp("/", BinOp("-", Var(name), base), Num(coeff)) if (coeff, base) != (1, Num(0)) \
                else Var(name)
            lo = normalize_expr(_subst_env(lo_w[0], {ctr: inv}))
            return "%s <= %s < %s" % (expr_str(lo), jname,
                                      expr_str(normalize_expr(BinOp("+", lo, Num(lo_w[1])))))
        if lo_w is not None:
            lo = lo_w[0]
            return "%s <= %s < %s" % (expr_str(lo), jname,
                                      expr_str(normalize_expr(BinOp("+", lo, Num(lo_w[1])))))
        return " || ".join("%s == %s" % (jname, expr_str(e)) for e in self.update_exprs)


def simplify(exprs, counter):
    """Closed-form interval for consecutive same-slope affine expressions.

    {a*l+b, a*l+b+1, ..., a*l+b+m-1}  ->  (a*l+b, m); None otherwise.
    """
    if not exprs:
        return None
    slopes = []
    bases = []
    for e in exprs:
        ab = affine_in(e, counter)
        if ab is None:
            return None
        slopes.append(ab[0])
        bases.append(ab[1])
    if len(set(slopes)) != 1:
        return None
    offsets = []
    b0 = bases[0]
    for b in bases:
        diff = dict(b)
        for m, c in b0.items():
            diff[m] = diff.get(m, 0) - c
            if diff[m] == 0:
                del diff[m]
        if set(diff) - {()}:
            return None  # bases differ by a non-constant
        offsets.append(diff.get((), 0))
    offsets.sort()
    if offsets != list(range(offsets[0], offsets[0] + len(offsets))):
        return None
    lo_poly = dict(b0)
    lo_poly[()] = lo_poly.get((), 0) + offsets[0]
    if slopes[0] != 0:
        lo_poly[(counter,)] = slopes[0]
    lo = poly_to_expr({m: c for m, c in lo_poly.items() if c != 0})
    return lo, len(offsets)


def find_heuristic_tile(g, seg, solver, assumptions=(), scalar_env=None,
                        from_reads_if_no_updates=True):
    """Tiles for every array updated in a loop-body segment (Algorithm 2).

    Returns {array: TilePredicate | None}; None marks arrays whose update
    indices are opaque.  When the segment updates no array and the fallback
    is enabled, tiles are derived from read accesses instead.
    """
    from .symexec import translate_expr, scalar_terms

    if seg.ell is None:
        raise TileError("segment %s lies outside all loops" % seg.id)
    counter = seg.ell
    env = scalar_env or scalar_terms(g.program)
    e_term = translate_expr(seg.loop.trip, env) if seg.loop is not None else None

    per_array = collect_update_exprs(g, seg)
    from_reads = False
    if not any(v for v in per_array.values()) and from_reads_if_no_updates:
        pools = {}
        for arr, e in collect_read_exprs(g, seg):
            pools.setdefault(arr, [])
            if all(expr_str(e) != expr_str(x) for x in pools[arr]):
                pools[arr].append(e)
        per_array = pools
        from_reads = True

    tiles = {}
    for arr in sorted(per_array):
        exprs = per_array[arr]
        if exprs is None:
            tiles[arr] = None
            continue
        survivors = _refine(exprs, counter, e_term, env, solver, assumptions)
        if not survivors:
            tiles[arr] = None
            continue
        closed = simplify(survivors, counter)
        tile = TilePredicate(counter, arr, tuple(survivors), closed, from_reads)
        if closed is not None and solver is not None:
            if not _closed_form_equivalent(tile, e_term, env, solver):
                tile = TilePredicate(counter, arr, tuple(survivors), None, from_reads)
        tiles[arr] = tile
    return tiles


def _refine(exprs, counter, e_term, env, solver, assumptions):
    """Drop expressions whose index can be rewritten by a later iteration.

    Removal decisions all test against the original initial tile.
    """
    if solver is None:
        return list(exprs)
    ng = smt.NameGen()
    lterm = ng.fresh("l")
    kterm = ng.fresh("k")

    def init_tile(lt, jt):
        env2 = dict(env)
        env2[counter] = lt
        from .symexec import translate_expr
        return smt.or_(*[smt.eq(jt, translate_expr(e, env2)) for e in exprs])

    survivors = []
    for e in exprs:
        from .symexec import translate_expr
        env_l = dict(env)
        env_l[counter] = lterm
        jval = translate_expr(e, env_l)
        later = smt.add(lterm, kterm)
        query = smt.CheckScript(list(assumptions), comment="tile overlap check")
        query.add(
            smt.and_(smt.le(smt.mk_int(0), lterm), smt.lt(lterm, later)),
            smt.lt(later, e_term) if e_term is not None else smt.TRUE,
            smt.ge(e_term, smt.mk_int(2)) if e_term is not None else smt.TRUE,
            init_tile(lterm, jval),
            init_tile(later, jval),
        )
        res = solver.check_script(query)
        if not res.is_sat:
            survivors.append(e)
    return survivors


def _closed_form_equivalent(tile, e_term, env, solver):
    ng = smt.NameGen()
    lterm, jterm = ng.fresh("l"), ng.fresh("j")
    closed = tile.formula(lterm, jterm, env)
    disj = TilePredicate(tile.counter, tile.array, tile.update_exprs, None).formula(
        lterm, jterm, env)
    query = smt.CheckScript([], comment="closed form equivalence")
    query.add(smt.or_(smt.and_(closed, smt.not_(disj)),
                      smt.and_(disj, smt.not_(closed))))
    return solver.check_script(query).is_unsat


# ---------------------------------------------------------------------------
# Strict validation (advisory)

@dataclass
class StrictReport:
    disjoint: str = "unknown"  # pass | fail | unknown
    range_like: str = "unknown"
    compact: str = "unknown"

    def all_pass(self):
        return (self.disjoint, self.range_like, self.compact) == ("pass",) * 3


def strict_validate(tile, e_term, env, solver, assumptions=()):
    """Disjointness, range-likeness and compactness as unsat checks."""
    ng = smt.NameGen()
    k, k2 = ng.fresh("k"), ng.fresh("k")
    j, j1, j2 = ng.fresh("j"), ng.fresh("j"), ng.fresh("j")

    def bounded(x):
        return smt.and_(smt.le(smt.mk_int(0), x), smt.lt(x, e_term))

    def run(extra):
        q = smt.CheckScript(list(assumptions) + [smt.ge(e_term, smt.mk_int(2))],
                            comment="strict tile check")
        q.add(*extra)
        res = solver.check_script(q)
        if res.is_unsat:
            return "pass"
        if res.is_sat:
            return "fail"
        return "unknown"

    rep = StrictReport()
    rep.disjoint = run([
        bounded(k), bounded(k2), smt.ne(k, k2),
        tile.formula(k, j, env), tile.formula(k2, j, env)])
    rep.range_like = run([
        bounded(k), smt.lt(j1, j), smt.lt(j, j2),
        tile.formula(k, j1, env), tile.formula(k, j2, env),
        smt.not_(tile.formula(k, j, env))])
    rep.compact = run([
        bounded(k), bounded(smt.add(k, smt.mk_int(1))),
        tile.formula(k, j1, env), tile.formula(smt.add(k, smt.mk_int(1)), j2, env),
        smt.lt(j1, j), smt.lt(j, j2),
        smt.not_(tile.formula(k, j, env)),
        smt.not_(tile.formula(smt.add(k, smt.mk_int(1)), j, env))])
    return rep
