"""Finite-expansion forms of the inductive-slice and non-interference
conditions, by exhaustive concrete enumeration at small array sizes.

These are the unstrengthened Hoare triples: assuming the invariant and the
already-established slices concretely, one execution of the loop body must
establish / preserve the relevant slice.  Used to cross-check that whenever
the quantifier-free strengthened checks pass, the original conditions hold
as well (at desk scale).
"""

import itertools

from tileoracle import tile_member
from tileproof.interp import Store, eval_bool, eval_expr, run_stmt
from tileproof.lang import iter_loops


def _slice_holds(tile, target, store, lval, lo=-4, hi=None):
    """Post_Tile(lval, .): for all j in the window, tau & Phi -> Psi."""
    hi = hi if hi is not None else max(len(a) for a in store.arrays.values()) + 4
    iv = target.index_vars[0]
    for jv in range(lo, hi):
        if not tile_member(tile, lval, jv, store.scalars):
            continue
        extra = {iv: jv}
        if not eval_bool(target.range, store, extra):
            continue
        if not eval_bool(target.body, store, extra):
            return False
    return True


def _assertion_holds(qa, store, hi):
    if not qa.index_vars:
        return (not eval_bool(qa.range, store, {})) or eval_bool(qa.body, store, {})
    iv = qa.index_vars[0]
    for jv in range(-4, hi):
        extra = {iv: jv}
        if eval_bool(qa.range, store, extra) and not eval_bool(qa.body, store, extra):
            return False
    return True


def input_stores(p, size, values, scalar_values=None, cap=200000):
    """Deterministic grid of concrete stores with size parameters fixed."""
    params = set(p.size_params())
    free_scalars = [v for v in p.scalars
                    if v not in params and v not in p.loop_counters]
    svals = scalar_values or values
    base = {v: size for v in params}
    base.update({c: 0 for c in p.loop_counters})

    sizes = {}
    probe = Store(dict(base, **{v: 0 for v in free_scalars}), {})
    for a in p.arrays:
        n = eval_expr(a.size, probe)
        if n < 1:
            return
        sizes[a.name] = n

    cells = sum(sizes.values())
    count = 0
    for scombo in itertools.product(svals, repeat=len(free_scalars)):
        for acombo in itertools.product(values, repeat=cells):
            scalars = dict(base)
            scalars.update(zip(free_scalars, scombo))
            arrays = {}
            k = 0
            for a in p.arrays:
                n = sizes[a.name]
                arrays[a.name] = list(acombo[k:k + n])
                k += n
            yield Store(scalars, arrays)
            count += 1
            if count >= cap:
                return


def finite_t2(p, loop, tile, target, invs, size, values, scalar_values=None, cap=2000):
    """T2 at one size: {Inv & earlier slices} body {Inv & slice(l)}."""
    if not target.index_vars:
        return True  # scalar targets have no sliced form
    hi = None
    for store in input_stores(p, size, values, scalar_values, cap=cap):
        hi = max(len(a) for a in store.arrays.values()) + 4
        trips = eval_expr(loop.trip, store)
        for lval in range(max(0, trips)):
            st = store.copy()
            st.scalars[loop.counter] = lval
            if not all(_assertion_holds(qa, st, hi) for qa in invs):
                continue
            if not all(_slice_holds(tile, target, st, lp) for lp in range(lval)):
                continue
            try:
                run_stmt(loop.body, st)
            except Exception:
                continue  # rejected runs are outside the semantics
            if not _slice_holds(tile, target, st, lval):
                return False
            if not all(_assertion_holds(qa, st, hi) for qa in invs):
                return False
    return True


def finite_t3(p, loop, tile, target, invs, size, values, scalar_values=None, cap=2000):
    """T3 at one size: {Inv & 0<=l'<l & slice(l')} body {slice(l')}."""
    if not target.index_vars:
        return True
    for store in input_stores(p, size, values, scalar_values, cap=cap):
        hi = max(len(a) for a in store.arrays.values()) + 4
        trips = eval_expr(loop.trip, store)
        for lval in range(max(0, trips)):
            for lp in range(lval):
                st = store.copy()
                st.scalars[loop.counter] = lval
                if not all(_assertion_holds(qa, st, hi) for qa in invs):
                    continue
                if not _slice_holds(tile, target, st, lp):
                    continue
                try:
                    run_stmt(loop.body, st)
                except Exception:
                    continue
                if not _slice_holds(tile, target, st, lp):
                    return False
    return True
