"""Brute-force enumeration oracles for tiles, independent of the SMT path.

Tiles are evaluated pointwise through the concrete expression evaluator;
coverage and the strict conditions are decided by exhaustive enumeration
over small grids.  Used to cross-check the solver-backed encoders.
"""

from tileproof.interp import Store, eval_expr

J_LO, J_HI = -40, 40


def tile_member(tile, lval, jval, scalars=None):
    store = Store(dict(scalars or {}), {})
    store.scalars[tile.counter] = lval
    return any(jval == eval_expr(e, store) for e in tile.update_exprs)


def closed_member(tile, lval, jval, scalars=None):
    lo, width = tile.closed_form
    store = Store(dict(scalars or {}), {})
    store.scalars[tile.counter] = lval
    lo_v = eval_expr(lo, store)
    return lo_v <= jval < lo_v + width


def brute_t1(tile, size, trips, scalars=None):
    """eta1 and eta2 by enumeration: every index of [0, size) is covered by
    some iteration in [0, trips), and tiles stay inside [0, size)."""
    for jv in range(0, size):
        if not any(tile_member(tile, lv, jv, scalars) for lv in range(trips)):
            return False
    for lv in range(trips):
        for jv in range(J_LO, J_HI):
            if tile_member(tile, lv, jv, scalars) and not 0 <= jv < size:
                return False
    return True


def brute_strict(tile, trips, scalars=None):
    """(disjoint, range_like, compact) by enumeration, mirroring the
    solver-side queries (which assume at least two iterations)."""
    if trips < 2:
        return True, True, True
    member = lambda lv, jv: tile_member(tile, lv, jv, scalars)
    js = range(J_LO, J_HI)

    disjoint = True
    for k in range(trips):
        for k2 in range(trips):
            if k == k2:
                continue
            if any(member(k, jv) and member(k2, jv) for jv in js):
                disjoint = False
                break
        if not disjoint:
            break

    range_like = True
    for k in range(trips):
        cells = [jv for jv in js if member(k, jv)]
        if cells and cells[-1] - cells[0] + 1 != len(cells):
            range_like = False
            break

    compact = True
    for k in range(trips - 1):
        for j1 in js:
            if not member(k, j1):
                continue
            for j2 in js:
                if j2 <= j1 or not member(k + 1, j2):
                    continue
                if any(not member(k, jm) and not member(k + 1, jm)
                       for jm in range(j1 + 1, j2)):
                    compact = False
                    break
            if not compact:
                break
        if not compact:
            break
    return disjoint, range_like, compact
