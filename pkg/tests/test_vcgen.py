"""Proof-obligation encoders against brute-force and concrete oracles."""

import itertools

import pytest

from conftest import bench, needs_solver
from tileoracle import brute_t1, tile_member
from tileproof import smt
from tileproof.cfg import build_cfg, segments
from tileproof.interp import Store, eval_assertion, run_program
from tileproof.lang import BinOp, Num, QuantAssertion, Cmp, Var, expr_str
from tileproof.parser import parse, parse_file
from tileproof.symexec import scalar_terms
from tileproof.tiler import TilePredicate, find_heuristic_tile, simplify
from tileproof.vcgen import (
    discharge, encode_bmc_cex, encode_t1, encode_t2dstar, encode_t2star,
    encode_t3star, encode_tightness, global_assumptions,
)

pytestmark = needs_solver


def _setup(path_or_src, name=None):
    p = parse_file(path_or_src) if name is None else parse(path_or_src, name)
    g = build_cfg(p)
    seg = next(s for s in segments(g) if s.is_loop_body)
    return p, g, seg


def _tile_of(p, g, seg, solver, arr):
    env = scalar_terms(p)
    return find_heuristic_tile(g, seg, solver, global_assumptions(p, env))[arr]


# ---------------------------------------------------------------------------
# T1

def test_t1_period4_passes(solver):
    p, g, seg = _setup(bench("period4"))
    tile = _tile_of(p, g, seg, solver, "volArray")
    task = encode_t1(g, seg, tile, p.post, p.array_decl("volArray").size)
    assert discharge(solver, task, 10000).status == "pass"


def test_t1_identity_tile_passes_and_matches_brute_force(solver):
    p, g, seg = _setup(bench("init"))
    tile = _tile_of(p, g, seg, solver, "a")
    task = encode_t1(g, seg, tile, p.post, p.array_decl("a").size)
    assert discharge(solver, task, 10000).status == "pass"
    for n in range(1, 9):
        assert brute_t1(tile, size=n, trips=n, scalars={"N": n})


def test_t1_parity_gap_fails(solver):
    # tile j = 2l over indices [0, 2E) leaves odd cells uncovered
    src = """var E, i;
array a[2 * E];
ensures forall j :: 0 <= j && j < 2 * E ==> a[j] == 0;
assume(E > 0);
for (i = 0; i < E; i = i + 1) { a[2 * i] = 0; }
"""
    p, g, seg = _setup(src, "gap")
    tile = _tile_of(p, g, seg, solver, "a")
    assert [expr_str(e) for e in tile.update_exprs] == ["2 * i"]
    task = encode_t1(g, seg, tile, p.post, p.array_decl("a").size)
    assert discharge(solver, task, 10000).status == "fail"


# ---------------------------------------------------------------------------
# T2* / T3*

def test_t2star_period4_passes(solver):
    p, g, seg = _setup(bench("period4"))
    tile = _tile_of(p, g, seg, solver, "volArray")
    task = encode_t2star(g, seg, tile, p.post, [])
    assert discharge(solver, task, 10000).status == "pass"


MIN_SRC = """var N, MIN, i;
array A[N];
ensures forall j :: 0 <= j && j < N ==> A[j] >= %s;
assume(N > 0);
for (i = 0; i < N; i = i + 1) { A[i] = %s; }
"""


def test_t2star_direct_write_passes(solver):
    p, g, seg = _setup(MIN_SRC % ("MIN", "MIN"), "write_min")
    tile = _tile_of(p, g, seg, solver, "A")
    task = encode_t2star(g, seg, tile, p.post, [])
    assert discharge(solver, task, 10000).status == "pass"


def test_t2star_violating_write_fails_with_model(solver):
    p, g, seg = _setup(MIN_SRC % ("MIN", "MIN - 1"), "write_low")
    tile = _tile_of(p, g, seg, solver, "A")
    task = encode_t2star(g, seg, tile, p.post, [])
    res = discharge(solver, task, 10000)
    assert res.status == "fail"
    assert res.model is not None
    assert smt.model_satisfies(task.script, res.model)


def test_t3star_period4_earlier_tile_untouched(solver):
    p, g, seg = _setup(bench("period4"))
    tile = _tile_of(p, g, seg, solver, "volArray")
    task = encode_t3star(g, seg, tile, p.post, [])
    assert discharge(solver, task, 10000).status == "pass"


def test_t3star_clobbering_write_fails(solver):
    src = """var N, i;
array A[N];
ensures forall j :: 0 <= j && j < N ==> A[j] == j;
assume(N > 0);
for (i = 0; i < N; i = i + 1) { A[i] = i; A[0] = 7; }
"""
    p, g, seg = _setup(src, "clobber")
    tile = TilePredicate("i", "A", (Var("i"),), simplify([Var("i")], "i"))
    task = encode_t3star(g, seg, tile, p.post, [])
    assert discharge(solver, task, 10000).status == "fail"


def test_t3star_fig5_passes_and_matches_enumeration(solver):
    p, g, seg = _setup(bench("arrayupdate"))
    tile = _tile_of(p, g, seg, solver, "A")
    task = encode_t3star(g, seg, tile, p.post, [])
    assert discharge(solver, task, 10000).status == "pass"
    from finite import finite_t3
    for n in range(1, 5):
        assert finite_t3(p, seg.loop, tile, p.post, [], n,
                         values=(-1, 0, 1, 2), scalar_values=(0, 1))


# ---------------------------------------------------------------------------
# T2**

def test_t2dstar_empty_segment_identity(solver):
    src = """var N, i, x;
array a[N];
ensures forall j :: 0 <= j && j < N ==> a[j] == 0;
assume(N > 0);
for (i = 0; i < N; i = i + 1) { a[i] = 0; }
x = 1;
"""
    p, g, _ = _setup(src, "exitseg")
    segs = segments(g)
    exit_seg = next(s for s in segs if s.sink == "End")
    # the loop established the post; the trailing x=1 must preserve it
    task = encode_t2dstar(g, exit_seg, [], [p.post], established=[p.post])
    assert discharge(solver, task, 10000).status == "pass"


def test_t2dstar_scalar_read_between_identical_invariants(solver):
    src = """var N, m, x, i;
array A[N];
ensures forall j :: 0 <= j && j < N ==> A[j] == 0;
assume(N > 0 && 0 <= m && m < N);
for (i = 0; i < N; i = i + 1) { A[i] = 0; }
x = A[m];
"""
    p, g, _ = _setup(src, "readseg")
    exit_seg = next(s for s in segments(g) if s.sink == "End")
    task = encode_t2dstar(g, exit_seg, [], [p.post], established=[p.post])
    res = discharge(solver, task, 10000)
    assert res.status == "pass"
    # finite-expansion oracle at size 6: x = A[m] preserves the invariant
    for cells in itertools.product((-1, 0), repeat=3):
        store = Store({"N": 6, "m": 2, "x": 0, "i": 6}, {"A": [0] * 6})
        final = run_program(p, store)
        assert eval_assertion(p, final)


def test_t2dstar_violating_write_fails(solver):
    src = """var N, i;
array A[N];
ensures forall j :: 0 <= j && j < N ==> A[j] == 0;
assume(N > 0);
for (i = 0; i < N; i = i + 1) { A[i] = 0; }
A[0] = 9;
"""
    p, g, _ = _setup(src, "breakseg")
    exit_seg = next(s for s in segments(g) if s.sink == "End")
    task = encode_t2dstar(g, exit_seg, [], [p.post], established=[p.post])
    assert discharge(solver, task, 10000).status == "fail"


# ---------------------------------------------------------------------------
# BMC

def test_bmc_finds_seeded_bug_with_replayable_model(solver):
    p = parse_file(bench("init_u"))
    task = encode_bmc_cex(p, 3)
    res = discharge(solver, task, 15000)
    assert res.status == "cex"
    from tileproof.driver import _replay_counterexample
    cex = _replay_counterexample(p, res.model)
    assert cex is not None
    assert cex["model"]["arrays"]["a"][0] != 0


def test_bmc_correct_period4_has_no_shallow_cex(solver):
    p = parse_file(bench("period4"))
    task = encode_bmc_cex(p, 3)
    assert discharge(solver, task, 20000).status == "no-cex"
    # concrete enumeration oracle over COUNT in {4, 8}
    for count in (4, 8):
        for minv in (-1, 2, 9):
            store = Store({"COUNT": count, "MIN": minv, "i": 0, "i_l": 0},
                          {"volArray": [3] * count})
            assert eval_assertion(p, run_program(p, store))


def test_bmc_unsat_for_unsatisfiable_post_range(solver):
    p = parse("var x;\nensures forall j :: false ==> x == 0;\nx = 1;\n", "vac")
    task = encode_bmc_cex(p, 2)
    assert discharge(solver, task, 10000).status == "no-cex"


# ---------------------------------------------------------------------------
# Tightness (strict mode)

def test_tightness_period4_every_tile_index_written(solver):
    p, g, seg = _setup(bench("period4"))
    tile = _tile_of(p, g, seg, solver, "volArray")
    task = encode_tightness(g, seg, tile, [])
    assert discharge(solver, task, 10000).status == "pass"


def test_tightness_fails_when_tile_wider_than_writes(solver):
    src = """var COUNT, i;
array a[COUNT];
ensures forall j :: 0 <= j && j < COUNT ==> a[j] >= 0;
assume(COUNT > 0 && COUNT % 4 == 0);
for (i = 1; i <= COUNT / 4; i = i + 1) {
  a[i*4 - 4] = 1;
  a[i*4 - 3] = 1;
  a[i*4 - 2] = 1;
}
"""
    p, g, seg = _setup(src, "threeoffour")
    # deliberately use the four-wide tile although only three cells are written
    e = lambda k: BinOp("+", BinOp("*", Num(4), Var("i_l")), Num(k))
    exprs = (BinOp("*", Num(4), Var("i_l")), e(1), e(2), e(3))
    tile = TilePredicate("i_l", "a", exprs, simplify(list(exprs), "i_l"))
    task = encode_tightness(g, seg, tile, [])
    assert discharge(solver, task, 10000).status == "fail"


def test_tightness_covered_across_branches_passes(solver):
    src = """var N, c, i;
array a[N];
ensures forall j :: 0 <= j && j < N ==> a[j] >= 0;
assume(N > 0 && N % 2 == 0);
for (i = 0; i < N / 2; i = i + 1) {
  if (c > 0) { a[2*i] = 1; a[2*i + 1] = 2; }
  else       { a[2*i + 1] = 3; a[2*i] = 4; }
}
"""
    p, g, seg = _setup(src, "branchcover")
    tile = _tile_of(p, g, seg, solver, "a")
    assert sorted(expr_str(e) for e in tile.update_exprs) == ["2 * i", "2 * i + 1"]
    task = encode_tightness(g, seg, tile, [])
    assert discharge(solver, task, 10000).status == "pass"
