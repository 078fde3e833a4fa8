"""Control-flow graph, cut-point and segment tests."""

import glob
import os

from conftest import BENCH_DIR, bench
from tileproof.cfg import END, START, build_cfg, next_cut_point, segments
from tileproof.lang import iter_loops
from tileproof.parser import parse, parse_file


def test_single_loop_has_one_cut_point():
    p = parse_file(bench("period4"))
    g = build_cfg(p)
    # oracle: one cut-point per loop statement in the AST
    assert len(g.cut_points) == sum(1 for _ in iter_loops(p.body))
    assert len(g.cut_points) == 1
    assert len(g.back_edges) == 1


def test_straight_line_program_one_segment():
    p = parse("var x, y;\nx = 1;\ny = x + 2;\n", "straight")
    g = build_cfg(p)
    assert g.cut_points == []
    segs = segments(g)
    assert len(segs) == 1
    assert segs[0].source == START and segs[0].sink == END
    assert segs[0].ell is None


def test_three_nested_loops_with_inner_conditional():
    # Deepest grammar-expressible analogue of the paper's example CFG:
    # three cut-points, three back-edges, and a branching innermost segment.
    src = """var N, i, k, m, x;
array a[N];
for (i = 0; i < N; i = i + 1) {
  for (k = 0; k < N; k = k + 1) {
    for (m = 0; m < N; m = m + 1) {
      if (a[m] > 0) { x = 1; } else { x = 2; }
      a[m] = x;
    }
  }
}
"""
    p = parse(src, "nested3")
    g = build_cfg(p)
    assert len(g.cut_points) == 3
    assert len(g.back_edges) == 3
    segs = segments(g)
    h1, h2, h3 = g.cut_points
    pairs = {(s.source, s.sink) for s in segs}
    assert pairs == {(START, h1), (h1, h2), (h1, END), (h2, h3), (h2, h1),
                     (h3, h3), (h3, h2)}
    inner = next(s for s in segs if (s.source, s.sink) == (h3, h3))
    assert inner.is_loop_body
    assert inner.ell == "m"
    assert inner.outer_vars == ("i", "k")
    # the innermost body segment holds the two-way branch converging
    kinds = [g.nodes[n].kind for n in inner.nodes]
    assert kinds.count("cond") >= 2  # loop guard + the if


def test_two_sequential_loops_five_segments():
    src = """var N, i, k;
array a[N];
for (i = 0; i < N; i = i + 1) { a[i] = 0; }
for (k = 0; k < N; k = k + 1) { a[k] = 1; }
"""
    p = parse(src, "twoseq")
    g = build_cfg(p)
    segs = segments(g)
    assert len(segs) == 5
    h1, h2 = g.cut_points
    pairs = [(s.source, s.sink) for s in segs]
    assert pairs == [(START, h1), (h1, h1), (h1, h2), (h2, h2), (h2, END)]
    body1 = segs[1]
    assert body1.is_loop_body and body1.ell == "i" and body1.outer_vars == ()
    linker = segs[2]
    assert not linker.is_loop_body and linker.ell is None
    assert next_cut_point(g, segs, h1) == h2
    assert next_cut_point(g, segs, h2) == END


def test_every_nonback_edge_in_exactly_one_segment():
    for path in sorted(glob.glob(os.path.join(BENCH_DIR, "*.tla"))):
        p = parse_file(path)
        g = build_cfg(p)
        segs = segments(g)
        count = {}
        for s in segs:
            for e in s.edges:
                count[(e.src, e.dst, e.label)] = count.get((e.src, e.dst, e.label), 0) + 1
        nonback = [(e.src, e.dst, e.label) for e in g.edges if not e.is_back]
        assert sorted(count) == sorted(nonback), path
        assert all(v == 1 for v in count.values()), path


def test_back_edge_removal_leaves_dag_and_segments_acyclic():
    for path in sorted(glob.glob(os.path.join(BENCH_DIR, "*.tla"))):
        p = parse_file(path)
        g = build_cfg(p)
        order = g._topo_order()  # asserts acyclicity internally
        assert len(order) == len(g.nodes)
        pos = {n: i for i, n in enumerate(order)}
        for s in segments(g):
            for e in s.edges:
                assert pos[e.src] < pos[e.dst]
            cps = set(g.cut_points)
            interior = [n for n in s.nodes
                        if n not in (s.source, s.sink)]
            assert not (set(interior) & cps), "no intermediate cut-points"


def test_ell_is_none_iff_outside_all_loops():
    for path in sorted(glob.glob(os.path.join(BENCH_DIR, "*.tla"))):
        p = parse_file(path)
        g = build_cfg(p)
        for s in segments(g):
            if s.is_loop_body:
                assert s.ell is not None, path
            if s.ell is None:
                assert not s.is_loop_body


def test_node_coverage():
    for path in sorted(glob.glob(os.path.join(BENCH_DIR, "*.tla"))):
        p = parse_file(path)
        g = build_cfg(p)
        covered = set()
        for s in segments(g):
            covered |= set(s.nodes)
        assert covered == set(g.nodes), path


def test_dot_dump_mentions_cut_points():
    p = parse_file(bench("init"))
    dot = build_cfg(p).to_dot()
    assert dot.startswith("digraph")
    assert "doublecircle" in dot
