"""Control-flow graph construction, cut-points, back-edges and segments.

Loop heads (targets of back-edges) are the cut-points.  A segment is the
acyclic sub-graph between a cut-point (or Start) and the next cut-point (or
End) that crosses no intermediate cut-point and contains no back-edge.  Each
segment carries the innermost loop counter in scope (or None when it lies
outside all loops) and the counters of the enclosing outer loops.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .lang import (
    ArrayAssign, Assign, Assume, BinOp, Block, Cmp, For, If, Num, Var,
)

START = "Start"
END = "End"


@dataclass
class Node:
    id: int
    kind: str  # assign | array_assign | assume | cond | init | incr | start | end
    stmt: object = None  # AST payload (statement or boolean condition)
    label: str = ""


@dataclass
class Edge:
    src: int
    dst: int
    label: str  # tt | ff | U
    ctx: tuple = ()  # counters of loops this edge lies within
    is_back: bool = False


@dataclass
class Segment:
    id: str
    source: object  # node id of a cut-point, or START
    sink: object  # node id of a cut-point, or END
    nodes: tuple  # node ids of the sub-DAG, topologically ordered (source first)
    edges: tuple  # Edge objects within the sub-DAG
    ell: object  # innermost loop counter name, or None
    outer_vars: tuple
    is_loop_body: bool = False
    loop: For | None = None  # for loop-body segments


class Cfg:
    def __init__(self, program):
        self.program = program
        self.nodes = {}
        self.edges = []
        self._next_id = 0
        self.head_of_counter = {}
        self.loop_of_head = {}
        self.start = self._add_node("start")
        self.end = None

    def _add_node(self, kind, stmt=None, label=""):
        n = Node(self._next_id, kind, stmt, label)
        self.nodes[n.id] = n
        self._next_id += 1
        return n.id

    def _add_edge(self, src, dst, label, ctx, is_back=False):
        self.edges.append(Edge(src, dst, label, tuple(ctx), is_back))

    def out_edges(self, nid, with_back=True):
        return [e for e in self.edges if e.src == nid and (with_back or not e.is_back)]

    @property
    def cut_points(self):
        """Back-edge targets in topological order of the stripped DAG."""
        targets = {e.dst for e in self.edges if e.is_back}
        order = self._topo_order()
        return [n for n in order if n in targets]

    @property
    def back_edges(self):
        return [e for e in self.edges if e.is_back]

    def _topo_order(self):
        indeg = {nid: 0 for nid in self.nodes}
        for e in self.edges:
            if not e.is_back:
                indeg[e.dst] += 1
        ready = [nid for nid in sorted(indeg) if indeg[nid] == 0]
        order = []
        while ready:
            nid = ready.pop(0)
            order.append(nid)
            for e in self.out_edges(nid, with_back=False):
                indeg[e.dst] -= 1
                if indeg[e.dst] == 0:
                    # insertion keeps creation order among simultaneously-ready
                    ready.append(e.dst)
                    ready.sort()
        assert len(order) == len(self.nodes), "back-edge removal must leave a DAG"
        return order

    def to_dot(self):
        lines = ["digraph cfg {"]
        cps = set(self.cut_points)
        for nid in sorted(self.nodes):
            n = self.nodes[nid]
            shape = "doublecircle" if nid in cps else (
                "ellipse" if n.kind == "cond" else "box")
            lines.append('  n%d [label="%s", shape=%s];' % (nid, n.label or n.kind, shape))
        for e in self.edges:
            style = ' style=dashed' if e.is_back else ""
            lab = e.label if e.label != "U" else ""
            lines.append('  n%d -> n%d [label="%s"%s];' % (e.src, e.dst, lab, style))
        lines.append("}")
        return "\n".join(lines)


def build_cfg(p):
    """Build the CFG of a validated program."""
    g = Cfg(p)
    frontier = [(g.start, "U")]
    frontier = _emit_stmt(g, p.body, frontier, ())
    g.end = g._add_node("end")
    for src, lab in frontier:
        g._add_edge(src, g.end, lab, ())
    return g


def _connect(g, frontier, nid, ctx):
    for src, lab in frontier:
        g._add_edge(src, nid, lab, ctx)


def _emit_stmt(g, s, frontier, ctx):
    """Emit nodes for s; return the new dangling frontier [(node, label)]."""
    if isinstance(s, Block):
        for x in s.stmts:
            frontier = _emit_stmt(g, x, frontier, ctx)
        return frontier
    if isinstance(s, (Assign, ArrayAssign, Assume)):
        kind = {Assign: "assign", ArrayAssign: "array_assign", Assume: "assume"}[type(s)]
        nid = g._add_node(kind, s, _stmt_label(s))
        _connect(g, frontier, nid, ctx)
        return [(nid, "U")]
    if isinstance(s, If):
        nid = g._add_node("cond", s.cond, _cond_label(s.cond))
        _connect(g, frontier, nid, ctx)
        out = _emit_stmt(g, s.then, [(nid, "tt")], ctx)
        if s.orelse is not None:
            out += _emit_stmt(g, s.orelse, [(nid, "ff")], ctx)
        else:
            out += [(nid, "ff")]
        return out
    if isinstance(s, For):
        init = g._add_node("init", Assign(s.counter, Num(0)), "%s=0" % s.counter)
        _connect(g, frontier, init, ctx)
        guard = Cmp("<", Var(s.counter), s.trip)
        head = g._add_node("cond", guard, _cond_label(guard))
        g._add_edge(init, head, "U", ctx)
        g.head_of_counter[s.counter] = head
        g.loop_of_head[head] = s
        inner = ctx + (s.counter,)
        body_out = _emit_stmt(g, s.body, [(head, "tt")], inner)
        incr = g._add_node(
            "incr", Assign(s.counter, BinOp("+", Var(s.counter), Num(1))),
            "%s=%s+1" % (s.counter, s.counter))
        _connect(g, body_out, incr, inner)
        g._add_edge(incr, head, "U", inner, is_back=True)
        return [(head, "ff")]
    raise TypeError(s)


def _stmt_label(s):
    from .lang import expr_str, bool_str
    if isinstance(s, Assign):
        return "%s=%s" % (s.name, expr_str(s.value))
    if isinstance(s, ArrayAssign):
        return "%s[%s]=%s" % (s.array, expr_str(s.index), expr_str(s.value))
    if isinstance(s, Assume):
        return "assume(%s)" % bool_str(s.cond)
    return str(s)


def _cond_label(c):
    from .lang import bool_str
    return bool_str(c)


def segments(g):
    """Enumerate segments, topologically ordered by source cut-point.

    Every non-back edge of the CFG lies in exactly one segment.  A
    loop-body segment runs from a head back to the same head (through the
    counter increment and the removed back-edge).
    """
    cps = g.cut_points
    topo = {nid: i for i, nid in enumerate(g._topo_order())}
    sources = [g.start] + cps
    cp_set = set(cps)
    segs = []
    for c1 in sources:
        # forward exploration from c1, not expanding past cut-points/End/incr
        region_edges = []
        terminal_sink = {}  # terminal node id -> segment sink
        seen = set()
        work = [c1]
        while work:
            nid = work.pop(0)
            if nid in seen:
                continue
            seen.add(nid)
            outs = g.out_edges(nid)
            if nid != c1 and nid in cp_set:
                terminal_sink[nid] = nid
                continue
            if nid == g.end:
                terminal_sink[nid] = END
                continue
            normal = [e for e in outs if not e.is_back]
            backs = [e for e in outs if e.is_back]
            if not normal and backs:
                terminal_sink[nid] = backs[0].dst
                continue
            for e in normal:
                region_edges.append(e)
                work.append(e.dst)

        for sink in sorted(set(terminal_sink.values()), key=lambda s: -1 if s == END else topo[s]):
            terms = {n for n, s in terminal_sink.items() if s == sink}
            # backward closure: keep edges on paths from c1 to these terminals
            keep_nodes = set(terms)
            changed = True
            while changed:
                changed = False
                for e in region_edges:
                    if e.dst in keep_nodes and e.src not in keep_nodes:
                        keep_nodes.add(e.src)
                        changed = True
            if c1 not in keep_nodes:
                continue
            keep_edges = [e for e in region_edges if e.src in keep_nodes and e.dst in keep_nodes]
            ordered = [n for n in sorted(keep_nodes, key=lambda n: topo[n])]
            ell, outer = _segment_scope(keep_edges)
            is_body = sink == c1 and c1 != g.start
            src_name = START if c1 == g.start else c1
            segs.append(Segment(
                id="%s->%s" % (_pt(g, src_name), _pt(g, sink)),
                source=src_name,
                sink=sink,
                nodes=tuple(ordered),
                edges=tuple(keep_edges),
                ell=ell,
                outer_vars=outer,
                is_loop_body=is_body,
                loop=g.loop_of_head.get(c1) if is_body else None,
            ))
    ordering = {s: i for i, s in enumerate([g.start] + cps)}
    segs.sort(key=lambda sg: (ordering[g.start if sg.source == START else sg.source],
                              0 if sg.is_loop_body else 1,
                              sg.id))
    return segs


def _segment_scope(edges):
    """Innermost common loop counter and outer counters for a segment."""
    ctxs = [e.ctx for e in edges]
    if not ctxs:
        return None, ()
    common = ctxs[0]
    for c in ctxs[1:]:
        k = 0
        while k < len(common) and k < len(c) and common[k] == c[k]:
            k += 1
        common = common[:k]
    if not common:
        return None, ()
    return common[-1], tuple(common[:-1])


def _pt(g, point):
    if point in (START, END):
        return point
    loop = g.loop_of_head.get(point)
    return "head(%s)" % loop.counter if loop else "n%d" % point


def next_cut_point(g, segs, head):
    """Sink of the exit segment leaving a loop head (cut-point or END)."""
    for sg in segs:
        if sg.source == head and not sg.is_loop_body:
            return sg.sink
    return END
