"""AST for the restricted loop language, with validator and pretty-printer.

Programs are a set of integer scalars, integer arrays with symbolic sizes,
a body built from assignments / assume / if / counted for-loops, and a
quantified pre- and post-condition of the shape

    forall I :: Phi(I) ==> Psi(arrays, scalars, I)

Loops are kept in the restricted counted form ``for (l = 0; l < E; l = l+1)``;
the parser normalizes the more general C-like loops into it (see parser.py).
"""

from __future__ import annotations

from dataclasses import dataclass, field


class SourceError(Exception):
    """Problem in a source program, with an optional source position."""

    def __init__(self, message, line=None, col=None):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col

    def render(self, filename="<input>"):
        if self.line is not None:
            return "%s:%d:%d: %s" % (filename, self.line, self.col, self.message)
        return "%s: %s" % (filename, self.message)


class TlaSyntaxError(SourceError):
    pass


class ValidationError(SourceError):
    pass


# ---------------------------------------------------------------------------
# Expressions

ARITH_OPS = ("+", "-", "*", "/", "%")
REL_OPS = ("<", "<=", "==", "!=", ">=", ">")


@dataclass(frozen=True)
class Expr:
    pass


@dataclass(frozen=True)
class Num(Expr):
    value: int


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class ArrayRead(Expr):
    array: str
    index: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str  # one of ARITH_OPS
    left: Expr
    right: Expr


@dataclass(frozen=True)
class BoolExpr:
    pass


@dataclass(frozen=True)
class BoolLit(BoolExpr):
    value: bool


@dataclass(frozen=True)
class Cmp(BoolExpr):
    op: str  # one of REL_OPS
    left: Expr
    right: Expr


@dataclass(frozen=True)
class BoolOp(BoolExpr):
    op: str  # "and" | "or"
    args: tuple


@dataclass(frozen=True)
class Not(BoolExpr):
    arg: BoolExpr


def conj(parts):
    parts = [p for p in parts if p != BoolLit(True)]
    if not parts:
        return BoolLit(True)
    if len(parts) == 1:
        return parts[0]
    return BoolOp("and", tuple(parts))


# ---------------------------------------------------------------------------
# Statements

@dataclass(frozen=True)
class Stmt:
    pass


@dataclass(frozen=True)
class Assign(Stmt):
    name: str
    value: Expr


@dataclass(frozen=True)
class ArrayAssign(Stmt):
    array: str
    index: Expr
    value: Expr


@dataclass(frozen=True)
class Assume(Stmt):
    cond: BoolExpr


@dataclass(frozen=True)
class If(Stmt):
    cond: BoolExpr
    then: Stmt
    orelse: Stmt | None = None


@dataclass(frozen=True)
class CounterMap:
    """Relation between a source loop variable and the 0-based counter.

    The source variable equals ``coeff * counter + base`` inside the loop;
    diagnostics use it to report tiles in source coordinates.
    """

    name: str
    coeff: int
    base: Expr


@dataclass(frozen=True)
class For(Stmt):
    counter: str
    trip: Expr  # iteration count E; counter runs over [0, E)
    body: Stmt
    source: CounterMap | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Block(Stmt):
    stmts: tuple


def block(stmts):
    flat = []
    for s in stmts:
        if isinstance(s, Block):
            flat.extend(s.stmts)
        else:
            flat.append(s)
    if len(flat) == 1:
        return flat[0]
    return Block(tuple(flat))


# ---------------------------------------------------------------------------
# Assertions and programs

@dataclass(frozen=True)
class QuantAssertion:
    """forall index_vars :: range ==> body.  Empty index_vars = scalar fact."""

    index_vars: tuple
    range: BoolExpr  # Phi: arithmetic only, no array reads
    body: BoolExpr  # Psi: may read arrays

    def is_trivial(self):
        return self.body == BoolLit(True) or self.range == BoolLit(False)


TRUE_ASSERTION = QuantAssertion((), BoolLit(True), BoolLit(True))


@dataclass(frozen=True)
class ArrayDecl:
    name: str
    size: Expr


@dataclass(frozen=True)
class Program:
    scalars: tuple
    loop_counters: frozenset
    arrays: tuple  # ArrayDecl
    body: Stmt
    pre: QuantAssertion = TRUE_ASSERTION
    post: QuantAssertion = TRUE_ASSERTION
    name: str = field(default="program", compare=False)

    def array_names(self):
        return [a.name for a in self.arrays]

    def size_params(self):
        """Scalars that occur in some array size expression."""
        names = []
        for a in self.arrays:
            for v in expr_vars(a.size):
                if v not in names:
                    names.append(v)
        return names

    def array_decl(self, name):
        for a in self.arrays:
            if a.name == name:
                return a
        raise KeyError(name)


# ---------------------------------------------------------------------------
# Structural helpers

def expr_vars(e):
    """Scalar variable names read by an expression (not array names)."""
    out = set()

    def walk(x):
        if isinstance(x, Var):
            out.add(x.name)
        elif isinstance(x, BinOp):
            walk(x.left)
            walk(x.right)
        elif isinstance(x, ArrayRead):
            walk(x.index)

    walk(e)
    return out


def bool_vars(b):
    out = set()
    for e in bool_exprs(b):
        out |= expr_vars(e)
    return out


def bool_exprs(b):
    """All arithmetic sub-expressions directly under a boolean expression."""
    if isinstance(b, Cmp):
        return [b.left, b.right]
    if isinstance(b, BoolOp):
        out = []
        for a in b.args:
            out.extend(bool_exprs(a))
        return out
    if isinstance(b, Not):
        return bool_exprs(b.arg)
    return []


def expr_reads_array(e):
    if isinstance(e, ArrayRead):
        return True
    if isinstance(e, BinOp):
        return expr_reads_array(e.left) or expr_reads_array(e.right)
    return False


def bool_reads_array(b):
    return any(expr_reads_array(e) for e in bool_exprs(b))


def stmt_write_set(s):
    """Names (scalars and arrays) possibly written by a statement."""
    out = set()

    def walk(st):
        if isinstance(st, Assign):
            out.add(st.name)
        elif isinstance(st, ArrayAssign):
            out.add(st.array)
        elif isinstance(st, If):
            walk(st.then)
            if st.orelse is not None:
                walk(st.orelse)
        elif isinstance(st, For):
            out.add(st.counter)
            walk(st.body)
        elif isinstance(st, Block):
            for x in st.stmts:
                walk(x)

    walk(s)
    return out


def iter_loops(s):
    """Yield every For statement in s, outermost first."""
    if isinstance(s, For):
        yield s
        yield from iter_loops(s.body)
    elif isinstance(s, If):
        yield from iter_loops(s.then)
        if s.orelse is not None:
            yield from iter_loops(s.orelse)
    elif isinstance(s, Block):
        for x in s.stmts:
            yield from iter_loops(x)


def has_nested_loop(p):
    for loop in iter_loops(p.body):
        if any(True for _ in iter_loops(loop.body)):
            return True
    return False


def fold_expr(e):
    """Light constant folding: Num op Num, +-0, *1, and (x +- a) +- b."""
    if not isinstance(e, BinOp):
        return e
    l = fold_expr(e.left)
    r = fold_expr(e.right)
    if isinstance(l, Num) and isinstance(r, Num) and e.op in ("+", "-", "*"):
        return Num({"+": l.value + r.value, "-": l.value - r.value,
                    "*": l.value * r.value}[e.op])
    if isinstance(l, Num) and isinstance(r, Num) and e.op in ("/", "%") and r.value != 0:
        q = l.value // r.value if r.value > 0 else -(l.value // -r.value)
        return Num(q if e.op == "/" else l.value - r.value * q)
    if e.op in ("+", "-") and r == Num(0):
        return l
    if e.op == "+" and l == Num(0):
        return r
    if e.op == "*" and l == Num(1):
        return r
    if e.op == "*" and r == Num(1):
        return l
    if (e.op in ("+", "-") and isinstance(r, Num) and isinstance(l, BinOp)
            and l.op in ("+", "-") and isinstance(l.right, Num)):
        a = l.right.value if l.op == "+" else -l.right.value
        b = r.value if e.op == "+" else -r.value
        c = a + b
        if c == 0:
            return l.left
        return BinOp("+" if c > 0 else "-", l.left, Num(abs(c)))
    return BinOp(e.op, l, r)


def subst_expr(e, name, repl):
    """Substitute expression repl for scalar variable name in e."""
    if isinstance(e, Var):
        return repl if e.name == name else e
    if isinstance(e, BinOp):
        return BinOp(e.op, subst_expr(e.left, name, repl), subst_expr(e.right, name, repl))
    if isinstance(e, ArrayRead):
        return ArrayRead(e.array, subst_expr(e.index, name, repl))
    return e


def subst_bool(b, name, repl):
    if isinstance(b, Cmp):
        return Cmp(b.op, subst_expr(b.left, name, repl), subst_expr(b.right, name, repl))
    if isinstance(b, BoolOp):
        return BoolOp(b.op, tuple(subst_bool(a, name, repl) for a in b.args))
    if isinstance(b, Not):
        return Not(subst_bool(b.arg, name, repl))
    return b


def subst_stmt(s, name, repl):
    if isinstance(s, Assign):
        return Assign(s.name, subst_expr(s.value, name, repl))
    if isinstance(s, ArrayAssign):
        return ArrayAssign(s.array, subst_expr(s.index, name, repl), subst_expr(s.value, name, repl))
    if isinstance(s, Assume):
        return Assume(subst_bool(s.cond, name, repl))
    if isinstance(s, If):
        orelse = subst_stmt(s.orelse, name, repl) if s.orelse is not None else None
        return If(subst_bool(s.cond, name, repl), subst_stmt(s.then, name, repl), orelse)
    if isinstance(s, For):
        if s.counter == name:  # shadowing cannot happen post-validation; be safe
            return s
        return For(s.counter, subst_expr(s.trip, name, repl), subst_stmt(s.body, name, repl), s.source)
    if isinstance(s, Block):
        return Block(tuple(subst_stmt(x, name, repl) for x in s.stmts))
    raise TypeError(s)


# ---------------------------------------------------------------------------
# Validation

def validate(p):
    """Check the structural invariants of a Program.

    Raises ValidationError on the first violation; returns a list of
    warning strings (e.g. literal division by zero) otherwise.
    """
    warnings = []
    declared = set(p.scalars) | {a.name for a in p.arrays}
    if len(declared) != len(p.scalars) + len(p.arrays):
        raise ValidationError("duplicate declaration")

    counters = [loop.counter for loop in iter_loops(p.body)]
    if len(set(counters)) != len(counters):
        raise ValidationError("each loop must have a unique counter variable")
    counter_set = set(counters)
    if not counter_set <= set(p.scalars):
        raise ValidationError("loop counters must be declared scalars")
    if p.loop_counters != frozenset(counter_set):
        raise ValidationError("loop_counters does not match loops in body")

    def check_expr(e, extra=()):
        if isinstance(e, Num):
            return
        if isinstance(e, Var):
            if e.name not in p.scalars and e.name not in extra:
                raise ValidationError("use of undeclared identifier '%s'" % e.name)
            return
        if isinstance(e, ArrayRead):
            if e.array not in {a.name for a in p.arrays}:
                raise ValidationError("use of undeclared array '%s'" % e.array)
            check_expr(e.index, extra)
            return
        if isinstance(e, BinOp):
            if e.op not in ARITH_OPS:
                raise ValidationError("bad arithmetic operator '%s'" % e.op)
            if e.op in ("/", "%") and e.right == Num(0):
                warnings.append("literal division by zero")
            check_expr(e.left, extra)
            check_expr(e.right, extra)
            return
        raise ValidationError("malformed expression %r" % (e,))

    def check_bool(b, extra=()):
        if isinstance(b, BoolLit):
            return
        if isinstance(b, Cmp):
            if b.op not in REL_OPS:
                raise ValidationError("bad relational operator '%s'" % b.op)
            check_expr(b.left, extra)
            check_expr(b.right, extra)
            return
        if isinstance(b, BoolOp):
            if b.op not in ("and", "or") or len(b.args) < 2:
                raise ValidationError("malformed boolean expression")
            for a in b.args:
                check_bool(a, extra)
            return
        if isinstance(b, Not):
            check_bool(b.arg, extra)
            return
        raise ValidationError("malformed boolean expression %r" % (b,))

    def check_stmt(s):
        if isinstance(s, Assign):
            if s.name in counter_set:
                raise ValidationError(
                    "assignment to loop counter '%s' outside loop structure" % s.name)
            if s.name not in p.scalars:
                raise ValidationError("assignment to undeclared scalar '%s'" % s.name)
            check_expr(s.value)
        elif isinstance(s, ArrayAssign):
            if s.array not in {a.name for a in p.arrays}:
                raise ValidationError("assignment to undeclared array '%s'" % s.array)
            check_expr(s.index)
            check_expr(s.value)
        elif isinstance(s, Assume):
            check_bool(s.cond)
        elif isinstance(s, If):
            check_bool(s.cond)
            check_stmt(s.then)
            if s.orelse is not None:
                check_stmt(s.orelse)
        elif isinstance(s, For):
            check_expr(s.trip)
            writes = stmt_write_set(s.body)
            if expr_reads_array(s.trip):
                raise ValidationError("trip count of loop '%s' reads an array" % s.counter)
            bad = expr_vars(s.trip) & writes
            if bad:
                raise ValidationError(
                    "trip count of loop '%s' uses variables updated in its body: %s"
                    % (s.counter, ", ".join(sorted(bad))))
            check_stmt(s.body)
        elif isinstance(s, Block):
            for x in s.stmts:
                check_stmt(x)
        else:
            raise ValidationError("malformed statement %r" % (s,))

    check_stmt(p.body)

    for which, qa in (("requires", p.pre), ("ensures", p.post)):
        clash = set(qa.index_vars) & declared
        if clash:
            raise ValidationError(
                "%s binds index variable shadowing declaration: %s" % (which, ", ".join(sorted(clash))))
        if len(set(qa.index_vars)) != len(qa.index_vars):
            raise ValidationError("%s binds duplicate index variables" % which)
        if bool_reads_array(qa.range):
            raise ValidationError("%s range (left of ==>) must not read arrays" % which)
        check_bool(qa.range, extra=set(qa.index_vars))
        check_bool(qa.body, extra=set(qa.index_vars))
    return warnings


# ---------------------------------------------------------------------------
# Pretty-printing (parse . pretty == identity on the AST)

_PREC = {"or": 1, "and": 2, "not": 3, "cmp": 4, "+": 5, "-": 5, "*": 6, "/": 6, "%": 6}


def expr_str(e, parent_prec=0):
    if isinstance(e, Num):
        return str(e.value) if e.value >= 0 else "(%d)" % e.value
    if isinstance(e, Var):
        return e.name
    if isinstance(e, ArrayRead):
        return "%s[%s]" % (e.array, expr_str(e.index))
    if isinstance(e, BinOp):
        prec = _PREC[e.op]
        left = expr_str(e.left, prec)
        # arithmetic is left-associative: parenthesize right child at equal prec
        right = expr_str(e.right, prec + 1)
        s = "%s %s %s" % (left, e.op, right)
        return "(%s)" % s if prec < parent_prec else s
    raise TypeError(e)


def bool_str(b, parent_prec=0):
    if isinstance(b, BoolLit):
        return "true" if b.value else "false"
    if isinstance(b, Cmp):
        s = "%s %s %s" % (expr_str(b.left, _PREC["cmp"] + 1), b.op, expr_str(b.right, _PREC["cmp"] + 1))
        return "(%s)" % s if _PREC["cmp"] < parent_prec else s
    if isinstance(b, BoolOp):
        prec = _PREC[b.op]
        s = (" %s " % ("&&" if b.op == "and" else "||")).join(bool_str(a, prec + 1) for a in b.args)
        return "(%s)" % s if prec < parent_prec else s
    if isinstance(b, Not):
        return "!%s" % bool_str(b.arg, _PREC["not"] + 1)
    raise TypeError(b)


def assertion_str(qa):
    body = bool_str(qa.body)
    if qa.range == BoolLit(True) and not qa.index_vars:
        head = ""
    else:
        head = "%s ==> " % bool_str(qa.range)
    if qa.index_vars:
        return "forall %s :: %s%s" % (", ".join(qa.index_vars), head, body)
    return "%s%s" % (head, body)


def program_str(p):
    lines = []
    if p.scalars:
        lines.append("var %s;" % ", ".join(p.scalars))
    for a in p.arrays:
        lines.append("array %s[%s];" % (a.name, expr_str(a.size)))
    if p.pre != TRUE_ASSERTION:
        lines.append("requires %s;" % assertion_str(p.pre))
    if p.post != TRUE_ASSERTION:
        lines.append("ensures %s;" % assertion_str(p.post))
    lines.append("")
    _stmt_lines(p.body, lines, 0, top=True)
    return "\n".join(lines) + "\n"


def _stmt_lines(s, lines, depth, top=False):
    pad = "  " * depth
    if isinstance(s, Block):
        for x in s.stmts:
            _stmt_lines(x, lines, depth)
        return
    if isinstance(s, Assign):
        lines.append("%s%s = %s;" % (pad, s.name, expr_str(s.value)))
    elif isinstance(s, ArrayAssign):
        lines.append("%s%s[%s] = %s;" % (pad, s.array, expr_str(s.index), expr_str(s.value)))
    elif isinstance(s, Assume):
        lines.append("%sassume(%s);" % (pad, bool_str(s.cond)))
    elif isinstance(s, If):
        lines.append("%sif (%s) {" % (pad, bool_str(s.cond)))
        _stmt_lines(s.then, lines, depth + 1)
        if s.orelse is not None:
            lines.append("%s} else {" % pad)
            _stmt_lines(s.orelse, lines, depth + 1)
        lines.append("%s}" % pad)
    elif isinstance(s, For):
        c = s.counter
        lines.append("%sfor (%s = 0; %s < %s; %s = %s + 1) {" % (pad, c, c, expr_str(s.trip), c, c))
        _stmt_lines(s.body, lines, depth + 1)
        lines.append("%s}" % pad)
    else:
        raise TypeError(s)
