"""Parser for .tla sources (C-like syntax for the restricted loop language).

A translation unit is: declarations, optional `requires`/`ensures`
annotations, then statements.  For-loops in the common C patterns
(`i = e1; i <= e2; i = i + c` and friends) are normalized to the restricted
0-based counted form by substituting an affine counter expression for the
source variable; loops with other update shapes need an explicit
`iterates E` clause and go through the flag-based rewriting.
"""

from __future__ import annotations

import re

from .lang import (
    ArrayAssign, ArrayDecl, ArrayRead, Assign, Assume, BinOp, Block, BoolLit,
    BoolOp, CounterMap, Cmp, For, If, Not, Num, Program, QuantAssertion,
    TRUE_ASSERTION, TlaSyntaxError, Var, block, fold_expr, stmt_write_set,
    subst_stmt, validate,
)

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<num>\d+)
  | (?P<id>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>==>|::|\|\||&&|==|!=|<=|>=|[-+*/%<>=!;,(){}\[\]])
""", re.VERBOSE | re.DOTALL)

KEYWORDS = {"var", "array", "requires", "ensures", "forall", "assume", "if",
            "else", "for", "iterates", "true", "false"}


class Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind = kind
        self.text = text
        self.line = line
        self.col = col

    def __repr__(self):
        return "Token(%s, %r, %d:%d)" % (self.kind, self.text, self.line, self.col)


def tokenize(source):
    tokens = []
    pos, line, col = 0, 1, 1
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if not m:
            raise TlaSyntaxError("unexpected character %r" % source[pos], line, col)
        text = m.group()
        if m.lastgroup == "num":
            tokens.append(Token("num", text, line, col))
        elif m.lastgroup == "id":
            kind = text if text in KEYWORDS else "id"
            tokens.append(Token(kind, text, line, col))
        elif m.lastgroup == "op":
            tokens.append(Token(text, text, line, col))
        nl = text.count("\n")
        if nl:
            line += nl
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


# Untyped expression tree built by the Pratt parser; split into the typed
# Expr/BoolExpr AST afterwards.
_BOOL_OPS = {"&&": "and", "||": "or"}


class _Parser:
    def __init__(self, source):
        self.tokens = tokenize(source)
        self.i = 0
        self.scalar_names = set()
        self.array_names = set()
        self.extra_vars = set()  # bound index vars while parsing an assertion

    def peek(self, k=0):
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def next(self):
        t = self.tokens[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def expect(self, kind):
        t = self.peek()
        if t.kind != kind:
            raise TlaSyntaxError("expected '%s', found '%s'" % (kind, t.text or "end of file"),
                                 t.line, t.col)
        return self.next()

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        raise TlaSyntaxError(msg, tok.line, tok.col)

    # -- expressions ------------------------------------------------------
    # One grammar covers both sorts; _as_int/_as_bool enforce sorts after.

    def parse_formula(self):
        return self._parse_binary(0)

    _LEVELS = [
        (("||",), "bool"),
        (("&&",), "bool"),
        (("==", "!=", "<", "<=", ">", ">="), "cmp"),
        (("+", "-"), "arith"),
        (("*", "/", "%"), "arith"),
    ]

    def _parse_binary(self, level):
        if level == len(self._LEVELS):
            return self._parse_unary()
        ops, kind = self._LEVELS[level]
        node = self._parse_binary(level + 1)
        while self.peek().kind in ops:
            tok = self.next()
            rhs = self._parse_binary(level + 1)
            if kind == "bool":
                node = ("bool", _BOOL_OPS[tok.kind], node, rhs, tok)
            elif kind == "cmp":
                node = ("cmp", tok.kind, node, rhs, tok)
            else:
                node = ("arith", tok.kind, node, rhs, tok)
        return node

    def _parse_unary(self):
        t = self.peek()
        if t.kind == "!":
            self.next()
            return ("not", self._parse_unary(), t)
        if t.kind == "-":
            self.next()
            arg = self._parse_unary()
            if arg[0] == "num":
                return ("num", -arg[1], t)
            return ("arith", "-", ("num", 0, t), arg, t)
        return self._parse_atom()

    def _parse_atom(self):
        t = self.next()
        if t.kind == "num":
            return ("num", int(t.text), t)
        if t.kind == "true":
            return ("true", t)
        if t.kind == "false":
            return ("false", t)
        if t.kind == "id":
            if self.peek().kind == "[":
                self.next()
                idx = self.parse_formula()
                self.expect("]")
                return ("aread", t.text, idx, t)
            return ("var", t.text, t)
        if t.kind == "(":
            inner = self.parse_formula()
            self.expect(")")
            return inner
        self.error("expected expression, found '%s'" % (t.text or "end of file"), t)

    def _as_int(self, node):
        tag = node[0]
        if tag == "num":
            return Num(node[1])
        if tag == "var":
            if node[1] not in self.scalar_names and node[1] not in self.extra_vars:
                self.error("use of undeclared identifier '%s'" % node[1], node[-1])
            return Var(node[1])
        if tag == "aread":
            if node[1] not in self.array_names:
                self.error("use of undeclared array '%s'" % node[1], node[-1])
            return ArrayRead(node[1], self._as_int(node[2]))
        if tag == "arith":
            return BinOp(node[1], self._as_int(node[2]), self._as_int(node[3]))
        self.error("expected an integer expression", node[-1])

    def _as_bool(self, node):
        tag = node[0]
        if tag == "true":
            return BoolLit(True)
        if tag == "false":
            return BoolLit(False)
        if tag == "cmp":
            return Cmp(node[1], self._as_int(node[2]), self._as_int(node[3]))
        if tag == "bool":
            left, right = self._as_bool(node[2]), self._as_bool(node[3])
            parts = []
            for side in (left, right):
                if isinstance(side, BoolOp) and side.op == node[1]:
                    parts.extend(side.args)
                else:
                    parts.append(side)
            return BoolOp(node[1], tuple(parts))
        if tag == "not":
            return Not(self._as_bool(node[1]))
        self.error("expected a boolean expression", node[-1])

    def parse_int_expr(self):
        return self._as_int(self.parse_formula())

    def parse_bool_expr(self):
        return self._as_bool(self.parse_formula())

    # -- declarations and annotations -------------------------------------

    def parse_program(self, name="program"):
        scalars, arrays = [], []
        while self.peek().kind in ("var", "array"):
            if self.next().kind == "var":
                while True:
                    tok = self.expect("id")
                    scalars.append(tok.text)
                    self.scalar_names.add(tok.text)
                    if self.peek().kind != ",":
                        break
                    self.next()
            else:
                while True:
                    tok = self.expect("id")
                    self.expect("[")
                    size = self.parse_int_expr()
                    self.expect("]")
                    arrays.append(ArrayDecl(tok.text, size))
                    self.array_names.add(tok.text)
                    if self.peek().kind != ",":
                        break
                    self.next()
            self.expect(";")

        pre = post = None
        while self.peek().kind in ("requires", "ensures"):
            which = self.next().kind
            qa = self.parse_assertion()
            self.expect(";")
            if which == "requires":
                if pre is not None:
                    self.error("duplicate requires clause")
                pre = qa
            else:
                if post is not None:
                    self.error("duplicate ensures clause")
                post = qa

        stmts = []
        counters = []
        while self.peek().kind != "eof":
            stmts.append(self.parse_stmt(counters))
        body = block(stmts) if stmts else Block(())
        all_scalars = tuple(scalars) + tuple(c for c in counters if c not in scalars)
        program = Program(
            scalars=all_scalars,
            loop_counters=frozenset(counters),
            arrays=tuple(arrays),
            body=body,
            pre=pre or TRUE_ASSERTION,
            post=post or TRUE_ASSERTION,
            name=name,
        )
        validate(program)
        return program

    def parse_assertion(self):
        if self.peek().kind == "forall":
            self.next()
            index_vars = [self.expect("id").text]
            while self.peek().kind == ",":
                self.next()
                index_vars.append(self.expect("id").text)
            self.expect("::")
        else:
            index_vars = []
        self.extra_vars = set(index_vars)
        try:
            first = self.parse_bool_expr()
            if self.peek().kind == "==>":
                self.next()
                rng, body = first, self.parse_bool_expr()
            else:
                rng, body = BoolLit(True), first
        finally:
            self.extra_vars = set()
        return QuantAssertion(tuple(index_vars), rng, body)

    # -- statements --------------------------------------------------------

    def parse_block(self, counters):
        if self.peek().kind == "{":
            self.next()
            stmts = []
            while self.peek().kind != "}":
                stmts.append(self.parse_stmt(counters))
            self.next()
            return block(stmts) if stmts else Block(())
        return self.parse_stmt(counters)

    def parse_stmt(self, counters):
        t = self.peek()
        if t.kind == "assume":
            self.next()
            self.expect("(")
            cond = self.parse_bool_expr()
            self.expect(")")
            self.expect(";")
            return Assume(cond)
        if t.kind == "if":
            self.next()
            self.expect("(")
            cond = self.parse_bool_expr()
            self.expect(")")
            then = self.parse_block(counters)
            orelse = None
            if self.peek().kind == "else":
                self.next()
                orelse = self.parse_block(counters)
            return If(cond, then, orelse)
        if t.kind == "for":
            return self.parse_for(counters)
        if t.kind == "id":
            name = self.next().text
            if self.peek().kind == "[":
                if name not in self.array_names:
                    self.error("assignment to undeclared array '%s'" % name, t)
                self.next()
                idx = self.parse_int_expr()
                self.expect("]")
                self.expect("=")
                val = self.parse_int_expr()
                self.expect(";")
                return ArrayAssign(name, idx, val)
            if name not in self.scalar_names:
                self.error("assignment to undeclared scalar '%s'" % name, t)
            if name in counters:
                self.error("only assignments to loop counter variables happen when "
                           "a loop is entered and at the end of an iteration; "
                           "cannot assign '%s' here" % name, t)
            self.expect("=")
            val = self.parse_int_expr()
            self.expect(";")
            return Assign(name, val)
        self.error("expected a statement, found '%s'" % (t.text or "end of file"), t)

    def parse_for(self, counters):
        tok = self.expect("for")
        self.expect("(")
        v = self.expect("id").text
        if v not in self.scalar_names:
            self.error("loop variable '%s' is not declared" % v, tok)
        self.expect("=")
        init = self.parse_int_expr()
        self.expect(";")
        cond = self.parse_bool_expr()
        self.expect(";")
        v2 = self.expect("id").text
        self.expect("=")
        step = self.parse_int_expr()
        self.expect(")")
        if v2 != v:
            self.error("loop variable mismatch: '%s' vs '%s'" % (v, v2), tok)
        trip = None
        if self.peek().kind == "iterates":
            self.next()
            trip = self.parse_int_expr()
        body = self.parse_block(counters)
        if v in stmt_write_set(body):
            self.error("loop variable '%s' is assigned inside the loop body" % v, tok)
        if trip is not None:
            fresh = self._fresh_counter(v, counters)
            return desugar_general_loop(v, init, cond, step, trip, body, fresh)
        return self._normalize_for(v, init, cond, step, body, counters, tok)

    def _fresh_counter(self, base, counters):
        taken = self.scalar_names | self.array_names
        name = base + "_l"
        n = 0
        while name in taken:
            n += 1
            name = "%s_l%d" % (base, n)
        counters.append(name)
        self.scalar_names.add(name)
        return name

    def _normalize_for(self, v, init, cond, step, body, counters, tok):
        """Rewrite an affine C-style loop into the restricted counted form."""
        c = _affine_step(step, v)
        if c is None:
            self.error("cannot determine trip count of loop over '%s'; "
                       "annotate with 'iterates E'" % v, tok)
        if not (isinstance(cond, Cmp) and cond.left == Var(v)):
            self.error("unsupported loop condition for '%s' (expected '%s relop bound'); "
                       "annotate with 'iterates E'" % (v, v), tok)
        bound = cond.right
        if c > 0 and cond.op in ("<", "<="):
            diff = BinOp("-", bound, init)
            if cond.op == "<=":
                diff = BinOp("+", diff, Num(1))
            trip = fold_expr(diff if c == 1 else _ceil_div(diff, c))
        elif c < 0 and cond.op in (">", ">="):
            diff = BinOp("-", init, bound)
            if cond.op == ">=":
                diff = BinOp("+", diff, Num(1))
            trip = fold_expr(diff if c == -1 else _ceil_div(diff, -c))
        else:
            self.error("loop condition direction does not match the counter step; "
                       "annotate with 'iterates E'", tok)

        if c == 1 and init == Num(0):
            # already in restricted form: v itself is the counter
            if v in counters:
                self.error("loop counter '%s' reused by a second loop" % v, tok)
            counters.append(v)
            return For(v, trip, body, source=CounterMap(v, 1, Num(0)))
        fresh = self._fresh_counter(v, counters)
        ctr = Var(fresh)
        op = "+" if c > 0 else "-"
        phase = ctr if abs(c) == 1 else BinOp("*", Num(abs(c)), ctr)
        cur = fold_expr(BinOp(op, init, phase))
        final_phase = trip if abs(c) == 1 else BinOp("*", Num(abs(c)), trip)
        final = fold_expr(BinOp(op, init, final_phase))
        loop = For(fresh, trip, subst_stmt(body, v, cur), source=CounterMap(v, c, init))
        return block([loop, Assign(v, final)])


def _ceil_div(e, c):
    return BinOp("/", BinOp("+", e, Num(c - 1)), Num(c))


def _affine_step(step, v):
    """Return the integer c when step is v+c or v-c (c a positive literal)."""
    if isinstance(step, BinOp) and step.left == Var(v) and isinstance(step.right, Num):
        if step.op == "+" and step.right.value > 0:
            return step.right.value
        if step.op == "-" and step.right.value > 0:
            return -step.right.value
    return None


def desugar_general_loop(v, init, cond, step, trip_count, body, fresh_counter):
    """Model a general counted loop in the restricted language.

    Produces ``for (l = 0; l < trip; l = l+1) { if (l == 0) v = init;
    if (cond) { body; v = step; } }`` with a fresh counter l, mirroring the
    general-loop modeling of the restricted grammar.  A loop already in
    restricted shape comes back unchanged modulo the fresh counter name.
    """
    if init == Num(0) and cond == Cmp("<", Var(v), trip_count) and _affine_step(step, v) == 1:
        return For(fresh_counter, trip_count, subst_stmt(body, v, Var(fresh_counter)),
                   source=CounterMap(v, 1, Num(0)))
    ctr = Var(fresh_counter)
    inner = block([
        If(Cmp("==", ctr, Num(0)), Assign(v, init)),
        If(cond, block([body, Assign(v, step)])),
    ])
    return For(fresh_counter, trip_count, inner, source=None)


def parse(source, name="program"):
    """Parse and validate a .tla translation unit."""
    return _Parser(source).parse_program(name)


def parse_file(path):
    import os
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    base = os.path.splitext(os.path.basename(path))[0]
    return parse(text, name=base)
