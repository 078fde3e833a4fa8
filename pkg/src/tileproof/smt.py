"""Formula IR, SMT-LIB2 emission, and the external solver process driver.

Formulas are integer/boolean/array terms assembled by the constructor
helpers below.  ``emit`` turns a CheckScript into deterministic SMT-LIB2
text; ``check`` pipes it into an external solver binary (one process per
query, no incremental sessions) and parses sat/unsat/unknown plus models.

The solver binary is resolved from, in order: an explicit path, the
TILEPROOF_SOLVER environment variable, ``z3`` on PATH, and the repository's
``tools/z3smt`` wrapper around the z3 WASM build.
"""

from __future__ import annotations

import os
import shutil
import subprocess
import time
from dataclasses import dataclass, field


# ---------------------------------------------------------------------------
# Terms

@dataclass(frozen=True)
class Term:
    op: str
    args: tuple = ()
    val: object = None

    def __repr__(self):
        if self.op in ("int", "var"):
            return "Term(%r)" % (self.val,)
        return "Term(%s, %d args)" % (self.op, len(self.args))


INT = "Int"
BOOL = "Bool"
ARRAY = "(Array Int Int)"

TRUE = Term("true")
FALSE = Term("false")


def mk_int(n):
    return Term("int", val=int(n))


def mk_var(name, sort=INT):
    return Term("var", val=(name, sort))


def var_name(t):
    return t.val[0]


def _nary(op, parts, unit):
    flat = []
    for p in parts:
        if p.op == op:
            flat.extend(p.args)
        elif p != unit:
            flat.append(p)
    if not flat:
        return unit
    if len(flat) == 1:
        return flat[0]
    return Term(op, tuple(flat))


def and_(*parts):
    if any(p == FALSE for p in parts):
        return FALSE
    return _nary("and", parts, TRUE)


def or_(*parts):
    if any(p == TRUE for p in parts):
        return TRUE
    return _nary("or", parts, FALSE)


def not_(p):
    if p == TRUE:
        return FALSE
    if p == FALSE:
        return TRUE
    if p.op == "not":
        return p.args[0]
    return Term("not", (p,))


def implies(a, b):
    if a == TRUE:
        return b
    if a == FALSE or b == TRUE:
        return TRUE
    return Term("=>", (a, b))


def add(*xs):
    return Term("+", tuple(xs)) if len(xs) > 1 else xs[0]


def sub(a, b):
    return Term("-", (a, b))


def neg(a):
    return Term("-", (a,))


def mul(a, b):
    return Term("*", (a, b))


def ediv(a, b):
    return Term("div", (a, b))


def emod(a, b):
    return Term("mod", (a, b))


def lt(a, b):
    return Term("<", (a, b))


def le(a, b):
    return Term("<=", (a, b))


def gt(a, b):
    return Term(">", (a, b))


def ge(a, b):
    return Term(">=", (a, b))


def eq(a, b):
    return Term("=", (a, b))


def ne(a, b):
    return not_(eq(a, b))


def ite(c, a, b):
    if c == TRUE:
        return a
    if c == FALSE:
        return b
    return Term("ite", (c, a, b))


def select(arr, idx):
    return Term("select", (arr, idx))


def store(arr, idx, val):
    return Term("store", (arr, idx, val))


def forall(bound, body):
    """bound: list of (name, sort) pairs."""
    if not bound:
        return body
    return Term("forall", (body,), val=tuple(bound))


def exists(bound, body):
    if not bound:
        return body
    return Term("exists", (body,), val=tuple(bound))


def term_vars(t, out=None, bound=None, seen=None):
    """Free variables of a term as an ordered {name: sort} dict.

    Terms are DAGs with heavy sharing; every walk memoizes on object id.
    """
    if out is None:
        out = {}
    if bound is None:
        bound = frozenset()
    if seen is None:
        seen = set()
    key = (id(t), bound)
    if key in seen:
        return out
    seen.add(key)
    if t.op == "var":
        name, sort = t.val
        if name not in bound and name not in out:
            out[name] = sort
        return out
    if t.op in ("forall", "exists"):
        inner = bound | {name for name, _ in t.val}
        term_vars(t.args[0], out, inner, seen)
        return out
    for a in t.args:
        term_vars(a, out, bound, seen)
    return out


def has_quantifier(t, seen=None):
    if seen is None:
        seen = set()
    if id(t) in seen:
        return False
    seen.add(id(t))
    if t.op in ("forall", "exists"):
        return True
    return any(has_quantifier(a, seen) for a in t.args)


_SORT_BOOL_OPS = frozenset(
    ["true", "false", "and", "or", "not", "=>", "=", "<", "<=", ">", ">=",
     "forall", "exists"])


def term_sort(t):
    if t.op in _SORT_BOOL_OPS:
        return BOOL
    if t.op == "var":
        return t.val[1]
    if t.op == "ite":
        return term_sort(t.args[1])
    if t.op == "store":
        return ARRAY
    return INT  # int literal, arithmetic, select


def term_to_sexpr(t, names=None):
    """Plain (tree) rendering; `names` maps shared subterm ids to aux names."""
    if names and id(t) in names:
        return names[id(t)]
    if t.op == "int":
        return str(t.val) if t.val >= 0 else "(- %d)" % (-t.val)
    if t.op == "var":
        return t.val[0]
    if t.op in ("true", "false"):
        return t.op
    if t.op in ("forall", "exists"):
        binders = " ".join("(%s %s)" % (n, s) for n, s in t.val)
        return "(%s (%s) %s)" % (t.op, binders, term_to_sexpr(t.args[0], names))
    return "(%s %s)" % (t.op, " ".join(term_to_sexpr(a, names) for a in t.args))


class NameGen:
    """Per-task fresh name source: base!0, base!1, ... (reproducible)."""

    def __init__(self):
        self.counts = {}

    def fresh(self, base, sort=INT):
        n = self.counts.get(base, 0)
        self.counts[base] = n + 1
        return mk_var("%s!%d" % (base, n), sort)


# ---------------------------------------------------------------------------
# Scripts and emission

@dataclass
class CheckScript:
    """One self-contained (check-sat) query."""

    assertions: list
    want_model: bool = False
    comment: str = ""

    def add(self, *terms):
        for t in terms:
            if t != TRUE:
                self.assertions.append(t)


def _shared_subterms(assertions):
    """Subterms referenced more than once, in dependency order.

    Symbolic execution produces DAGs (a store chain appears once per use
    site); naming the shared nodes keeps the emitted text linear in the DAG.
    Quantified bodies are left inline: they may mention bound variables.
    """
    counts = {}
    order = []  # post-order: every child precedes its parents

    def walk(t):
        if t.op in ("int", "var", "true", "false"):
            return
        prev = counts.get(id(t), 0)
        counts[id(t)] = prev + 1
        if prev:
            return
        if t.op not in ("forall", "exists"):
            for a in t.args:
                walk(a)
        order.append(t)

    for a in assertions:
        walk(a)
    return [t for t in order
            if counts[id(t)] > 1 and t.op not in ("forall", "exists")]


def emit(script):
    """Render a CheckScript as SMT-LIB2 text (bit-stable for equal inputs)."""
    decls = {}
    for a in script.assertions:
        term_vars(a, decls)
    quantified = any(has_quantifier(a) for a in script.assertions)
    lines = []
    if script.comment:
        for ln in script.comment.splitlines():
            lines.append("; " + ln)
    lines.append("(set-logic %s)" % ("AUFLIA" if quantified else "QF_AUFLIA"))
    for name, sort in decls.items():
        lines.append("(declare-const %s %s)" % (name, sort))
    names = {}
    for n, t in enumerate(_shared_subterms(script.assertions)):
        rendered = term_to_sexpr(t, names)
        names[id(t)] = ".t%d" % n
        lines.append("(define-fun .t%d () %s %s)" % (n, term_sort(t), rendered))
    for a in script.assertions:
        lines.append("(assert %s)" % term_to_sexpr(a, names))
    lines.append("(check-sat)")
    if script.want_model:
        lines.append("(get-model)")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Solver process driver

class SolverConfigError(Exception):
    pass


@dataclass
class SolverResult:
    status: str  # sat | unsat | unknown | timeout | crash
    model: dict | None = None
    time_ms: float = 0.0
    detail: str = ""

    @property
    def is_sat(self):
        return self.status == "sat"

    @property
    def is_unsat(self):
        return self.status == "unsat"


def _repo_tool_solver():
    here = os.path.dirname(os.path.abspath(__file__))
    for up in (os.path.join(here, "..", ".."),):
        cand = os.path.normpath(os.path.join(up, "tools", "z3smt"))
        if os.path.isfile(cand) and os.access(cand, os.X_OK):
            return cand
    return None


def find_solver(explicit=None):
    """Resolve the solver binary path; raise SolverConfigError if none."""
    if explicit:
        if shutil.which(explicit) or (os.path.isfile(explicit) and os.access(explicit, os.X_OK)):
            return explicit
        raise SolverConfigError("solver binary not found: %s" % explicit)
    env = os.environ.get("TILEPROOF_SOLVER")
    if env:
        return find_solver(env)
    onpath = shutil.which("z3")
    if onpath:
        return onpath
    tool = _repo_tool_solver()
    if tool:
        return tool
    raise SolverConfigError(
        "no SMT solver configured: install z3 on PATH, set TILEPROOF_SOLVER, "
        "or run 'npm install z3-solver' inside tools/")


class Solver:
    """One-shot SMT-LIB2 queries against an external solver process."""

    def __init__(self, path=None, default_timeout_ms=10000):
        self.path = find_solver(path)
        self.default_timeout_ms = default_timeout_ms
        self.is_plain_z3 = os.path.basename(self.path).startswith("z3") and \
            not self.path.endswith("z3smt")

    def check(self, script_text, timeout_ms=None):
        timeout_ms = timeout_ms or self.default_timeout_ms
        argv = [self.path]
        if self.is_plain_z3:
            argv += ["-in", "-smt2"]
        start = time.monotonic()
        try:
            proc = subprocess.run(
                argv, input=script_text.encode("utf-8"),
                stdout=subprocess.PIPE, stderr=subprocess.PIPE,
                timeout=timeout_ms / 1000.0)
        except subprocess.TimeoutExpired:
            return SolverResult("timeout", time_ms=(time.monotonic() - start) * 1000.0)
        except OSError as err:
            raise SolverConfigError("failed to launch solver %s: %s" % (self.path, err))
        elapsed = (time.monotonic() - start) * 1000.0
        out = proc.stdout.decode("utf-8", "replace")
        err = proc.stderr.decode("utf-8", "replace")
        status = None
        for line in out.splitlines():
            line = line.strip()
            if line.startswith("(error"):
                # a script error before the answer invalidates the answer
                status = None
                break
            if line in ("sat", "unsat", "unknown"):
                status = line
                break
        if status is None:
            return SolverResult("crash", time_ms=elapsed,
                                detail=(out + "\n" + err).strip()[:2000])
        model = None
        if status == "sat" and "(" in out:
            try:
                model = parse_model(out)
            except Exception:
                model = None
        return SolverResult(status, model=model, time_ms=elapsed)

    def check_script(self, script, timeout_ms=None):
        return self.check(emit(script), timeout_ms)


# ---------------------------------------------------------------------------
# Model parsing

class ArrayModel:
    """Finite view of an integer array model: default value plus overrides."""

    def __init__(self, default=0, entries=None):
        self.default = default
        self.entries = dict(entries or {})

    def get(self, idx):
        return self.entries.get(idx, self.default)

    def stored(self, idx, val):
        m = ArrayModel(self.default, self.entries)
        m.entries[idx] = val
        return m

    def __eq__(self, other):
        return (isinstance(other, ArrayModel) and self.default == other.default
                and self.entries == other.entries)

    def __repr__(self):
        return "ArrayModel(default=%r, %r)" % (self.default, self.entries)


def _sexpr_tokens(text):
    buf = []
    for ch in text:
        if ch in "()":
            if buf:
                yield "".join(buf)
                buf = []
            yield ch
        elif ch.isspace():
            if buf:
                yield "".join(buf)
                buf = []
        else:
            buf.append(ch)
    if buf:
        yield "".join(buf)


def _parse_sexprs(text):
    stack = [[]]
    for tok in _sexpr_tokens(text):
        if tok == "(":
            stack.append([])
        elif tok == ")":
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    return stack[0]


def parse_model(solver_output):
    """Parse (get-model) output into {name: int | ArrayModel}."""
    body = solver_output.split("\n", 1)[1] if "\n" in solver_output else ""
    sexprs = _parse_sexprs(body)
    defs = {}
    for top in sexprs:
        if not isinstance(top, list):
            continue
        items = top[1:] if top[:1] == ["model"] else top
        for it in items:
            if isinstance(it, list) and it[:1] == ["define-fun"] and len(it) >= 5:
                name, params, _sort, bodyx = it[1], it[2], it[3], it[4]
                defs[name] = (params, bodyx)
    model = {}
    for name, (params, bodyx) in defs.items():
        if params == []:
            model[name] = _eval_model_expr(bodyx, {}, defs)
    return model


def _eval_model_expr(x, env, defs):
    if isinstance(x, str):
        if x in env:
            return env[x]
        if x.lstrip("-").isdigit():
            return int(x)
        if x in ("true", "false"):
            return x == "true"
        if x in defs:
            params, bodyx = defs[x]
            if params == []:
                return _eval_model_expr(bodyx, {}, defs)
        raise ValueError("unknown model atom %r" % x)
    head = x[0]
    if head == "let":
        inner = dict(env)
        for name, ex in x[1]:  # SMT-LIB let is parallel
            inner[name] = _eval_model_expr(ex, env, defs)
        return _eval_model_expr(x[2], inner, defs)
    if head == "-" and len(x) == 2:
        return -_eval_model_expr(x[1], env, defs)
    if head == "-" and len(x) == 3:
        return _eval_model_expr(x[1], env, defs) - _eval_model_expr(x[2], env, defs)
    if head == "+":
        return sum(_eval_model_expr(a, env, defs) for a in x[1:])
    if head == "*":
        r = 1
        for a in x[1:]:
            r *= _eval_model_expr(a, env, defs)
        return r
    if head in ("div", "mod"):
        a = _eval_model_expr(x[1], env, defs)
        b = _eval_model_expr(x[2], env, defs)
        return py_ediv(a, b) if head == "div" else py_emod(a, b)
    if head == "=>":
        return (not _eval_model_expr(x[1], env, defs)) or \
            _eval_model_expr(x[2], env, defs)
    if head == "ite":
        return (_eval_model_expr(x[2], env, defs) if _eval_model_expr(x[1], env, defs)
                else _eval_model_expr(x[3], env, defs))
    if head == "=":
        return _eval_model_expr(x[1], env, defs) == _eval_model_expr(x[2], env, defs)
    if head in ("<", "<=", ">", ">="):
        a, b = (_eval_model_expr(x[1], env, defs), _eval_model_expr(x[2], env, defs))
        return {"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[head]
    if head == "and":
        return all(_eval_model_expr(a, env, defs) for a in x[1:])
    if head == "or":
        return any(_eval_model_expr(a, env, defs) for a in x[1:])
    if head == "not":
        return not _eval_model_expr(x[1], env, defs)
    if head == "store":
        arr = _eval_model_expr(x[1], env, defs)
        return arr.stored(_eval_model_expr(x[2], env, defs), _eval_model_expr(x[3], env, defs))
    if head == "select":
        arr = _eval_model_expr(x[1], env, defs)
        return arr.get(_eval_model_expr(x[2], env, defs))
    if isinstance(head, list) and head[:2] == ["as", "const"]:
        return ArrayModel(default=_eval_model_expr(x[1], env, defs))
    if head == "_" and len(x) >= 3 and x[1] == "as-array":
        fname = x[2]
        params, bodyx = defs[fname]
        pname = params[0][0]
        arr = ArrayModel()
        arr.default, arr.entries = _fun_to_array(bodyx, pname, env, defs)
        return arr
    if head == "lambda":
        pname = x[1][0][0]
        arr = ArrayModel()
        arr.default, arr.entries = _fun_to_array(x[2], pname, env, defs)
        return arr
    if head in defs:
        params, bodyx = defs[head]
        inner = dict(zip((p[0] for p in params),
                         (_eval_model_expr(a, env, defs) for a in x[1:])))
        return _eval_model_expr(bodyx, inner, defs)
    raise ValueError("cannot evaluate model expression %r" % (x,))


def _fun_to_array(bodyx, pname, env, defs):
    """Flatten an ite-chain function body into (default, {index: value})."""
    entries = {}
    x = bodyx
    while isinstance(x, list) and x[0] == "ite":
        cond = x[1]
        if (isinstance(cond, list) and cond[0] == "=" and pname in cond[1:3]):
            other = cond[2] if cond[1] == pname else cond[1]
            key = _eval_model_expr(other, env, defs)
            entries[key] = _eval_model_expr(x[2], env, defs)
            x = x[3]
        else:
            break
    if isinstance(x, list) and x[0] == "ite":
        raise ValueError("unsupported array function shape in model")
    return _eval_model_expr(x, env, defs), entries


# ---------------------------------------------------------------------------
# In-house evaluation of quantifier-free terms under a model

def py_ediv(a, b):
    if b == 0:
        raise ZeroDivisionError
    q = a // b if b > 0 else -(a // -b)
    return q


def py_emod(a, b):
    return a - b * py_ediv(a, b)


def evaluate(t, env, cache=None):
    """Evaluate a quantifier-free Term under {name: int|bool|ArrayModel}.

    Memoized on term identity: terms are shared DAGs.
    """
    if cache is None:
        cache = {}
    if id(t) in cache:
        return cache[id(t)]
    op = t.op
    if op == "int":
        r = t.val
    elif op == "var":
        name = t.val[0]
        if name not in env:
            # unconstrained in the model: default per sort
            r = ArrayModel() if t.val[1] == ARRAY else 0
        else:
            r = env[name]
    elif op == "true":
        r = True
    elif op == "false":
        r = False
    elif op == "+":
        r = sum(evaluate(a, env, cache) for a in t.args)
    elif op == "-":
        if len(t.args) == 1:
            r = -evaluate(t.args[0], env, cache)
        else:
            r = evaluate(t.args[0], env, cache) - evaluate(t.args[1], env, cache)
    elif op == "*":
        r = 1
        for a in t.args:
            r *= evaluate(a, env, cache)
    elif op == "div":
        r = py_ediv(evaluate(t.args[0], env, cache), evaluate(t.args[1], env, cache))
    elif op == "mod":
        r = py_emod(evaluate(t.args[0], env, cache), evaluate(t.args[1], env, cache))
    elif op in ("<", "<=", ">", ">="):
        a, b = evaluate(t.args[0], env, cache), evaluate(t.args[1], env, cache)
        r = {"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[op]
    elif op == "=":
        r = evaluate(t.args[0], env, cache) == evaluate(t.args[1], env, cache)
    elif op == "and":
        r = all(evaluate(a, env, cache) for a in t.args)
    elif op == "or":
        r = any(evaluate(a, env, cache) for a in t.args)
    elif op == "not":
        r = not evaluate(t.args[0], env, cache)
    elif op == "=>":
        r = (not evaluate(t.args[0], env, cache)) or evaluate(t.args[1], env, cache)
    elif op == "ite":
        r = evaluate(t.args[1] if evaluate(t.args[0], env, cache) else t.args[2],
                     env, cache)
    elif op == "select":
        r = evaluate(t.args[0], env, cache).get(evaluate(t.args[1], env, cache))
    elif op == "store":
        r = evaluate(t.args[0], env, cache).stored(
            evaluate(t.args[1], env, cache), evaluate(t.args[2], env, cache))
    else:
        raise ValueError("cannot evaluate %s (quantified or malformed)" % op)
    cache[id(t)] = r
    return r


def model_satisfies(script, model):
    """Re-check a sat model against the quantifier-free assertions by substitution."""
    env = dict(model)
    cache = {}
    for a in script.assertions:
        if has_quantifier(a):
            continue
        if not evaluate(a, env, cache):
            return False
    return True
