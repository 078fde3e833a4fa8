"""Formula emission, solver driving and model parsing."""

import pytest

from conftest import needs_solver
from tileproof import smt
from tileproof.smt import (
    ArrayModel, CheckScript, and_, ediv, emit, emod, eq, evaluate, forall,
    ge, le, lt, mk_int, mk_var, model_satisfies, mul, ne, not_, or_,
    parse_model, select, store, sub, term_to_sexpr,
)

x = mk_var("x")
j = mk_var("j")
l = mk_var("l")


def test_emit_simple_equation_fragment():
    s = CheckScript([eq(smt.add(x, mk_int(1)), mk_int(2))])
    text = emit(s)
    assert "(assert (= (+ x 1) 2))" in text
    assert text.startswith("(set-logic QF_AUFLIA)")
    assert text.rstrip().endswith("(check-sat)")


def test_emit_tile_formula_shape():
    tau = and_(le(mul(mk_int(4), l), j), lt(j, smt.add(mul(mk_int(4), l), mk_int(4))))
    assert term_to_sexpr(tau) == "(and (<= (* 4 l) j) (< j (+ (* 4 l) 4)))"


def test_emit_forall_clause():
    f = forall([("j", smt.INT)], smt.implies(ge(j, mk_int(0)), eq(j, j)))
    text = term_to_sexpr(f)
    assert text.startswith("(forall ((j Int))")
    s = CheckScript([f])
    assert "(set-logic AUFLIA)" in emit(s)


def test_emit_deterministic_bytes():
    s1 = CheckScript([eq(x, mk_int(3)), lt(j, x)])
    s2 = CheckScript([eq(x, mk_int(3)), lt(j, x)])
    assert emit(s1) == emit(s2)


def test_negative_literals():
    assert term_to_sexpr(mk_int(-5)) == "(- 5)"


def test_evaluate_quantifier_free_terms():
    env = {"x": 7, "A": ArrayModel(0, {3: 9})}
    a = mk_var("A", smt.ARRAY)
    assert evaluate(select(a, mk_int(3)), env) == 9
    assert evaluate(select(store(a, mk_int(3), mk_int(1)), mk_int(3)), env) == 1
    assert evaluate(ediv(mk_int(-7), mk_int(2)), env) == -4  # Euclidean
    assert evaluate(emod(mk_int(-7), mk_int(2)), env) == 1
    assert evaluate(and_(eq(x, mk_int(7)), ne(x, mk_int(0))), env) is True


def test_parse_model_store_chain():
    out = """sat
(
  (define-fun a () (Array Int Int)
    (store (store ((as const (Array Int Int)) 2) 0 5) 3 9))
  (define-fun N () Int 3)
  (define-fun m () Int (- 4))
)"""
    model = parse_model(out)
    assert model["N"] == 3
    assert model["m"] == -4
    assert model["a"].get(0) == 5
    assert model["a"].get(3) == 9
    assert model["a"].get(77) == 2


def test_parse_model_as_array_function():
    out = """sat
(
  (define-fun a () (Array Int Int) (_ as-array f))
  (define-fun f ((x!0 Int)) Int (ite (= x!0 1) 5 0))
)"""
    model = parse_model(out)
    assert model["a"].get(1) == 5
    assert model["a"].get(2) == 0


@needs_solver
def test_check_assert_false_is_unsat(solver):
    assert solver.check("(assert false)(check-sat)").status == "unsat"


@needs_solver
def test_check_model_roundtrip(solver):
    res = solver.check("(declare-const x Int)(assert (= x 3))(check-sat)(get-model)")
    assert res.status == "sat"
    assert res.model["x"] == 3


@needs_solver
def test_timeout_status(solver):
    # a hard quantified instance cannot finish within 1 ms
    script = """(set-logic AUFLIA)
(declare-const a (Array Int Int))
(assert (forall ((i Int) (j Int))
  (=> (< i j) (< (select a i) (select a j)))))
(assert (forall ((i Int)) (= (select a (select a i)) i)))
(check-sat)"""
    res = solver.check(script, timeout_ms=1)
    assert res.status in ("timeout", "unknown")


@needs_solver
def test_crash_distinguished_from_unknown(solver):
    res = solver.check("(assert (= x y z))(check-sat)")
    # unbound identifiers make the solver report an error, not sat/unsat
    assert res.status == "crash"
    assert res.detail


@needs_solver
def test_sat_model_satisfies_script(solver):
    s = CheckScript([eq(smt.add(x, mk_int(2)), mk_int(9)),
                     lt(j, x)], want_model=True)
    res = solver.check_script(s)
    assert res.status == "sat"
    assert model_satisfies(s, res.model)


def test_missing_solver_binary_is_config_error():
    with pytest.raises(smt.SolverConfigError):
        smt.find_solver("/nonexistent/solver/binary")
