from fractions import Fraction

import numpy as np
import pytest
from conftest import FIXTURES

from gptlab import dsl, theories
from gptlab.dsl import (BinOp, Lit, Measure, ParseError, Prepare, TypeMismatchError, UnboundVariableError,
                        UnknownNameError, Var, WiringViolation)
from gptlab.generators import random_ast
from gptlab.model import accept_probability, evaluate_closed

SMOKE = ("theory boxworld; system A:gbit; prepare vertex(1,1,1) -> A; "
         "measure fiducial(0) A -> a; accept a == 0")


def test_smoke_parse():
    ast = dsl.parse(SMOKE)
    assert ast.theory == "boxworld"
    assert sum(isinstance(s, Prepare) for s in ast.statements) == 1
    assert sum(isinstance(s, Measure) for s in ast.statements) == 1
    assert ast.accept == BinOp("==", Var("a"), Lit(0))


def test_smoke_evaluates():
    c = dsl.validate(dsl.parse(SMOKE))
    assert evaluate_closed(c).prob((0,)) == 1


def test_empty_accept_is_syntax_error():
    with pytest.raises(ParseError) as info:
        dsl.parse("theory classical\nsystem A:bit\naccept\n")
    assert info.value.line == 3


def test_missing_accept():
    with pytest.raises(ParseError):
        dsl.parse("theory classical\nsystem A:bit\n")


def test_bad_character_reports_column():
    with pytest.raises(ParseError) as info:
        dsl.parse("theory classical\nsystem A:bit $\naccept 1\n")
    assert (info.value.line, info.value.col) == (2, 14)
    assert "line 2, column 14" in str(info.value)


def test_pr_fixture_ast():
    ast = dsl.parse((FIXTURES / "pr_parity.gpc").read_text())
    assert len(ast.devices) == 2
    assert not any(isinstance(s, dsl.AuxDecl) for s in ast.statements)
    assert dsl.print_expr(ast.accept) == "a xor b == 1"


def test_gbit_into_classical_gate_is_type_mismatch():
    cl, box = theories.classical_theory(), theories.boxworld_theory()
    both = theories.TheorySpec("both", {**cl.systems, **box.systems}, theories.POLYTOPE, gates=dict(cl.gates),
                               family="boxworld")
    src = ("theory both\nsystem A:gbit\nsystem B:bit\nprepare vertex(1,1,1) -> A\n"
           "apply not A -> B\nmeasure basis() B -> b\naccept b == 0\n")
    with pytest.raises(TypeMismatchError) as info:
        dsl.validate(dsl.parse(src), both)
    assert info.value.line == 5


def test_unbound_variable_in_accept():
    src = "theory classical\nsystem A:bit\nprepare basis(0) -> A\nmeasure basis() A -> a\naccept b == 1\n"
    with pytest.raises(UnboundVariableError) as info:
        dsl.validate(dsl.parse(src))
    assert info.value.line == 5


def test_unknown_gate():
    src = "theory classical\nsystem A:bit\nsystem B:bit\nprepare basis(0) -> A\napply hadamard A -> B\naccept 1\n"
    with pytest.raises(UnknownNameError):
        dsl.validate(dsl.parse(src))


def test_wire_consumed_twice():
    src = ("theory classical\nsystem A:bit\nprepare basis(0) -> A\nmeasure basis() A -> a\n"
           "measure basis() A -> b\naccept a\n")
    with pytest.raises(WiringViolation):
        dsl.validate(dsl.parse(src))


def test_undeclared_wire():
    with pytest.raises(WiringViolation):
        dsl.validate(dsl.parse("theory classical\nprepare basis(0) -> A\naccept 1\n"))


def test_rho_f_circuit_matches_theory_construction():
    f = theories.TruthTable.parse("maj", 3)
    bits = ", ".join(map(str, f.bits))
    src = (f"theory boxworld\nsystem A:gbit\nsystem B:gbit\nsystem C:gbit\nprepare rhof({bits}) -> A, B, C\n"
           "measure fiducial(1) A -> a\nmeasure fiducial(1) B -> b\nmeasure fiducial(0) C -> c\n"
           "accept (a xor b xor c) == 1\n")
    d = evaluate_closed(dsl.validate(dsl.parse(src)))
    from gptlab.model import pair, tensor_all
    v = theories.rho_f(f)
    for z, p in d.items():
        e = tensor_all([theories.fiducial_effect(xi, ai) for xi, ai in zip((1, 1, 0), z)])
        assert p == pair(e, v)
    assert d.event(lambda z: (z["a"] ^ z["b"] ^ z["c"]) == 1) == 1


def test_aux_circuit_and_postselect():
    src = ("theory classical\naux A:bit\nsystem C:bit\nprepare dist(1/2, 1/2) -> C\n"
           "measure basis() C -> c\nmeasure basis() A -> a\npost-select c == 0\naccept a == 1\n")
    c = dsl.validate(dsl.parse(src))
    assert [s.name for s in c.aux_systems] == ["bit"]
    assert c.postselect is not None
    one = theories.classical_theory().system("bit").states[1]
    assert accept_probability(c, one) == 1


def test_discard_with_unit_measurement():
    src = "theory quantum\nsystem A:qubit\nprepare ket(1) -> A\nmeasure unit() A -> _\naccept 1\n"
    d = evaluate_closed(dsl.validate(dsl.parse(src)))
    assert d.prob(()) == 1


def test_expression_semantics():
    env = {"a": 1, "b": 0}
    assert dsl.eval_expr(dsl.parse("theory classical\naccept a xor b == 1\n").accept, env)
    assert not dsl.eval_expr(dsl.parse("theory classical\naccept not a or b\n").accept, env)
    assert dsl.eval_expr(dsl.parse("theory classical\naccept a != b and not b\n").accept, env)


def test_fraction_arguments():
    ast = dsl.parse("theory classical\nsystem A:bit\nprepare dist(1/3, 2/3) -> A\nmeasure basis() A -> a\naccept a\n")
    assert ast.statements[1].ctor.args == (Fraction(1, 3), Fraction(2, 3))
    assert evaluate_closed(dsl.validate(ast)).prob((1,)) == Fraction(2, 3)


# ---------------------------------------------------------------- round-trips

def _fixture_texts():
    for path in sorted(FIXTURES.glob("*.gpc")):
        yield path.name, path.read_text()


@pytest.mark.parametrize("name,text", list(_fixture_texts()))
def test_fixture_round_trip(name, text):
    ast = dsl.parse(text)
    printed = dsl.print_ast(ast)
    assert dsl.parse(printed) == ast
    assert dsl.print_ast(dsl.parse(printed)) == printed


def test_whitespace_does_not_change_printed_form():
    a = dsl.parse("theory classical\nsystem A:bit\nprepare basis(0) -> A\nmeasure basis() A -> a\naccept a == 1\n")
    b = dsl.parse("theory   classical ;  system A : bit\n\n  prepare basis( 0 )->A ; measure basis( ) A->a\naccept a==1")
    assert dsl.print_ast(a) == dsl.print_ast(b)


def test_random_asts_round_trip():
    rng = np.random.Generator(np.random.PCG64(3))
    for _ in range(300):
        ast = random_ast(rng)
        assert dsl.parse(dsl.print_ast(ast)) == ast
