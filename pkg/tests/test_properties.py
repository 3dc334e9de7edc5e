import itertools
from fractions import Fraction

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from gptlab import bounds, dsl, protocols, scalars, theories
from gptlab.model import GEffect, GVector, SystemType, pair, tensor

fractions = st.fractions(min_value=-5, max_value=5, max_denominator=7)


def vectors(n):
    return st.lists(fractions, min_size=n, max_size=n).map(lambda xs: np.array(xs, dtype=object))


def matrices(max_rows=6, max_cols=6):
    return st.tuples(st.integers(1, max_rows), st.integers(1, max_cols)).flatmap(
        lambda s: st.lists(fractions, min_size=s[0] * s[1], max_size=s[0] * s[1]).map(
            lambda xs: np.array(xs, dtype=object).reshape(s)))


S2 = SystemType("s2", 2)
S3 = SystemType("s3", 3)


@given(vectors(2), vectors(3), vectors(2), vectors(3))
def test_pairing_factorises_over_tensor(e1, e2, v1, v2):
    lhs = pair(tensor(GEffect((S2,), e1), GEffect((S3,), e2)), tensor(GVector((S2,), v1), GVector((S3,), v2)))
    assert lhs == (e1 @ v1) * (e2 @ v2)


@given(matrices(), st.integers(1, 4))
@settings(max_examples=60, deadline=None)
def test_gap_trace_is_sum_of_eigenvalue_powers(m, d):
    exact = bounds.gap_trace(m, d)
    eig = np.linalg.eigvalsh(np.asarray(m.T @ m, dtype=float))
    assert abs(float(exact) - float(np.sum(eig ** d))) <= 1e-7 * max(1.0, abs(float(exact)))


@given(matrices(), st.integers(1, 6))
@settings(max_examples=60, deadline=None)
def test_trace_sandwich(m, d):
    sig = bounds.sigma_max(m)
    f = bounds.gap_trace(m, d)
    assert bounds.sandwich(f, sig, d, m.shape[1])["holds"]
    assert abs(sig - bounds.sigma_max_eig(m)) < 1e-9


@given(matrices(4, 4), st.permutations(range(4)))
@settings(max_examples=40, deadline=None)
def test_gap_trace_invariant_under_column_permutation(m, perm):
    perm = [p for p in perm if p < m.shape[1]]
    assert bounds.gap_trace(m[:, perm], 2) == bounds.gap_trace(m, 2)


@given(fractions)
def test_scalar_format_round_trip(x):
    assert scalars.parse_scalar(scalars.fmt(x)) == x


@given(st.integers(1, 3).flatmap(lambda n: st.tuples(st.just(n), st.lists(st.integers(0, 1), min_size=2**n,
                                                                            max_size=2**n))))
@settings(max_examples=30, deadline=None)
def test_rho_f_is_valid_and_encodes_parity(args):
    n, bits = args
    f = theories.TruthTable(n, tuple(bits))
    v = theories.rho_f(f)
    assert theories.membership(theories.boxworld_theory(), v)
    for x in f.inputs():
        assert protocols.advice_parity_eval(f, x) == f(x)


names = st.sampled_from(["a", "b", "c1", "zz"])
exprs = st.recursive(
    st.one_of(names.map(dsl.Var), st.integers(0, 3).map(dsl.Lit)),
    lambda sub: st.one_of(sub.map(dsl.Not),
                          st.tuples(st.sampled_from(["or", "and", "xor", "==", "!="]), sub, sub).map(
                              lambda t: dsl.BinOp(*t))),
    max_leaves=12)


@given(exprs)
def test_expression_print_parse_round_trip(e):
    ast = dsl.parse(f"theory classical\naccept {dsl.print_expr(e)}\n")
    assert ast.accept == e


@given(exprs, st.lists(st.integers(0, 1), min_size=4, max_size=4))
def test_printing_preserves_semantics(e, vals):
    env = dict(zip(["a", "b", "c1", "zz"], vals))
    again = dsl.parse(f"theory classical\naccept {dsl.print_expr(e)}\n").accept
    assert bool(dsl.eval_expr(e, env)) == bool(dsl.eval_expr(again, env))


@given(st.lists(st.fractions(min_value=0, max_value=1, max_denominator=9), min_size=2, max_size=2))
def test_classical_gates_preserve_normalisation(ps):
    total = sum(ps)
    if total == 0:
        return
    v = GVector((theories.classical_theory().type("bit"),), np.array([p / total for p in ps], dtype=object))
    for g in theories.classical_theory().system("bit").generators.values():
        assert sum(g.matrix @ v.coords) == 1


@given(st.fractions(min_value=Fraction(1, 100), max_value=Fraction(99, 100), max_denominator=100))
def test_von_neumann_pairs_are_symmetric(p):
    th, y, e0 = protocols.biased_qubit(p)
    from gptlab.model import evaluate_closed
    d = evaluate_closed(protocols.two_copy_circuit(y, e0))
    assert d.prob((0, 1)) == d.prob((1, 0)) == p * (1 - p)


@given(st.integers(0, 2**16 - 1))
@settings(max_examples=25, deadline=None)
def test_majority_tail_matches_enumeration(seed):
    p = Fraction(seed % 97 + 1, 100)
    k = 3 + 2 * (seed % 2)
    brute = sum(
        (p ** sum(z)) * ((1 - p) ** (k - sum(z))) for z in itertools.product((0, 1), repeat=k) if 2 * sum(z) > k)
    assert protocols.majority_tail(p, k) == brute
