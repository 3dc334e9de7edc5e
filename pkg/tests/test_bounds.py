import math
from fractions import Fraction
from functools import reduce

import numpy as np
import pytest

from gptlab import bounds, dsl, theories
from gptlab.generators import random_aux_circuit, random_rational_matrix
from gptlab.model import GuardError

CL = theories.classical_theory()
Q2 = theories.quantum_theory(2)
BOX = theories.boxworld_theory()


def exact(rows):
    return np.array([[Fraction(v) for v in r] for r in rows], dtype=object)


# ---------------------------------------------------------------- sigma_max

def test_sigma_of_identity():
    assert bounds.sigma_max(np.eye(5)) == pytest.approx(1.0, abs=1e-12)


def test_sigma_of_single_entry():
    assert bounds.sigma_max(exact([[0, 2], [0, 0]])) == pytest.approx(2.0, abs=1e-12)


def test_sigma_matches_eigen_oracle(rng):
    m = random_rational_matrix(rng, 8, 8)
    assert abs(bounds.sigma_max(m) - bounds.sigma_max_eig(m)) < 1e-9


# ---------------------------------------------------------------- gap trace

def test_gap_trace_diag():
    assert bounds.gap_trace(exact([[2, 0], [0, 1]]), 2) == 17


@pytest.mark.parametrize("N,d", [(1, 1), (3, 2), (6, 5)])
def test_gap_trace_identity(N, d):
    assert bounds.gap_trace(np.eye(N, dtype=int).astype(object), d) == N


def test_gap_trace_matches_naive_power(rng):
    m = random_rational_matrix(rng, 6, 6)
    mtm = m.T @ m
    prod = reduce(lambda a, b: a @ b, [mtm] * 3)
    assert bounds.gap_trace(m, 3) == sum(prod[i, i] for i in range(6))


def test_gap_trace_with_metric_matches_naive(rng):
    m = random_rational_matrix(rng, 1, 3)
    G = exact([[3, 0, 0], [0, 3, 0], [0, 0, 3]])
    A = m.T @ m @ G
    prod = A @ A
    assert bounds.gap_trace(m, 2, metric=G) == sum(prod[i, i] for i in range(3))


def test_gap_trace_guard():
    with pytest.raises(GuardError):
        bounds.gap_trace(np.eye(64, dtype=int).astype(object), 5000)


def test_gap_trace_rejects_bad_exponent():
    with pytest.raises(ValueError):
        bounds.gap_trace(exact([[1]]), 0)


# ---------------------------------------------------------------- re-parametrisation

def test_classical_bit_inradius():
    rep = bounds.reparametrise(CL, "bit")
    assert list(rep.center) == [Fraction(1, 2), Fraction(1, 2)]
    assert rep.r2 == Fraction(1, 2)
    assert rep.identity
    # 1-d check: the free coordinate of the two vertices sits at +-r from the center
    free = np.array([1, -1]) / math.sqrt(2)
    for s in CL.system("bit").states:
        assert abs(float(free @ (np.asarray(s.coords, float) - np.asarray(rep.center, float)))) == pytest.approx(
            math.sqrt(rep.r2))


def test_gbit_facet_distances_are_one():
    rep = bounds.reparametrise(BOX, "gbit")
    assert list(rep.center) == [1, 0, 0]
    assert rep.r2 == 1 and rep.R2 == 2
    assert rep.s2 == Fraction(1, 3)
    assert np.array_equal(rep.G, np.diag([3, 3, 3]).astype(object))


def test_reparametrised_states_lie_in_unit_ball():
    for th, name in ((BOX, "gbit"), (theories.quantum_theory(1), "qubit")):
        rep = bounds.reparametrise(th, name)
        for s in th.system(name).states:
            assert np.linalg.norm(rep.phi @ np.asarray(s.coords, float)) <= 1 + 1e-12


def test_metric_is_phi_inverse_gram():
    for th, name in ((BOX, "gbit"), (theories.quantum_theory(1), "qubit")):
        rep = bounds.reparametrise(th, name)
        inv = np.linalg.inv(rep.phi)
        assert np.allclose(inv @ inv.T, np.asarray(rep.G, float))


# ---------------------------------------------------------------- sigma-bound

def test_accept_always_classical():
    c = dsl.validate(dsl.parse("theory classical\naux A:bit\naccept 1\n"))
    rep = bounds.verify_sigma_bound(c, CL)
    assert rep.max_accept == 1
    # the u-row (1, 1) has norm sqrt(2): the bound holds, with room to spare
    assert rep.sigma_max == pytest.approx(math.sqrt(2))
    assert rep.holds


def test_random_classical_circuits_never_violate(rng):
    for _ in range(100):
        c, _ = random_aux_circuit(CL, rng)
        rep = bounds.verify_sigma_bound(c, CL)
        assert rep.holds


def test_random_two_qubit_proof_circuits(rng):
    for _ in range(30):
        c, _ = random_aux_circuit(Q2, rng, n_aux=2)
        rep = bounds.verify_sigma_bound(c, Q2)
        assert rep.holds
        # eigenvalue oracle for the maximum
        a = np.asarray(rep.accept_row, dtype=float)
        lam = np.linalg.eigvalsh(4 * theories.extract(a)).max()
        assert float(rep.max_accept) == pytest.approx(lam, abs=1e-9)


def test_boxworld_max_accept_uses_exact_lp():
    c = dsl.validate(dsl.parse(
        "theory boxworld\naux A:gbit\naux B:gbit\nmeasure fiducial(1) A -> a\n"
        "measure fiducial(1) B -> b\naccept a xor b == 1\n"))
    rep = bounds.verify_sigma_bound(c, BOX)
    assert rep.max_accept == 1  # attained by the PR box
    assert rep.holds


def test_missing_facets_is_inconclusive():
    spec = BOX.system("gbit")
    bare = theories.SystemSpec(spec.type, spec.states, spec.effects, spec.measurements, spec.generators, ())
    th = theories.TheorySpec("bare", {"gbit": bare}, theories.POLYTOPE, family="boxworld")
    c = dsl.validate(dsl.parse("theory bare\naux A:gbit\nmeasure fiducial(0) A -> a\naccept a == 0\n"), th)
    rep = bounds.verify_sigma_bound(c, th)
    assert rep.status == bounds.INCONCLUSIVE


# ---------------------------------------------------------------- thresholds

def test_growth_rule():
    assert bounds.growth_ok(1, 1)
    assert not bounds.growth_ok(2, 1)
    for n in range(1, 12):
        d = bounds.default_d_rule(n)
        assert d == math.ceil((n + 1) / 2)
        assert bounds.growth_ok(n, d)


def test_bad_d_rule_is_configuration_error():
    c = bounds.gma_family("accept", 2).circuits["00"]
    with pytest.raises(bounds.ConfigurationError):
        bounds.bound_report(c, CL, d_rule=lambda n: 1)


def test_accept_side_projector_toy():
    c = dsl.validate(dsl.parse("theory classical\naux A:bit\nmeasure basis() A -> a\naccept a == 0\n"))
    rep = bounds.verify_sigma_bound(c, CL)
    assert rep.max_accept == 1 and rep.sigma_max == pytest.approx(1.0)
    f = bounds.gap_trace(rep.accept_row.reshape(1, -1), 4)
    assert f >= Fraction(2, 3) ** 8


def test_reject_side_scaled_projector_toy():
    text = bounds.gma_circuit_text("reject", "01")
    c = dsl.validate(dsl.parse(text))
    rep = bounds.verify_sigma_bound(c, CL)
    assert rep.max_accept == Fraction(1, 3)
    f = bounds.gap_trace(rep.accept_row.reshape(1, -1), 3)
    assert f <= Fraction(1, 2) * Fraction(2, 3) ** 6


def test_classify():
    hi, lo = bounds.thresholds(2)
    assert bounds.classify(hi, 2) == bounds.ACCEPT_SIDE
    assert bounds.classify(lo, 2) == bounds.REJECT_SIDE
    assert bounds.classify((hi + lo) / 2, 2) == bounds.VIOLATION


def test_quantum_reject_fixture_report():
    from conftest import FIXTURES
    ast = dsl.parse((FIXTURES / "gma_reject_qubit.gpc").read_text())
    c = dsl.validate(ast)
    rep = bounds.bound_report(c, theories.builtin("quantum"))
    assert rep.classification == bounds.REJECT_SIDE
    assert rep.chain["holds"]
