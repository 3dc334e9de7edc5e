import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.optimize import linprog

from gptlab import lp, principles, scalars, theories
from gptlab.model import GEffect, GVector, apply

CL = theories.classical_theory()
Q1 = theories.quantum_theory(1)
Q2 = theories.quantum_theory(2)
BOX = theories.boxworld_theory()
BIT = CL.type("bit")
QUBIT = Q1.type("qubit")
GBIT = theories.GBIT


def gvec(sys, *xs):
    return GVector((sys,), scalars.array(list(xs), "exact"))


# ---------------------------------------------------------------- causality

def test_classical_causality():
    rep = principles.check_causality(CL)
    assert rep.status == principles.PASS
    assert list(rep.details["unit"]["bit"]) == [1, 1]


def test_boxworld_fiducials_sum_to_unit():
    rep = principles.check_causality(BOX)
    assert rep.status == principles.PASS
    f = {(x, a): theories.fiducial_effect(x, a).coords for x in (0, 1) for a in (0, 1)}
    assert list(f[0, 0] + f[0, 1]) == list(f[1, 0] + f[1, 1]) == [1, 0, 0]


def test_missing_outcome_fails_causality():
    spec = CL.system("bit")
    broken = theories.SystemSpec(spec.type, spec.states, spec.effects,
                                 {"basis": spec.measurements["basis"], "partial": (spec.measurements["basis"][0],)})
    th = theories.TheorySpec("broken", {"bit": broken}, theories.SIMPLEX)
    rep = principles.check_causality(th)
    assert rep.status == principles.FAIL
    assert rep.witnesses[0]["measurement"] == "partial"


# ---------------------------------------------------------------- tomographic locality

def test_boxworld_pair_rank_nine():
    rep = principles.check_tomographic_locality(BOX, "gbit", "gbit")
    assert rep.status == principles.PASS
    vertices = [s.coords for s in BOX.system("gbit").states]
    products = np.array([np.kron(a, b) for a in vertices for b in vertices], dtype=float)
    assert len(products) == 16
    assert np.linalg.matrix_rank(products) == 9 == rep.details["state_rank"]


def test_classical_pair_rank_four():
    rep = principles.check_tomographic_locality(CL, "bit", "bit")
    assert rep.status == principles.PASS and rep.details["state_rank"] == 4


def test_quantum_pair_locality():
    assert principles.check_tomographic_locality(Q2, "qubit", "qubit").status == principles.PASS


def test_duplicate_states_fail_locality():
    spec = CL.system("bit")
    dup = theories.SystemSpec(spec.type, (spec.states[0], spec.states[0]), spec.effects, spec.measurements)
    th = theories.TheorySpec("dup", {"bit": dup}, theories.SIMPLEX)
    assert principles.check_tomographic_locality(th, "bit", "bit").status == principles.FAIL


def test_exact_rank_matches_numpy(rng):
    for _ in range(30):
        m = rng.integers(-2, 3, size=(int(rng.integers(1, 6)), int(rng.integers(1, 6))))
        if rng.random() < 0.5 and m.shape[0] > 1:
            m[-1] = m[0] * 2
        assert principles.exact_rank(m.tolist()) == np.linalg.matrix_rank(m)


# ---------------------------------------------------------------- distinguishability

def test_classical_basis_distinguishing_effects():
    res = principles.find_distinguishing_measurement(CL, CL.system("bit").states)
    assert res.feasible
    assert [list(e.coords) for e in res.effects] == [[1, 0], [0, 1]]


def test_gbit_pair_distinguished_by_fiducial_zero():
    a, b = gvec(GBIT, 1, 1, 1), gvec(GBIT, 1, -1, 1)
    res = principles.find_distinguishing_measurement(BOX, [a, b])
    assert res.feasible
    assert res.effects[0].coords @ a.coords == 1 and res.effects[0].coords @ b.coords == 0
    # the vertex table agrees: fiducial 0 separates them, fiducial 1 does not
    ta, tb = theories.fiducial_table(a), theories.fiducial_table(b)
    assert ta[0, 0] == 1 and tb[0, 1] == 1 and ta[1, 0] == tb[1, 0]


def test_three_gbit_states_not_distinguishable():
    states = [gvec(GBIT, 1, 1, 1), gvec(GBIT, 1, -1, -1), gvec(GBIT, 1, 1, -1)]
    res = principles.find_distinguishing_measurement(BOX, states)
    assert not res.feasible
    assert res.certificate_verified
    assert lp.check_farkas(res.problem, res.certificate)
    # independent oracle
    p = res.problem
    ref = linprog(np.zeros(p.n_vars), A_eq=np.array(p.A_eq, float), b_eq=np.array(p.b_eq, float),
                  bounds=[(0, None)] * p.n_vars, method="highs")
    assert ref.status == 2


def test_qubit_antipodal_states_distinguishable():
    spec = Q1.system("qubit")
    res = principles.find_distinguishing_measurement(Q1, spec.states[:2])
    assert res.feasible


# ---------------------------------------------------------------- completely mixed

def test_classical_completely_mixed():
    rep = principles.completely_mixed(CL, "bit")
    assert list(rep.state.coords) == [Fraction(1, 2), Fraction(1, 2)]
    assert rep.refinement == (Fraction(1, 2), Fraction(1, 2))


def test_gbit_completely_mixed_is_vertex_average():
    rep = principles.completely_mixed(BOX, "gbit")
    avg = sum(s.coords for s in BOX.system("gbit").states) / 4
    assert list(rep.state.coords) == list(avg) == [1, 0, 0]
    assert rep.invariant and rep.status == principles.PASS


def test_qubit_completely_mixed_refinement_half():
    rep = principles.completely_mixed(Q1, "qubit")
    assert list(rep.state.coords) == [1, 0, 0, 0]
    assert all(p == Fraction(1, 2) for p in rep.refinement)
    # oracle: I/2 - p|psi><psi| is PSD iff p <= 1/2
    psi = np.array([[1, 0], [0, 0]])
    for p in (0.5, 0.5 + 1e-6):
        lam = np.linalg.eigvalsh(np.eye(2) / 2 - p * psi).min()
        assert (lam >= -1e-12) == (p <= 0.5)


# ---------------------------------------------------------------- symmetry search

def test_classical_swap_found():
    s = CL.system("bit").states
    from gptlab.model import tensor
    src = [tensor(s[0], s[1]), tensor(s[1], s[0])]
    res = principles.search_symmetry(CL, src, src[::-1])
    assert res.found and res.depth == 1 and res.word[0].startswith("swap")


def test_qubit_hadamard_found():
    ket0 = theories.bloch_state(QUBIT, 0, 0, 1, "exact")
    ket1 = theories.bloch_state(QUBIT, 0, 0, -1, "exact")
    plus = theories.bloch_state(QUBIT, 1, 0, 0, "exact")
    minus = theories.bloch_state(QUBIT, -1, 0, 0, "exact")
    res = principles.search_symmetry(Q1, [ket0, ket1], [plus, minus])
    assert res.found and res.word == ("h",)
    H = Q1.system("qubit").generators["h"]
    assert apply(H, ket0) == plus


def test_gbit_non_symmetry_refuted():
    v = BOX.system("gbit").states
    mixed = gvec(GBIT, 1, 0, 0)
    res = principles.search_symmetry(BOX, [v[0]], [mixed])
    assert not res.found and res.status == principles.REFUTED
    assert res.group_size == 8


def test_depth_bound_is_inconclusive():
    ket0 = theories.bloch_state(QUBIT, 0, 0, 1, "exact")
    target = theories.bloch_state(QUBIT, 0, 0, 0, "exact")
    res = principles.search_symmetry(Q1, [ket0], [target], depth=1)
    assert res.status == principles.INCONCLUSIVE


def test_boxworld_bit_symmetry_refuted():
    rep = principles.bit_symmetry(BOX, "gbit")
    assert rep["status"] == principles.REFUTED


# ---------------------------------------------------------------- norms

def test_zero_vector_norms():
    rho = theories.bloch_state(QUBIT, 0, 0, 1, "exact")
    rep = principles.norms(Q1, rho - rho)
    assert rep.e_norm == 0 and rep.phy_norm == 0


def test_pauli_z_difference_norms():
    ket0 = theories.bloch_state(QUBIT, 0, 0, 1, "exact")
    ket1 = theories.bloch_state(QUBIT, 0, 0, -1, "exact")
    rep = principles.norms(Q1, ket0 - ket1)
    # trace-norm oracle on the 2x2 difference
    diff = np.diag([1.0, -1.0])
    assert rep.phy_norm == pytest.approx(np.abs(np.linalg.eigvalsh(diff)).sum(), abs=1e-12) == 2
    # pure states have unit self-pairing, so [Z, Z] = Tr(Z^2) = 2
    assert principles.pairing(Q1, ket0.coords, ket0.coords) == 1
    assert rep.e_norm == pytest.approx(math.sqrt(2))
    assert rep.phy_norm <= rep.c_constant * rep.e_norm + 1e-12


def test_phy_le_c_e_on_random_qubit_pairs(rng):
    for _ in range(10_000):
        a, b = theories.random_density(2, rng), theories.random_density(2, rng)
        v = GVector((QUBIT,), theories.embed(a) - theories.embed(b))
        rep = principles.norms(Q1, v)
        assert rep.phy_norm <= rep.c_constant * rep.e_norm + 1e-9


def test_norms_unsupported_without_pairing():
    rep = principles.norms(BOX, gvec(GBIT, 1, 1, 1) - gvec(GBIT, 1, -1, 1))
    assert rep.status == principles.UNSUPPORTED and rep.e_norm is None
    assert rep.phy_norm == 2


# ---------------------------------------------------------------- verify report

@pytest.mark.parametrize("theory", [CL, Q2, BOX], ids=["classical", "quantum", "boxworld"])
def test_verify_theory(theory):
    entries = principles.verify_theory(theory)
    by = {e["principle"]: e for e in entries}
    assert by["causality"]["status"] == principles.PASS
    assert by["tomographic_locality"]["status"] == principles.PASS
