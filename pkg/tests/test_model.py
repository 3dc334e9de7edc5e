import itertools
from fractions import Fraction

import numpy as np
import pytest

from gptlab import scalars, theories
from gptlab.model import (Circuit, Device, GEffect, GTransform, GuardError, GVector, Node, OpenPortError,
                          OutcomeDistribution, PostSelectionError, WiringError, accept_functional, accept_map,
                          accept_probability, apply, coarse_grain, evaluate_closed, identity_transform, pair,
                          post_select, sample, sequential_compose, tensor, unit_effect)

CL = theories.classical_theory()
BIT = CL.type("bit")
BOX = theories.boxworld_theory()
GBIT = theories.GBIT


def vec(sys, *xs):
    return GVector(sys if isinstance(sys, tuple) else (sys,), scalars.array(list(xs), "exact"))


def eff(sys, *xs):
    return GEffect(sys if isinstance(sys, tuple) else (sys,), scalars.array(list(xs), "exact"))


def basis_measure(sys=BIT):
    return Device.measure(eff(sys, 1, 0), eff(sys, 0, 1), name="basis")


# ---------------------------------------------------------------- tensor

def test_tensor_of_classical_basis_vectors():
    out = tensor(vec(BIT, 1, 0), vec(BIT, 0, 1))
    assert list(out.coords) == [0, 1, 0, 0]
    assert out.systems == (BIT, BIT)


def test_tensor_of_identities_is_identity():
    cl3 = theories.classical_theory(3).type("cl3")
    out = tensor(identity_transform((BIT,)), identity_transform((cl3,)))
    assert np.array_equal(out.matrix, scalars.identity(6, "exact"))


def test_tensor_of_gbit_states_matches_double_loop():
    a, b = [1, 1, 1], [1, -1, 1]
    out = tensor(vec(GBIT, *a), vec(GBIT, *b))
    oracle = [a[i] * b[j] for i in range(3) for j in range(3)]
    assert [int(x) for x in out.coords] == oracle


# ---------------------------------------------------------------- composition

def test_not_not_is_identity():
    NOT = CL.gates["not"]
    assert sequential_compose(NOT, NOT) == identity_transform((BIT,))


def test_compose_with_identity(rng):
    from gptlab.generators import random_rational_matrix
    cl3 = theories.classical_theory(3).type("cl3")
    t = GTransform((cl3,), (cl3,), random_rational_matrix(rng, 3, 3))
    assert sequential_compose(t, identity_transform((cl3,))) == t
    assert sequential_compose(identity_transform((cl3,)), t) == t


def test_compose_matches_naive_triple_loop(rng):
    from gptlab.generators import random_rational_matrix
    cl3 = theories.classical_theory(3).type("cl3")
    a, b = random_rational_matrix(rng, 3, 3), random_rational_matrix(rng, 3, 3)
    out = sequential_compose(GTransform((cl3,), (cl3,), a), GTransform((cl3,), (cl3,), b)).matrix
    for i in range(3):
        for j in range(3):
            assert out[i, j] == sum((a[i, k] * b[k, j] for k in range(3)), Fraction(0))


def test_compose_type_mismatch_is_wiring_error():
    with pytest.raises(WiringError):
        sequential_compose(identity_transform((BIT,)), identity_transform((GBIT,)))
    with pytest.raises(WiringError):
        apply(identity_transform((BIT,)), vec(GBIT, 1, 0, 0))


def test_pair_and_unit():
    u = unit_effect((BIT, BIT))
    assert pair(u, tensor(vec(BIT, 1, 0), vec(BIT, 0, 1))) == 1


def test_mixed_modes_rejected():
    with pytest.raises((TypeError, ValueError)):
        pair(eff(BIT, 1, 0), GVector((BIT,), np.array([0.5, 0.5])))


# ---------------------------------------------------------------- evaluation

def test_prepare_then_measure_classical():
    c = Circuit((Node(Device.prepare(vec(BIT, 1, 0)), (), ("A",)),
                 Node(basis_measure(), ("A",), (), "a")))
    d = evaluate_closed(c)
    assert d.prob((0,)) == 1
    assert d.prob((1,)) == 0


def _pr_circuit(x, y):
    fx = BOX.system("gbit").measurements[f"fiducial{x}"]
    fy = BOX.system("gbit").measurements[f"fiducial{y}"]
    return Circuit((Node(Device.prepare(theories.pr_state()), (), ("A", "B")),
                    Node(Device.measure(*fx), ("A",), (), "a"),
                    Node(Device.measure(*fy), ("B",), (), "b")))


def test_pr_state_fiducial_11():
    d = evaluate_closed(_pr_circuit(1, 1))
    assert d.prob((0, 0)) == 0 and d.prob((1, 1)) == 0
    assert d.prob((0, 1)) == Fraction(1, 2) and d.prob((1, 0)) == Fraction(1, 2)


def test_rho_f_majority_three_parties():
    f = theories.TruthTable.parse("maj", 3)
    x = (1, 1, 0)
    fid = BOX.system("gbit").measurements
    nodes = [Node(Device.prepare(theories.rho_f(f)), (), ("A", "B", "C"))]
    for w, xi, lab in zip("ABC", x, "abc"):
        nodes.append(Node(Device.measure(*fid[f"fiducial{xi}"]), (w,), (), lab))
    d = evaluate_closed(Circuit(tuple(nodes)))
    odd = [z for z in itertools.product((0, 1), repeat=3) if sum(z) % 2 == 1]
    for z in itertools.product((0, 1), repeat=3):
        assert d.prob(z) == (Fraction(1, 4) if z in odd else 0)


def test_open_circuit_cannot_be_evaluated_closed():
    c = Circuit((Node(basis_measure(), ("A",), (), "a"),), aux=(("A", BIT),))
    with pytest.raises(OpenPortError):
        evaluate_closed(c)


def test_guard_is_enforced():
    nodes = []
    for i in range(21):
        nodes += [Node(Device.prepare(vec(BIT, Fraction(1, 2), Fraction(1, 2))), (), (f"W{i}",)),
                  Node(basis_measure(), (f"W{i}",), (), f"m{i}")]
    with pytest.raises(GuardError):
        evaluate_closed(Circuit(tuple(nodes)))


def test_unlabelled_outcomes_are_summed():
    c = Circuit((Node(Device.prepare(vec(BIT, Fraction(1, 3), Fraction(2, 3))), (), ("A",)),
                 Node(basis_measure(), ("A",), ())))
    d = evaluate_closed(c)
    assert d.labels == () and d.prob(()) == 1


def test_residual_wires_are_discarded():
    c = Circuit((Node(Device.prepare(vec(BIT, Fraction(1, 3), Fraction(2, 3))), (), ("A",)),))
    assert evaluate_closed(c).prob(()) == 1


# ---------------------------------------------------------------- acceptance

def _measure_aux(accept_outcome=0):
    return Circuit((Node(basis_measure(), ("A",), (), "a"),), aux=(("A", BIT),),
                   accept=lambda z: z["a"] == accept_outcome)


def test_accept_probability_classical():
    assert accept_probability(_measure_aux(), vec(BIT, 1, 0)) == 1


def test_boxworld_parity_with_rho_and():
    fid = BOX.system("gbit").measurements["fiducial1"]
    c = Circuit((Node(Device.measure(*fid), ("A",), (), "a"), Node(Device.measure(*fid), ("B",), (), "b")),
                aux=(("A", GBIT), ("B", GBIT)), accept=lambda z: (z["a"] ^ z["b"]) == 1)
    f = theories.TruthTable.parse("and")
    assert accept_probability(c, theories.rho_f(f)) == 1


def test_random_two_gbit_circuit_matches_enumeration(rng):
    gens = BOX.system("gbit").generators
    fid = BOX.system("gbit").measurements
    for _ in range(10):
        g = str(rng.choice(sorted(gens)))
        x, y = (int(v) for v in rng.integers(0, 2, size=2))
        c = Circuit((Node(Device.prepare(theories.pr_state()), (), ("A", "B")),
                     Node(Device.transform(gens[g]), ("A",), ("A1",)),
                     Node(Device.measure(*fid[f"fiducial{x}"]), ("A1",), (), "a"),
                     Node(Device.measure(*fid[f"fiducial{y}"]), ("B",), (), "b")))
        d = evaluate_closed(c)
        state = np.kron(gens[g].matrix, scalars.identity(3, "exact")) @ theories.pr_state().coords
        for a, b in itertools.product((0, 1), repeat=2):
            want = np.kron(fid[f"fiducial{x}"][a].coords, fid[f"fiducial{y}"][b].coords) @ state
            assert d.prob((a, b)) == want


def test_accept_map_of_unit_effect_is_u_row():
    c = Circuit((Node(Device.measure(unit_effect((BIT,))), ("A",), ()),), aux=(("A", BIT),))
    assert list(accept_functional(c).coords) == [1, 1]


def test_accept_map_of_basis_measurement_is_e0_row():
    m = accept_map(_measure_aux())
    assert m.matrix.shape == (1, 2)
    assert list(m.matrix[0]) == [1, 0]


def test_accept_functional_agrees_with_accept_probability(rng):
    from gptlab.generators import random_aux_circuit
    q = theories.quantum_theory(2)
    for _ in range(5):
        c, _ = random_aux_circuit(q, rng, n_aux=1)
        a = accept_functional(c)
        for _ in range(20):
            rho = theories.random_density(2, rng)
            coords = np.array([Fraction(float(v)).limit_denominator(10**4) for v in theories.embed(rho)], dtype=object)
            state = GVector(c.aux_systems, coords)
            assert accept_probability(c, state) == a.coords @ coords


# ---------------------------------------------------------------- post-selection

def _uniform2():
    probs = {z: Fraction(1, 4) for z in itertools.product((0, 1), repeat=2)}
    return OutcomeDistribution(("a", "b"), probs)


def test_post_select_on_odd_strings():
    d, p = post_select(_uniform2(), lambda z: z["a"] != z["b"])
    assert p == Fraction(1, 2)
    assert d.probs == {(0, 1): Fraction(1, 2), (1, 0): Fraction(1, 2)}


def test_post_select_on_everything_is_unchanged():
    d, p = post_select(_uniform2(), lambda z: True)
    assert p == 1 and d.probs == _uniform2().probs


def test_post_select_on_pr_table():
    d, p = post_select(evaluate_closed(_pr_circuit(1, 1)), lambda z: z["a"] == 0)
    assert p == Fraction(1, 2)
    assert d.prob((0, 1)) == 1


def test_post_select_impossible():
    with pytest.raises(PostSelectionError):
        post_select(_uniform2(), lambda z: z["a"] == 2)


# ---------------------------------------------------------------- sampling

def test_sample_point_distribution():
    d = OutcomeDistribution(("a",), {(1,): Fraction(1)})
    assert sample(d, 0, 5) == [(1,)] * 5


def test_sample_is_deterministic():
    assert sample(_uniform2(), 42, 100) == sample(_uniform2(), 42, 100)


def test_sample_fair_coin_frequency():
    d = OutcomeDistribution(("a",), {(0,): Fraction(1, 2), (1,): Fraction(1, 2)})
    n = 100_000
    zeros = sum(1 for z in sample(d, 5, n) if z == (0,))
    assert abs(zeros / n - 0.5) < 4 * np.sqrt(0.25 / n)


# ---------------------------------------------------------------- coarse-graining

def test_trivial_partition_is_identity():
    dev = basis_measure()
    assert coarse_grain(dev, [[0], [1]]) == dev


def test_full_coarse_graining_gives_unit():
    for spec in (CL.system("bit"), BOX.system("gbit")):
        for effects in spec.measurements.values():
            dev = Device.measure(*effects)
            joined = coarse_grain(dev, [list(range(len(effects)))])
            assert joined.outcomes[0] == spec.unit


def test_two_cell_partition_matches_manual_sum():
    cl4 = theories.classical_theory(4).type("cl4")
    rows = [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]
    dev = Device.measure(*(eff(cl4, *r) for r in rows))
    out = coarse_grain(dev, [[0, 2], [1, 3]])
    assert list(out.outcomes[0].coords) == [1, 0, 1, 0]
    assert list(out.outcomes[1].coords) == [0, 1, 0, 1]


def test_bad_partition_rejected():
    with pytest.raises(ValueError):
        coarse_grain(basis_measure(), [[0], [0, 1]])
    with pytest.raises(ValueError):
        coarse_grain(basis_measure(), [[0]])


def test_circuit_wiring_errors():
    with pytest.raises(WiringError):
        Circuit((Node(basis_measure(), ("A",), (), "a"),))
    with pytest.raises(WiringError):
        Circuit((Node(Device.prepare(vec(GBIT, 1, 0, 0)), (), ("A",)),
                 Node(basis_measure(), ("A",), (), "a")))
