"""Verifiers for physical principles on finite theory descriptions.

Every verifier returns a report value rather than raising on failure.  A
status is one of ``"pass"``, ``"fail"``, ``"refuted"`` (a bounded search
exhausted the generated group) or ``"inconclusive"`` (search stopped at its
depth bound).  Pure states are identified with the listed extremal states.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Sequence

import numpy as np

from . import lp, scalars
from .model import GEffect, GTransform, GVector, SystemType, WiringError, tensor_all, total_dim, unit_effect
from .scalars import EXACT, TOL
from .theories import POLYTOPE, PSD, SIMPLEX, TheorySpec, completely_mixed_coords, extract

PASS = "pass"
FAIL = "fail"
REFUTED = "refuted"
INCONCLUSIVE = "inconclusive"
UNSUPPORTED = "unsupported"

MAX_DISTINGUISH = 8
MAX_SEARCH_DEPTH = 12
MAX_GROUP = 200_000


@dataclass(frozen=True)
class PrincipleReport:
    principle: str
    status: str
    details: dict = field(default_factory=dict)
    witnesses: tuple = ()

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_json(self) -> dict:
        return {"principle": self.principle, "status": self.status,
                "details": _jsonable(self.details), "witnesses": _jsonable(list(self.witnesses))}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (Fraction, float, np.floating, np.integer)) and not isinstance(obj, bool):
        return scalars.fmt(obj)
    return obj


def _eq(a, b, tol: float = TOL) -> bool:
    return scalars.allclose(np.asarray(a), np.asarray(b), tol)


# ---------------------------------------------------------------- causality

def check_causality(theory: TheorySpec, tol: float = TOL) -> PrincipleReport:
    """Every measurement sums to one common unit effect, and every extremal
    state has the same total probability under every measurement."""
    witnesses = []
    units = {}
    for name, spec in theory.systems.items():
        u = spec.unit.coords
        units[name] = u
        for mname, effects in spec.measurements.items():
            total = effects[0].coords
            for e in effects[1:]:
                total = total + e.coords
            if not _eq(total, u, tol):
                witnesses.append({"system": name, "measurement": mname,
                                  "sum": scalars.fmt_all(total), "unit": scalars.fmt_all(u)})
        for k, s in enumerate(spec.states):
            marginals = {m: sum(e.coords @ s.coords for e in effs) for m, effs in spec.measurements.items()}
            values = list(marginals.values())
            if any(not _eq(v, values[0], tol) for v in values[1:]):
                witnesses.append({"system": name, "state": k, "marginals": marginals})
    status = PASS if not witnesses else FAIL
    return PrincipleReport("causality", status, {"unit": units}, tuple(witnesses))


# ---------------------------------------------------------------- tomographic locality

def exact_rank(rows: Sequence[Sequence]) -> int:
    """Rank of a rational matrix by fraction-free (Bareiss) elimination."""
    mat = []
    for row in rows:
        row = [Fraction(v) for v in row]
        den = reduce(lambda a, b: a * b // math.gcd(a, b), (v.denominator for v in row), 1)
        mat.append([int(v * den) for v in row])
    if not mat:
        return 0
    m, n = len(mat), len(mat[0])
    rank = 0
    prev = 1
    col = 0
    for col in range(n):
        if rank == m:
            break
        pivot = next((i for i in range(rank, m) if mat[i][col] != 0), None)
        if pivot is None:
            continue
        mat[rank], mat[pivot] = mat[pivot], mat[rank]
        p = mat[rank][col]
        for i in range(rank + 1, m):
            a = mat[i][col]
            mat[i] = [(p * mat[i][j] - a * mat[rank][j]) // prev for j in range(n)]
        prev = p
        rank += 1
    return rank


def _rank(vectors: Sequence[np.ndarray]) -> int:
    arr = np.array([np.asarray(v) for v in vectors])
    if arr.dtype == object:
        return exact_rank(arr.tolist())
    return int(np.linalg.matrix_rank(arr.astype(float), tol=1e-9))


def check_tomographic_locality(theory: TheorySpec, a: str, b: str) -> PrincipleReport:
    """Product extremal states (and effects) span the full composite space."""
    sa, sb = theory.system(a), theory.system(b)
    target = sa.type.dim * sb.type.dim
    state_rank = _rank([np.kron(x.coords, y.coords) for x in sa.states for y in sb.states])
    eff_a = [e for e in sa.effects] or [e for m in sa.measurements.values() for e in m]
    eff_b = [e for e in sb.effects] or [e for m in sb.measurements.values() for e in m]
    effect_rank = _rank([np.kron(x.coords, y.coords) for x in eff_a for y in eff_b])
    ok = state_rank == target and effect_rank == target
    details = {"systems": [a, b], "product_dim": target, "state_rank": state_rank, "effect_rank": effect_rank}
    return PrincipleReport("tomographic_locality", PASS if ok else FAIL, details)


# ---------------------------------------------------------------- distinguishability

@dataclass(frozen=True)
class DistinguishResult:
    feasible: bool
    effects: tuple[GEffect, ...] = ()
    certificate: tuple[Fraction, ...] | None = None
    certificate_verified: bool = False
    problem: lp.LPProblem | None = None


def _to_exact(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr)
    if arr.dtype == object:
        return arr
    return scalars.rationalize(arr)


def effect_generators(theory: TheorySpec, systems: Sequence[SystemType]) -> list[np.ndarray]:
    """Cone generators for effects on ``systems``: products of each factor's
    listed extremal effects (zero effects dropped)."""
    per = []
    for s in systems:
        spec = theory.system(s.name)
        effs = list(spec.effects) or [e for m in spec.measurements.values() for e in m]
        per.append([_to_exact(e.coords) for e in effs if any(v != 0 for v in np.asarray(e.coords).flat)])
    out = []
    for combo in itertools.product(*per):
        out.append(reduce(np.kron, combo))
    return out


def find_distinguishing_measurement(theory: TheorySpec, states: Sequence[GVector]) -> DistinguishResult:
    """Exact LP for effects ``e_i`` with ``(e_i|s_j) = delta_ij`` and
    ``sum_i e_i = u``, each ``e_i`` in the cone of listed extremal effects."""
    if not states:
        raise ValueError("no states given")
    if len(states) > MAX_DISTINGUISH:
        raise ValueError(f"at most {MAX_DISTINGUISH} states")
    systems = states[0].systems
    if any(s.systems != systems for s in states):
        raise WiringError("states live on different systems")
    gens = effect_generators(theory, systems)
    k, g = len(states), len(gens)
    dim = total_dim(systems)
    svecs = [_to_exact(s.coords) for s in states]
    u = _to_exact(unit_effect(systems, EXACT).coords)
    n_vars = k * g
    A_eq, b_eq = [], []
    for i in range(k):
        for j in range(k):
            row = [Fraction(0)] * n_vars
            for q, e in enumerate(gens):
                row[i * g + q] = Fraction(e @ svecs[j])
            A_eq.append(row)
            b_eq.append(Fraction(int(i == j)))
    for t in range(dim):
        row = [Fraction(0)] * n_vars
        for i in range(k):
            for q, e in enumerate(gens):
                row[i * g + q] = Fraction(e[t])
        A_eq.append(row)
        b_eq.append(Fraction(u[t]))
    problem = lp.LPProblem(n_vars, A_eq, b_eq)
    res = lp.solve(problem)
    if res.status == lp.INFEASIBLE:
        return DistinguishResult(False, certificate=res.certificate,
                                 certificate_verified=lp.check_farkas(problem, res.certificate), problem=problem)
    effects = []
    for i in range(k):
        coords = np.array([Fraction(0)] * dim, dtype=object)
        for q, e in enumerate(gens):
            w = res.x[i * g + q]
            if w:
                coords = coords + w * e
        effects.append(GEffect(systems, coords))
    return DistinguishResult(True, tuple(effects), problem=problem)


# ---------------------------------------------------------------- completely mixed state

@dataclass(frozen=True)
class MixedReport:
    state: GVector
    invariant: bool
    refinement: tuple[object, ...]
    status: str

    def to_json(self) -> dict:
        return {"state": scalars.fmt_all(self.state.coords), "invariant": self.invariant,
                "refinement": scalars.fmt_all(self.refinement), "status": self.status}


def completely_mixed(theory: TheorySpec, system: str | None = None) -> MixedReport:
    """The uniform mixture of extremal states, its invariance under the
    listed generators, and for each extremal ``rho`` the largest ``p`` with
    ``c - p rho`` in the cone of states."""
    spec = theory.system(system) if system else theory.default_system
    coords = completely_mixed_coords(theory, spec.type.name)
    c = GVector((spec.type,), coords)
    invariant = all(_eq(g.matrix @ coords, coords) for g in spec.generators.values())
    refinement = []
    for rho in spec.states:
        if theory.membership == PSD:
            lam = float(np.max(np.linalg.eigvalsh(extract(np.asarray(rho.coords, dtype=float)))))
            d = int(round(math.sqrt(spec.type.dim)))
            p = 1 / (d * lam)
            if theory.mode == EXACT:
                p = Fraction(p).limit_denominator(10**6)
            refinement.append(p)
        else:
            refinement.append(_max_refinement(spec.states, c, rho))
    ok = invariant and all(p > 0 for p in refinement)
    return MixedReport(c, invariant, tuple(refinement), PASS if ok else FAIL)


def _max_refinement(states, c: GVector, rho: GVector):
    """max p s.t. c - p rho = sum mu_k s_k, mu >= 0, p >= 0."""
    S = [_to_exact(s.coords) for s in states]
    cv, rv = _to_exact(c.coords), _to_exact(rho.coords)
    n = len(S) + 1
    A_eq = []
    b_eq = []
    for t in range(len(cv)):
        A_eq.append([Fraction(s[t]) for s in S] + [Fraction(rv[t])])
        b_eq.append(Fraction(cv[t]))
    obj = [Fraction(0)] * len(S) + [Fraction(1)]
    res = lp.solve(lp.LPProblem(n, A_eq, b_eq, c=obj), maximize=True)
    if res.status != lp.OPTIMAL:
        return Fraction(0)
    return res.value


# ---------------------------------------------------------------- symmetry search

@dataclass(frozen=True)
class SymmetryResult:
    found: bool
    status: str
    word: tuple[str, ...] = ()
    transform: GTransform | None = None
    depth: int = 0
    group_size: int = 0

    def to_json(self) -> dict:
        out = {"found": self.found, "status": self.status, "word": list(self.word),
               "depth": self.depth, "group_size": self.group_size}
        if self.transform is not None:
            out["matrix"] = [scalars.fmt_all(r) for r in self.transform.matrix.tolist()]
        return out


def place_gate(gate: GTransform, systems: Sequence[SystemType], positions: Sequence[int]) -> np.ndarray:
    """Matrix of ``gate`` acting on the listed positions of ``systems``,
    identity elsewhere."""
    dims = [s.dim for s in systems]
    D = total_dim(systems)
    mode = gate.mode
    eye = scalars.identity(D, mode).reshape(dims + [D])
    k = len(positions)
    g = np.asarray(gate.matrix).reshape([systems[p].dim for p in positions] * 2)
    t = np.tensordot(g, eye, axes=(list(range(k, 2 * k)), list(positions)))
    # t axes: gate outputs (k), remaining system axes, column axis
    rest = [i for i in range(len(dims)) if i not in positions]
    src = list(range(k)) + [k + r for r in range(len(rest))]
    dst = list(positions) + rest
    t = np.moveaxis(t, src, dst)
    return t.reshape(D, D)


def symmetry_generators(theory: TheorySpec, systems: Sequence[SystemType]) -> list[tuple[str, np.ndarray]]:
    """Listed reversible generators placed on every site, plus multi-system
    gates on every ordered tuple of matching sites."""
    out = []
    n = len(systems)
    for name, gate in sorted(theory.gates.items()):
        k = len(gate.in_systems)
        if k < 2 or k > n or gate.in_systems != gate.out_systems:
            continue
        for pos in itertools.permutations(range(n), k):
            if tuple(systems[p] for p in pos) == gate.in_systems:
                out.append((f"{name}{list(pos)}" if n > k or list(pos) != list(range(k)) else name,
                            place_gate(gate, systems, pos)))
    for p, s in enumerate(systems):
        for name, gate in theory.system(s.name).generators.items():
            label = name if n == 1 else f"{name}[{p}]"
            out.append((label, place_gate(gate, systems, (p,))))
    return out


def _key(m: np.ndarray):
    if m.dtype == object:
        return tuple(m.flat)
    return tuple(np.round(m, 9).flat)


def search_symmetry(theory: TheorySpec, src: Sequence[GVector], dst: Sequence[GVector], depth: int = 6) -> SymmetryResult:
    """Breadth-first search over words in the listed generators for ``T``
    with ``T src_i = dst_i``.  Exhausting the generated group without a hit
    is a refutation; stopping at ``depth`` is inconclusive."""
    if len(src) != len(dst):
        raise ValueError("source and target tuples differ in length")
    if not 0 <= depth <= MAX_SEARCH_DEPTH:
        raise ValueError(f"depth must be in 0..{MAX_SEARCH_DEPTH}")
    systems = src[0].systems
    if any(s.systems != systems for s in list(src) + list(dst)):
        raise WiringError("all states must live on the same systems")
    gens = symmetry_generators(theory, systems)
    mode = src[0].mode
    S = np.stack([np.asarray(s.coords) for s in src], axis=1)
    T = np.stack([np.asarray(s.coords) for s in dst], axis=1)
    D = total_dim(systems)
    start = scalars.identity(D, mode)
    seen = {_key(start)}
    frontier = deque([(start, ())])
    level = 0
    while True:
        for m, word in frontier:
            if _eq(m @ S, T):
                return SymmetryResult(True, PASS, word, GTransform(systems, systems, m), len(word), len(seen))
        if level == depth:
            return SymmetryResult(False, INCONCLUSIVE, depth=depth, group_size=len(seen))
        nxt = deque()
        for m, word in frontier:
            for name, g in gens:
                new = g @ m
                key = _key(new)
                if key in seen:
                    continue
                seen.add(key)
                nxt.append((new, word + (name,)))
        if len(seen) > MAX_GROUP:
            return SymmetryResult(False, INCONCLUSIVE, depth=level + 1, group_size=len(seen))
        if not nxt:
            return SymmetryResult(False, REFUTED, depth=level, group_size=len(seen))
        frontier = nxt
        level += 1


# ---------------------------------------------------------------- norms

@dataclass(frozen=True)
class NormReport:
    """``e_norm`` is ``None`` when the theory has no self-dual pairing.

    ``c_constant`` is the factor in ``phy_norm <= c * e_norm``;
    ``mixed_norm`` is the E-norm of the completely mixed state.
    """

    vector: tuple
    e_norm: float | None
    phy_norm: object
    c_constant: float | None
    mixed_norm: float | None
    status: str = PASS

    def to_json(self) -> dict:
        return {"vector": scalars.fmt_all(self.vector), "e_norm": self.e_norm,
                "phy_norm": scalars.fmt(self.phy_norm), "c_constant": self.c_constant,
                "mixed_norm": self.mixed_norm, "status": self.status}


def pairing(theory: TheorySpec, a: np.ndarray, b: np.ndarray):
    """Self-dual pairing ``[a, b] = Tr(A B)`` in Pauli coordinates, so pure
    states have unit self-pairing."""
    if theory.membership != PSD:
        raise ValueError("self-dual pairing is provided for quantum theory only")
    a, b = np.asarray(a), np.asarray(b)
    d = math.isqrt(len(a))
    return (a @ b) / (Fraction(d) if a.dtype == object else d)


def phy_norm_quantum(coords: np.ndarray) -> float:
    eig = np.linalg.eigvalsh(extract(np.asarray(coords, dtype=float)))
    return 2 * max(float(np.sum(eig[eig > 0])), float(-np.sum(eig[eig < 0])))


def norms(theory: TheorySpec, v: GVector) -> NormReport:
    coords = np.asarray(v.coords)
    if theory.membership == PSD:
        d = math.isqrt(len(coords))
        e = math.sqrt(max(float(pairing(theory, coords, coords)), 0.0))
        return NormReport(tuple(coords), e, phy_norm_quantum(coords), math.sqrt(d), 1 / math.sqrt(d))
    if theory.membership == SIMPLEX:
        pos = sum((x for x in coords if x > 0), Fraction(0) if coords.dtype == object else 0.0)
        neg = sum((-x for x in coords if x < 0), Fraction(0) if coords.dtype == object else 0.0)
        return NormReport(tuple(coords), None, 2 * max(pos, neg), None, None, UNSUPPORTED)
    if theory.membership == POLYTOPE:
        if len(v.systems) != 1:
            raise ValueError("polytope phy norm is implemented for single systems")
        spec = theory.system(v.systems[0].name)
        best = max(abs(e.coords @ coords) for e in spec.effects)
        return NormReport(tuple(coords), None, 2 * best, None, None, UNSUPPORTED)
    raise ValueError(f"unknown membership tag {theory.membership!r}")


def verify_theory(theory: TheorySpec, depth: int = 6) -> list[dict]:
    """The report behind the ``verify`` command."""
    out = [check_causality(theory).to_json()]
    names = list(theory.systems)
    for a, b in itertools.combinations_with_replacement(names, 2):
        out.append(check_tomographic_locality(theory, a, b).to_json())
    for name in names:
        mixed = completely_mixed(theory, name)
        out.append({"principle": "completely_mixed", "system": name, **mixed.to_json()})
        out.append(bit_symmetry(theory, name, depth))
    return out


def bit_symmetry(theory: TheorySpec, system: str, depth: int = 6) -> dict:
    """Bit-symmetry over perfectly distinguishable pairs of listed pure states:
    every such pair must map to every other by a listed-generator word."""
    spec = theory.system(system)
    pairs = []
    for i, j in itertools.permutations(range(len(spec.states)), 2):
        res = find_distinguishing_measurement(theory, [spec.states[i], spec.states[j]])
        if res.feasible:
            pairs.append((i, j))
    worst = PASS
    witnesses = []
    if not pairs:
        return {"principle": "bit_symmetry", "system": system, "status": INCONCLUSIVE,
                "details": {"distinguishable_pairs": 0}, "witnesses": []}
    ref = pairs[0]
    for p in pairs[1:]:
        r = search_symmetry(theory, [spec.states[ref[0]], spec.states[ref[1]]],
                            [spec.states[p[0]], spec.states[p[1]]], depth)
        if not r.found:
            witnesses.append({"from": list(ref), "to": list(p), "status": r.status})
            if r.status == REFUTED:
                worst = REFUTED
            elif worst == PASS:
                worst = INCONCLUSIVE
    return {"principle": "bit_symmetry", "system": system, "status": worst,
            "details": {"distinguishable_pairs": len(pairs)}, "witnesses": witnesses}
