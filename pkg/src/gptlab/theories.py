"""Built-in theories: classical probability, qubit quantum theory, Boxworld.

Coordinate conventions
----------------------
classical (n levels)
    probability vectors; unit effect ``(1, ..., 1)``.
quantum (qubits)
    ``r_P = Tr(P rho)`` over tensor products of ``(I, X, Y, Z)``, first
    qubit most significant.  An effect ``E`` has coordinates
    ``e_P = Tr(E P) / d`` so that ``(e|r) = Tr(E rho)``.
Boxworld (gbits)
    ``(1, X0, X1)`` where ``X_x`` is the expectation of fiducial
    measurement ``x`` in ``±1`` form; composites use correlator
    coordinates (products of these per site).
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from . import scalars
from .model import (Device, GEffect, GTransform, GVector, SystemType, WiringError,
                    tensor_all, total_dim, unit_effect)
from .scalars import EXACT, TOL, Mode

SIMPLEX = "simplex"
PSD = "psd"
POLYTOPE = "polytope"
MEMBERSHIP_TAGS = (SIMPLEX, PSD, POLYTOPE)

MAX_QUBITS = 5
MAX_PARTIES = 12


@dataclass(frozen=True)
class SystemSpec:
    """Everything a theory lists for one elementary system type."""

    type: SystemType
    states: tuple[GVector, ...]
    effects: tuple[GEffect, ...]
    measurements: Mapping[str, tuple[GEffect, ...]]
    generators: Mapping[str, GTransform] = field(default_factory=dict)
    facets: tuple[np.ndarray, ...] = ()

    @property
    def unit(self) -> GEffect:
        return unit_effect((self.type,), scalars.mode_of(self.states[0].coords))


@dataclass(frozen=True)
class TheorySpec:
    name: str
    systems: Mapping[str, SystemSpec]
    membership: str
    mode: Mode = EXACT
    gates: Mapping[str, GTransform] = field(default_factory=dict)
    family: str = ""

    def __post_init__(self):
        if self.membership not in MEMBERSHIP_TAGS:
            raise ValueError(f"unknown membership tag {self.membership!r}")

    def system(self, name: str) -> SystemSpec:
        try:
            return self.systems[name]
        except KeyError:
            raise KeyError(f"theory {self.name!r} has no system type {name!r}") from None

    def type(self, name: str) -> SystemType:
        return self.system(name).type

    @property
    def default_system(self) -> SystemSpec:
        return next(iter(self.systems.values()))


@dataclass(frozen=True)
class TruthTable:
    """A Boolean function on ``n`` bits; ``bits[i]`` is ``f`` at the input whose
    binary expansion (first bit most significant) is ``i``."""

    n: int
    bits: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "bits", tuple(int(b) for b in self.bits))
        if self.n < 1:
            raise ValueError("arity must be at least 1")
        if len(self.bits) != 2**self.n:
            raise ValueError(f"truth table of arity {self.n} needs {2**self.n} entries, got {len(self.bits)}")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("truth table entries must be 0 or 1")

    def __call__(self, x: Sequence[int]) -> int:
        if len(x) != self.n:
            raise ValueError(f"input of length {len(x)} for arity {self.n}")
        return self.bits[index_of(x)]

    def inputs(self):
        return itertools.product((0, 1), repeat=self.n)

    @classmethod
    def from_function(cls, n: int, fn: Callable[[tuple[int, ...]], int]) -> "TruthTable":
        return cls(n, tuple(int(fn(x)) & 1 for x in itertools.product((0, 1), repeat=n)))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "TruthTable":
        return cls(n, tuple(int(b) for b in rng.integers(0, 2, size=2**n)))

    @classmethod
    def parse(cls, spec: str, n: int | None = None) -> "TruthTable":
        """Named functions (``and``, ``or``, ``xor``, ``maj``, ``not``,
        ``zero``, ``one``, ``id``) or an explicit bit string like ``"0001"``."""
        spec = spec.strip().lower()
        if set(spec) <= {"0", "1"} and len(spec) > 1 or spec in ("0", "1") and n is None:
            k = int(math.log2(len(spec)))
            return cls(k, tuple(int(c) for c in spec))
        named = {
            "and": lambda x: int(all(x)),
            "or": lambda x: int(any(x)),
            "xor": lambda x: sum(x) % 2,
            "parity": lambda x: sum(x) % 2,
            "maj": lambda x: int(2 * sum(x) > len(x)),
            "majority": lambda x: int(2 * sum(x) > len(x)),
            "zero": lambda x: 0,
            "one": lambda x: 1,
            "not": lambda x: 1 - x[0],
            "id": lambda x: x[0],
        }
        if spec not in named:
            raise ValueError(f"unknown truth table {spec!r}")
        if n is None:
            n = 1 if spec in ("not", "id") else 2
        return cls.from_function(n, named[spec])


def index_of(bits: Sequence[int]) -> int:
    out = 0
    for b in bits:
        out = 2 * out + int(b)
    return out


def _vec(sys: SystemType, values, mode: Mode) -> GVector:
    return GVector((sys,), scalars.array(values, mode))


def _eff(sys: SystemType, values, mode: Mode) -> GEffect:
    return GEffect((sys,), scalars.array(values, mode))


def _tr(sys_in, sys_out, matrix, mode: Mode) -> GTransform:
    return GTransform(tuple(sys_in), tuple(sys_out), scalars.array(matrix, mode))


def _perm_matrix(perm: Sequence[int]) -> list[list[int]]:
    n = len(perm)
    m = [[0] * n for _ in range(n)]
    for i, j in enumerate(perm):
        m[j][i] = 1
    return m


# ---------------------------------------------------------------- classical

def classical_theory(n_levels: int = 2, mode: Mode = EXACT) -> TheorySpec:
    """Simplex theory on ``n_levels`` outcomes; generators are transpositions."""
    if n_levels < 2:
        raise ValueError("a classical system needs at least 2 levels")
    if n_levels > 10:
        raise ValueError("classical systems above 10 levels are outside desk scale")
    name = "bit" if n_levels == 2 else f"cl{n_levels}"
    sys = SystemType(name, n_levels, tuple("1" for _ in range(n_levels)))
    basis = np.eye(n_levels, dtype=int).tolist()
    states = tuple(_vec(sys, row, mode) for row in basis)
    effects = tuple(_eff(sys, list(bits), mode)
                    for bits in itertools.product((0, 1), repeat=n_levels))
    measurements = {"basis": tuple(_eff(sys, row, mode) for row in basis)}
    generators = {}
    for i, j in itertools.combinations(range(n_levels), 2):
        perm = list(range(n_levels))
        perm[i], perm[j] = j, i
        generators[f"t{i}{j}"] = _tr((sys,), (sys,), _perm_matrix(perm), mode)
    facets = tuple(scalars.array(row, mode) for row in basis)
    spec = SystemSpec(sys, states, effects, measurements, generators, facets)
    gates: dict[str, GTransform] = dict(generators)
    if n_levels == 2:
        gates["not"] = generators["t01"]
        gates["id"] = _tr((sys,), (sys,), basis, mode)
        two = (sys, sys)
        gates["cnot"] = _tr(two, two, _perm_matrix([0, 1, 3, 2]), mode)
        gates["swap"] = _tr(two, two, _perm_matrix([0, 2, 1, 3]), mode)
        three = (sys, sys, sys)
        gates["toffoli"] = _tr(three, three, _perm_matrix([0, 1, 2, 3, 4, 5, 7, 6]), mode)
    return TheorySpec("classical" if n_levels == 2 else f"classical{n_levels}",
                      {name: spec}, SIMPLEX, mode, gates, family="classical")


# ---------------------------------------------------------------- quantum

_I = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (_I, _X, _Y, _Z)
# real parts of the Paulis with Y = i * [[0,-1],[1,0]]
_REAL_PAULIS = (
    np.array([[1, 0], [0, 1]], dtype=object),
    np.array([[0, 1], [1, 0]], dtype=object),
    np.array([[0, -1], [1, 0]], dtype=object),
    np.array([[1, 0], [0, -1]], dtype=object),
)


def pauli_strings(n: int):
    return list(itertools.product(range(4), repeat=n))


def pauli_matrix(word: Sequence[int]) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for k in word:
        out = np.kron(out, PAULIS[k])
    return out


def _real_pauli(word: Sequence[int]) -> np.ndarray:
    out = np.array([[Fraction(1)]], dtype=object)
    for k in word:
        out = np.kron(out, _REAL_PAULIS[k])
    return out


def _n_qubits_for(dim: int) -> int:
    n = 0
    while 4**n < dim:
        n += 1
    if 4**n != dim:
        raise ValueError(f"{dim} is not a qubit-register coordinate dimension")
    return n


def _is_pow2(d: int) -> bool:
    return d >= 1 and d & (d - 1) == 0


def qudit_basis(d: int) -> list[np.ndarray]:
    """Hermitian operator basis with ``B_0 = I`` and ``Tr(B_i B_j) = d delta_ij``.

    Qubit registers (``d`` a power of two) use tensor products of Paulis;
    other dimensions use generalised Gell-Mann matrices rescaled by
    ``sqrt(d/2)``.
    """
    if _is_pow2(d):
        n = d.bit_length() - 1
        return [pauli_matrix(w) for w in pauli_strings(n)]
    scale = math.sqrt(d / 2)
    out = [np.eye(d, dtype=complex)]
    for j in range(d):
        for k in range(j + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = m[k, j] = 1
            out.append(scale * m)
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = -1j
            m[k, j] = 1j
            out.append(scale * m)
    for l in range(1, d):
        m = np.zeros((d, d), dtype=complex)
        for j in range(l):
            m[j, j] = 1
        m[l, l] = -l
        out.append(scale * math.sqrt(2 / (l * (l + 1))) * m)
    return out


def embed(rho: np.ndarray) -> np.ndarray:
    """Complex Hermitian matrix -> float coordinates ``Tr(B_i rho)``."""
    rho = np.asarray(rho, dtype=complex)
    d = rho.shape[0]
    if rho.shape != (d, d):
        raise ValueError("matrix must be square")
    return np.array([np.real(np.trace(b @ rho)) for b in qudit_basis(d)])


def extract(coords: np.ndarray) -> np.ndarray:
    """Coordinates -> complex Hermitian matrix ``(1/d) sum r_i B_i``."""
    coords = np.asarray(coords)
    d = math.isqrt(len(coords))
    if d * d != len(coords):
        raise ValueError(f"{len(coords)} is not a square coordinate dimension")
    out = np.zeros((d, d), dtype=complex)
    for b, r in zip(qudit_basis(d), coords):
        if r != 0:
            out += float(r) * b
    return out / d


def embed_exact(re: np.ndarray, im: np.ndarray | None = None) -> np.ndarray:
    """Exact Pauli coordinates of the Hermitian matrix ``re + i*im``.

    ``re`` must be symmetric and ``im`` antisymmetric, both rational.
    """
    re = scalars.array(re, EXACT)
    d = re.shape[0]
    im = scalars.zeros((d, d), EXACT) if im is None else scalars.array(im, EXACT)
    if not (np.all(re == re.T) and np.all(im == -im.T)):
        raise ValueError("matrix is not Hermitian")
    n = int(round(math.log2(d)))
    if 2**n != d:
        raise ValueError("matrix dimension must be a power of two")
    coords = []
    for w in pauli_strings(n):
        k = sum(1 for q in w if q == 2)
        p = _real_pauli(w)
        # Tr(P rho) with P = i^k Ptilde and rho = re + i im
        if k % 2 == 0:
            val = (-1) ** (k // 2) * np.sum(p.T * re)
        else:
            val = (-1) ** ((k + 1) // 2) * np.sum(p.T * im)
        coords.append(Fraction(val))
    return np.array(coords, dtype=object)


def extract_exact(coords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`embed_exact`: returns ``(re, im)``."""
    coords = scalars.array(list(coords), EXACT)
    n = _n_qubits_for(len(coords))
    d = 2**n
    re = scalars.zeros((d, d), EXACT)
    im = scalars.zeros((d, d), EXACT)
    for w, r in zip(pauli_strings(n), coords):
        if r == 0:
            continue
        k = sum(1 for q in w if q == 2)
        p = _real_pauli(w)
        if k % 2 == 0:
            re = re + (-1) ** (k // 2) * r * p
        else:
            im = im + (-1) ** ((k - 1) // 2) * r * p
    return re / d, im / d


def effect_coords(op: np.ndarray) -> np.ndarray:
    """Float effect coordinates ``Tr(E P) / d`` of an operator."""
    return embed(op) / np.asarray(op).shape[0]


def transfer_matrix(kraus: np.ndarray | Sequence[np.ndarray]) -> np.ndarray:
    """Float transfer matrix ``R[P, Q] = Tr(P K Q K^dag) / d`` summed over Kraus
    operators; a single unitary may be passed directly."""
    ops = [np.asarray(kraus)] if np.asarray(kraus).ndim == 2 else [np.asarray(k) for k in kraus]
    d_in = ops[0].shape[1]
    d_out = ops[0].shape[0]
    n_in = int(round(math.log2(d_in)))
    n_out = int(round(math.log2(d_out)))
    ins = [pauli_matrix(w) for w in pauli_strings(n_in)]
    outs = [pauli_matrix(w) for w in pauli_strings(n_out)]
    R = np.zeros((len(outs), len(ins)))
    for j, Q in enumerate(ins):
        image = sum(K @ Q @ K.conj().T for K in ops)
        for i, P in enumerate(outs):
            R[i, j] = np.real(np.trace(P @ image)) / d_in
    return R


def qubit_transform(systems, kraus, mode: Mode) -> GTransform:
    R = transfer_matrix(kraus)
    if mode == EXACT:
        return GTransform(systems, systems, scalars.rationalize(R))
    return GTransform(systems, systems, R)


_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_S = np.array([[1, 0], [0, 1j]], dtype=complex)
_CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
_CZ = np.diag([1, 1, 1, -1]).astype(complex)
_SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
UNITARIES = {"h": _H, "s": _S, "sdg": _S.conj().T, "x": _X, "y": _Y, "z": _Z,
             "id": _I, "cnot": _CNOT, "cz": _CZ, "swap": _SWAP}

STABILIZER_BLOCH = {
    "+z": (0, 0, 1), "-z": (0, 0, -1), "+x": (1, 0, 0),
    "-x": (-1, 0, 0), "+y": (0, 1, 0), "-y": (0, -1, 0),
}


def bloch_state(sys: SystemType, x, y, z, mode: Mode) -> GVector:
    return _vec(sys, [1, x, y, z], mode)


def bloch_effect(sys: SystemType, weight, x, y, z, mode: Mode) -> GEffect:
    """Effect ``weight * (I + x X + y Y + z Z) / 2``."""
    w = scalars.scalar(weight, mode)
    vals = [scalars.scalar(v, mode) for v in (1, x, y, z)]
    half = Fraction(1, 2) if mode == EXACT else 0.5
    return GEffect((sys,), np.array([w * half * v for v in vals], dtype=object if mode == EXACT else float))


def quantum_theory(n_qubits: int = 1, mode: Mode = EXACT) -> TheorySpec:
    """Qubit theory in Pauli coordinates.

    The listed extremal states are the six stabilizer states, a finite
    sample of the Bloch sphere; membership is decided by positivity of the
    reconstructed matrix, not by this list.
    """
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ValueError(f"n_qubits must be in 1..{MAX_QUBITS}")
    sys = SystemType("qubit", 4, ("1", "0", "0", "0"))
    states = tuple(bloch_state(sys, *b, mode) for b in STABILIZER_BLOCH.values())
    effects = tuple(bloch_effect(sys, 1, *b, mode) for b in STABILIZER_BLOCH.values())
    zero = _eff(sys, [0, 0, 0, 0], mode)
    unit = _eff(sys, [1, 0, 0, 0], mode)
    measurements = {
        axis: (bloch_effect(sys, 1, *STABILIZER_BLOCH["+" + axis], mode),
               bloch_effect(sys, 1, *STABILIZER_BLOCH["-" + axis], mode))
        for axis in ("z", "x", "y")
    }
    one = (sys,)
    two = (sys, sys)
    gates = {}
    for name, U in UNITARIES.items():
        systems = one if U.shape[0] == 2 else two
        if len(systems) <= n_qubits:
            gates[name] = qubit_transform(systems, U, mode)
    generators = {"h": gates["h"], "s": gates["s"]}
    spec = SystemSpec(sys, states, (zero, unit) + effects, measurements, generators, ())
    return TheorySpec("quantum", {"qubit": spec}, PSD, mode, gates, family="quantum")


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random density matrix from a Ginibre matrix of the given rank."""
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_pure(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


# ---------------------------------------------------------------- boxworld

GBIT = SystemType("gbit", 3, ("1", "0", "0"))


def fiducial_effect(x: int, a: int, mode: Mode = EXACT) -> GEffect:
    """``(x_a| = (u + (-1)^a X_x^*) / 2``."""
    half = Fraction(1, 2) if mode == EXACT else 0.5
    coords = [half, 0, 0]
    coords[1 + x] = half * (-1) ** a
    return GEffect((GBIT,), scalars.array(coords, mode) if mode == EXACT else np.array(coords, float))


def boxworld_theory(mode: Mode = EXACT) -> TheorySpec:
    sys = GBIT
    vertices = tuple(_vec(sys, [1, s0, s1], mode) for s0 in (1, -1) for s1 in (1, -1))
    fid = {f"fiducial{x}": (fiducial_effect(x, 0, mode), fiducial_effect(x, 1, mode)) for x in (0, 1)}
    effects = (_eff(sys, [0, 0, 0], mode), _eff(sys, [1, 0, 0], mode)) + fid["fiducial0"] + fid["fiducial1"]
    generators = {
        "flip0": _tr((sys,), (sys,), [[1, 0, 0], [0, -1, 0], [0, 0, 1]], mode),
        "flip1": _tr((sys,), (sys,), [[1, 0, 0], [0, 1, 0], [0, 0, -1]], mode),
        "exch": _tr((sys,), (sys,), [[1, 0, 0], [0, 0, 1], [0, 1, 0]], mode),
    }
    facets = tuple(scalars.array(f, mode) for f in ([1, 1, 0], [1, -1, 0], [1, 0, 1], [1, 0, -1]))
    spec = SystemSpec(sys, vertices, effects, fid, generators, facets)
    gates = dict(generators)
    gates["id"] = _tr((sys,), (sys,), np.eye(3, dtype=int).tolist(), mode)
    swap = np.zeros((9, 9), dtype=int)
    for i in range(3):
        for j in range(3):
            swap[j * 3 + i, i * 3 + j] = 1
    gates["swap"] = _tr((sys, sys), (sys, sys), swap.tolist(), mode)
    return TheorySpec("boxworld", {"gbit": spec}, POLYTOPE, mode, gates, family="boxworld")


def pr_state(mode: Mode = EXACT) -> GVector:
    """The PR box: ``P(a, b | x, y) = 1/2`` iff ``a xor b = x*y``."""
    return rho_f(TruthTable.parse("and"), mode)


def rho_f(f: TruthTable, mode: Mode = EXACT) -> GVector:
    """The n-gbit state whose fiducial outcomes have parity ``f(x)``.

    The all-unit component is 1, the component with ``X_{x_j}`` on every site
    is ``(-1)^f(x)``, and every component mixing unit and ``X`` sites is 0.
    """
    n = f.n
    if n > MAX_PARTIES:
        raise ValueError(f"rho_f supports at most {MAX_PARTIES} parties")
    size = 3**n
    if mode == EXACT:
        coords = np.empty(size, dtype=object)
        coords.fill(Fraction(0))
        one, minus = Fraction(1), Fraction(-1)
    else:
        coords = np.zeros(size)
        one, minus = 1.0, -1.0
    coords[0] = one
    for x in f.inputs():
        idx = 0
        for xj in x:
            idx = 3 * idx + 1 + xj
        coords[idx] = minus if f(x) else one
    return GVector(tuple([GBIT] * n), coords)


def fiducial_table(v: GVector) -> np.ndarray:
    """``P(a | x)`` for every gbit site; shape ``(2, 2) * n`` ordered
    ``(x_1, a_1, x_2, a_2, ...)``."""
    n = len(v.systems)
    mode = v.mode
    rows = [fiducial_effect(x, a, mode).coords for x in (0, 1) for a in (0, 1)]
    F = np.array(rows, dtype=object if mode == EXACT else float)
    t = np.asarray(v.coords).reshape([3] * n)
    for k in range(n):
        t = np.tensordot(F, t, axes=([1], [k]))
        t = np.moveaxis(t, 0, k)
    return t.reshape([2, 2] * n)


# ---------------------------------------------------------------- membership

def membership(theory: TheorySpec, v: GVector, tol: float = TOL) -> bool:
    """Is ``v`` a normalised physical state of ``theory``?"""
    for s in v.systems:
        if s.name not in theory.systems:
            raise WiringError(f"system {s.name!r} is not part of theory {theory.name!r}")
    u = unit_effect(v.systems, v.mode)
    norm = u.coords @ v.coords
    if not _close(norm, 1, tol):
        return False
    tag = theory.membership
    if tag == SIMPLEX:
        return all(_nonneg(c, tol) for c in v.coords)
    if tag == PSD:
        if any(s.dim != 4 for s in v.systems):
            raise ValueError("psd membership is implemented for qubit registers")
        rho = extract(np.asarray(v.coords, dtype=float))
        return bool(np.min(np.linalg.eigvalsh(rho)) >= -tol)
    if tag == POLYTOPE:
        if len(v.systems) == 1:
            spec = theory.system(v.systems[0].name)
            if spec.facets:
                return all(_nonneg(f @ v.coords, tol) for f in spec.facets)
        return _product_table_ok(theory, v, tol)
    raise ValueError(f"unknown membership tag {tag!r}")


def _product_table_ok(theory: TheorySpec, v: GVector, tol: float) -> bool:
    """Positivity of every product of listed measurement effects, plus
    no-signalling of the resulting tables."""
    mode = v.mode
    per_site = []
    for s in v.systems:
        spec = theory.system(s.name)
        meas = list(spec.measurements.values())
        per_site.append(meas)
    n = len(v.systems)
    t = np.asarray(v.coords).reshape([s.dim for s in v.systems])
    # stack every effect of every measurement for each site
    mats = []
    shapes = []
    for meas in per_site:
        rows = [e.coords for m in meas for e in m]
        mats.append(np.array(rows, dtype=object if mode == EXACT else float))
        shapes.append([len(m) for m in meas])
    for k, F in enumerate(mats):
        t = np.tensordot(F, t, axes=([1], [k]))
        t = np.moveaxis(t, 0, k)
    if not all(_nonneg(p, tol) for p in t.flat):
        return False
    # no-signalling: the marginal after summing a site's outcomes must not
    # depend on which of its measurements was chosen
    for k, sizes in enumerate(shapes):
        offsets = np.cumsum([0] + sizes)
        margins = []
        for m in range(len(sizes)):
            block = np.take(t, list(range(offsets[m], offsets[m + 1])), axis=k)
            margins.append(np.sum(block, axis=k))
        for other in margins[1:]:
            if not scalars.allclose(np.asarray(other, dtype=margins[0].dtype), margins[0], tol):
                diff = np.asarray(other, dtype=float) - np.asarray(margins[0], dtype=float)
                if np.max(np.abs(diff)) > tol:
                    return False
    return True


def _nonneg(x, tol: float) -> bool:
    if isinstance(x, (Fraction, int)):
        return x >= 0
    return float(x) >= -tol


def _close(x, y, tol: float) -> bool:
    if isinstance(x, (Fraction, int)):
        return x == y
    return abs(float(x) - float(y)) <= tol


def completely_mixed_coords(theory: TheorySpec, sys_name: str) -> np.ndarray:
    """Uniform mixture of the listed extremal states."""
    spec = theory.system(sys_name)
    total = spec.states[0].coords
    for s in spec.states[1:]:
        total = total + s.coords
    k = len(spec.states)
    return total / (Fraction(k) if theory.mode == EXACT else float(k))


def product_states(theory: TheorySpec, systems: Sequence[SystemType]) -> list[GVector]:
    lists = [theory.system(s.name).states for s in systems]
    return [tensor_all(combo) for combo in itertools.product(*lists)]


# ---------------------------------------------------------------- serialization

def to_json(theory: TheorySpec) -> dict:
    """Theory document; scalars are ``"p/q"`` strings in exact mode."""
    def vec(a):
        return scalars.fmt_all(np.asarray(a).tolist())

    def mat(m):
        return [scalars.fmt_all(row) for row in np.asarray(m).tolist()]

    doc = {
        "name": theory.name,
        "family": theory.family,
        "mode": theory.mode,
        "membership": theory.membership,
        "systems": [{"name": n, "dim": s.type.dim} for n, s in theory.systems.items()],
        "states": {n: [vec(v.coords) for v in s.states] for n, s in theory.systems.items()},
        "effects": {n: [vec(e.coords) for e in s.effects] for n, s in theory.systems.items()},
        "measurements": {n: {k: [vec(e.coords) for e in m] for k, m in s.measurements.items()}
                         for n, s in theory.systems.items()},
        "unit": {n: vec(s.unit.coords) for n, s in theory.systems.items()},
        "generators": {n: {k: mat(g.matrix) for k, g in s.generators.items()}
                       for n, s in theory.systems.items()},
        "facets": {n: [vec(f) for f in s.facets] for n, s in theory.systems.items()},
    }
    return doc


def from_json(doc: Mapping | str) -> TheorySpec:
    if isinstance(doc, str):
        doc = json.loads(doc)
    mode: Mode = doc.get("mode", EXACT)
    family = doc.get("family", "")
    systems = {}
    for entry in doc["systems"]:
        name, dim = entry["name"], int(entry["dim"])
        unit = tuple(str(x) for x in doc["unit"][name])
        sys = SystemType(name, dim, unit)
        states = tuple(_vec(sys, v, mode) for v in doc.get("states", {}).get(name, []))
        effects = tuple(_eff(sys, e, mode) for e in doc.get("effects", {}).get(name, []))
        meas = {k: tuple(_eff(sys, e, mode) for e in m)
                for k, m in doc.get("measurements", {}).get(name, {}).items()}
        gens = {k: _tr((sys,), (sys,), g, mode) for k, g in doc.get("generators", {}).get(name, {}).items()}
        facets = tuple(scalars.array(f, mode) for f in doc.get("facets", {}).get(name, []))
        if not states:
            raise ValueError(f"system {name!r} lists no states")
        systems[name] = SystemSpec(sys, states, effects, meas, gens, facets)
    gates = {}
    for spec in systems.values():
        gates.update(spec.generators)
    return TheorySpec(doc["name"], systems, doc["membership"], mode, gates, family=family)


def builtin(name: str, mode: Mode = EXACT) -> TheorySpec:
    """Look up a built-in theory by the name used in circuit files."""
    key = name.lower()
    if key in ("classical", "bit"):
        return classical_theory(2, mode)
    if key.startswith("classical") and key[9:].isdigit():
        return classical_theory(int(key[9:]), mode)
    if key in ("quantum", "qubit"):
        return quantum_theory(2, mode)
    if key in ("boxworld", "gbit"):
        return boxworld_theory(mode)
    raise KeyError(f"unknown theory {name!r}")


def prepare_device(theory: TheorySpec, sys: SystemType, ctor: str, args: Sequence, mode: Mode) -> Device:
    """Device for ``prepare ctor(args)`` on a single system type."""
    spec = theory.system(sys.name)
    return Device.prepare(_state_from_ctor(theory, spec, ctor, args, mode), name=ctor)


def _state_from_ctor(theory, spec: SystemSpec, ctor, args, mode) -> GVector:
    sys = spec.type
    if ctor in ("state", "vertex", "pauli"):
        return _vec(sys, list(args), mode)
    if ctor == "pure":
        return spec.states[int(args[0])]
    if ctor == "mixed":
        return GVector((sys,), completely_mixed_coords(theory, sys.name))
    if ctor == "basis" and theory.family == "classical":
        row = [0] * sys.dim
        row[int(args[0])] = 1
        return _vec(sys, row, mode)
    if ctor == "dist" and theory.family == "classical":
        return _vec(sys, list(args), mode)
    if ctor == "ket" and theory.family == "quantum":
        bit = int(args[0])
        return bloch_state(sys, 0, 0, 1 - 2 * bit, mode)
    if ctor == "bloch" and theory.family == "quantum":
        return bloch_state(sys, *args, mode)
    raise KeyError(f"unknown preparation {ctor}({', '.join(map(str, args))}) for theory {theory.name!r}")


def multi_state(theory: TheorySpec, ctor: str, args: Sequence, mode: Mode) -> GVector | None:
    """Multi-system preparations (``pr()``, ``rhof(bits)``); ``None`` if not one."""
    if theory.family == "boxworld":
        if ctor == "pr":
            return pr_state(mode)
        if ctor == "rhof":
            bits = tuple(int(a) for a in args)
            n = max(len(bits).bit_length() - 1, 1)
            return rho_f(TruthTable(n, bits), mode)
    return None


def measurement_effects(theory: TheorySpec, sys: SystemType, ctor: str, args: Sequence, mode: Mode) -> tuple[GEffect, ...]:
    """Effects for ``measure ctor(args)`` on one system."""
    spec = theory.system(sys.name)
    if ctor == "unit":
        return (spec.unit,)
    if ctor in spec.measurements and not args:
        return spec.measurements[ctor]
    if ctor == "fiducial" and theory.family == "boxworld":
        return spec.measurements[f"fiducial{int(args[0])}"]
    if ctor == "basis" and theory.family == "quantum":
        return spec.measurements["z"]
    if ctor == "bloch" and theory.family == "quantum":
        x, y, z = args
        return (bloch_effect(sys, 1, x, y, z, mode), bloch_effect(sys, 1, *(-scalars.scalar(a, mode) for a in (x, y, z)), mode))
    if ctor == "effects":
        # explicit list of coordinate rows, flattened: effects(e00, e01, ..., e10, ...)
        d = sys.dim
        if len(args) % d:
            raise ValueError("effects(...) needs a multiple of the system dimension")
        return tuple(_eff(sys, list(args[i:i + d]), mode) for i in range(0, len(args), d))
    raise KeyError(f"unknown measurement {ctor}({', '.join(map(str, args))}) for theory {theory.name!r}")
