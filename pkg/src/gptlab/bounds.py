"""Singular-value acceptance bounds and exact gap traces.

For a circuit with an auxiliary register, ``a = u . M`` is the row that maps
an aux state to its acceptance probability.  With an invertible map ``Phi``
that sends every physical aux state into the Euclidean unit ball,

    a . rho = (a Phi^-1)(Phi rho) <= |a Phi^-1| = sigma_max(M~),

where ``M~`` is ``a Phi^-1`` zero-padded to a square.  ``Phi`` is the
identity when raw coordinates already satisfy the unit-ball condition
(simplex theories), and otherwise ``s * T``: ``T`` moves the completely
mixed state to the origin of the non-unit coordinates and scales them by
the inradius ``r``; ``s = 1 / sqrt(1 + R^2 / r^2)`` (``R`` the
circumradius) shrinks the result into the ball.  Squares of all three
constants are rational, so ``G = Phi^-1 Phi^-T`` is exact and the gap trace
``Tr((M~^T M~)^d) = Tr((M^T M G)^d)`` stays rational.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Callable, Mapping, Sequence

import numpy as np

from . import lp, scalars
from .model import (Circuit, GTransform, GuardError, GPTError, accept_map, unit_effect, total_dim)
from .scalars import EXACT, TOL
from .theories import POLYTOPE, PSD, SIMPLEX, TheorySpec, completely_mixed_coords, extract, fiducial_effect

ACCEPT_SIDE = "accept-side"
REJECT_SIDE = "reject-side"
VIOLATION = "violation"
INCONCLUSIVE = "inconclusive"

GAP_TRACE_GUARD = 64 * 4096  # N * d


class ConfigurationError(GPTError):
    """A proof experiment's exponent rule breaks 2^(n+1) <= 4^d."""


class UnsupportedError(GPTError):
    pass


def _as_exact(m) -> np.ndarray:
    m = np.asarray(m)
    if m.dtype == object:
        return m
    return scalars.rationalize(m)


def pad_square(m: np.ndarray, size: int | None = None) -> np.ndarray:
    """Zero-pad trailing rows/columns to a square of ``size`` (default: the
    larger side)."""
    m = np.asarray(m)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    n = max(m.shape) if size is None else size
    if n < max(m.shape):
        raise ValueError("padding size smaller than matrix")
    out = scalars.zeros((n, n), scalars.mode_of(m))
    out[: m.shape[0], : m.shape[1]] = m
    return out


def sigma_max(M) -> float:
    """Largest singular value (LAPACK SVD via numpy, binary64)."""
    m = np.asarray(M.matrix if isinstance(M, GTransform) else M)
    if m.size == 0:
        raise ValueError("empty matrix")
    return float(np.linalg.svd(np.asarray(m, dtype=float), compute_uv=False)[0])


def sigma_max_eig(M) -> float:
    """Oracle route: square root of the top eigenvalue of ``M^T M``."""
    m = np.asarray(M.matrix if isinstance(M, GTransform) else M)
    if m.dtype == object:
        mtm = np.asarray(m.T @ m, dtype=float)
    else:
        mtm = m.T @ m
    return float(math.sqrt(max(np.linalg.eigvalsh(mtm)[-1], 0.0)))


# ---------------------------------------------------------------- gap traces

def _int_scaled(m: np.ndarray) -> tuple[np.ndarray, int]:
    """``m = K / q`` with integer ``K``."""
    m = _as_exact(m)
    q = reduce(lambda a, b: a * b // math.gcd(a, b), (Fraction(v).denominator for v in m.flat), 1)
    K = np.empty(m.shape, dtype=object)
    for idx, v in np.ndenumerate(m):
        K[idx] = int(Fraction(v) * q)
    return K, q


def _matpow_trace(A: np.ndarray, d: int) -> int:
    """``Tr(A^d)`` for an integer object matrix by binary exponentiation."""
    result = None
    base = A
    e = d
    while e:
        if e & 1:
            result = base if result is None else result @ base
        e >>= 1
        if e:
            base = base @ base
    return sum(result[i, i] for i in range(result.shape[0]))


def gap_trace(M, d: int, metric=None) -> Fraction:
    """Exact ``Tr((M^T M)^d)``, or ``Tr((M^T M G)^d)`` with ``metric=G``."""
    if d < 1:
        raise ValueError("d must be a positive integer")
    m = _as_exact(np.asarray(M.matrix if isinstance(M, GTransform) else M))
    if m.ndim != 2:
        raise ValueError("gap_trace needs a matrix")
    N = m.shape[1]
    if N * d > GAP_TRACE_GUARD:
        raise GuardError(f"gap trace of size {N} to power {d} exceeds the cost guard")
    K, q = _int_scaled(m)
    A = K.T @ K
    den = q * q
    if metric is not None:
        Gk, gq = _int_scaled(metric)
        A = A @ Gk
        den *= gq
    return Fraction(_matpow_trace(A, d), den**d)


def sandwich(gap: Fraction, sigma: float, d: int, N: int) -> dict:
    lower = sigma ** (2 * d)
    upper = N * sigma ** (2 * d)
    g = float(gap)
    # float sigma, exact trace: allow TOL relative slack on each side
    return {"lower": lower, "upper": upper,
            "holds": lower * (1 - TOL) <= g <= upper * (1 + TOL)}


# ---------------------------------------------------------------- re-parametrisation

@dataclass(frozen=True)
class Reparametrisation:
    """``Phi = s * T`` for one system type; squared constants are exact."""

    system: str
    center: np.ndarray
    r2: Fraction
    R2: Fraction
    s2: Fraction
    T: np.ndarray
    G: np.ndarray
    identity: bool

    @property
    def r(self) -> float:
        return math.sqrt(self.r2)

    @property
    def phi(self) -> np.ndarray:
        return math.sqrt(self.s2) * self.T

    def to_json(self) -> dict:
        return {"system": self.system, "center": scalars.fmt_all(self.center),
                "inradius_sq": str(self.r2), "circumradius_sq": str(self.R2), "scale_sq": str(self.s2),
                "identity": self.identity}


def _orthonormal_complement(u: np.ndarray) -> np.ndarray:
    """Rows spanning the orthogonal complement of ``u`` (float)."""
    u = np.asarray(u, dtype=float)
    _, _, vt = np.linalg.svd(u.reshape(1, -1))
    return vt[1:]


def reparametrise(theory: TheorySpec, system: str | None = None) -> Reparametrisation:
    """Translate the completely mixed state to the origin of the non-unit
    coordinates and scale by the inscribed-ball radius ``r``.

    ``T`` maps a state to ``(u.rho, Q(rho - (u.rho) c) / r)`` with ``Q`` an
    orthonormal basis of ``ker u``.  ``r^2`` is the minimum over facets of
    the squared distance from ``c``; qubits use the Bloch-ball radius 1.
    """
    spec = theory.system(system) if system else theory.default_system
    name = spec.type.name
    c = _as_exact(completely_mixed_coords(theory, name))
    u = _as_exact(spec.unit.coords)
    uu = u @ u
    if not all(ci * uu == ui for ci, ui in zip(c, u)):
        raise UnsupportedError("completely mixed state is not parallel to the unit effect")
    D = len(u)
    P = scalars.identity(D, EXACT) - np.multiply.outer(u, u) / uu
    if theory.membership == PSD:
        if D != 4:
            raise UnsupportedError("re-parametrisation is implemented for single qubits")
        r2 = Fraction(1)
    else:
        if not spec.facets:
            raise UnsupportedError(f"system {name!r} has no facet inequalities")
        r2 = None
        for f in spec.facets:
            f = _as_exact(f)
            fw = P @ f
            dist2 = (f @ c) ** 2 / (fw @ fw)
            r2 = dist2 if r2 is None else min(r2, dist2)
    R2 = max(((_as_exact(s.coords) - c) @ (_as_exact(s.coords) - c)) for s in spec.states)
    ident = theory.membership == SIMPLEX
    s2 = Fraction(1) if ident else 1 / (1 + R2 / r2)
    Q = _orthonormal_complement(u)
    T = np.vstack([np.asarray(u, dtype=float).reshape(1, -1),
                   (Q @ (np.eye(D) - np.outer(np.asarray(c, float), np.asarray(u, float)))) / math.sqrt(r2)])
    G = (np.multiply.outer(c, c) + r2 * P) / s2
    if ident:
        G = scalars.identity(D, EXACT)
    return Reparametrisation(name, c, Fraction(r2), Fraction(R2), Fraction(s2), T, G, ident)


def metric_for(theory: TheorySpec, systems) -> tuple[np.ndarray, bool]:
    """Kronecker product of the per-system metrics ``G``; flag is True when
    no re-parametrisation was needed."""
    reps = [reparametrise(theory, s.name) for s in systems]
    G = reduce(np.kron, [r.G for r in reps])
    return G, all(r.identity for r in reps)


# ---------------------------------------------------------------- maximal acceptance

def max_accept(theory: TheorySpec, systems, a: np.ndarray) -> tuple[object, object]:
    """Maximum of ``a . rho`` over physical normalised states on ``systems``
    and a maximising state (coordinates)."""
    tag = theory.membership
    a = np.asarray(a)
    if tag == SIMPLEX:
        i = int(np.argmax(np.asarray(a, dtype=float)))
        w = scalars.zeros(len(a), scalars.mode_of(a))
        w[i] = Fraction(1) if a.dtype == object else 1.0
        return a[i], w
    if tag == PSD:
        d = math.isqrt(len(a))
        # a . r = Tr(A rho) with A = sum a_P P = d * extract(a)
        A = d * extract(np.asarray(a, dtype=float))
        vals, vecs = np.linalg.eigh(A)
        v = vecs[:, -1]
        from .theories import embed
        return float(vals[-1]), embed(np.outer(v, v.conj()))
    if tag == POLYTOPE:
        return _max_accept_boxworld(theory, systems, _as_exact(a))
    raise UnsupportedError(f"no maximisation for membership {tag!r}")


def _max_accept_boxworld(theory, systems, a):
    """Exact LP over the fiducial-table polytope of ``len(systems)`` gbits."""
    per_site = []
    for s in systems:
        spec = theory.system(s.name)
        rows = [e.coords for m in spec.measurements.values() for e in m]
        per_site.append(np.array([[Fraction(v) for v in r] for r in rows], dtype=object))
    F = reduce(np.kron, per_site)
    D = len(a)
    u = _as_exact(unit_effect(systems, EXACT).coords)
    A_ub = [[-v for v in row] for row in F.tolist()]
    b_ub = [0] * len(A_ub)
    prob = lp.LPProblem(D, [list(u)], [1], A_ub, b_ub, c=list(a), free=range(D))
    res = lp.solve(prob, maximize=True)
    if res.status != lp.OPTIMAL:
        raise UnsupportedError(f"acceptance LP ended {res.status}")
    return res.value, np.array(res.x, dtype=object)


# ---------------------------------------------------------------- reports

@dataclass(frozen=True)
class SigmaBoundReport:
    sigma_max: float
    sigma_max_raw: float
    max_accept: object
    witness: tuple
    accept_row: np.ndarray
    metric: np.ndarray
    reparametrised: bool
    holds: bool
    raw_holds: bool
    N: int
    status: str = "ok"

    def to_json(self) -> dict:
        return {"sigma_max": self.sigma_max, "sigma_max_raw": self.sigma_max_raw,
                "max_accept": scalars.fmt(self.max_accept), "witness": scalars.fmt_all(self.witness),
                "reparametrised": self.reparametrised, "holds": self.holds, "raw_holds": self.raw_holds,
                "N": self.N, "status": self.status}


def accept_row(c: Circuit) -> np.ndarray:
    """``u . M``: the aux-register functional of a circuit."""
    m = accept_map(c)
    u = unit_effect(m.out_systems, c.mode).coords
    return u @ m.matrix


def verify_sigma_bound(c: Circuit, theory: TheorySpec, tol: float = TOL) -> SigmaBoundReport:
    """Check ``max_accept <= sigma_max(M~) + tol`` for the re-parametrised
    accept row of ``c``.  Raw-coordinate failures are recorded, not raised."""
    if not c.aux:
        raise ValueError("circuit has no auxiliary register")
    systems = c.aux_systems
    a = np.asarray(accept_row(c))
    try:
        G, ident = metric_for(theory, systems)
    except UnsupportedError:
        best, w = max_accept(theory, systems, a)
        raw = sigma_max(pad_square(a))
        return SigmaBoundReport(float("nan"), raw, best, tuple(w), a, None, False, False,
                                float(best) <= raw + tol, len(a), INCONCLUSIVE)
    phi_inv = _phi_inverse(theory, systems)
    a_tilde = np.asarray(a, dtype=float) @ phi_inv
    sig = sigma_max(pad_square(a_tilde.reshape(1, -1)))
    raw = sigma_max(pad_square(np.asarray(a, dtype=float).reshape(1, -1)))
    best, w = max_accept(theory, systems, a)
    return SigmaBoundReport(sig, raw, best, tuple(w), a, G, not ident,
                            float(best) <= sig + tol, float(best) <= raw + tol, len(a))


def _phi_inverse(theory: TheorySpec, systems) -> np.ndarray:
    mats = []
    for s in systems:
        rep = reparametrise(theory, s.name)
        if rep.identity:
            mats.append(np.eye(s.dim))
        else:
            mats.append(np.linalg.inv(rep.phi))
    return reduce(np.kron, mats)


# ---------------------------------------------------------------- GMA thresholds

def default_d_rule(n: int) -> int:
    """Smallest ``d`` with ``2^(n+1) <= 4^d``."""
    return (n + 2) // 2


def growth_ok(n: int, d: int) -> bool:
    return 2 ** (n + 1) <= 4**d


@dataclass(frozen=True)
class ProofExperiment:
    theory: TheorySpec
    circuits: Mapping[str, Circuit]
    alpha: Fraction = Fraction(2, 3)
    beta: Fraction = Fraction(1, 3)
    d_rule: Callable[[int], int] = default_d_rule
    name: str = ""

    def __post_init__(self):
        if not self.alpha > self.beta:
            raise ValueError("completeness threshold must exceed soundness threshold")


@dataclass(frozen=True)
class BoundReport:
    experiment: str
    input: str
    n: int
    N: int
    d: int
    sigma_max: float
    max_accept: object
    witness: tuple
    gap_trace: Fraction
    accept_threshold: Fraction
    reject_threshold: Fraction
    classification: str
    sandwich: dict
    chain: dict
    bound_holds: bool
    reparametrised: bool
    seed: int | None = None

    def to_json(self) -> dict:
        return {
            "experiment": self.experiment, "input": self.input, "n": self.n, "N": self.N, "d": self.d,
            "sigma_max": self.sigma_max, "max_accept": scalars.fmt(self.max_accept),
            "gap_trace": str(self.gap_trace),
            "thresholds": {"accept": str(self.accept_threshold), "reject": str(self.reject_threshold)},
            "classification": self.classification, "sandwich": self.sandwich, "chain": self.chain,
            "bound_holds": self.bound_holds, "reparametrised": self.reparametrised, "seed": self.seed,
        }


def thresholds(d: int) -> tuple[Fraction, Fraction]:
    t = Fraction(2, 3) ** (2 * d)
    return t, t / 2


def classify(f: Fraction, d: int) -> str:
    hi, lo = thresholds(d)
    if f >= hi:
        return ACCEPT_SIDE
    if f <= lo:
        return REJECT_SIDE
    return VIOLATION


def bound_report(c: Circuit, theory: TheorySpec, d_rule: Callable[[int], int] = default_d_rule,
                 experiment: str = "", input: str = "", seed: int | None = None) -> BoundReport:
    rep = verify_sigma_bound(c, theory)
    D = len(rep.accept_row)
    n = max((D - 1).bit_length(), 1)
    N = 2**n
    d = d_rule(n)
    if not growth_ok(n, d):
        raise ConfigurationError(f"exponent rule gives d={d} for n={n}: 2^{n + 1} > 4^{d}")
    if rep.metric is None:
        raise UnsupportedError("no re-parametrisation for this theory")
    f = gap_trace(rep.accept_row.reshape(1, -1), d, metric=rep.metric)
    sig = rep.sigma_max
    cls = classify(f, d)
    if not rep.holds:
        cls = VIOLATION
    hi, lo = thresholds(d)
    chain = {
        "trace_le_N_sigma": float(f) <= N * sig ** (2 * d) * (1 + 1e-9) + 1e-300,
        "N_sigma_bound": N * sig ** (2 * d),
        "N_third_bound": str(N * Fraction(1, 3) ** (2 * d)),
        "third_le_reject": N * Fraction(1, 3) ** (2 * d) <= lo,
    }
    if cls == REJECT_SIDE:
        chain["holds"] = chain["trace_le_N_sigma"] and chain["third_le_reject"] and sig <= 1 / 3 + 1e-9
    return BoundReport(experiment, input, n, N, d, sig, rep.max_accept, rep.witness, f, hi, lo, cls,
                       sandwich(f, sig, d, N), chain, rep.holds, rep.reparametrised, seed)


def gma_threshold_report(exp: ProofExperiment, inputs: Sequence[str] | None = None) -> list[BoundReport]:
    keys = list(exp.circuits) if inputs is None else list(inputs)
    return [bound_report(exp.circuits[x], exp.theory, exp.d_rule, exp.name, x) for x in keys]


# ---------------------------------------------------------------- shipped families

def gma_circuit_text(kind: str, x: str, theory: str = "classical") -> str:
    """Circuit text for input ``x`` of the accept-side or reject-side family.

    The aux register holds ``len(x)`` classical bits; the circuit measures
    them and accepts iff the string equals ``x``.  The reject-side variant
    also needs an internal coin with ``P(1) = 1/3`` to show 1.
    """
    if kind not in ("accept", "reject"):
        raise ValueError("kind must be 'accept' or 'reject'")
    if theory != "classical":
        raise ValueError("families are defined on classical bits")
    n = len(x)
    lines = ["theory classical"]
    lines += [f"aux A{j + 1}:bit" for j in range(n)]
    if kind == "reject":
        lines += ["system C:bit", "prepare dist(2/3, 1/3) -> C", "measure basis() C -> coin"]
    wires = ", ".join(f"A{j + 1}" for j in range(n))
    vars_ = ", ".join(f"z{j + 1}" for j in range(n))
    lines.append(f"measure basis() {wires} -> {vars_}")
    cond = " and ".join(f"z{j + 1} == {b}" for j, b in enumerate(x))
    if kind == "reject":
        cond = "coin == 1 and " + cond
    lines.append(f"accept {cond}")
    return "\n".join(lines) + "\n"


def gma_family(kind: str, n: int, mode: str = EXACT) -> ProofExperiment:
    from . import dsl
    from .theories import classical_theory
    theory = classical_theory(2, mode)
    circuits = {}
    for k in range(2**n):
        x = format(k, f"0{n}b")
        circuits[x] = dsl.validate(dsl.parse(gma_circuit_text(kind, x)), theory)
    return ProofExperiment(theory, circuits, name=f"gma-{kind}-n{n}")
