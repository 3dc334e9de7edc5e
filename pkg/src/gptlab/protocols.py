"""Advice, randomness and post-selection experiments.

Each function returns a plain report object with a ``to_json`` method so
the command line can emit deterministic records.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Callable, Mapping, Sequence

import numpy as np

from . import scalars
from .model import (Circuit, Device, GEffect, GTransform, GVector, GuardError, Node, OUTCOME_GUARD,
                    PostSelectionError, accept_functional, accept_probability, evaluate_closed,
                    post_select, sample)
from .principles import norms
from .scalars import APPROX, EXACT, TOL, Mode
from .theories import (GBIT, PSD, TheorySpec, TruthTable, classical_theory, embed, extract,
                       fiducial_effect, quantum_theory, random_density, random_pure, rho_f)

ALPHA = Fraction(2, 3)
BETA = Fraction(1, 3)


# ---------------------------------------------------------------- Boxworld advice

def parity_circuit(f: TruthTable, x: Sequence[int], mode: Mode = EXACT) -> Circuit:
    """Prepare ``rho_f`` and measure party ``j`` with fiducial ``x_j``;
    accept iff the outcome parity is 1."""
    if len(x) != f.n:
        raise ValueError(f"input of length {len(x)} for a function of arity {f.n}")
    wires = tuple(f"A{j + 1}" for j in range(f.n))
    nodes = [Node(Device.prepare(rho_f(f, mode), name="rho_f"), (), wires)]
    for j, xj in enumerate(x):
        effs = (fiducial_effect(int(xj), 0, mode), fiducial_effect(int(xj), 1, mode))
        nodes.append(Node(Device.measure(*effs, name=f"fiducial{xj}"), (wires[j],), (), f"a{j + 1}"))
    return Circuit(tuple(nodes), accept=_OddParity())


@dataclass(frozen=True)
class _OddParity:
    def __call__(self, z: Mapping[str, int]) -> bool:
        return sum(z.values()) % 2 == 1


def parity_distribution(f: TruthTable, x: Sequence[int], mode: Mode = EXACT,
                        state: GVector | None = None) -> dict[tuple[int, ...], object]:
    """Outcome distribution of the parity circuit.

    Up to 8 parties the generic circuit evaluator is used.  Beyond that the
    state is first restricted to the coordinates the chosen fiducial effects
    can see (unit and ``X_{x_j}`` on each site) and contracted with
    ``2 * (x_a|``, i.e. the integer matrix ``[[1, 1], [1, -1]]`` per site,
    dividing by ``2^n`` at the end.  ``state`` lets callers reuse one
    ``rho_f`` across inputs.
    """
    if len(x) != f.n:
        raise ValueError(f"input of length {len(x)} for a function of arity {f.n}")
    if f.n <= 8 and state is None:
        return dict(evaluate_closed(parity_circuit(f, x, mode)).probs)
    t, scale = _sliced(f, x, mode, state)
    return {z: int(p) * scale if isinstance(p, np.integer) else p * scale
            for z, p in np.ndenumerate(t) if p != 0}


def _sliced(f: TruthTable, x: Sequence[int], mode: Mode, state: GVector | None):
    state = rho_f(f, mode) if state is None else state
    t = np.asarray(state.coords).reshape([3] * f.n)
    t = t[np.ix_(*[[0, 1 + int(xj)] for xj in x])]
    H = np.array([[1, 1], [1, -1]])
    if mode == EXACT and all(v.denominator == 1 for v in t.flat):
        t = t.astype(np.int64)
        scale = Fraction(1, 2**f.n)
    else:
        H = H.astype(object) if mode == EXACT else H.astype(float)
        scale = Fraction(1, 2**f.n) if mode == EXACT else 0.5**f.n
    for k in range(f.n):
        t = np.moveaxis(np.tensordot(H, t, axes=([1], [k])), 0, k)
    return t, scale


def _parity_grid(n: int) -> np.ndarray:
    return np.indices([2] * n).sum(axis=0) % 2


def advice_parity_eval(f: TruthTable, x: Sequence[int], mode: Mode = EXACT, seed: int | None = None,
                       state: GVector | None = None) -> int:
    """Return the parity of the fiducial outcomes on ``rho_f``.

    Every outcome string in the support is checked to have the same parity
    (so the result is deterministic); with ``seed`` one string is sampled
    and its parity returned.
    """
    if seed is None and (state is not None or f.n > 8):
        t, _ = _sliced(f, x, mode, state)
        parities = set(np.unique(_parity_grid(f.n)[np.asarray(t != 0, dtype=bool)]).tolist())
        if len(parities) != 1:
            raise AssertionError(f"outcome parity is not deterministic for input {tuple(x)}")
        return parities.pop()
    dist = parity_distribution(f, x, mode, state)
    parities = {sum(z) % 2 for z in dist}
    if len(parities) != 1:
        raise AssertionError(f"outcome parity is not deterministic for input {tuple(x)}")
    if seed is not None:
        from .model import OutcomeDistribution
        d = OutcomeDistribution(tuple(f"a{j + 1}" for j in range(f.n)), dist, mode)
        return sum(sample(d, seed, 1)[0]) % 2
    return parities.pop()


@dataclass(frozen=True)
class AdviceDemoReport:
    n: int
    table: tuple[int, ...]
    results: tuple[tuple[str, int, int], ...]

    @property
    def matches(self) -> int:
        return sum(1 for _, want, got in self.results if want == got)

    @property
    def exact_match(self) -> bool:
        return self.matches == len(self.results)

    def to_json(self) -> dict:
        return {"n": self.n, "truth_table": "".join(map(str, self.table)),
                "results": [{"input": x, "f": w, "evaluated": g} for x, w, g in self.results],
                "matches": self.matches, "total": len(self.results), "exact_match": self.exact_match}


def advice_demo(f: TruthTable, mode: Mode = EXACT) -> AdviceDemoReport:
    rows = []
    state = rho_f(f, mode) if f.n > 8 else None
    for x in f.inputs():
        rows.append(("".join(map(str, x)), f(x), advice_parity_eval(f, x, mode, state=state)))
    return AdviceDemoReport(f.n, f.bits, tuple(rows))


# ---------------------------------------------------------------- randomness

@dataclass(frozen=True)
class UnbiasReport:
    p: object
    n_samples: int
    seed: int
    kept: int
    zeros: int
    bits: tuple[int, ...]
    p01: object
    p10: object

    @property
    def keep_rate(self) -> float:
        return self.kept / self.n_samples

    @property
    def expected_keep_rate(self) -> float:
        return float(2 * self.p * (1 - self.p))

    @property
    def p_hat0(self) -> float:
        return self.zeros / self.kept if self.kept else float("nan")

    @property
    def bias_bound(self) -> float:
        """Four binomial standard deviations of ``P^(0)`` around 1/2."""
        return 4 * math.sqrt(1 / (4 * self.kept)) if self.kept else float("inf")

    @property
    def keep_bound(self) -> float:
        q = self.expected_keep_rate
        return 3 * math.sqrt(q * (1 - q) / self.n_samples)

    @property
    def bias_ok(self) -> bool:
        return abs(self.p_hat0 - 0.5) < self.bias_bound

    @property
    def keep_ok(self) -> bool:
        return abs(self.keep_rate - self.expected_keep_rate) <= self.keep_bound

    def to_json(self, stream: bool = False) -> dict:
        out = {"p": scalars.fmt(self.p), "n_samples": self.n_samples, "seed": self.seed,
               "kept": self.kept, "p_hat0": self.p_hat0, "bias_bound": self.bias_bound,
               "bias_ok": self.bias_ok, "keep_rate": self.keep_rate,
               "expected_keep_rate": self.expected_keep_rate, "keep_bound": self.keep_bound,
               "keep_ok": self.keep_ok, "p01": scalars.fmt(self.p01), "p10": scalars.fmt(self.p10)}
        if stream:
            out["bits"] = "".join(map(str, self.bits))
        return out


def two_copy_circuit(y: GVector, e0: GEffect) -> Circuit:
    """Two independent copies of ``y`` measured with ``{e0, u - e0}``."""
    from .model import unit_effect
    u = unit_effect(e0.systems, e0.mode)
    e1 = GEffect(e0.systems, u.coords - e0.coords)
    nodes = (
        Node(Device.prepare(y), (), ("Y1",)),
        Node(Device.prepare(y), (), ("Y2",)),
        Node(Device.measure(e0, e1), ("Y1",), (), "a"),
        Node(Device.measure(e0, e1), ("Y2",), (), "b"),
    )
    return Circuit(nodes)


def von_neumann_bit(theory: TheorySpec, y: GVector, e0: GEffect, n_samples: int, seed: int) -> UnbiasReport:
    """Von Neumann extraction: 01 -> 0, 10 -> 1, 00 and 11 discarded."""
    p = e0.coords @ y.coords
    if not (0 < p < 1) or (y.mode == APPROX and (p <= TOL or p >= 1 - TOL)):
        raise ValueError(f"(e0|y) = {p} is deterministic; no randomness to extract")
    d = evaluate_closed(two_copy_circuit(y, e0))
    draws = sample(d, seed, n_samples)
    bits = tuple(0 if z == (0, 1) else 1 for z in draws if z[0] != z[1])
    zeros = sum(1 for b in bits if b == 0)
    return UnbiasReport(p, n_samples, seed, len(bits), zeros, bits, d.prob((0, 1)), d.prob((1, 0)))


def biased_qubit(p, mode: Mode = EXACT) -> tuple[TheorySpec, GVector, GEffect]:
    """A qubit state on the z axis with ``P(0) = p`` and the effect ``|0><0|``."""
    theory = quantum_theory(1, mode)
    sys = theory.type("qubit")
    p = scalars.scalar(p, mode) if not isinstance(p, float) or mode == APPROX else float(p)
    if mode == EXACT and isinstance(p, float):
        p = Fraction(p).limit_denominator(10**9)
    z = 2 * p - 1
    y = GVector((sys,), scalars.array([1, 0, 0, z], mode))
    e0 = theory.system("qubit").measurements["z"][0]
    return theory, y, e0


def permutation_transform(f, n: int | None = None) -> GTransform:
    """``T_f |x) = |f(x))`` on ``n`` classical bits.

    ``f`` is a sequence giving the image index of each input index (first
    bit most significant) or a callable on bit tuples (then ``n`` is needed).
    """
    if callable(f):
        if n is None:
            raise ValueError("arity needed for a callable permutation")
        images = [_index(f(x)) for x in itertools.product((0, 1), repeat=n)]
    else:
        images = [int(v) for v in f]
        n = max(len(images).bit_length() - 1, 0)
        if 2**n != len(images):
            raise ValueError("permutation length is not a power of two")
    if n > 10:
        raise GuardError("permutations on more than 10 bits are outside desk scale")
    if sorted(images) != list(range(2**n)):
        raise ValueError("f is not a bijection")
    bit = classical_theory(2).type("bit")
    m = scalars.zeros((2**n, 2**n), EXACT)
    for x, fx in enumerate(images):
        m[fx, x] = Fraction(1)
    return GTransform(tuple([bit] * n), tuple([bit] * n), m)


def _index(bits) -> int:
    out = 0
    for b in bits:
        out = 2 * out + int(b)
    return out


# ---------------------------------------------------------------- measurement update

def dual_state(effect: GEffect, tol: float = 1e-9) -> GVector:
    """The pure state dual to a pure (rank-one projector) quantum effect."""
    coords = np.asarray(effect.coords)
    e0 = coords[0]
    if e0 == 0:
        raise ValueError("zero effect has no dual state")
    E = math.isqrt(len(coords)) * extract(np.asarray(coords, dtype=float))
    vals = np.linalg.eigvalsh(E)
    if abs(vals[-1] - 1) > tol or np.any(np.abs(vals[:-1]) > tol):
        raise ValueError("effect is not a rank-one projector")
    return GVector(effect.systems, coords / e0)


def measurement_update(theory: TheorySpec, state: GVector, effect: GEffect) -> GVector:
    """Post-measurement state for a pure outcome: the normalised state dual
    to the effect, whatever the input state was."""
    if theory.membership != PSD:
        raise ValueError("measurement update needs a self-dual theory (quantum)")
    p = effect.coords @ state.coords
    if p == 0 or (state.mode == APPROX and abs(p) <= TOL):
        raise PostSelectionError("outcome has probability zero")
    return dual_state(effect)


# ---------------------------------------------------------------- gentle measurement

@dataclass(frozen=True)
class GentleReport:
    trials: int
    seed: int
    dims: tuple[int, ...]
    violations: int
    max_ratio: float
    eps_zero_cases: int
    eps_zero_exact: bool
    boundary_min_rhs: float
    worst: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"trials": self.trials, "seed": self.seed, "dims": list(self.dims),
                "violations": self.violations, "max_ratio": self.max_ratio,
                "eps_zero_cases": self.eps_zero_cases, "eps_zero_exact": self.eps_zero_exact,
                "boundary_min_rhs": self.boundary_min_rhs, "worst": self.worst}


class _QuditTheory:
    """Just enough of a theory for the norm routines on one qudit."""

    membership = PSD


def gentle_measurement_check(n_trials: int = 10_000, seed: int = 0, dims: Sequence[int] = (2, 3, 4),
                             tol: float = TOL) -> GentleReport:
    """Sample states ``rho`` and pure effects ``|psi><psi|`` and test
    ``|rho - rho_0|_phy <= c sqrt(2 eps)`` with ``eps = 1 - <psi|rho|psi>``
    and ``rho_0 = |psi><psi|``.

    Trials cycle through: random mixed states, states close to ``psi``,
    near-orthogonal states, and exact ``eps = 0`` cases.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    violations = 0
    max_ratio = 0.0
    worst: dict = {}
    zero_cases = 0
    zero_exact = True
    boundary = float("inf")
    from .model import SystemType
    for t in range(n_trials):
        d = dims[t % len(dims)]
        sys = SystemType(f"qudit{d}", d * d, tuple(["1"] + ["0"] * (d * d - 1)))
        psi = random_pure(d, rng)
        proj = np.outer(psi, psi.conj())
        kind = t % 4
        if kind == 3:
            # exact eps = 0: rho is the dual pure state itself
            rho0 = GVector((sys,), embed(proj))
            v = rho0 - rho0
            rep = norms(_QuditTheory, v)
            zero_cases += 1
            zero_exact = zero_exact and rep.phy_norm == 0
            continue
        if kind == 0:
            rho = random_density(d, rng, rank=int(rng.integers(1, d + 1)))
        elif kind == 1:
            lam = float(rng.uniform(0, 0.05))
            rho = (1 - lam) * proj + lam * random_density(d, rng)
        else:
            perp = random_pure(d, rng)
            perp = perp - (psi.conj() @ perp) * psi
            perp /= np.linalg.norm(perp)
            mix = float(rng.uniform(0, 0.02))
            phi = math.sqrt(1 - mix) * perp + math.sqrt(mix) * psi
            rho = np.outer(phi, phi.conj())
        eps = max(0.0, 1 - float(np.real(psi.conj() @ rho @ psi)))
        v = GVector((sys,), embed(rho) - embed(proj))
        rep = norms(_QuditTheory, v)
        lhs = rep.phy_norm
        rhs = rep.c_constant * math.sqrt(2 * eps)
        if kind == 2:
            boundary = min(boundary, rhs)
        if lhs > rhs + tol:
            violations += 1
        ratio = lhs / rhs if rhs > 0 else (0.0 if lhs <= tol else float("inf"))
        if ratio > max_ratio:
            max_ratio = ratio
            worst = {"trial": t, "dim": d, "eps": eps, "lhs": lhs, "rhs": rhs}
    return GentleReport(n_trials, seed, tuple(dims), violations, max_ratio, zero_cases, zero_exact,
                        boundary, worst)


# ---------------------------------------------------------------- amplification

@dataclass(frozen=True)
class _AllCopies:
    pred: Callable
    labels: tuple[tuple[tuple[int, str], ...], ...]

    def __call__(self, z: Mapping[str, int]) -> bool:
        return all(self.pred({label: z[f"{label}@{i}"] for i, label in labels}) for labels in self.labels)


def amplify(c: Circuit, k: int, guard: int = OUTCOME_GUARD) -> Circuit:
    """``k`` parallel copies with a majority vote; the aux register is the
    concatenation of the copies' registers (so product advice is
    ``rho^{(x)k}``)."""
    if k < 1 or k % 2 == 0:
        raise ValueError("k must be a positive odd number")
    if k == 1:
        return c
    if c.outcome_count() ** k > guard:
        raise GuardError(f"{k} copies give {c.outcome_count() ** k} outcome strings, guard is {guard}")
    nodes = []
    aux = []
    for i in range(k):
        ren = lambda w, i=i: f"{w}@{i}"
        for w, t in c.aux:
            aux.append((ren(w), t))
        for node in c.nodes:
            nodes.append(Node(node.device, tuple(map(ren, node.inputs)), tuple(map(ren, node.outputs)),
                              None if node.label is None else ren(node.label)))
    labels = tuple(tuple((i, label) for label in c.labels) for i in range(k))
    maj = _MajorityVote(c.accept, labels, k)
    post = _AllCopies(c.postselect, labels) if c.postselect is not None else None
    return Circuit(tuple(nodes), tuple(aux), maj, post, f"{c.name}^maj{k}")


@dataclass(frozen=True)
class _MajorityVote:
    accept: Callable
    labels: tuple[tuple[tuple[int, str], ...], ...]
    k: int

    def __call__(self, z: Mapping[str, int]) -> bool:
        votes = 0
        for labels in self.labels:
            if self.accept({label: z[f"{label}@{i}"] for i, label in labels}):
                votes += 1
        return 2 * votes > self.k


def majority_tail(p, k: int):
    """``P(Binomial(k, p) > k/2)``."""
    return sum(comb(k, j) * p**j * (1 - p) ** (k - j) for j in range(k // 2 + 1, k + 1))


# ---------------------------------------------------------------- distillation

@dataclass(frozen=True)
class AdviceExperiment:
    theory: TheorySpec
    circuits: Mapping[str, Circuit]
    alpha: Fraction = ALPHA
    beta: Fraction = BETA
    name: str = ""

    def __post_init__(self):
        if not self.alpha > self.beta:
            raise ValueError("completeness threshold must exceed soundness threshold")
        regs = {c.aux_systems for c in self.circuits.values()}
        if len(regs) != 1:
            raise ValueError("every circuit must read the same advice register")


@dataclass(frozen=True)
class DistillStep:
    iteration: int
    success: tuple[object, ...]
    input: str | None
    postselect_prob: object | None
    state: tuple

    def to_json(self) -> dict:
        return {"iteration": self.iteration, "success": scalars.fmt_all(self.success),
                "input": self.input,
                "postselect_prob": None if self.postselect_prob is None else scalars.fmt(self.postselect_prob),
                "state": scalars.fmt_all(self.state)}


@dataclass(frozen=True)
class DistillResult:
    name: str
    complete: bool
    iterations: int
    t_max: int
    trace: tuple[DistillStep, ...]
    final_state: GVector
    reason: str = ""

    def to_json(self) -> dict:
        return {"experiment": self.name, "complete": self.complete, "iterations": self.iterations,
                "t_max": self.t_max, "reason": self.reason,
                "final_state": scalars.fmt_all(self.final_state.coords),
                "trace": [s.to_json() for s in self.trace]}


def advice_distillation(exp: AdviceExperiment, t_max: int | None = None, amplify_k: int = 1) -> DistillResult:
    """Start from the completely mixed advice; while some input accepts with
    probability below ``alpha``, run that input's circuit, keep the accept
    outcome and update the advice with the measurement-update rule."""
    theory = exp.theory
    if theory.membership != PSD:
        raise ValueError("distillation is implemented for quantum advice")
    inputs = list(exp.circuits)
    t_max = 8 * len(inputs) if t_max is None else t_max
    circuits = {x: amplify(c, amplify_k) for x, c in exp.circuits.items()}
    systems = next(iter(exp.circuits.values())).aux_systems
    mode = theory.mode
    D = int(np.prod([s.dim for s in systems]))
    coords = scalars.zeros(D, mode)
    coords[0] = Fraction(1) if mode == EXACT else 1.0
    rho = GVector(systems, coords)
    effects = {x: accept_functional(exp.circuits[x]) for x in inputs}
    trace = []
    for it in range(t_max + 1):
        probs = tuple(accept_probability(circuits[x], _power(rho, amplify_k)) for x in inputs)
        bad = next((x for x, p in zip(inputs, probs) if p < exp.alpha), None)
        if bad is None:
            trace.append(DistillStep(it, probs, None, None, tuple(rho.coords)))
            return DistillResult(exp.name, True, it, t_max, tuple(trace), rho)
        if it == t_max:
            trace.append(DistillStep(it, probs, None, None, tuple(rho.coords)))
            return DistillResult(exp.name, False, it, t_max, tuple(trace), rho, "iteration cap reached")
        p_acc = effects[bad].coords @ rho.coords
        trace.append(DistillStep(it, probs, bad, p_acc, tuple(rho.coords)))
        try:
            rho = measurement_update(theory, rho, effects[bad])
        except PostSelectionError:
            return DistillResult(exp.name, False, it, t_max, tuple(trace), rho,
                                 f"accept outcome of input {bad} has probability zero")
        except ValueError as exc:
            return DistillResult(exp.name, False, it, t_max, tuple(trace), rho, str(exc))
    raise AssertionError("unreachable")


def _power(rho: GVector, k: int) -> GVector:
    from .model import tensor_all
    return rho if k == 1 else tensor_all([rho] * k)


def load_family(source) -> AdviceExperiment:
    """Read a distillation family: ``{"name", "theory", "alpha", "beta",
    "inputs": [{"input": str, "circuit": gpc text}, ...]}``."""
    from . import dsl, theories
    if isinstance(source, (str, bytes)) and not str(source).lstrip().startswith("{"):
        with open(source, encoding="utf-8") as fh:
            doc = json.load(fh)
    elif isinstance(source, Mapping):
        doc = source
    else:
        doc = json.loads(source)
    theory = theories.builtin(doc.get("theory", "quantum"), doc.get("mode", EXACT))
    circuits = {}
    for entry in doc["inputs"]:
        circuits[str(entry["input"])] = dsl.validate(dsl.parse(entry["circuit"]), theory)
    return AdviceExperiment(theory, circuits, Fraction(doc.get("alpha", "2/3")),
                            Fraction(doc.get("beta", "1/3")), doc.get("name", ""))


# ---------------------------------------------------------------- post-selection

@dataclass(frozen=True)
class PostBGPReport:
    p_s: object
    lower_bound: object
    cond_accept: object
    bound_ok: bool
    expected: int | None
    threshold_ok: bool | None
    classification: str
    failed_clause: str | None

    def to_json(self) -> dict:
        return {"p_s": scalars.fmt(self.p_s), "lower_bound": scalars.fmt(self.lower_bound),
                "cond_accept": scalars.fmt(self.cond_accept), "bound_ok": self.bound_ok,
                "expected": self.expected, "threshold_ok": self.threshold_ok,
                "classification": self.classification, "failed_clause": self.failed_clause}


def postbgp_check(c: Circuit, S: Callable | None = None, D: int = 2, w: int = 1, expected: int | None = None,
                  alpha: Fraction = ALPHA, beta: Fraction = BETA) -> PostBGPReport:
    """``P(z in S) >= 1/D^w`` and the conditional acceptance thresholds.

    ``S`` defaults to the circuit's post-selection predicate (or every
    string).  With ``expected`` in {0, 1} the matching threshold is checked;
    otherwise the conditional acceptance is only classified.
    """
    S = S if S is not None else (c.postselect or (lambda z: True))
    dist = evaluate_closed(c)
    cond, p_s = post_select(dist, S)
    acc = cond.event(c.accept)
    bound = Fraction(1, D**w) if dist.mode == EXACT else 1 / D**w
    bound_ok = p_s >= bound
    if acc >= alpha:
        cls = "accept"
    elif acc <= beta:
        cls = "reject"
    else:
        cls = "gap"
    threshold_ok = None
    if expected is not None:
        threshold_ok = acc >= alpha if expected else acc <= beta
    failed = None
    if not bound_ok:
        failed = "postselection-probability"
    elif threshold_ok is False:
        failed = "completeness" if expected else "soundness"
    return PostBGPReport(p_s, bound, acc, bound_ok, expected, threshold_ok, cls, failed)
