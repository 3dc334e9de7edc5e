"""Vector-space semantics of circuits.

States are column vectors, effects are row vectors and transformations are
matrices, all in fiducial coordinates of their systems.  Composite systems
use the Kronecker product with ports ordered row-major by declaration.

A :class:`Circuit` is a DAG of :class:`Node` objects joined by named wires.
Evaluation enumerates joint outcome strings depth-first in topological order,
so the partially contracted tensor is shared by every string with a common
prefix.  Devices without an outcome label are evaluated with their outcomes
summed (the outcome is forgotten).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Mapping, Sequence, Union

import numpy as np

from . import scalars
from .scalars import EXACT, TOL, Mode

OUTCOME_GUARD = 2**20

Outcomes = Mapping[str, int]
Predicate = Callable[[Outcomes], bool]


class GPTError(Exception):
    """Base class for modelling errors."""


class WiringError(GPTError):
    """Type mismatch, dangling or doubly used wire, or a cycle."""


class OpenPortError(GPTError):
    """A circuit that must be closed still has open ports."""


class GuardError(GPTError):
    """A size guard (outcome strings, dimensions) was exceeded."""


class PostSelectionError(GPTError):
    """Conditioning on an event of probability zero."""


class NormalisationError(GPTError):
    pass


@dataclass(frozen=True)
class SystemType:
    """An elementary system: a label and its fiducial dimension.

    ``unit`` holds the coordinates of the deterministic effect as strings or
    fractions; it does not take part in equality.
    """

    name: str
    dim: int
    unit: tuple | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        if self.unit is not None and len(self.unit) != self.dim:
            raise ValueError("unit effect has wrong length")

    def unit_coords(self, mode: Mode) -> np.ndarray:
        if self.unit is None:
            raise OpenPortError(f"system {self.name!r} has no unit effect")
        return scalars.array(list(self.unit), mode)


Systems = tuple[SystemType, ...]


def total_dim(systems: Sequence[SystemType]) -> int:
    return math.prod(s.dim for s in systems)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=arr.dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GVector:
    """A (possibly sub-normalised) state."""

    systems: Systems
    coords: np.ndarray
    outcome_label: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "systems", tuple(self.systems))
        coords = np.asarray(self.coords)
        if coords.shape != (total_dim(self.systems),):
            raise ValueError(f"state of shape {coords.shape} on systems of dim {total_dim(self.systems)}")
        object.__setattr__(self, "coords", _frozen(coords))

    @property
    def mode(self) -> Mode:
        return scalars.mode_of(self.coords)

    def __eq__(self, other):
        return (isinstance(other, GVector) and self.systems == other.systems
                and scalars.allclose(self.coords, other.coords))

    def __sub__(self, other: "GVector") -> "GVector":
        if self.systems != other.systems:
            raise WiringError("cannot subtract states on different systems")
        return GVector(self.systems, self.coords - other.coords)

    def scaled(self, factor) -> "GVector":
        return GVector(self.systems, self.coords * factor, self.outcome_label)


@dataclass(frozen=True, eq=False)
class GEffect:
    systems: Systems
    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "systems", tuple(self.systems))
        coords = np.asarray(self.coords)
        if coords.shape != (total_dim(self.systems),):
            raise ValueError(f"effect of shape {coords.shape} on systems of dim {total_dim(self.systems)}")
        object.__setattr__(self, "coords", _frozen(coords))

    @property
    def mode(self) -> Mode:
        return scalars.mode_of(self.coords)

    def __eq__(self, other):
        return (isinstance(other, GEffect) and self.systems == other.systems
                and scalars.allclose(self.coords, other.coords))

    def __add__(self, other: "GEffect") -> "GEffect":
        if self.systems != other.systems:
            raise WiringError("cannot add effects on different systems")
        return GEffect(self.systems, self.coords + other.coords)

    def __call__(self, state: GVector):
        return pair(self, state)


@dataclass(frozen=True, eq=False)
class GTransform:
    in_systems: Systems
    out_systems: Systems
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "in_systems", tuple(self.in_systems))
        object.__setattr__(self, "out_systems", tuple(self.out_systems))
        m = np.asarray(self.matrix)
        shape = (total_dim(self.out_systems), total_dim(self.in_systems))
        if m.shape != shape:
            raise ValueError(f"matrix of shape {m.shape}, expected {shape}")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def mode(self) -> Mode:
        return scalars.mode_of(self.matrix)

    def __eq__(self, other):
        return (isinstance(other, GTransform) and self.in_systems == other.in_systems
                and self.out_systems == other.out_systems
                and scalars.allclose(self.matrix, other.matrix))

    def __call__(self, state: GVector) -> GVector:
        return apply(self, state)


def identity_transform(systems: Sequence[SystemType], mode: Mode = EXACT) -> GTransform:
    systems = tuple(systems)
    return GTransform(systems, systems, scalars.identity(total_dim(systems), mode))


def unit_effect(systems: Sequence[SystemType], mode: Mode = EXACT) -> GEffect:
    coords = np.ones(1, dtype=object if mode == EXACT else float)
    if mode == EXACT:
        coords[0] = Fraction(1)
    for s in systems:
        coords = np.kron(coords, s.unit_coords(mode))
    return GEffect(tuple(systems), coords)


def tensor(a, b):
    """Parallel composition of two states, effects or transformations."""
    if type(a) is not type(b):
        raise TypeError(f"cannot tensor {type(a).__name__} with {type(b).__name__}")
    if isinstance(a, GVector):
        scalars.same_mode(a.coords, b.coords)
        return GVector(a.systems + b.systems, np.kron(a.coords, b.coords))
    if isinstance(a, GEffect):
        scalars.same_mode(a.coords, b.coords)
        return GEffect(a.systems + b.systems, np.kron(a.coords, b.coords))
    if isinstance(a, GTransform):
        scalars.same_mode(a.matrix, b.matrix)
        return GTransform(a.in_systems + b.in_systems, a.out_systems + b.out_systems,
                          np.kron(a.matrix, b.matrix))
    raise TypeError(f"cannot tensor objects of type {type(a).__name__}")


def tensor_all(items):
    items = list(items)
    if not items:
        raise ValueError("empty tensor product")
    out = items[0]
    for item in items[1:]:
        out = tensor(out, item)
    return out


def sequential_compose(t2: GTransform, t1: GTransform) -> GTransform:
    """``t2 ∘ t1``: apply ``t1`` first."""
    if t1.out_systems != t2.in_systems:
        raise WiringError(f"output {_names(t1.out_systems)} does not match input {_names(t2.in_systems)}")
    scalars.same_mode(t1.matrix, t2.matrix)
    return GTransform(t1.in_systems, t2.out_systems, t2.matrix @ t1.matrix)


def apply(t: GTransform, state: GVector) -> GVector:
    if t.in_systems != state.systems:
        raise WiringError(f"transformation expects {_names(t.in_systems)}, got {_names(state.systems)}")
    return GVector(t.out_systems, t.matrix @ state.coords, state.outcome_label)


def pair(effect: GEffect, state: GVector):
    if effect.systems != state.systems:
        raise WiringError(f"effect on {_names(effect.systems)} applied to state on {_names(state.systems)}")
    scalars.same_mode(effect.coords, state.coords)
    return effect.coords @ state.coords


def _names(systems) -> str:
    return "(" + ", ".join(s.name for s in systems) + ")"


# ---------------------------------------------------------------- devices

PREPARATION = "preparation"
TRANSFORMATION = "transformation"
MEASUREMENT = "measurement"

Component = Union[GVector, GTransform, GEffect]


@dataclass(frozen=True)
class Device:
    """A laboratory device: one component per pointer position."""

    kind: str
    inputs: Systems
    outputs: Systems
    outcomes: tuple[Component, ...]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        object.__setattr__(self, "outcomes", tuple(self.outcomes))
        if not self.outcomes:
            raise ValueError("a device needs at least one outcome")
        expected = {PREPARATION: GVector, TRANSFORMATION: GTransform, MEASUREMENT: GEffect}.get(self.kind)
        if expected is None:
            raise ValueError(f"unknown device kind {self.kind!r}")
        for comp in self.outcomes:
            if not isinstance(comp, expected):
                raise TypeError(f"{self.kind} outcome must be {expected.__name__}")
            ins, outs = _ports(comp)
            if ins != self.inputs or outs != self.outputs:
                raise WiringError(f"outcome ports of device {self.name!r} do not match its declared ports")
        scalars.same_mode(*(_array(c) for c in self.outcomes))

    @property
    def mode(self) -> Mode:
        return scalars.mode_of(_array(self.outcomes[0]))

    def summed(self) -> Component:
        """The coarse-graining of all outcomes into one."""
        total = _array(self.outcomes[0])
        for comp in self.outcomes[1:]:
            total = total + _array(comp)
        return _with_array(self.outcomes[0], total)

    @classmethod
    def prepare(cls, *states: GVector, name: str = "") -> "Device":
        return cls(PREPARATION, (), states[0].systems, states, name)

    @classmethod
    def transform(cls, *maps: GTransform, name: str = "") -> "Device":
        return cls(TRANSFORMATION, maps[0].in_systems, maps[0].out_systems, maps, name)

    @classmethod
    def measure(cls, *effects: GEffect, name: str = "") -> "Device":
        return cls(MEASUREMENT, effects[0].systems, (), effects, name)


def _ports(comp: Component) -> tuple[Systems, Systems]:
    if isinstance(comp, GVector):
        return (), comp.systems
    if isinstance(comp, GEffect):
        return comp.systems, ()
    return comp.in_systems, comp.out_systems


def _array(comp: Component) -> np.ndarray:
    if isinstance(comp, GTransform):
        return comp.matrix
    return comp.coords


def _with_array(template: Component, arr: np.ndarray) -> Component:
    if isinstance(template, GVector):
        return GVector(template.systems, arr)
    if isinstance(template, GEffect):
        return GEffect(template.systems, arr)
    return GTransform(template.in_systems, template.out_systems, arr)


def coarse_grain(dev: Device, partition: Sequence[Sequence[int]]) -> Device:
    """Join outcomes: cell ``j`` of the partition becomes outcome ``j``."""
    seen: list[int] = [i for cell in partition for i in cell]
    if sorted(seen) != list(range(len(dev.outcomes))):
        if len(seen) != len(set(seen)):
            raise ValueError("partition cells overlap")
        raise ValueError("partition does not cover the outcome set exactly")
    if any(len(cell) == 0 for cell in partition):
        raise ValueError("empty partition cell")
    new = []
    for cell in partition:
        total = _array(dev.outcomes[cell[0]])
        for i in cell[1:]:
            total = total + _array(dev.outcomes[i])
        new.append(_with_array(dev.outcomes[0], total))
    return Device(dev.kind, dev.inputs, dev.outputs, tuple(new), dev.name)


# ---------------------------------------------------------------- circuits

@dataclass(frozen=True)
class Node:
    device: Device
    inputs: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()
    label: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        if len(self.inputs) != len(self.device.inputs) or len(self.outputs) != len(self.device.outputs):
            raise WiringError(f"node {self.label or self.device.name!r}: wire count does not match device ports")


def _accept_all(z: Outcomes) -> bool:
    return True


@dataclass(frozen=True)
class Circuit:
    """A typed DAG of devices with an ordered auxiliary input register.

    ``accept`` and ``postselect`` are predicates over ``{label: outcome}``.
    Wires produced and never consumed form the residual output register.
    """

    nodes: tuple[Node, ...]
    aux: tuple[tuple[str, SystemType], ...] = ()
    accept: Predicate = _accept_all
    postselect: Predicate | None = None
    name: str = ""
    order: tuple[int, ...] = field(init=False, repr=False, compare=False)
    wire_types: Mapping[str, SystemType] = field(init=False, repr=False, compare=False)
    residual: tuple[str, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "aux", tuple((w, t) for w, t in self.aux))
        producer: dict[str, int] = {}
        types: dict[str, SystemType] = {}
        for w, t in self.aux:
            if w in types:
                raise WiringError(f"wire {w!r} declared twice")
            types[w] = t
            producer[w] = -1
        labels = set()
        for i, node in enumerate(self.nodes):
            if node.label is not None:
                if node.label in labels:
                    raise WiringError(f"outcome label {node.label!r} bound twice")
                labels.add(node.label)
            for w, t in zip(node.outputs, node.device.outputs):
                if w in types:
                    raise WiringError(f"wire {w!r} has two sources")
                types[w] = t
                producer[w] = i
        consumed: set[str] = set()
        deps: list[set[int]] = [set() for _ in self.nodes]
        for i, node in enumerate(self.nodes):
            for w, t in zip(node.inputs, node.device.inputs):
                if w not in types:
                    raise WiringError(f"wire {w!r} is consumed but never produced")
                if w in consumed:
                    raise WiringError(f"wire {w!r} consumed twice")
                if types[w] != t:
                    raise WiringError(f"wire {w!r} carries {types[w].name} but device "
                                      f"{node.device.name!r} expects {t.name}")
                consumed.add(w)
                if producer[w] >= 0:
                    deps[i].add(producer[w])
        order = _toposort(deps)
        residual = tuple(w for w in types if w not in consumed)
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "wire_types", types)
        object.__setattr__(self, "residual", residual)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(n.label for n in self.nodes if n.label is not None)

    @property
    def aux_systems(self) -> Systems:
        return tuple(t for _, t in self.aux)

    @property
    def residual_systems(self) -> Systems:
        return tuple(self.wire_types[w] for w in self.residual)

    @property
    def is_closed(self) -> bool:
        return not self.aux

    @property
    def mode(self) -> Mode:
        if not self.nodes:
            return EXACT
        return self.nodes[0].device.mode

    def outcome_count(self) -> int:
        return math.prod(len(n.device.outcomes) for n in self.nodes if n.label is not None)

    def plugged(self, state: GVector) -> "Circuit":
        """Close the auxiliary register by preparing ``state`` on it."""
        if state.systems != self.aux_systems:
            raise WiringError(f"aux register is {_names(self.aux_systems)}, state lives on {_names(state.systems)}")
        prep = Node(Device.prepare(state, name="aux"), (), tuple(w for w, _ in self.aux), None)
        return Circuit((prep,) + self.nodes, (), self.accept, self.postselect, self.name)


def _toposort(deps: list[set[int]]) -> tuple[int, ...]:
    remaining = {i: set(d) for i, d in enumerate(deps)}
    order: list[int] = []
    while remaining:
        ready = sorted(i for i, d in remaining.items() if not d)
        if not ready:
            raise WiringError("wiring contains a cycle")
        i = ready[0]
        order.append(i)
        del remaining[i]
        for d in remaining.values():
            d.discard(i)
    return tuple(order)


# ---------------------------------------------------------------- evaluation

_LEG = "\0in:"


def _check_guard(c: Circuit, guard: int) -> None:
    count = c.outcome_count()
    if count > guard:
        raise GuardError(f"circuit has {count} outcome strings, guard is {guard}")


def _leaves(c: Circuit, tensor0: np.ndarray, axes0: list[str]) -> Iterator[tuple[dict[str, int], np.ndarray, list[str]]]:
    """Depth-first contraction; yields (outcomes, leaf tensor, leaf axes)."""
    steps = []
    for i in c.order:
        node = c.nodes[i]
        if node.label is None:
            comps = [(None, node.device.summed())]
        else:
            comps = list(enumerate(node.device.outcomes))
        steps.append((node, comps))

    def contract(node: Node, comp: Component, t: np.ndarray, axes: list[str]):
        kind = node.device.kind
        if kind == PREPARATION:
            dims = [s.dim for s in node.device.outputs]
            new = np.multiply.outer(t, comp.coords.reshape(dims))
            return new, axes + list(node.outputs)
        pos = [axes.index(w) for w in node.inputs]
        in_dims = [s.dim for s in node.device.inputs]
        rest = [a for k, a in enumerate(axes) if k not in pos]
        if kind == MEASUREMENT:
            eff = comp.coords.reshape(in_dims)
            new = np.tensordot(eff, t, axes=(list(range(len(pos))), pos))
            return new, rest
        out_dims = [s.dim for s in node.device.outputs]
        mat = comp.matrix.reshape(out_dims + in_dims)
        k = len(out_dims)
        new = np.tensordot(mat, t, axes=(list(range(k, k + len(pos))), pos))
        return new, list(node.outputs) + rest

    def walk(step: int, t: np.ndarray, axes: list[str], z: dict[str, int]):
        if step == len(steps):
            yield dict(z), t, axes
            return
        node, comps = steps[step]
        for k, comp in comps:
            new, new_axes = contract(node, comp, t, axes)
            if _all_zero(new):
                continue
            if k is not None:
                z[node.label] = k
            yield from walk(step + 1, new, new_axes, z)
            if k is not None:
                del z[node.label]

    yield from walk(0, tensor0, axes0, {})


def _all_zero(t: np.ndarray) -> bool:
    if t.dtype == object:
        return all(v == 0 for v in t.flat)
    return not np.any(t)


def _scalar_one(mode: Mode) -> np.ndarray:
    return np.array(Fraction(1) if mode == EXACT else 1.0, dtype=object if mode == EXACT else float)


def _discard_residual(t: np.ndarray, axes: list[str], c: Circuit, mode: Mode):
    for w in list(axes):
        if w.startswith(_LEG):
            continue
        pos = axes.index(w)
        u = c.wire_types[w].unit_coords(mode)
        t = np.tensordot(u, t, axes=([0], [pos]))
        axes = axes[:pos] + axes[pos + 1:]
    return t, axes


@dataclass(frozen=True)
class OutcomeDistribution:
    """Joint distribution over outcome strings.

    Strings are tuples ordered like ``labels``; only strings with non-zero
    probability are stored.
    """

    labels: tuple[str, ...]
    probs: Mapping[tuple[int, ...], object]
    mode: Mode = EXACT

    def prob(self, z: Sequence[int] | Mapping[str, int]):
        if isinstance(z, Mapping):
            z = tuple(z[label] for label in self.labels)
        zero = Fraction(0) if self.mode == EXACT else 0.0
        return self.probs.get(tuple(z), zero)

    def total(self):
        return sum(self.probs.values(), Fraction(0) if self.mode == EXACT else 0.0)

    def items(self):
        return sorted(self.probs.items())

    def as_mapping(self, z: tuple[int, ...]) -> dict[str, int]:
        return dict(zip(self.labels, z))

    def event(self, pred: Predicate):
        return sum((p for z, p in self.probs.items() if pred(self.as_mapping(z))),
                   Fraction(0) if self.mode == EXACT else 0.0)

    def marginal(self, labels: Sequence[str]) -> "OutcomeDistribution":
        idx = [self.labels.index(label) for label in labels]
        out: dict[tuple[int, ...], object] = {}
        for z, p in self.probs.items():
            key = tuple(z[i] for i in idx)
            out[key] = out.get(key, 0) + p
        return OutcomeDistribution(tuple(labels), {k: v for k, v in out.items() if v != 0}, self.mode)

    def by_label(self) -> dict[frozenset, object]:
        """Order-free view: frozenset of (label, outcome) pairs -> probability."""
        return {frozenset(zip(self.labels, z)): p for z, p in self.probs.items()}


def evaluate_closed(c: Circuit, guard: int = OUTCOME_GUARD) -> OutcomeDistribution:
    """Probability of every joint outcome string of a closed circuit.

    Residual output wires are discarded with their system's unit effect.
    """
    if c.aux:
        raise OpenPortError(f"circuit has open auxiliary ports {[w for w, _ in c.aux]}")
    _check_guard(c, guard)
    mode = c.mode
    labels = c.labels
    probs: dict[tuple[int, ...], object] = {}
    for z, t, axes in _leaves(c, _scalar_one(mode), []):
        t, axes = _discard_residual(t, axes, c, mode)
        p = t.item() if isinstance(t, np.ndarray) else t
        if p != 0:
            key = tuple(z[label] for label in labels)
            probs[key] = probs.get(key, 0) + p
    return OutcomeDistribution(labels, probs, mode)


def accept_probability(c: Circuit, aux: GVector | None = None, guard: int = OUTCOME_GUARD):
    """Sum of closed-circuit probabilities over accepted strings, with
    ``aux`` plugged into the auxiliary register."""
    closed = c if aux is None else c.plugged(aux)
    d = evaluate_closed(closed, guard)
    return d.event(c.accept)


def accept_map(c: Circuit, pad: bool = False, guard: int = OUTCOME_GUARD) -> GTransform:
    """Linear map from the aux register to the residual outputs, summed over
    accepted outcome strings; every other preparation and effect is contracted.

    With ``pad=True`` the matrix is zero-padded on trailing rows/columns to a
    square; the returned transform then has output systems equal to the aux
    systems when the residual register is smaller.
    """
    if not c.aux:
        raise OpenPortError("accept_map needs a circuit with auxiliary ports")
    _check_guard(c, guard)
    mode = c.mode
    aux_dims = [t.dim for _, t in c.aux]
    n_in = math.prod(aux_dims)
    eye = scalars.identity(n_in, mode).reshape(aux_dims + aux_dims)
    axes0 = [w for w, _ in c.aux] + [_LEG + w for w, _ in c.aux]
    res_sys = c.residual_systems
    n_out = total_dim(res_sys)
    total = scalars.zeros((n_out, n_in), mode)
    for z, t, axes in _leaves(c, eye, axes0):
        if not c.accept(z):
            continue
        order = [axes.index(w) for w in c.residual] + [axes.index(_LEG + w) for w, _ in c.aux]
        t = np.transpose(t, order) if order else t
        total = total + np.asarray(t).reshape(n_out, n_in)
    if not pad:
        return GTransform(c.aux_systems, res_sys, total)
    n = max(n_out, n_in)
    square = scalars.zeros((n, n), mode)
    square[:n_out, :n_in] = total
    if n_out <= n_in:
        return GTransform(c.aux_systems, c.aux_systems, square)
    raise GuardError("padding a map whose output register exceeds its input is not supported")


def accept_functional(c: Circuit, guard: int = OUTCOME_GUARD) -> GEffect:
    """The aux-register effect ``u · accept_map(c)``: residual outputs are
    closed with unit effects."""
    m = accept_map(c, guard=guard)
    u = unit_effect(m.out_systems, c.mode)
    return GEffect(m.in_systems, u.coords @ m.matrix)


def post_select(d: OutcomeDistribution, pred: Predicate) -> tuple[OutcomeDistribution, object]:
    """Condition on the event ``pred``; returns the conditional distribution and P(event)."""
    p_s = d.event(pred)
    if p_s == 0 or (d.mode != EXACT and abs(p_s) <= TOL):
        raise PostSelectionError("post-selected event has probability zero")
    probs = {z: p / p_s for z, p in d.probs.items() if pred(d.as_mapping(z))}
    return OutcomeDistribution(d.labels, probs, d.mode), p_s


def sample(d: OutcomeDistribution, seed: int, n: int) -> list[tuple[int, ...]]:
    """Draw ``n`` outcome strings.

    Uses numpy's PCG64 generator seeded with ``seed``: ``n`` uniform doubles
    are mapped through the cumulative distribution of the strings taken in
    lexicographic order.
    """
    total = d.total()
    if abs(float(total) - 1.0) > TOL:
        raise NormalisationError(f"distribution sums to {total}, not 1")
    keys = [z for z, _ in d.items()]
    cdf = np.cumsum([float(p) for _, p in d.items()])
    cdf[-1] = 1.0
    rng = np.random.Generator(np.random.PCG64(seed))
    idx = np.searchsorted(cdf, rng.random(n), side="right")
    idx = np.minimum(idx, len(keys) - 1)
    return [keys[i] for i in idx]
