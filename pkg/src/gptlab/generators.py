"""Seeded random circuits and syntax trees for sweeps and round-trip tests."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from . import dsl
from .dsl import (AuxDecl, BinOp, CircuitAST, Ctor, Lit, Measure, Not, Prepare, PostSelect, SystemDecl, Apply,
                  Var)

# rational unit vectors for exact qubit measurements
BLOCH_AXES = [
    (1, 0, 0), (0, 1, 0), (0, 0, 1),
    (Fraction(3, 5), Fraction(4, 5), 0), (0, Fraction(3, 5), Fraction(-4, 5)),
    (Fraction(2, 3), Fraction(1, 3), Fraction(2, 3)), (Fraction(-2, 7), Fraction(3, 7), Fraction(6, 7)),
]

_OPS = ("or", "and", "xor", "==", "!=")
_NAMES = "abcdefghijklmnopqrstuvwyz"


def random_expr(rng: np.random.Generator, variables, depth: int = 3):
    if depth == 0 or not variables or rng.random() < 0.3:
        if variables and rng.random() < 0.75:
            return Var(str(rng.choice(list(variables))))
        return Lit(int(rng.integers(0, 3)))
    r = rng.random()
    if r < 0.15:
        return Not(random_expr(rng, variables, depth - 1))
    op = _OPS[int(rng.integers(len(_OPS)))]
    return BinOp(op, random_expr(rng, variables, depth - 1), random_expr(rng, variables, depth - 1))


def _arg(rng: np.random.Generator) -> Fraction:
    den = int(rng.integers(1, 6))
    return Fraction(int(rng.integers(-5, 6)), den)


def random_ast(rng: np.random.Generator, max_devices: int = 10) -> CircuitAST:
    """A syntactically well-formed tree (not necessarily valid for any theory)."""
    stmts = []
    wires = [f"W{i}" for i in range(int(rng.integers(1, 5)))]
    for w in wires:
        cls = SystemDecl if rng.random() < 0.7 else AuxDecl
        stmts.append(cls(w, str(rng.choice(["bit", "gbit", "qubit"]))))
    bound = []
    for i in range(int(rng.integers(0, max_devices + 1))):
        kind = rng.integers(0, 4)
        ctor = Ctor(str(rng.choice(["basis", "vertex", "bloch", "fiducial", "pr", "dist"])),
                    tuple(_arg(rng) for _ in range(int(rng.integers(0, 4)))))
        some = tuple(str(w) for w in rng.choice(wires, size=int(rng.integers(1, len(wires) + 1)), replace=False))
        if kind == 0:
            stmts.append(Prepare(ctor, some))
        elif kind == 1:
            stmts.append(Apply(str(rng.choice(["cnot", "h", "flip0", "swap"])), some, some))
        elif kind == 2:
            if rng.random() < 0.2:
                vs = ("_",) * len(some)
            else:
                vs = tuple(f"{_NAMES[len(bound) % len(_NAMES)]}{len(bound)}" for _ in some)
                bound.extend(v for v in vs)
            stmts.append(Measure(ctor, some, vs))
        elif bound:
            stmts.append(PostSelect(random_expr(rng, bound, 2)))
    return CircuitAST(str(rng.choice(["classical", "quantum", "boxworld"])), tuple(stmts),
                      random_expr(rng, bound, 3))


# ---------------------------------------------------------------- random aux circuits

def _prep_ctor(theory: str, rng: np.random.Generator) -> Ctor:
    if theory == "classical":
        p = Fraction(int(rng.integers(0, 7)), 6)
        return Ctor("dist", (p, 1 - p))
    if theory == "quantum":
        axis = BLOCH_AXES[int(rng.integers(len(BLOCH_AXES)))]
        shrink = Fraction(int(rng.integers(0, 4)), 3)
        sign = 1 if rng.random() < 0.5 else -1
        return Ctor("bloch", tuple(Fraction(sign * a) * shrink for a in axis))
    signs = [Fraction(int(rng.choice([-1, 1]))) for _ in range(2)]
    return Ctor("vertex", (Fraction(1), *signs))


def _meas_ctor(theory: str, rng: np.random.Generator) -> Ctor:
    if theory == "classical":
        return Ctor("basis")
    if theory == "quantum":
        if rng.random() < 0.4:
            return Ctor("basis")
        return Ctor("bloch", tuple(Fraction(a) for a in BLOCH_AXES[int(rng.integers(len(BLOCH_AXES)))]))
    return Ctor("fiducial", (Fraction(int(rng.integers(0, 2))),))


_GATES = {
    "classical": (["not"], ["cnot", "swap"]),
    "quantum": (["h", "s", "x", "z"], ["cnot", "cz", "swap"]),
    "boxworld": (["flip0", "flip1", "exch"], ["swap"]),
}
_TYPE = {"classical": "bit", "quantum": "qubit", "boxworld": "gbit"}


def random_aux_ast(theory: str, rng: np.random.Generator, n_aux: int | None = None,
                   max_extra: int = 1, max_gates: int = 3) -> CircuitAST:
    """A random circuit with an aux register: optional extra prepared
    systems, a few gates, one measurement per wire and a random accept
    expression over the outcomes."""
    typ = _TYPE[theory]
    n_aux = int(rng.integers(1, 3)) if n_aux is None else n_aux
    n_extra = int(rng.integers(0, max_extra + 1))
    stmts = []
    live = []
    counter = 0

    def fresh():
        nonlocal counter
        counter += 1
        return f"W{counter}"

    for _ in range(n_aux):
        w = fresh()
        stmts.append(AuxDecl(w, typ))
        live.append(w)
    if theory == "boxworld" and n_extra >= 2 and rng.random() < 0.5:
        a, b = fresh(), fresh()
        stmts += [SystemDecl(a, typ), SystemDecl(b, typ), Prepare(Ctor("pr"), (a, b))]
        live += [a, b]
    else:
        for _ in range(n_extra):
            w = fresh()
            stmts += [SystemDecl(w, typ), Prepare(_prep_ctor(theory, rng), (w,))]
            live.append(w)
    single, double = _GATES[theory]
    for _ in range(int(rng.integers(0, max_gates + 1))):
        if len(live) >= 2 and rng.random() < 0.4:
            g = str(rng.choice(double))
            i, j = rng.choice(len(live), size=2, replace=False)
            ins = (live[i], live[j])
            outs = (fresh(), fresh())
            stmts += [SystemDecl(o, typ) for o in outs] + [Apply(g, ins, outs)]
            live[i], live[j] = outs
        else:
            g = str(rng.choice(single))
            i = int(rng.integers(len(live)))
            out = fresh()
            stmts += [SystemDecl(out, typ), Apply(g, (live[i],), (out,))]
            live[i] = out
    variables = []
    for w in live:
        v = f"m{len(variables)}"
        variables.append(v)
        stmts.append(Measure(_meas_ctor(theory, rng), (w,), (v,)))
    return CircuitAST(theory, tuple(stmts), random_expr(rng, variables, 3))


def random_aux_circuit(theory_spec, rng: np.random.Generator, **kwargs):
    ast = random_aux_ast(theory_spec.family, rng, **kwargs)
    return dsl.validate(ast, theory_spec), ast


def random_rational_matrix(rng: np.random.Generator, rows: int, cols: int, max_num: int = 9, max_den: int = 7):
    out = np.empty((rows, cols), dtype=object)
    for idx in np.ndindex(rows, cols):
        out[idx] = Fraction(int(rng.integers(-max_num, max_num + 1)), int(rng.integers(1, max_den + 1)))
    return out
