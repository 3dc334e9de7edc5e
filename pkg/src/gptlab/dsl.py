"""Circuit description language (``.gpc`` files).

Grammar::

    file     := header stmt* accept
    header   := "theory" IDENT
    stmt     := sysdecl | prep | apply | meas | auxdecl | postsel
    sysdecl  := "system" IDENT ":" IDENT
    auxdecl  := "aux" IDENT ":" IDENT
    prep     := "prepare" ctor "->" wires
    apply    := "apply" IDENT wires "->" wires
    meas     := "measure" ctor wires "->" vars
    postsel  := "post-select" expr
    accept   := "accept" expr
    ctor     := IDENT "(" [arg ("," arg)*] ")"      arg := INT | INT "/" INT
    wires    := IDENT ("," IDENT)*
    vars     := VAR ("," VAR)*                       VAR is lowercase or "_"

Statements are separated by newlines or ``;``; ``#`` starts a comment.
Expressions, loosest binding first: ``or``, ``and``, ``not``, ``==``/``!=``,
``xor``, then variables, integer literals and parentheses.  They evaluate
over integers; ``accept`` holds when the value is non-zero.

Wiring rules: every wire is declared once (``system`` or ``aux``), produced
once and consumed once.  Aux wires that no device consumes pass straight
through to the output register.  ``measure ... -> _`` discards an outcome.
``measure ctor A, B -> a, b`` measures each wire separately; with a single
variable the wires are measured jointly (product effects, row-major outcome
index).
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Union

import numpy as np

from . import theories
from .model import Circuit, Device, GEffect, GuardError, Node, WiringError, tensor_all
from .scalars import EXACT, Mode
from .theories import TheorySpec

KEYWORDS = ("theory", "system", "prepare", "apply", "measure", "aux", "accept", "post-select")
DISCARD = "_"


class DSLError(Exception):
    """Base class; carries a 1-based source position when known."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.message = message
        self.line = line or None
        self.col = col
        if self.line is None:
            where = ""
        elif col is None:
            where = f"line {line}: "
        else:
            where = f"line {line}, column {col}: "
        super().__init__(where + message)


class ParseError(DSLError):
    pass


class ValidationError(DSLError):
    pass


class TypeMismatchError(ValidationError):
    pass


class UnboundVariableError(ValidationError):
    pass


class UnknownNameError(ValidationError):
    pass


class WiringViolation(ValidationError):
    pass


# ---------------------------------------------------------------- AST

@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Lit:
    value: int


@dataclass(frozen=True)
class Not:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[Var, Lit, Not, BinOp]

PREC = {"or": 1, "and": 2, "not": 3, "==": 4, "!=": 4, "xor": 5}


@dataclass(frozen=True)
class Ctor:
    name: str
    args: tuple[Fraction, ...] = ()


@dataclass(frozen=True)
class SystemDecl:
    wire: str
    type: str
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class AuxDecl:
    wire: str
    type: str
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Prepare:
    ctor: Ctor
    outputs: tuple[str, ...]
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Apply:
    gate: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Measure:
    ctor: Ctor
    inputs: tuple[str, ...]
    vars: tuple[str, ...]
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class PostSelect:
    expr: Expr
    line: int = field(default=0, compare=False)


Statement = Union[SystemDecl, AuxDecl, Prepare, Apply, Measure, PostSelect]


@dataclass(frozen=True)
class CircuitAST:
    theory: str
    statements: tuple[Statement, ...]
    accept: Expr
    accept_line: int = field(default=0, compare=False)

    @property
    def devices(self) -> tuple[Statement, ...]:
        return tuple(s for s in self.statements if isinstance(s, (Prepare, Apply, Measure)))

    @property
    def postselect(self) -> Expr | None:
        exprs = [s.expr for s in self.statements if isinstance(s, PostSelect)]
        if not exprs:
            return None
        out = exprs[0]
        for e in exprs[1:]:
            out = BinOp("and", out, e)
        return out


# ---------------------------------------------------------------- lexer

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<nl>[\n;])
  | (?P<kw_post>post-select\b)
  | (?P<arrow>->)
  | (?P<num>-?\d+(?:/\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>==|!=)
  | (?P<punct>[(),:])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        tok = m.group()
        if kind == "nl":
            tokens.append(Token("sep", tok, line, col))
            if tok == "\n":
                line += 1
                line_start = m.end()
        elif kind == "kw_post":
            tokens.append(Token("ident", tok, line, col))
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, tok, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# ---------------------------------------------------------------- parser

class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(msg, tok.line, tok.col)

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def skip_seps(self):
        while self.tok.kind == "sep":
            self.advance()

    def expect(self, kind: str, text: str | None = None) -> Token:
        t = self.tok
        if t.kind != kind or (text is not None and t.text != text):
            want = repr(text) if text else kind
            got = repr(t.text) if t.text else "end of input"
            raise self.error(f"expected {want}, got {got}")
        return self.advance()

    def ident(self, what: str = "identifier") -> Token:
        t = self.tok
        if t.kind != "ident" or t.text in KEYWORDS:
            raise self.error(f"expected {what}, got {t.text!r}" if t.text else f"expected {what}, got end of input")
        return self.advance()

    def end_of_statement(self):
        if self.tok.kind not in ("sep", "eof"):
            raise self.error(f"unexpected {self.tok.text!r} at end of statement")

    def parse(self) -> CircuitAST:
        self.skip_seps()
        self.expect("ident", "theory")
        theory = self.ident("theory name").text
        self.end_of_statement()
        stmts = []
        accept = None
        accept_line = 0
        while True:
            self.skip_seps()
            t = self.tok
            if t.kind == "eof":
                break
            if accept is not None:
                raise self.error("statements after 'accept'")
            if t.kind != "ident" or t.text not in KEYWORDS:
                raise self.error(f"expected a statement keyword, got {t.text!r}")
            self.advance()
            if t.text == "theory":
                raise self.error("theory declared twice", t)
            if t.text == "accept":
                if self.tok.kind in ("sep", "eof"):
                    raise self.error("empty accept clause")
                accept_line = t.line
                accept = self.expr()
            elif t.text == "system":
                w = self.ident("wire name").text
                self.expect("punct", ":")
                stmts.append(SystemDecl(w, self.ident("system type").text, t.line))
            elif t.text == "aux":
                w = self.ident("wire name").text
                self.expect("punct", ":")
                stmts.append(AuxDecl(w, self.ident("system type").text, t.line))
            elif t.text == "prepare":
                ctor = self.ctor()
                self.expect("arrow")
                stmts.append(Prepare(ctor, self.wires(), t.line))
            elif t.text == "apply":
                gate = self.ident("gate name").text
                ins = self.wires()
                self.expect("arrow")
                stmts.append(Apply(gate, ins, self.wires(), t.line))
            elif t.text == "measure":
                ctor = self.ctor()
                ins = self.wires()
                self.expect("arrow")
                stmts.append(Measure(ctor, ins, self.vars(), t.line))
            elif t.text == "post-select":
                if self.tok.kind in ("sep", "eof"):
                    raise self.error("empty post-select clause")
                stmts.append(PostSelect(self.expr(), t.line))
            self.end_of_statement()
        if accept is None:
            raise self.error("missing accept clause")
        return CircuitAST(theory, tuple(stmts), accept, accept_line)

    def ctor(self) -> Ctor:
        name = self.ident("constructor").text
        self.expect("punct", "(")
        args = []
        if not (self.tok.kind == "punct" and self.tok.text == ")"):
            while True:
                t = self.expect("num")
                try:
                    args.append(Fraction(t.text))
                except ZeroDivisionError:
                    raise self.error("zero denominator", t) from None
                if self.tok.kind == "punct" and self.tok.text == ",":
                    self.advance()
                    continue
                break
        self.expect("punct", ")")
        return Ctor(name, tuple(args))

    def wires(self) -> tuple[str, ...]:
        out = [self.ident("wire name").text]
        while self.tok.kind == "punct" and self.tok.text == ",":
            self.advance()
            out.append(self.ident("wire name").text)
        return tuple(out)

    def vars(self) -> tuple[str, ...]:
        out = [self.var()]
        while self.tok.kind == "punct" and self.tok.text == ",":
            self.advance()
            out.append(self.var())
        return tuple(out)

    def var(self) -> str:
        t = self.ident("outcome variable")
        if t.text != DISCARD and not t.text[0].islower():
            raise ParseError(f"outcome variable {t.text!r} must start with a lowercase letter", t.line, t.col)
        if t.text in PREC:
            raise ParseError(f"{t.text!r} is an operator", t.line, t.col)
        return t.text

    # expressions
    def expr(self) -> Expr:
        return self.or_expr()

    def _is(self, word: str) -> bool:
        return self.tok.kind == "ident" and self.tok.text == word

    def or_expr(self) -> Expr:
        left = self.and_expr()
        while self._is("or"):
            self.advance()
            left = BinOp("or", left, self.and_expr())
        return left

    def and_expr(self) -> Expr:
        left = self.not_expr()
        while self._is("and"):
            self.advance()
            left = BinOp("and", left, self.not_expr())
        return left

    def not_expr(self) -> Expr:
        if self._is("not"):
            self.advance()
            return Not(self.not_expr())
        return self.cmp_expr()

    def cmp_expr(self) -> Expr:
        left = self.xor_expr()
        while self.tok.kind == "op":
            op = self.advance().text
            left = BinOp(op, left, self.xor_expr())
        return left

    def xor_expr(self) -> Expr:
        left = self.atom()
        while self._is("xor"):
            self.advance()
            left = BinOp("xor", left, self.atom())
        return left

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "punct" and t.text == "(":
            self.advance()
            e = self.expr()
            self.expect("punct", ")")
            return e
        if t.kind == "num":
            if "/" in t.text or t.text.startswith("-"):
                raise self.error("expression literals are non-negative integers")
            self.advance()
            return Lit(int(t.text))
        if t.kind == "ident" and t.text not in KEYWORDS and t.text not in PREC and t.text != DISCARD:
            self.advance()
            return Var(t.text)
        got = repr(t.text) if t.text else "end of input"
        raise self.error(f"expected an expression, got {got}")


def parse(text: str) -> CircuitAST:
    return _Parser(text).parse()


# ---------------------------------------------------------------- printer

def _fmt_arg(a: Fraction) -> str:
    return str(a.numerator) if a.denominator == 1 else f"{a.numerator}/{a.denominator}"


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return PREC[e.op]
    if isinstance(e, Not):
        return PREC["not"]
    return 6


def print_expr(e: Expr) -> str:
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Lit):
        return str(e.value)
    if isinstance(e, Not):
        inner = print_expr(e.operand)
        return "not " + (f"({inner})" if _prec(e.operand) < PREC["not"] else inner)
    p = PREC[e.op]
    left = print_expr(e.left)
    right = print_expr(e.right)
    if _prec(e.left) < p:
        left = f"({left})"
    if _prec(e.right) <= p:
        right = f"({right})"
    return f"{left} {e.op} {right}"


def _fmt_ctor(c: Ctor) -> str:
    return f"{c.name}({', '.join(_fmt_arg(a) for a in c.args)})"


def print_ast(ast: CircuitAST) -> str:
    """Canonical text: one statement per line, single spaces."""
    lines = [f"theory {ast.theory}"]
    for s in ast.statements:
        if isinstance(s, SystemDecl):
            lines.append(f"system {s.wire}:{s.type}")
        elif isinstance(s, AuxDecl):
            lines.append(f"aux {s.wire}:{s.type}")
        elif isinstance(s, Prepare):
            lines.append(f"prepare {_fmt_ctor(s.ctor)} -> {', '.join(s.outputs)}")
        elif isinstance(s, Apply):
            lines.append(f"apply {s.gate} {', '.join(s.inputs)} -> {', '.join(s.outputs)}")
        elif isinstance(s, Measure):
            lines.append(f"measure {_fmt_ctor(s.ctor)} {', '.join(s.inputs)} -> {', '.join(s.vars)}")
        elif isinstance(s, PostSelect):
            lines.append(f"post-select {print_expr(s.expr)}")
    lines.append(f"accept {print_expr(ast.accept)}")
    return "\n".join(lines) + "\n"


# ``print`` in the public vocabulary; kept under a non-shadowing name too.
print = print_ast  # noqa: A001


# ---------------------------------------------------------------- evaluation of expressions

def eval_expr(e: Expr, env: Mapping[str, int]) -> int:
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Var):
        return int(env[e.name])
    if isinstance(e, Not):
        return int(eval_expr(e.operand, env) == 0)
    a = eval_expr(e.left, env)
    if e.op == "and":
        return int(a != 0 and eval_expr(e.right, env) != 0)
    if e.op == "or":
        return int(a != 0 or eval_expr(e.right, env) != 0)
    b = eval_expr(e.right, env)
    if e.op == "xor":
        return a ^ b
    if e.op == "==":
        return int(a == b)
    if e.op == "!=":
        return int(a != b)
    raise ValueError(f"unknown operator {e.op!r}")


def free_vars(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Lit):
        return set()
    if isinstance(e, Not):
        return free_vars(e.operand)
    return free_vars(e.left) | free_vars(e.right)


@dataclass(frozen=True)
class ExprPredicate:
    """Picklable predicate ``z -> eval(expr, z) != 0``."""

    expr: Expr

    def __call__(self, z: Mapping[str, int]) -> bool:
        return eval_expr(self.expr, z) != 0


# ---------------------------------------------------------------- validation

def validate(ast: CircuitAST, theory: TheorySpec | None = None, mode: Mode = EXACT) -> Circuit:
    """Type-check ``ast`` against ``theory`` and build the core-model circuit."""
    if theory is None:
        try:
            theory = theories.builtin(ast.theory, mode)
        except KeyError:
            raise UnknownNameError(f"unknown theory {ast.theory!r}", 1, 1) from None
    mode = theory.mode
    decl: dict[str, object] = {}
    aux = []
    for s in ast.statements:
        if isinstance(s, (SystemDecl, AuxDecl)):
            if s.wire in decl:
                raise WiringViolation(f"wire {s.wire!r} declared twice", s.line)
            if s.type not in theory.systems:
                raise UnknownNameError(f"theory {theory.name!r} has no system type {s.type!r}", s.line)
            decl[s.wire] = theory.type(s.type)
            if isinstance(s, AuxDecl):
                aux.append((s.wire, decl[s.wire]))

    def wire_type(w: str, line: int):
        if w not in decl:
            raise WiringViolation(f"wire {w!r} is not declared", line)
        return decl[w]

    produced = {w for w, _ in aux}
    consumed: set[str] = set()
    bound: set[str] = set()
    nodes = []

    def produce(ws, line):
        for w in ws:
            wire_type(w, line)
            if w in produced:
                raise WiringViolation(f"wire {w!r} is produced twice", line)
            produced.add(w)

    def consume(ws, line):
        if len(set(ws)) != len(ws):
            raise WiringViolation("a device uses the same wire twice", line)
        for w in ws:
            wire_type(w, line)
            if w in consumed:
                raise WiringViolation(f"wire {w!r} is consumed twice", line)
            consumed.add(w)

    for s in ast.statements:
        if isinstance(s, Prepare):
            types = tuple(wire_type(w, s.line) for w in s.outputs)
            try:
                state = theories.multi_state(theory, s.ctor.name, s.ctor.args, mode)
                if state is None:
                    state = tensor_all([theories.prepare_device(theory, t, s.ctor.name, s.ctor.args, mode).outcomes[0]
                                        for t in types])
            except KeyError as exc:
                raise UnknownNameError(exc.args[0], s.line) from None
            except (ValueError, TypeError) as exc:
                raise ValidationError(str(exc), s.line) from None
            if state.systems != types:
                raise TypeMismatchError(f"{_fmt_ctor(s.ctor)} prepares {_names(state.systems)} "
                                        f"but the wires carry {_names(types)}", s.line)
            produce(s.outputs, s.line)
            nodes.append(Node(Device.prepare(state, name=s.ctor.name), (), s.outputs))
        elif isinstance(s, Apply):
            gate = theory.gates.get(s.gate)
            if gate is None:
                raise UnknownNameError(f"unknown gate {s.gate!r} in theory {theory.name!r}", s.line)
            ins = tuple(wire_type(w, s.line) for w in s.inputs)
            outs = tuple(wire_type(w, s.line) for w in s.outputs)
            if ins != gate.in_systems:
                raise TypeMismatchError(f"gate {s.gate!r} expects {_names(gate.in_systems)}, "
                                        f"wires carry {_names(ins)}", s.line)
            if outs != gate.out_systems:
                raise TypeMismatchError(f"gate {s.gate!r} outputs {_names(gate.out_systems)}, "
                                        f"wires carry {_names(outs)}", s.line)
            consume(s.inputs, s.line)
            produce(s.outputs, s.line)
            nodes.append(Node(Device.transform(gate, name=s.gate), s.inputs, s.outputs))
        elif isinstance(s, Measure):
            types = tuple(wire_type(w, s.line) for w in s.inputs)
            consume(s.inputs, s.line)
            for v in s.vars:
                if v == DISCARD:
                    continue
                if v in bound:
                    raise ValidationError(f"outcome variable {v!r} bound twice", s.line)
                bound.add(v)
            try:
                per_wire = [theories.measurement_effects(theory, t, s.ctor.name, s.ctor.args, mode) for t in types]
            except KeyError as exc:
                raise UnknownNameError(exc.args[0], s.line) from None
            except (ValueError, TypeError) as exc:
                raise ValidationError(str(exc), s.line) from None
            if len(s.vars) == len(s.inputs):
                for w, v, effs in zip(s.inputs, s.vars, per_wire):
                    label = None if v == DISCARD else v
                    nodes.append(Node(Device.measure(*effs, name=s.ctor.name), (w,), (), label))
            elif len(s.vars) == 1:
                effs = [tensor_all(combo) for combo in itertools.product(*per_wire)]
                label = None if s.vars[0] == DISCARD else s.vars[0]
                nodes.append(Node(Device.measure(*effs, name=s.ctor.name), s.inputs, (), label))
            else:
                raise ValidationError(f"{len(s.inputs)} wires measured into {len(s.vars)} variables", s.line)

    clauses = [("post-select clause", s.expr, s.line) for s in ast.statements if isinstance(s, PostSelect)]
    for what, expr, line in clauses + [("accept clause", ast.accept, ast.accept_line)]:
        missing = free_vars(expr) - bound
        if missing:
            raise UnboundVariableError(f"{what} uses unbound variable(s) {sorted(missing)}", line)

    for w in decl:
        is_aux = any(w == a for a, _ in aux)
        if w not in produced:
            raise WiringViolation(f"wire {w!r} is declared but never produced")
        if w not in consumed and not is_aux:
            raise WiringViolation(f"wire {w!r} is produced but never consumed (discard it with 'measure unit() {w} -> _')")

    post = ast.postselect
    try:
        return Circuit(tuple(nodes), tuple(aux), ExprPredicate(ast.accept),
                       ExprPredicate(post) if post is not None else None)
    except WiringError as exc:
        raise WiringViolation(str(exc)) from None


def _names(systems) -> str:
    return "(" + ", ".join(s.name for s in systems) + ")"


def load(path, theory: TheorySpec | None = None, mode: Mode = EXACT) -> Circuit:
    with open(path, encoding="utf-8") as fh:
        return validate(parse(fh.read()), theory, mode)
