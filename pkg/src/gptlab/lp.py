"""Exact rational linear programming: two-phase tableau simplex, Bland's rule.

Problems are stated as::

    minimise    c . x
    subject to  A_eq x == b_eq
                A_ub x <= b_ub
                x_j >= 0 unless j is listed in ``free``

Infeasible problems come back with a Farkas certificate ``y`` over the
constraint rows (equalities first, then inequalities) satisfying

    y_ub >= 0,  (y^T A)_j >= 0 for sign-constrained j,
    (y^T A)_j == 0 for free j,  y^T b < 0,

which proves no feasible ``x`` exists.  All arithmetic is in
:class:`fractions.Fraction`; Bland's smallest-index rule guarantees
termination.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

Matrix = list[list[Fraction]]


def _frac_matrix(rows) -> Matrix:
    return [[Fraction(v) for v in row] for row in rows]


@dataclass(frozen=True)
class LPProblem:
    n_vars: int
    A_eq: tuple = ()
    b_eq: tuple = ()
    A_ub: tuple = ()
    b_ub: tuple = ()
    c: tuple | None = None
    free: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "A_eq", tuple(tuple(Fraction(v) for v in r) for r in self.A_eq))
        object.__setattr__(self, "A_ub", tuple(tuple(Fraction(v) for v in r) for r in self.A_ub))
        object.__setattr__(self, "b_eq", tuple(Fraction(v) for v in self.b_eq))
        object.__setattr__(self, "b_ub", tuple(Fraction(v) for v in self.b_ub))
        if self.c is not None:
            object.__setattr__(self, "c", tuple(Fraction(v) for v in self.c))
        object.__setattr__(self, "free", frozenset(self.free))
        if len(self.A_eq) != len(self.b_eq) or len(self.A_ub) != len(self.b_ub):
            raise ValueError("constraint rows and right-hand sides differ in length")
        for row in self.A_eq + self.A_ub:
            if len(row) != self.n_vars:
                raise ValueError("constraint row has wrong number of coefficients")
        if self.c is not None and len(self.c) != self.n_vars:
            raise ValueError("objective has wrong number of coefficients")
        if any(not 0 <= j < self.n_vars for j in self.free):
            raise ValueError("free variable index out of range")

    @property
    def rows(self) -> tuple[tuple[Fraction, ...], ...]:
        return self.A_eq + self.A_ub

    @property
    def rhs(self) -> tuple[Fraction, ...]:
        return self.b_eq + self.b_ub


@dataclass(frozen=True)
class LPResult:
    status: str
    x: tuple[Fraction, ...] | None = None
    value: Fraction | None = None
    certificate: tuple[Fraction, ...] | None = None
    pivots: int = 0

    @property
    def feasible(self) -> bool:
        return self.status != INFEASIBLE


@dataclass
class _Tableau:
    rows: Matrix
    rhs: list[Fraction]
    basis: list[int]
    pivots: int = field(default=0)

    def pivot(self, r: int, j: int) -> None:
        row = self.rows[r]
        p = row[j]
        if p != 1:
            inv = 1 / p
            self.rows[r] = row = [v * inv for v in row]
            self.rhs[r] *= inv
        for i, other in enumerate(self.rows):
            if i == r:
                continue
            f = other[j]
            if f != 0:
                self.rows[i] = [a - f * b if b else a for a, b in zip(other, row)]
                self.rhs[i] -= f * self.rhs[r]
        self.basis[r] = j
        self.pivots += 1

    def reduced_costs(self, cost: Sequence[Fraction]) -> list[Fraction]:
        rc = list(cost)
        for i, b in enumerate(self.basis):
            cb = cost[b]
            if cb:
                rc = [v - cb * a if a else v for v, a in zip(rc, self.rows[i])]
        return rc

    def run(self, cost: Sequence[Fraction], allowed: int) -> bool:
        """Minimise ``cost`` using columns ``< allowed`` as entering candidates.
        Returns False on unboundedness."""
        while True:
            rc = self.reduced_costs(cost)
            entering = next((j for j in range(allowed) if rc[j] < 0), None)
            if entering is None:
                return True
            best = None
            for i, row in enumerate(self.rows):
                a = row[entering]
                if a > 0:
                    ratio = self.rhs[i] / a
                    key = (ratio, self.basis[i])
                    if best is None or key < best[0]:
                        best = (key, i)
            if best is None:
                return False
            self.pivot(best[1], entering)


def solve(problem: LPProblem, maximize: bool = False) -> LPResult:
    """Solve ``problem``; pure feasibility when ``problem.c`` is ``None``."""
    n = problem.n_vars
    free = sorted(problem.free)
    # standard form columns: x (n), negative parts of free vars, slacks
    n_split = n + len(free)
    m_eq, m_ub = len(problem.A_eq), len(problem.A_ub)
    n_std = n_split + m_ub
    rows: Matrix = []
    for r, row in enumerate(problem.rows):
        std = list(row) + [-row[j] for j in free] + [Fraction(0)] * m_ub
        if r >= m_eq:
            std[n_split + r - m_eq] = Fraction(1)
        rows.append(std)
    rhs = list(problem.rhs)
    m = len(rows)
    signs = [Fraction(1)] * m
    for i in range(m):
        if rhs[i] < 0:
            signs[i] = Fraction(-1)
            rows[i] = [-v for v in rows[i]]
            rhs[i] = -rhs[i]
    # phase 1 with one artificial per row
    full = [row + [Fraction(1) if k == i else Fraction(0) for k in range(m)] for i, row in enumerate(rows)]
    tab = _Tableau(full, rhs, [n_std + i for i in range(m)])
    cost1 = [Fraction(0)] * n_std + [Fraction(1)] * m
    tab.run(cost1, n_std)
    w = sum((tab.rhs[i] for i, b in enumerate(tab.basis) if b >= n_std), Fraction(0))
    if w > 0:
        # duals y' = c_B B^-1, read off the artificial columns
        y = [Fraction(0)] * m
        for i, b in enumerate(tab.basis):
            if b >= n_std:
                for k in range(m):
                    y[k] += tab.rows[i][n_std + k]
        cert = tuple(-signs[k] * y[k] for k in range(m))
        return LPResult(INFEASIBLE, certificate=cert, pivots=tab.pivots)
    # drive zero-level artificials out of the basis; drop redundant rows
    i = 0
    while i < len(tab.basis):
        if tab.basis[i] >= n_std:
            j = next((j for j in range(n_std) if tab.rows[i][j] != 0), None)
            if j is None:
                del tab.rows[i]
                del tab.rhs[i]
                del tab.basis[i]
                continue
            tab.pivot(i, j)
        i += 1
    tab.rows = [row[:n_std] for row in tab.rows]
    cost = [Fraction(0)] * n_std
    if problem.c is not None:
        sign = -1 if maximize else 1
        for j in range(n):
            cost[j] = sign * problem.c[j]
        for k, j in enumerate(free):
            cost[n + k] = -sign * problem.c[j]
    if not tab.run(cost, n_std):
        return LPResult(UNBOUNDED, pivots=tab.pivots)
    xs = [Fraction(0)] * n_std
    for i, b in enumerate(tab.basis):
        xs[b] = tab.rhs[i]
    x = xs[:n]
    for k, j in enumerate(free):
        x[j] -= xs[n + k]
    value = None
    if problem.c is not None:
        value = sum((cj * xj for cj, xj in zip(problem.c, x)), Fraction(0))
    return LPResult(OPTIMAL, tuple(x), value, pivots=tab.pivots)


def check_feasible_point(problem: LPProblem, x: Sequence[Fraction]) -> bool:
    """Exact check that ``x`` satisfies every constraint."""
    if len(x) != problem.n_vars:
        return False
    for j, v in enumerate(x):
        if j not in problem.free and v < 0:
            return False
    for row, b in zip(problem.A_eq, problem.b_eq):
        if sum((a * v for a, v in zip(row, x)), Fraction(0)) != b:
            return False
    for row, b in zip(problem.A_ub, problem.b_ub):
        if sum((a * v for a, v in zip(row, x)), Fraction(0)) > b:
            return False
    return True


def check_farkas(problem: LPProblem, y: Sequence[Fraction]) -> bool:
    """Exact check that ``y`` certifies infeasibility of ``problem``."""
    rows, rhs = problem.rows, problem.rhs
    if len(y) != len(rows):
        return False
    m_eq = len(problem.A_eq)
    if any(v < 0 for v in y[m_eq:]):
        return False
    for j in range(problem.n_vars):
        s = sum((yi * row[j] for yi, row in zip(y, rows)), Fraction(0))
        if j in problem.free:
            if s != 0:
                return False
        elif s < 0:
            return False
    return sum((yi * b for yi, b in zip(y, rhs)), Fraction(0)) < 0
