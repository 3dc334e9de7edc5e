from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from gptlab import lp


def test_simple_optimum():
    # max x + y  s.t. x + 2y <= 4, 3x + y <= 6
    p = lp.LPProblem(2, A_ub=[[1, 2], [3, 1]], b_ub=[4, 6], c=[1, 1])
    res = lp.solve(p, maximize=True)
    assert res.status == lp.OPTIMAL
    assert res.x == (Fraction(8, 5), Fraction(6, 5))
    assert res.value == Fraction(14, 5)


def test_infeasible_has_certificate():
    p = lp.LPProblem(1, A_eq=[[1]], b_eq=[-1])
    res = lp.solve(p)
    assert res.status == lp.INFEASIBLE
    assert lp.check_farkas(p, res.certificate)


def test_unbounded():
    p = lp.LPProblem(1, A_ub=[[-1]], b_ub=[0], c=[1])
    assert lp.solve(p, maximize=True).status == lp.UNBOUNDED


def test_free_variables():
    p = lp.LPProblem(2, A_eq=[[1, 1]], b_eq=[-3], A_ub=[[0, -1]], b_ub=[0], c=[1, 0], free={0})
    res = lp.solve(p, maximize=True)
    assert res.status == lp.OPTIMAL and res.x[0] == -3


def test_degenerate_problem_terminates():
    # classic cycling example under the largest-coefficient rule
    A = [[Fraction(1, 4), -8, -1, 9], [Fraction(1, 2), -12, Fraction(-1, 2), 3], [0, 0, 1, 0]]
    p = lp.LPProblem(4, A_ub=A, b_ub=[0, 0, 1], c=[Fraction(-3, 4), 20, Fraction(-1, 2), 6])
    res = lp.solve(p)
    assert res.status == lp.OPTIMAL
    assert res.value == Fraction(-5, 4)


small = st.integers(min_value=-4, max_value=4)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.data())
def test_agrees_with_scipy(n, m, data):
    A = [[data.draw(small) for _ in range(n)] for _ in range(m)]
    b = [data.draw(st.integers(-3, 6)) for _ in range(m)]
    c = [data.draw(small) for _ in range(n)]
    box = [[int(i == j) for j in range(n)] for i in range(n)]
    A_ub, b_ub = A + box, b + [5] * n
    res = lp.solve(lp.LPProblem(n, A_ub=A_ub, b_ub=b_ub, c=c))
    ref = linprog(c, A_ub=np.array(A_ub, float), b_ub=np.array(b_ub, float), bounds=[(0, None)] * n,
                  method="highs")
    if ref.status == 2:
        assert res.status == lp.INFEASIBLE
        assert lp.check_farkas(lp.LPProblem(n, A_ub=A_ub, b_ub=b_ub, c=c), res.certificate)
    else:
        assert ref.status == 0
        assert res.status == lp.OPTIMAL
        assert float(res.value) == pytest.approx(ref.fun, abs=1e-9)
        assert lp.check_feasible_point(lp.LPProblem(n, A_ub=A_ub, b_ub=b_ub, c=c), res.x)
