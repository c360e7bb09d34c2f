import numpy as np
import pytest

from lyapcert import lp as lpmod
from lyapcert.lp import LinearProgram, solve, solve_linear_system


def test_min_with_lower_bound():
    prog = LinearProgram()
    x = prog.add_variable("x")
    prog.add_constraint({x: 1.0}, ">=", 3.0)
    prog.set_objective({x: 1.0}, "min")
    out = solve(prog)
    assert out.status == lpmod.OPTIMAL
    assert abs(out.x[x] - 3.0) <= 1e-9
    assert abs(out.objective - 3.0) <= 1e-9


def test_infeasible():
    prog = LinearProgram()
    x = prog.add_variable("x")
    prog.add_constraint({x: 1.0}, ">=", 1.0)
    prog.add_constraint({x: 1.0}, "<=", 0.0)
    prog.set_objective({}, "min")
    assert solve(prog).status == lpmod.INFEASIBLE


def test_unbounded():
    prog = LinearProgram()
    x = prog.add_variable("x")
    prog.set_objective({x: -1.0}, "min")
    assert solve(prog).status == lpmod.UNBOUNDED


def test_max_sense_and_bounds():
    prog = LinearProgram()
    x = prog.add_variable("x", lower=-2.0, upper=5.0)
    y = prog.add_variable("y", lower=0.0)
    prog.add_constraint({x: 1.0, y: 1.0}, "<=", 6.0)
    prog.set_objective({x: 1.0, y: 2.0}, "max")
    out = solve(prog)
    assert out.status == lpmod.OPTIMAL
    # push x to its smallest value, spend the row slack on y
    assert abs(out.objective - (-2.0 + 2 * 8.0)) <= 1e-7


def _random_feasible_lp(rng, n, m):
    """min c.x, A x >= b, x >= 0 with c >= 0 so the optimum is finite."""
    prog = LinearProgram()
    for j in range(n):
        prog.add_variable(lower=0.0)
    A = rng.uniform(-1, 2, size=(m, n))
    x0 = rng.uniform(0, 2, size=n)
    slack = rng.uniform(0, 1, size=m)
    b = A @ x0 - slack
    for i in range(m):
        prog.add_constraint({j: A[i, j] for j in range(n)}, ">=", float(b[i]))
    c = rng.uniform(0, 2, size=n)
    prog.set_objective({j: float(c[j]) for j in range(n)}, "min")
    return prog, A, b, c


def _dual_of(A, b, c):
    """max b.y, A^T y <= c, y >= 0 (dual of the generator above)."""
    m, n = A.shape
    prog = LinearProgram()
    for i in range(m):
        prog.add_variable(lower=0.0)
    for j in range(n):
        prog.add_constraint({i: float(A[i, j]) for i in range(m)}, "<=",
                            float(c[j]))
    prog.set_objective({i: float(b[i]) for i in range(m)}, "max")
    return prog


def test_duality_gap_random(rng):
    for trial in range(15):
        n = int(rng.integers(2, 21))
        m = int(rng.integers(2, 15))
        primal, A, b, c = _random_feasible_lp(rng, n, m)
        pout = solve(primal, engine="simplex")
        assert pout.status == lpmod.OPTIMAL
        dout = solve(_dual_of(A, b, c), engine="simplex")
        assert dout.status == lpmod.OPTIMAL
        assert abs(pout.objective - dout.objective) <= 1e-6 * (1 + abs(pout.objective))


def test_infeasible_farkas_exact_recheck(rng):
    # rational data; the exact simplex produces a ray verified with Fractions
    for trial in range(10):
        n = int(rng.integers(1, 5))
        prog = LinearProgram()
        for j in range(n):
            prog.add_variable(lower=0.0)
        coeffs = {j: float(rng.integers(1, 4)) for j in range(n)}
        prog.add_constraint(coeffs, ">=", float(rng.integers(5, 9)))
        prog.add_constraint(coeffs, "<=", float(rng.integers(1, 4)))
        prog.set_objective({0: 1.0}, "min")
        out = solve(prog, exact=True)
        assert out.status == lpmod.INFEASIBLE
        assert out.farkas is not None
        assert out.farkas.check_exact()


def test_never_reports_infeasible_on_feasible(rng):
    for trial in range(10):
        primal, *_ = _random_feasible_lp(rng, 5, 4)
        for engine in ("simplex", "scipy"):
            assert solve(primal, engine=engine).status == lpmod.OPTIMAL


def test_deterministic():
    rng = np.random.default_rng(99)
    prog, *_ = _random_feasible_lp(rng, 8, 6)
    a = solve(prog, engine="simplex")
    b = solve(prog, engine="simplex")
    assert a.x.tolist() == b.x.tolist()
    assert a.objective == b.objective


def test_engines_agree(rng):
    for _ in range(5):
        prog, *_ = _random_feasible_lp(rng, 6, 5)
        a = solve(prog, engine="simplex")
        b = solve(prog, engine="scipy")
        assert abs(a.objective - b.objective) <= 1e-7 * (1 + abs(a.objective))


def test_equality_constraints():
    prog = LinearProgram()
    x = prog.add_variable(lower=0.0)
    y = prog.add_variable(lower=0.0)
    prog.add_constraint({x: 1.0, y: 1.0}, "=", 4.0)
    prog.add_constraint({x: 1.0, y: -1.0}, "=", 2.0)
    prog.set_objective({x: 1.0}, "min")
    out = solve(prog)
    assert out.status == lpmod.OPTIMAL
    assert np.allclose(out.x, [3.0, 1.0], atol=1e-9)


def test_tol_must_be_positive():
    prog = LinearProgram()
    prog.add_variable()
    prog.set_objective({}, "min")
    with pytest.raises(ValueError):
        solve(prog, tol=0.0)


def test_solve_linear_system_examples():
    assert np.allclose(solve_linear_system(np.eye(2), [1.0, 2.0]), [1.0, 2.0])
    x = solve_linear_system(np.array([[1.0, 1.0]]), [2.0])
    assert np.allclose(x, [1.0, 1.0])  # minimum norm
    assert solve_linear_system(np.array([[1.0], [1.0]]), [0.0, 1.0]) is None


def test_export_text():
    prog = LinearProgram()
    x = prog.add_variable("x", lower=0.0)
    prog.add_constraint({x: 2.0}, ">=", 1.0)
    prog.set_objective({x: 3.0}, "min")
    text = prog.to_text()
    assert "min:" in text and ">= 1" in text and "x" in text
