import numpy as np
import pytest

from lyapcert.bernstein import (basis_value_bound, bernstein_coeffs,
                                bernstein_tensor, conversion_matrix,
                                enclosure, eval_basis, recurrence_constraints)
from lyapcert.errors import DegreeTooLow
from lyapcert.poly import Box, Polynomial, monomial_basis
from conftest import random_polynomial


def test_coeffs_examples():
    one = Polynomial.constant(1, 1.0)
    assert bernstein_tensor(one, (2,)).tolist() == [1.0, 1.0, 1.0]
    x = Polynomial.variable(1, 0)
    assert bernstein_tensor(x, (1,)).tolist() == [0.0, 1.0]
    p = Polynomial(1, {(2,): 4, (1,): -4, (0,): 1})
    assert bernstein_tensor(p, (2,)).tolist() == [1.0, -1.0, 1.0]
    # (2u-1)^2 + (2v-1)^2: tensor sums of (1,-1,1); min -2
    q = Polynomial(2, {(2, 0): 4, (1, 0): -4, (0, 2): 4, (0, 1): -4, (0, 0): 2})
    t = bernstein_tensor(q, (2, 2))
    b = np.array([1.0, -1.0, 1.0])
    assert np.allclose(t, b[:, None] + b[None, :])
    assert t.min() == -2.0


def test_coeffs_degree_check():
    p = Polynomial(1, {(3,): 1})
    with pytest.raises(DegreeTooLow):
        bernstein_tensor(p, (2,))


def test_conversion_matrix_examples():
    B = conversion_matrix(1, (1,))
    assert B.tolist() == [[1.0, 1.0], [0.0, 1.0]]
    B = conversion_matrix(1, (2,))
    assert B[0].tolist() == [1.0, 1.0, 1.0]          # constant row: all ones
    assert B[1].tolist() == [0.0, 0.5, 1.0]          # x: C(j,1)/C(2,1)
    # any delta: constant monomial row is all ones
    B = conversion_matrix(2, (2, 3))
    basis = monomial_basis(2, (2, 3))
    assert np.allclose(B[basis.index((0, 0))], 1.0)


def test_conversion_matrix_cached():
    assert conversion_matrix(2, (2, 2)) is conversion_matrix(2, (2, 2))


def test_conversion_matrix_matches_tensor(rng):
    delta = (2, 3)
    basis = monomial_basis(2, delta)
    B = conversion_matrix(2, delta)
    for _ in range(5):
        c = rng.uniform(-2, 2, size=len(basis))
        p = Polynomial(2, dict(zip(basis, c.tolist())))
        t = bernstein_tensor(p, delta)
        vec = np.array([t[i] for i in basis])
        assert np.allclose(B.T @ c, vec, atol=1e-12)


def test_basis_value_bound_examples():
    assert basis_value_bound((0,), (2,)) == 1.0
    assert basis_value_bound((1,), (2,)) == 0.5
    assert basis_value_bound((1, 1), (2, 2)) == 0.25


def test_eval_basis_examples():
    assert eval_basis((0,), (1,), [0.25]) == 0.75
    assert eval_basis((1,), (2,), [0.5]) == 0.5
    assert eval_basis((1, 1), (2, 2), [0.5, 0.5]) == 0.25


def test_unit_partition(rng):
    for delta in ((3,), (2, 2), (2, 1, 2)):
        n = len(delta)
        for _ in range(20):
            x = rng.uniform(0, 1, size=n)
            total = sum(eval_basis(i, delta, x)
                        for i in monomial_basis(n, delta))
            assert abs(total - 1.0) <= 1e-12


def test_bound_sharpness():
    delta = (3, 2)
    grid = np.linspace(0.0, 1.0, 21)
    for i in monomial_basis(2, delta):
        bound = basis_value_bound(i, delta)
        worst = max(eval_basis(i, delta, (a, b)) for a in grid for b in grid)
        assert worst <= bound + 1e-12
        at_peak = eval_basis(i, delta,
                             tuple(ii / d if d else 0.0
                                   for ii, d in zip(i, delta)))
        assert abs(at_peak - bound) <= 1e-12


def test_representation_identity(rng):
    for _ in range(200):
        n = int(rng.integers(1, 4))
        deg = int(rng.integers(1, 4))
        p = random_polynomial(rng, n, deg)
        delta = tuple([deg] * n)
        t = bernstein_tensor(p, delta)
        idx = monomial_basis(n, delta)
        for _ in range(20):
            x = rng.uniform(0, 1, size=n)
            val = sum(t[i] * eval_basis(i, delta, x) for i in idx)
            assert abs(val - p(tuple(x))) <= 1e-9


def test_recurrence_examples():
    rcs = recurrence_constraints((1,), "fixed-level-1")
    assert len(rcs) == 1
    (j, dp) = rcs[0].low
    assert (j, dp) == ((0,), (0,))
    coeffs = [c for (_, c) in rcs[0].high]
    assert coeffs == [1.0, 1.0]

    rcs = recurrence_constraints((2,), "fixed-level-1")
    table = {rc.low[0]: rc for rc in rcs}
    assert [c for _, c in table[(0,)].high] == [1.0, 0.5]
    assert [c for _, c in table[(1,)].high] == [0.5, 1.0]

    assert len(recurrence_constraints((1, 1), "fixed-level-1")) == 4


def test_recurrence_axis_zero_error():
    with pytest.raises(ValueError):
        recurrence_constraints((2, 0), "fixed-level-1")


def test_recurrence_identity_random(rng):
    for levels in ("fixed-level-1", "full"):
        for rc in recurrence_constraints((2, 3), levels):
            for _ in range(50):
                x = rng.uniform(0, 1, size=2)
                assert abs(rc.residual(x)) <= 1e-12


def test_enclosure_examples():
    p = Polynomial(1, {(2,): 4, (1,): -4, (0,): 1})
    assert enclosure(p, Box((0,), (1,)), (2,)) == (-1.0, 1.0)
    q = Polynomial(2, {(2, 0): 1, (0, 2): 1})
    assert enclosure(q, Box.symmetric(2), (2, 2)) == (-2.0, 2.0)
    assert enclosure(Polynomial.constant(2, 7.0), Box.symmetric(2)) == (7.0, 7.0)


def test_enclosure_soundness(rng):
    for _ in range(20):
        n = int(rng.integers(1, 3))
        p = random_polynomial(rng, n, 3)
        lo = rng.uniform(-2, 0, size=n)
        hi = lo + rng.uniform(0.5, 2, size=n)
        box = Box(tuple(lo), tuple(hi))
        low, high = enclosure(p, box)
        pts = box.sample(rng, 50)
        vals = p.eval_many(pts)
        assert np.all(vals >= low - 1e-9)
        assert np.all(vals <= high + 1e-9)


def test_degree_elevation_convergence(rng):
    from lyapcert.relax import grid_minimum
    p = random_polynomial(rng, 2, 2)
    box = Box.symmetric(2)
    exact = grid_minimum(p, box, 200)
    gaps = []
    lows = []
    for scale in (1, 2, 4):
        low, _ = enclosure(p, box, (2 * scale, 2 * scale))
        lows.append(low)
        gaps.append(exact - low)
    assert lows[0] <= lows[1] + 1e-12 <= lows[2] + 2e-12
    assert gaps[2] <= gaps[0] + 1e-12
