import numpy as np
import pytest

from lyapcert.errors import BasisNotDownwardClosed, DimensionMismatch
from lyapcert.poly import (Box, OdeSystem, ParametricPolynomial, Polynomial,
                           affine_substitute, evaluate, lie_derivative,
                           lie_matrix, monomial_basis, transform_matrix)
from conftest import random_polynomial


def P(n, terms):
    return Polynomial(n, terms)


def test_evaluate_examples():
    p = P(1, {(2,): 4, (1,): -4, (0,): 1})
    assert evaluate(p, [0.5]) == 0.0
    q = P(2, {(2, 0): 1, (0, 2): 1})
    assert evaluate(q, (1, 1)) == 2.0
    r = P(2, {(4, 0): -2, (0, 2): -2})
    assert evaluate(r, (1, 2)) == -10.0


def test_evaluate_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        evaluate(P(2, {(1, 0): 1}), [1.0])


def test_arithmetic_examples():
    x = Polynomial.variable(1, 0)
    one = Polynomial.constant(1, 1.0)
    assert (x * (one - x)).terms == {(1,): 1.0, (2,): -1.0}
    assert (P(1, {(2,): 1}) + P(1, {(2,): -1})).terms == {}
    # (1-x)^2 (1+x) expanded against a convolution oracle
    conv = np.convolve(np.convolve([1, -1], [1, -1]), [1, 1])
    expanded = (one - x) * (one - x) * (one + x)
    assert expanded.terms == {(k,): float(c) for k, c in enumerate(conv) if c}


def test_multiply_degree_is_sum():
    rng = np.random.default_rng(7)
    for _ in range(20):
        p = random_polynomial(rng, 2, 2)
        q = random_polynomial(rng, 2, 3)
        prod = p * q
        if prod.is_zero():
            continue
        assert prod.degree() == tuple(a + b for a, b in
                                      zip(p.degree(), q.degree()))


def test_lie_derivative_examples():
    V = P(2, {(2, 0): 1, (0, 2): 1})
    grad_flow = OdeSystem((P(2, {(1, 0): -1}), P(2, {(0, 1): -1})))
    assert lie_derivative(V, grad_flow).terms == {(2, 0): -2.0, (0, 2): -2.0}
    cubic_spring = OdeSystem((P(2, {(3, 0): -1, (0, 1): 1}),
                       P(2, {(1, 0): -1, (0, 1): -1})))
    # 2x(-x^3+y) + 2y(-x-y): the cross terms cancel
    assert lie_derivative(V, cubic_spring).terms == {(4, 0): -2.0, (0, 2): -2.0}
    assert lie_derivative(Polynomial.constant(2, 1.0), cubic_spring).is_zero()


def test_lie_derivative_linear():
    rng = np.random.default_rng(3)
    sys_ = OdeSystem((random_polynomial(rng, 2, 2),
                      random_polynomial(rng, 2, 2)))
    p = random_polynomial(rng, 2, 2)
    q = random_polynomial(rng, 2, 2)
    a, b = 2.5, -1.25
    left = lie_derivative(p.scale(a) + q.scale(b), sys_)
    right = lie_derivative(p, sys_).scale(a) + lie_derivative(q, sys_).scale(b)
    scale = max(abs(c) for c in left.terms.values())
    assert left.max_coeff_diff(right) <= 1e-12 * max(scale, 1.0)


def test_lie_matrix_examples():
    f = OdeSystem((P(1, {(1,): -1}),))
    D, mp = lie_matrix(f, [(1,)])
    assert mp == [(1,)] and D.tolist() == [[-1.0]]

    grad_flow = OdeSystem((P(2, {(1, 0): -1}), P(2, {(0, 1): -1})))
    D, mp = lie_matrix(grad_flow, [(2, 0), (0, 2)])
    assert set(mp) == {(2, 0), (0, 2)}
    mat = {(row, mp[c]): D[row, c] for row in range(2) for c in range(2)}
    assert mat[(0, (2, 0))] == -2.0 and mat[(1, (0, 2))] == -2.0
    assert mat[(0, (0, 2))] == 0.0 and mat[(1, (2, 0))] == 0.0

    cubic = OdeSystem((P(1, {(3,): -1}),))
    D, mp = lie_matrix(cubic, [(2,)])
    assert mp == [(4,)] and D.tolist() == [[-2.0]]


def test_lie_matrix_consistency_random(rng):
    sys_ = OdeSystem((random_polynomial(rng, 2, 2),
                      random_polynomial(rng, 2, 2)))
    monos = [(2, 0), (1, 1), (0, 2), (1, 0)]
    template = ParametricPolynomial.from_monomials(2, monos)
    D, mp = lie_matrix(sys_, monos)
    for _ in range(10):
        c = rng.uniform(-3, 3, size=len(monos))
        direct = lie_derivative(template.instantiate(c), sys_)
        coeffs = D.T @ c
        via_matrix = Polynomial(2, dict(zip(mp, coeffs.tolist())))
        assert direct.max_coeff_diff(via_matrix) <= 1e-12


def test_affine_substitute_examples():
    x = Polynomial.variable(1, 0)
    sym = Box((-1,), (1,))
    assert affine_substitute(x, sym).terms == {(0,): -1.0, (1,): 2.0}
    x2 = P(1, {(2,): 1})
    assert affine_substitute(x2, sym).terms == {(0,): 1.0, (1,): -4.0, (2,): 4.0}
    unit = Box((0,), (1,))
    assert affine_substitute(x, unit).terms == x.terms


def test_affine_substitute_random_identity(rng):
    for _ in range(100):
        n = int(rng.integers(1, 4))
        p = random_polynomial(rng, n, 3)
        lo = rng.uniform(-3, 0, size=n)
        hi = lo + rng.uniform(0.5, 3, size=n)
        box = Box(tuple(lo), tuple(hi))
        q = affine_substitute(p, box)
        y = rng.uniform(0, 1, size=n)
        x = lo + y * (hi - lo)
        assert abs(evaluate(q, y) - evaluate(p, x)) <= 1e-10
        assert q.degree() == p.degree()


def test_transform_matrix_examples():
    basis = monomial_basis(2, (1, 1))
    T = transform_matrix(Box.unit(2), basis)
    assert np.allclose(T, np.eye(len(basis)))

    basis1 = [(0,), (1,)]
    T = transform_matrix(Box((-1,), (1,)), basis1)
    assert T[1].tolist() == [-1.0, 2.0]

    basis2 = [(0,), (1,), (2,)]
    T = transform_matrix(Box((-1,), (1,)), basis2)
    assert T[2].tolist() == [1.0, -4.0, 4.0]


def test_transform_matrix_requires_downward_closed():
    with pytest.raises(BasisNotDownwardClosed):
        transform_matrix(Box((-1,), (1,)), [(0,), (2,)])


def test_transform_matrix_consistency(rng):
    basis = monomial_basis(2, (2, 2))
    box = Box((-1.5, 0.5), (0.5, 2.0))
    T = transform_matrix(box, basis)
    for _ in range(10):
        c = rng.uniform(-2, 2, size=len(basis))
        p = Polynomial(2, dict(zip(basis, c.tolist())))
        direct = affine_substitute(p, box)
        via = Polynomial(2, dict(zip(basis, (T.T @ c).tolist())))
        assert direct.max_coeff_diff(via) <= 1e-12


def test_monomial_basis():
    assert monomial_basis(1, (2,)) == [(0,), (1,), (2,)]
    assert len(monomial_basis(2, (1, 1))) == 4
    assert len(monomial_basis(3, (2, 2, 2))) == 27
    # graded lexicographic: total degree first
    basis = monomial_basis(2, (2, 2))
    degrees = [sum(i) for i in basis]
    assert degrees == sorted(degrees)


def test_box_validation():
    with pytest.raises(Exception):
        Box((0, 0), (1, 0))
    box = Box((-1, -2), (1, 2))
    assert box.origin_interior()
    assert not Box((0.5, -1), (1, 1)).origin_interior()


def test_parametric_polynomial_instantiate():
    template = ParametricPolynomial.from_monomials(2, [(2, 0), (0, 2)])
    v = template.instantiate([2.0, 3.0])
    assert v.terms == {(2, 0): 2.0, (0, 2): 3.0}
    with pytest.raises(DimensionMismatch):
        template.instantiate([1.0])


def test_restrict_subsystem():
    # cascade: (y) autonomous, x driven by both
    sys_ = OdeSystem((P(2, {(1, 0): -1, (0, 1): 1}), P(2, {(0, 1): -2})))
    sub = sys_.restrict([1])
    assert sub.n == 1 and sub.rhs[0].terms == {(1,): -2.0}
    with pytest.raises(ValueError):
        sys_.restrict([0])
