import numpy as np
import pytest

from lyapcert.errors import DegreeTooLow, ExpansionLimitExceeded
from lyapcert.poly import Box, Polynomial
from lyapcert.relax import (RelaxMethod, box_halfspaces, certify_nonneg,
                            grid_minimum, handelman_lp, interval_bound,
                            lower_bound, lower_bound_subdivided)
from conftest import random_polynomial


def P(n, terms):
    return Polynomial(n, terms)


UNIT1 = Box((0,), (1,))
SYM1 = Box((-1,), (1,))
SYM2 = Box.symmetric(2)

EX41 = P(1, {(2,): 4, (1,): -4, (0,): 1})      # (2x-1)^2 on [0,1]
EX42 = P(2, {(2, 0): 1, (0, 2): 1})            # x^2+y^2 on [-1,1]^2

EX21_P = P(2, {(3, 0): -2, (2, 1): 6, (2, 0): 7, (1, 2): -6, (1, 1): -14,
               (0, 3): 2, (0, 2): 7, (0, 0): -9})
EX21_F1 = P(2, {(1, 0): 1, (0, 1): -1, (0, 0): -3})
EX21_F2 = P(2, {(0, 1): 1, (1, 0): -1, (0, 0): -1})


def test_interval_examples():
    assert interval_bound(P(1, {(2,): 1}), SYM1) == (0.0, 1.0)
    assert interval_bound(EX42, Box.unit(2)) == (0.0, 2.0)
    x = Polynomial.variable(1, 0)
    cancelled = x - x
    assert cancelled.is_zero()
    assert interval_bound(cancelled, SYM1) == (0.0, 0.0)


def test_lower_bound_example_41():
    assert abs(lower_bound(EX41, UNIT1, RelaxMethod.lp1((2,))) + 1.0) <= 1e-9
    assert abs(lower_bound(EX41, UNIT1, RelaxMethod.lp2((2,)))) <= 1e-9


def test_lower_bound_example_42():
    assert abs(lower_bound(EX42, SYM2, RelaxMethod.lp1((2, 2))) + 2.0) <= 1e-9
    assert abs(lower_bound(EX42, SYM2, RelaxMethod.lp2((2, 2))) + 0.5) <= 1e-9
    assert abs(lower_bound(EX42, SYM2,
                           RelaxMethod.lp3((2, 2), levels="full"))) <= 1e-9


def test_lower_bound_constant():
    five = Polynomial.constant(2, 5.0)
    for method in (RelaxMethod.lp1(), RelaxMethod.lp2(), RelaxMethod.lp3(),
                   RelaxMethod.interval()):
        assert abs(lower_bound(five, SYM2, method) - 5.0) <= 1e-9


def test_lower_bound_degree_check():
    with pytest.raises(DegreeTooLow):
        lower_bound(EX41, UNIT1, RelaxMethod.lp1((1,)))


def test_lp1_closed_form(rng):
    from lyapcert.bernstein import bernstein_tensor
    from lyapcert.poly import affine_substitute
    for _ in range(20):
        p = random_polynomial(rng, 2, 2)
        value = lower_bound(p, SYM2, RelaxMethod.lp1((3, 3)))
        t = bernstein_tensor(affine_substitute(p, SYM2), (3, 3))
        assert abs(value - t.min()) <= 1e-9


def test_handelman_example_21():
    cert = handelman_lp(EX21_P, [EX21_F1, EX21_F2], 3)
    assert cert is not None
    assert cert.verify(recon_tol=1e-8)
    assert cert.verify(recon_tol=1e-8, exact=True)
    # the source identity 2 f1^2 f2 + 3 f1 f2 is one valid certificate
    recon = (EX21_F1 * EX21_F1 * EX21_F2).scale(2) + (EX21_F1 * EX21_F2).scale(3)
    assert recon.max_coeff_diff(EX21_P) == 0.0


def test_handelman_square_has_no_representation():
    x2 = P(1, {(2,): 1})
    halfspaces = box_halfspaces(SYM1)
    for degree in (1, 2, 3, 4):
        assert handelman_lp(x2, halfspaces, degree) is None


def test_handelman_trivial_member():
    cert = handelman_lp(EX21_F1, [EX21_F1, EX21_F2], 1)
    assert cert is not None
    lams = {tuple(e): l for e, l in
            zip(cert.data["exponents"], cert.data["multipliers"])}
    assert abs(lams[(1, 0)] - 1.0) <= 1e-9


def test_handelman_rejects_nonaffine():
    with pytest.raises(ValueError):
        handelman_lp(EX21_P, [P(2, {(2, 0): 1})], 2)


def test_handelman_term_cap():
    halfspaces = box_halfspaces(Box.symmetric(2))
    with pytest.raises(ExpansionLimitExceeded):
        handelman_lp(EX21_P, halfspaces, 4, term_cap=10)


def test_certify_examples():
    cert = certify_nonneg(EX41, UNIT1, RelaxMethod.lp2((2,)), margin=0.0)
    assert cert is not None and cert.verify()
    assert certify_nonneg(EX41, UNIT1, RelaxMethod.lp1((2,))) is None
    minus1 = Polynomial.constant(1, -1.0)
    for method in (RelaxMethod.lp1(), RelaxMethod.lp2(), RelaxMethod.interval()):
        assert certify_nonneg(minus1, UNIT1, method) is None


def test_certify_interval_and_handelman():
    allpos = P(2, {(2, 0): 1, (1, 1): 2, (0, 0): 0.5})
    cert = certify_nonneg(allpos, Box.unit(2), RelaxMethod.interval())
    assert cert is not None and cert.verify()
    # 3x - 2x^2 = x + 2x(1-x): a textbook conic combination over [0,1]
    rep = P(1, {(1,): 3, (2,): -2})
    cert = certify_nonneg(rep, UNIT1, RelaxMethod.handelman(2))
    assert cert is not None and cert.verify(exact=True)
    # (2x-1)^2 vanishes inside the box, so no Handelman representation exists
    assert certify_nonneg(EX41, UNIT1, RelaxMethod.handelman(2)) is None


def test_subdivided_examples():
    x2 = P(1, {(2,): 1})
    val = lower_bound_subdivided(x2, SYM1, RelaxMethod.lp1((2,)), [[0.0]])
    assert abs(val) <= 1e-12
    plain = lower_bound(EX41, UNIT1, RelaxMethod.lp1((2,)))
    assert lower_bound_subdivided(EX41, UNIT1, RelaxMethod.lp1((2,))) == plain
    val = lower_bound_subdivided(EX42, SYM2, RelaxMethod.lp1((2, 2)),
                                 [[0.0], [0.0]])
    assert abs(val) <= 1e-12


def test_subdivided_validates_cuts():
    with pytest.raises(ValueError):
        lower_bound_subdivided(EX41, UNIT1, RelaxMethod.lp1(), [[2.0]])


def test_subdivision_monotone(rng):
    for _ in range(10):
        p = random_polynomial(rng, 1, 3)
        coarse = lower_bound_subdivided(p, SYM1, RelaxMethod.lp1((3,)), [[0.0]])
        fine = lower_bound_subdivided(p, SYM1, RelaxMethod.lp1((3,)),
                                      [[-0.5, 0.0, 0.5]])
        assert fine >= coarse - 1e-9


def test_monotone_chain_small(rng):
    # the full 100-polynomial sweep lives in the acceptance suite
    for _ in range(15):
        p = random_polynomial(rng, 2, 2)
        delta = (3, 3)
        lp1 = lower_bound(p, SYM2, RelaxMethod.lp1(delta))
        lp2 = lower_bound(p, SYM2, RelaxMethod.lp2(delta))
        lp3 = lower_bound(p, SYM2, RelaxMethod.lp3(delta))
        oracle = grid_minimum(p, SYM2, 200)
        assert lp1 <= lp2 + 1e-7
        assert lp2 <= lp3 + 2e-7
        assert lp3 <= oracle + 1e-6


def test_handelman_subsumption(rng):
    # anything Handelman certifies on the unit box is also LP1-certified
    box = Box.unit(2)
    halfspaces = box_halfspaces(box)
    hits = 0
    for _ in range(30):
        p = random_polynomial(rng, 2, 2, coeff_range=(-0.3, 1.0))
        cert = handelman_lp(p, halfspaces, 2)
        if cert is None:
            continue
        hits += 1
        assert lower_bound(p, box, RelaxMethod.lp1((2, 2))) >= -1e-8
    assert hits >= 3


def test_interval_subsumption(rng):
    # all nonnegative coefficients: interval certifies on [0,1]^n, so must LP1
    for _ in range(20):
        p = random_polynomial(rng, 2, 2, coeff_range=(0.0, 2.0))
        assert interval_bound(p, Box.unit(2))[0] >= -1e-12
        assert lower_bound(p, Box.unit(2), RelaxMethod.lp1()) >= -1e-9


def test_rlt_baseline(rng):
    from lyapcert.relax import rlt_lower_bound
    # the plain power-product bound never beats the Bernstein formulation
    # (the same products, minus the unit partition), and interval rows can
    # only tighten it
    for _ in range(10):
        p = random_polynomial(rng, 2, 2)
        rlt = rlt_lower_bound(p, SYM2, (2, 2))
        lp1 = lower_bound(p, SYM2, RelaxMethod.lp1((2, 2)))
        assert rlt <= lp1 + 1e-7
        aug = rlt_lower_bound(p, SYM2, (2, 2), interval_bounds=True)
        assert aug >= rlt - 1e-9
        assert aug <= lp1 + 1e-7


def test_certificate_rejects_tampering():
    cert = certify_nonneg(EX41, UNIT1, RelaxMethod.lp2((2,)))
    assert cert.verify()
    cert.data["bernstein_coeffs"][1][1] += 1e-4
    assert not cert.verify()
