"""Benchmark factory: build provably asymptotically stable polynomial ODEs by
fixing a positive definite pair (V1, V2) and solving the linear system
(grad V1) . F = -V2 for a vector field F with F(0) = 0.

Every exported benchmark records the residual of the defining identity; the
hidden pair is withheld by default so the synthesizer cannot cheat.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import GenerationFailure
from .lp import solve_linear_system
from .poly import OdeSystem, Polynomial, grlex_key, lie_derivative

RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class BenchSpec:
    n: int
    field_degree: int
    v1_form: str = "quad-diag"          # quad-diag | quartic-diag
    seed: int = 0
    max_tries: int = 100

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need at least two variables")
        if self.field_degree < 1:
            raise ValueError("field degree must be >= 1")
        if self.v1_form not in ("quad-diag", "quartic-diag"):
            raise ValueError(f"unknown v1 form {self.v1_form!r}")


@dataclass
class GeneratedBenchmark:
    system: OdeSystem
    hidden_v1: Polynomial
    hidden_v2: Polynomial
    residual: float
    spec: BenchSpec
    tries: int


def gen_v1(spec: BenchSpec, rng: np.random.Generator) -> Polynomial:
    """Diagonal positive definite form with weights uniform in [0.5, 2]."""
    power = 2 if spec.v1_form == "quad-diag" else 4
    terms = {}
    for j in range(spec.n):
        e = [0] * spec.n
        e[j] = power
        terms[tuple(e)] = float(rng.uniform(0.5, 2.0))
    return Polynomial(spec.n, terms)


def _random_sos_piece(n: int, rng: np.random.Generator,
                      max_degree: int) -> Polynomial:
    """Square of a random polynomial with terms of total degree 1..max_degree.

    Leaving out the constant keeps the square free of constant and linear
    monomials, which the field identity cannot absorb.
    """
    monos = [i for d in range(1, max_degree + 1)
             for i in itertools.product(range(d + 1), repeat=n) if sum(i) == d]
    monos = sorted(set(monos), key=grlex_key)
    base = Polynomial(n, {i: float(rng.uniform(-1, 1)) for i in monos})
    return base * base


def gen_v2(n: int, rng: np.random.Generator, base_power: int = 2,
           extra_budget: Optional[int] = None, lift: bool = False) -> Polynomial:
    """Positive definite target: diagonal base plus nonnegative box products.

    Each extra term is an SOS piece times a product of (1 +- x_i) factors with
    exponents in {0, 1}; every term is nonnegative on [-1,1]^n, so the sum
    dominates the diagonal base there, which is the retained positivity
    witness.  `extra_budget` caps the total degree of piece-times-factors so
    the field identity stays solvable; `lift` multiplies each extra term by a
    random x_k^4 (needed when the base form is quartic).
    """
    terms = {}
    for j in range(n):
        e = [0] * n
        e[j] = base_power
        terms[tuple(e)] = float(rng.uniform(0.5, 2.0))
    v2 = Polynomial(n, terms)
    count = int(rng.integers(1, 4))
    for _ in range(count):
        if extra_budget is not None and extra_budget < 2:
            break
        max_sos = 2 if (extra_budget is None or extra_budget >= 4) else 1
        piece = _random_sos_piece(n, rng, int(rng.integers(1, max_sos + 1)))
        room = None if extra_budget is None \
            else extra_budget - piece.total_degree()
        factors = Polynomial.constant(n, 1.0)
        slots = list(range(n)) * 2
        rng.shuffle(slots)
        used = 0
        for i in slots:
            if room is not None and used >= room:
                break
            if rng.random() < 0.5:
                continue
            sign = 1.0 if rng.random() < 0.5 else -1.0
            x = Polynomial.variable(n, i)
            factors = factors * (Polynomial.constant(n, 1.0) + x.scale(sign))
            used += 1
        term = piece * factors
        if lift:
            k = int(rng.integers(0, n))
            e = [0] * n
            e[k] = 4
            term = term * Polynomial.monomial(n, tuple(e))
        v2 = v2 + term
    return v2


def field_monomials(n: int, field_degree: int) -> list:
    """Template monomials for each field component: total degree 1..d."""
    monos = [i for d in range(1, field_degree + 1)
             for i in itertools.product(range(d + 1), repeat=n) if sum(i) == d]
    return sorted(set(monos), key=grlex_key)


def solve_field(v1: Polynomial, v2: Polynomial,
                field_degree: int) -> Optional[OdeSystem]:
    """Solve (grad V1) . F = -V2 by matching coefficients; None if inconsistent.

    Constant terms are excluded from the field template, so F(0) = 0 holds
    exactly by construction.
    """
    n = v1.n
    monos = field_monomials(n, field_degree)
    M = len(monos)
    grads = [v1.partial(j) for j in range(n)]

    support = set(v2.terms)
    columns = []
    for j in range(n):
        for mono in monos:
            prod = grads[j] * Polynomial.monomial(n, mono)
            columns.append(prod.terms)
            support.update(prod.terms)
    rows = sorted(support, key=grlex_key)
    row_of = {i: r for r, i in enumerate(rows)}
    A = np.zeros((len(rows), n * M))
    for col, terms in enumerate(columns):
        for i, c in terms.items():
            A[row_of[i], col] = c
    b = np.zeros(len(rows))
    for i, c in v2.terms.items():
        b[row_of[i]] = -c

    x = solve_linear_system(A, b, tol=RESIDUAL_TOL)
    if x is None:
        return None
    rhs = []
    for j in range(n):
        coeffs = x[j * M:(j + 1) * M]
        rhs.append(Polynomial(n, {m: float(c) for m, c in zip(monos, coeffs)
                                  if abs(c) > 0.0}))
    return OdeSystem(tuple(rhs))


def identity_residual(v1: Polynomial, v2: Polynomial,
                      system: OdeSystem) -> float:
    """Max coefficient of (grad V1) . F + V2 (zero for a perfect benchmark)."""
    return (lie_derivative(v1, system) + v2).max_coeff_diff(
        Polynomial.zero(v1.n))


def generate(spec: BenchSpec) -> GeneratedBenchmark:
    """Retry gen_v1/gen_v2/solve_field until the identity closes; deterministic
    for a fixed seed."""
    rng = np.random.default_rng(spec.seed)
    quartic = spec.v1_form == "quartic-diag"
    base_power = 4 if quartic else 2
    # grad(V1).F spans total degrees base_power .. base_power-1+d; the quartic
    # form additionally needs every monomial divisible by some x_j^3, hence the
    # x_k^4 lift of the extra terms and the tighter budget.
    extra_budget = (spec.field_degree - 1) if quartic else (spec.field_degree + 1)
    for attempt in range(1, spec.max_tries + 1):
        v1 = gen_v1(spec, rng)
        v2 = gen_v2(spec.n, rng, base_power=base_power,
                    extra_budget=extra_budget, lift=quartic)
        system = solve_field(v1, v2, spec.field_degree)
        if system is None:
            continue
        residual = identity_residual(v1, v2, system)
        if residual <= RESIDUAL_TOL:
            return GeneratedBenchmark(system=system, hidden_v1=v1,
                                      hidden_v2=v2, residual=residual,
                                      spec=spec, tries=attempt)
    raise GenerationFailure(
        f"no feasible field after {spec.max_tries} tries (seed {spec.seed})")
