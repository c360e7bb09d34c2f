"""Sparse multivariate polynomials over multi-indices, plus the affine and
Lie-derivative machinery used by the relaxation builders.

A polynomial is a map from exponent tuples (one entry per variable) to float
coefficients.  Canonical form never stores an exactly-zero coefficient, so
cancellation in `add` leaves an empty term map.  All matrix-producing helpers
index rows and columns in graded lexicographic order so matrices from
different modules compose without permutation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import BasisNotDownwardClosed, DegenerateBox, DimensionMismatch

MultiIndex = tuple  # tuple[int, ...]


def grlex_key(index):
    """Sort key for graded lexicographic order (total degree, then lex)."""
    return (sum(index), index)


def monomial_basis(n: int, delta: Sequence[int]) -> list:
    """All multi-indices I <= delta, graded lexicographic, len = prod(d+1)."""
    if len(delta) != n:
        raise DimensionMismatch(f"delta has {len(delta)} entries for {n} variables")
    if any(d < 0 for d in delta):
        raise ValueError("degree vector entries must be >= 0")
    idx = [tuple(i) for i in itertools.product(*(range(d + 1) for d in delta))]
    idx.sort(key=grlex_key)
    return idx


def index_leq(i, j) -> bool:
    """Componentwise partial order on multi-indices."""
    return all(a <= b for a, b in zip(i, j))


class Polynomial:
    """Sparse polynomial; immutable by convention after construction."""

    __slots__ = ("n", "terms")

    def __init__(self, n: int, terms: Optional[Mapping] = None):
        if n < 1:
            raise ValueError("need at least one variable")
        clean = {}
        for index, coeff in (terms or {}).items():
            index = tuple(int(e) for e in index)
            if len(index) != n:
                raise DimensionMismatch(
                    f"multi-index {index} has wrong length for {n} variables")
            if any(e < 0 for e in index):
                raise ValueError(f"negative exponent in {index}")
            if coeff != 0:
                clean[index] = clean.get(index, 0.0) + coeff
        self.n = n
        self.terms = {i: c for i, c in clean.items() if c != 0}

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, n: int) -> "Polynomial":
        return cls(n, {})

    @classmethod
    def constant(cls, n: int, value: float) -> "Polynomial":
        return cls(n, {tuple([0] * n): value})

    @classmethod
    def variable(cls, n: int, j: int) -> "Polynomial":
        e = [0] * n
        e[j] = 1
        return cls(n, {tuple(e): 1.0})

    @classmethod
    def monomial(cls, n: int, index, coeff: float = 1.0) -> "Polynomial":
        return cls(n, {tuple(index): coeff})

    # -- queries -----------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self):
        """Componentwise max of stored indices; (0,...,0) for the zero poly."""
        if not self.terms:
            return tuple([0] * self.n)
        return tuple(max(i[l] for i in self.terms) for l in range(self.n))

    def total_degree(self) -> int:
        return max((sum(i) for i in self.terms), default=0)

    def coeff(self, index) -> float:
        return self.terms.get(tuple(index), 0.0)

    def __eq__(self, other):
        return isinstance(other, Polynomial) and self.n == other.n \
            and self.terms == other.terms

    def __repr__(self):
        parts = [f"{c:+g}*x^{i}" for i, c in sorted(self.terms.items(), key=lambda t: grlex_key(t[0]))]
        return f"Polynomial({self.n}, {' '.join(parts) or '0'})"

    # -- arithmetic ---------------------------------------------------------

    def _check(self, other: "Polynomial"):
        if self.n != other.n:
            raise DimensionMismatch(
                f"operands over {self.n} and {other.n} variables")

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.n, other)
        self._check(other)
        terms = dict(self.terms)
        for i, c in other.terms.items():
            terms[i] = terms.get(i, 0.0) + c
        return Polynomial(self.n, terms)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.n, {i: -c for i, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.n, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, s: float) -> "Polynomial":
        return Polynomial(self.n, {i: s * c for i, c in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return self.scale(other)
        self._check(other)
        out = {}
        for i, a in self.terms.items():
            for j, b in other.terms.items():
                k = tuple(x + y for x, y in zip(i, j))
                out[k] = out.get(k, 0.0) + a * b
        return Polynomial(self.n, out)

    def __rmul__(self, other):
        return self.scale(other)

    def __pow__(self, e: int):
        if e < 0:
            raise ValueError("negative power")
        out = Polynomial.constant(self.n, 1.0)
        base = self
        while e:
            if e & 1:
                out = out * base
            base = base * base if e > 1 else base
            e >>= 1
        return out

    def partial(self, j: int) -> "Polynomial":
        """Partial derivative with respect to variable j."""
        out = {}
        for i, c in self.terms.items():
            if i[j] == 0:
                continue
            k = list(i)
            k[j] -= 1
            out[tuple(k)] = out.get(tuple(k), 0.0) + c * i[j]
        return Polynomial(self.n, out)

    # -- evaluation ---------------------------------------------------------

    def __call__(self, x: Sequence[float]) -> float:
        return evaluate(self, x)

    def eval_many(self, pts: np.ndarray) -> np.ndarray:
        """Evaluate at an (m, n) array of points; returns shape (m,)."""
        pts = np.asarray(pts, dtype=float)
        if pts.ndim == 1:
            pts = pts[None, :]
        if pts.shape[1] != self.n:
            raise DimensionMismatch("point dimension mismatch")
        acc = np.zeros(pts.shape[0])
        for i, c in self.terms.items():
            term = np.full(pts.shape[0], c)
            for l, e in enumerate(i):
                if e:
                    term = term * pts[:, l] ** e
            acc += term
        return acc

    def abs_coeff_sum(self, min_total_degree: int = 0) -> float:
        return sum(abs(c) for i, c in self.terms.items()
                   if sum(i) >= min_total_degree)

    def max_coeff_diff(self, other: "Polynomial") -> float:
        """Max absolute coefficient difference (infinity norm on coefficients)."""
        self._check(other)
        keys = set(self.terms) | set(other.terms)
        return max((abs(self.terms.get(k, 0.0) - other.terms.get(k, 0.0))
                    for k in keys), default=0.0)

    def to_fractions(self) -> dict:
        """Exact rational view of the coefficient map (for certificate rechecks)."""
        return {i: Fraction(c) for i, c in self.terms.items()}


def evaluate(p: Polynomial, x: Sequence[float]) -> float:
    """Evaluate p at a point; raises on dimension mismatch."""
    if len(x) != p.n:
        raise DimensionMismatch(f"point of length {len(x)} for {p.n} variables")
    total = 0.0
    for i, c in p.terms.items():
        v = c
        for l, e in enumerate(i):
            if e:
                v *= x[l] ** e
        total += v
    return total


@dataclass(frozen=True)
class Box:
    """Axis-aligned nondegenerate rectangle prod [lower_j, upper_j]."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if len(lo) != len(hi):
            raise DimensionMismatch("bound vectors of unequal length")
        if any(a >= b for a, b in zip(lo, hi)):
            raise DegenerateBox(f"need lower < upper, got {lo} / {hi}")

    @property
    def n(self) -> int:
        return len(self.lower)

    def widths(self):
        return tuple(u - l for l, u in zip(self.lower, self.upper))

    def contains(self, x, tol: float = 0.0) -> bool:
        return all(l - tol <= v <= u + tol
                   for v, l, u in zip(x, self.lower, self.upper))

    def origin_interior(self) -> bool:
        return all(l < 0.0 < u for l, u in zip(self.lower, self.upper))

    @classmethod
    def symmetric(cls, n: int, radius: float = 1.0) -> "Box":
        return cls(tuple([-radius] * n), tuple([radius] * n))

    @classmethod
    def unit(cls, n: int) -> "Box":
        return cls(tuple([0.0] * n), tuple([1.0] * n))

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return rng.uniform(lo, hi, size=(count, self.n))


@dataclass(frozen=True)
class OdeSystem:
    """dx/dt = f(x) with one polynomial per state variable."""

    rhs: tuple

    def __post_init__(self):
        rhs = tuple(self.rhs)
        object.__setattr__(self, "rhs", rhs)
        if not rhs:
            raise ValueError("empty system")
        n = rhs[0].n
        if len(rhs) != n or any(p.n != n for p in rhs):
            raise DimensionMismatch("system needs n polynomials over n variables")

    @property
    def n(self) -> int:
        return len(self.rhs)

    def eval_field(self, x) -> list:
        return [evaluate(p, x) for p in self.rhs]

    def restrict(self, axes: Sequence[int]) -> "OdeSystem":
        """Autonomous subsystem on the chosen axes.

        Valid only when the kept right-hand sides involve no dropped
        variable (a cascade's driving block); raises otherwise.
        """
        axes = list(axes)
        dropped = [j for j in range(self.n) if j not in axes]
        reduced = []
        for j in axes:
            p = self.rhs[j]
            if any(i[l] for i in p.terms for l in dropped):
                raise ValueError(
                    f"rhs of variable {j} depends on dropped variables")
            reduced.append(Polynomial(
                len(axes), {tuple(i[l] for l in axes): c
                            for i, c in p.terms.items()}))
        return OdeSystem(tuple(reduced))


@dataclass(frozen=True)
class ParametricPolynomial:
    """V(x, c) = c^T M m for a monomial vector m and coefficient matrix M."""

    n: int
    monomials: tuple
    coeff_map: np.ndarray  # (num_params, len(monomials))

    def __post_init__(self):
        mono = tuple(tuple(i) for i in self.monomials)
        object.__setattr__(self, "monomials", mono)
        cm = np.asarray(self.coeff_map, dtype=float)
        if cm.ndim != 2 or cm.shape[1] != len(mono):
            raise DimensionMismatch("coeff_map columns must match monomials")
        cm = cm.copy()
        cm.setflags(write=False)
        object.__setattr__(self, "coeff_map", cm)

    @property
    def num_params(self) -> int:
        return int(self.coeff_map.shape[0])

    def instantiate(self, c: Sequence[float]) -> Polynomial:
        c = np.asarray(c, dtype=float)
        if c.shape != (self.num_params,):
            raise DimensionMismatch(
                f"expected {self.num_params} parameters, got {c.shape}")
        coeffs = c @ self.coeff_map
        return Polynomial(self.n, dict(zip(self.monomials, coeffs.tolist())))

    @classmethod
    def from_monomials(cls, n: int, monomials: Iterable) -> "ParametricPolynomial":
        mono = tuple(tuple(i) for i in monomials)
        return cls(n, mono, np.eye(len(mono)))


def lie_derivative(p: Polynomial, system: OdeSystem) -> Polynomial:
    """Directional derivative of p along the vector field: sum_j dp/dx_j * f_j."""
    if p.n != system.n:
        raise DimensionMismatch("polynomial and system variable counts differ")
    out = Polynomial.zero(p.n)
    for j in range(p.n):
        dp = p.partial(j)
        if not dp.is_zero():
            out = out + dp * system.rhs[j]
    return out


def lie_matrix(system: OdeSystem, monomials: Sequence):
    """Matrix of Lie derivatives of basis monomials.

    Returns (D, mprime): row k of D holds the coefficients of the Lie
    derivative of monomials[k] in the graded-lex basis mprime, so the
    derivative of c^T m has coefficient vector D^T c over mprime.
    """
    if not monomials:
        raise ValueError("empty monomial basis")
    n = system.n
    derivs = [lie_derivative(Polynomial.monomial(n, i), system) for i in monomials]
    support = set()
    for d in derivs:
        support.update(d.terms)
    mprime = sorted(support, key=grlex_key) or [tuple([0] * n)]
    pos = {i: k for k, i in enumerate(mprime)}
    D = np.zeros((len(monomials), len(mprime)))
    for r, d in enumerate(derivs):
        for i, c in d.terms.items():
            D[r, pos[i]] = c
    return D, mprime


def affine_substitute(p: Polynomial, box: Box) -> Polynomial:
    """Rewrite p over the unit box: q(y) = p(l + y*(u-l)), y in [0,1]^n."""
    if p.n != box.n:
        raise DimensionMismatch("polynomial and box dimensions differ")
    lo, w = box.lower, box.widths()
    out = {}
    for index, coeff in p.terms.items():
        # per-axis binomial expansion of (l_j + w_j y)^e
        axis_vecs = []
        for l_j, w_j, e in zip(lo, w, index):
            axis_vecs.append([math.comb(e, k) * (l_j ** (e - k)) * (w_j ** k)
                              for k in range(e + 1)])
        for combo in itertools.product(*(range(len(v)) for v in axis_vecs)):
            c = coeff
            for v, k in zip(axis_vecs, combo):
                c *= v[k]
            if c:
                out[combo] = out.get(combo, 0.0) + c
    return Polynomial(p.n, out)


def transform_matrix(box: Box, monomials: Sequence) -> np.ndarray:
    """Change-of-variables matrix T with m = T mhat on a downward-closed basis.

    Row I lists the coefficients of the substituted monomial x^I over the unit
    box basis, so affine_substitute(c^T m) has coefficients T^T c.
    """
    mono = [tuple(i) for i in monomials]
    pos = {i: k for k, i in enumerate(mono)}
    T = np.zeros((len(mono), len(mono)))
    for r, index in enumerate(mono):
        q = affine_substitute(Polynomial.monomial(box.n, index), box)
        for j, c in q.terms.items():
            if j not in pos:
                raise BasisNotDownwardClosed(
                    f"substituted monomial {index} produced {j}, absent from basis")
            T[r, pos[j]] = c
    return T
