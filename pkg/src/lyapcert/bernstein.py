"""Bernstein expansion over the unit box: coefficients, conversion matrices,
value bounds and the degree-lowering recurrence used by the tightest LP
relaxation.

Conversion matrices are cached per (n, delta) behind a lock; the cache is
read-mostly and shared across threads.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import reduce
from typing import Optional, Sequence

import numpy as np

from .errors import DegreeTooLow, DimensionMismatch
from .poly import Box, Polynomial, affine_substitute, monomial_basis

_BINOM_LIMIT = 64  # keeps precomputed rows small; spec'd degree cap is 30
_pascal_rows = [[1]]
_pascal_lock = threading.Lock()


def binom(m: int, k: int) -> int:
    """Binomial coefficient from a cached Pascal triangle of exact integers."""
    if k < 0 or k > m:
        return 0
    if m > _BINOM_LIMIT:
        raise ValueError(f"degree component {m} above supported limit {_BINOM_LIMIT}")
    if m >= len(_pascal_rows):
        with _pascal_lock:
            while len(_pascal_rows) <= m:
                prev = _pascal_rows[-1]
                row = [1] + [prev[i] + prev[i + 1] for i in range(len(prev) - 1)] + [1]
                _pascal_rows.append(row)
    return _pascal_rows[m][k]


def _check_degree(p: Polynomial, delta) -> tuple:
    delta = tuple(int(d) for d in delta)
    if len(delta) != p.n:
        raise DimensionMismatch("degree vector length mismatch")
    deg = p.degree()
    if any(d < g for d, g in zip(delta, deg)):
        raise DegreeTooLow(
            f"expansion degree {delta} below polynomial degree {deg}; elevate delta")
    return delta


def bernstein_tensor(p: Polynomial, delta: Sequence[int]) -> np.ndarray:
    """Bernstein coefficients of p on [0,1]^n as a tensor of shape delta+1.

    Entry [I] is b_{I,delta} = sum_{J <= I} C(I,J)/C(delta,J) p_J.
    """
    delta = _check_degree(p, delta)
    shape = tuple(d + 1 for d in delta)
    b = np.zeros(shape)
    for J, coeff in p.terms.items():
        arr = np.array(coeff)
        for j_l, d_l in zip(J, delta):
            denom = binom(d_l, j_l)
            v = np.array([binom(i, j_l) / denom if i >= j_l else 0.0
                          for i in range(d_l + 1)])
            arr = np.multiply.outer(arr, v)
        b += arr
    return b


@dataclass(frozen=True)
class BernsteinCoeffs:
    """Full coefficient map of an expansion of degree delta."""

    delta: tuple
    coeffs: dict  # MultiIndex -> float, one entry per I <= delta

    def min(self) -> float:
        return min(self.coeffs.values())

    def max(self) -> float:
        return max(self.coeffs.values())

    def vector(self) -> np.ndarray:
        """Coefficients in graded-lex order, matching monomial_basis."""
        order = monomial_basis(len(self.delta), self.delta)
        return np.array([self.coeffs[i] for i in order])


def bernstein_coeffs(p: Polynomial, delta: Sequence[int]) -> BernsteinCoeffs:
    """Bernstein coefficients of p interpreted over [0,1]^n."""
    delta = _check_degree(p, delta)
    t = bernstein_tensor(p, delta)
    coeffs = {idx: float(t[idx]) for idx in np.ndindex(t.shape)}
    return BernsteinCoeffs(delta, coeffs)


_conversion_cache: dict = {}
_conversion_lock = threading.Lock()


def conversion_matrix(n: int, delta: Sequence[int]) -> np.ndarray:
    """Monomial-to-Bernstein change of basis on the full grid I <= delta.

    Rows are monomials x^I and columns Bernstein indices J, both in graded-lex
    order; entry (I, J) = C(J,I)/C(delta,I) when I <= J else 0.  For any
    coefficient vector c over monomials, B^T c is the Bernstein coefficient
    vector of c^T m.
    """
    delta = tuple(int(d) for d in delta)
    key = (n, delta)
    cached = _conversion_cache.get(key)
    if cached is not None:
        return cached
    univariate = []
    for d in delta:
        U = np.zeros((d + 1, d + 1))
        for i in range(d + 1):
            denom = binom(d, i)
            for j in range(i, d + 1):
                U[i, j] = binom(j, i) / denom
        univariate.append(U)
    full = reduce(np.kron, univariate) if univariate else np.ones((1, 1))
    # np.kron orders the flat index with the first factor slowest, i.e. C
    # order over the index tuple; permute into graded-lex.
    dims = tuple(d + 1 for d in delta)
    basis = monomial_basis(n, delta)
    perm = np.array([int(np.ravel_multi_index(i, dims)) for i in basis])
    B = full[np.ix_(perm, perm)]
    B.setflags(write=False)
    with _conversion_lock:
        _conversion_cache.setdefault(key, B)
    return _conversion_cache[key]


def eval_basis(I: Sequence[int], delta: Sequence[int], x: Sequence[float]) -> float:
    """Value of the multivariate Bernstein basis polynomial B_{I,delta}(x)."""
    v = 1.0
    for i, d, t in zip(I, delta, x):
        v *= binom(d, i) * (t ** i) * ((1.0 - t) ** (d - i))
    return v


def basis_value_bound(I: Sequence[int], delta: Sequence[int]) -> float:
    """Sharp upper bound of B_{I,delta} on the unit box, attained at I/delta."""
    v = 1.0
    for i, d in zip(I, delta):
        if d == 0:
            continue
        t = i / d
        # 0^0 = 1 convention at the endpoints
        v *= binom(d, i) * (t ** i if i else 1.0) * ((1.0 - t) ** (d - i) if d - i else 1.0)
    return v


@dataclass(frozen=True)
class RecurrenceConstraint:
    """Degree-lowering identity B_{J,d'} = c0*B_{J,d'+e_r} + c1*B_{J+e_r,d'+e_r}.

    Coefficients are (d'_r+1-j_r)/(d'_r+1) and (j_r+1)/(d'_r+1).
    """

    low: tuple          # (J, dprime)
    axis: int
    high: tuple         # (((J, dprime+e_r), c0), ((J+e_r, dprime+e_r), c1))

    def residual(self, x: Sequence[float]) -> float:
        (j, dp) = self.low
        val = eval_basis(j, dp, x)
        for (idx, deg), c in self.high:
            val -= c * eval_basis(idx, deg, x)
        return val


def _tie(J, dprime, axis) -> RecurrenceConstraint:
    d_high = list(dprime)
    d_high[axis] += 1
    d_high = tuple(d_high)
    j_up = list(J)
    j_up[axis] += 1
    m = dprime[axis] + 1
    c0 = (m - J[axis]) / m
    c1 = (J[axis] + 1) / m
    return RecurrenceConstraint(
        low=(tuple(J), tuple(dprime)), axis=axis,
        high=(((tuple(J), d_high), c0), ((tuple(j_up), d_high), c1)))


def recurrence_constraints(delta: Sequence[int], levels: str = "fixed-level-1",
                           axes: Optional[Sequence[int]] = None) -> list:
    """Degree-lowering constraints for the LP3 relaxation.

    fixed-level-1 ties each delta' = delta - e_r (one per axis) to delta;
    full ties every delta' < delta to its immediate successors.
    """
    delta = tuple(int(d) for d in delta)
    n = len(delta)
    axes = tuple(axes) if axes is not None else tuple(range(n))
    for r in axes:
        if delta[r] == 0:
            raise ValueError(f"axis {r} has degree 0; nothing to lower")
    out = []
    if levels == "fixed-level-1":
        for r in axes:
            dprime = list(delta)
            dprime[r] -= 1
            for J in monomial_basis(n, dprime):
                out.append(_tie(J, tuple(dprime), r))
    elif levels == "full":
        for dprime in monomial_basis(n, delta):
            if dprime == delta:
                continue
            for r in axes:
                if dprime[r] >= delta[r]:
                    continue
                for J in monomial_basis(n, dprime):
                    out.append(_tie(J, dprime, r))
    else:
        raise ValueError(f"unknown levels {levels!r}")
    return out


def enclosure(p: Polynomial, box: Box, delta: Optional[Sequence[int]] = None):
    """Guaranteed range enclosure (lo, hi) of p over the box.

    Transforms to the unit box and takes the min/max Bernstein coefficient.
    """
    q = affine_substitute(p, box)
    if delta is None:
        delta = q.degree()
    t = bernstein_tensor(q, delta)
    return float(t.min()), float(t.max())
