"""Positivity relaxations over boxes and polyhedra.

Three Bernstein LPs of increasing strength over the unit box (nonnegativity
plus unit partition; sharp basis bounds; degree-lowering recurrences), the
interval baseline, and the Handelman power-product LP over affine halfspace
descriptions.  Every certificate carries enough data to be rebuilt and checked
independently of the code path that produced it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import lp as lpmod
from .bernstein import (basis_value_bound, bernstein_tensor, bernstein_coeffs,
                        recurrence_constraints)
from .errors import DegreeTooLow, ExpansionLimitExceeded, LpFailure
from .lp import LinearProgram
from .poly import (Box, Polynomial, affine_substitute, grlex_key,
                   monomial_basis)

HANDELMAN_TERM_CAP = 200_000


@dataclass(frozen=True)
class RelaxMethod:
    """Which relaxation to run and at which expansion degree."""

    kind: str                       # interval | handelman | lp1 | lp2 | lp3
    delta: Optional[tuple] = None   # Bernstein degree; None = degree of query
    handelman_degree: int = 2       # per-factor exponent cap D
    levels: str = "fixed-level-1"   # lp3 only: fixed-level-1 | full

    def __post_init__(self):
        if self.kind not in ("interval", "handelman", "lp1", "lp2", "lp3"):
            raise ValueError(f"unknown relaxation kind {self.kind!r}")
        if self.levels not in ("fixed-level-1", "full"):
            raise ValueError(f"unknown levels {self.levels!r}")
        if self.delta is not None:
            object.__setattr__(self, "delta", tuple(int(d) for d in self.delta))

    @classmethod
    def interval(cls):
        return cls("interval")

    @classmethod
    def handelman(cls, degree: int):
        return cls("handelman", handelman_degree=degree)

    @classmethod
    def lp1(cls, delta=None):
        return cls("lp1", delta=tuple(delta) if delta is not None else None)

    @classmethod
    def lp2(cls, delta=None):
        return cls("lp2", delta=tuple(delta) if delta is not None else None)

    @classmethod
    def lp3(cls, delta=None, levels: str = "fixed-level-1"):
        return cls("lp3", delta=tuple(delta) if delta is not None else None,
                   levels=levels)

    def with_delta(self, delta):
        return RelaxMethod(self.kind, tuple(delta), self.handelman_degree,
                           self.levels)

    def label(self) -> str:
        return {"lp1": "LP1", "lp2": "LP2", "lp3": "LP3",
                "interval": "Interval", "handelman": "Handelman"}[self.kind]


# --------------------------------------------------------------------------
# interval baseline
# --------------------------------------------------------------------------

def _power_interval(lo: float, hi: float, e: int):
    if e == 0:
        return (1.0, 1.0)
    if e % 2 == 1:
        return (lo ** e, hi ** e)
    a, b = abs(lo), abs(hi)
    high = max(a, b) ** e
    low = 0.0 if lo <= 0.0 <= hi else min(a, b) ** e
    return (low, high)


def interval_bound(p: Polynomial, box: Box):
    """Per-monomial interval evaluation; sound but coarse enclosure."""
    if p.n != box.n:
        raise ValueError("dimension mismatch")
    lo_total, hi_total = 0.0, 0.0
    for index, coeff in p.terms.items():
        lo, hi = 1.0, 1.0
        for l, e in enumerate(index):
            a, b = _power_interval(box.lower[l], box.upper[l], e)
            candidates = (lo * a, lo * b, hi * a, hi * b)
            lo, hi = min(candidates), max(candidates)
        if coeff >= 0:
            lo_total += coeff * lo
            hi_total += coeff * hi
        else:
            lo_total += coeff * hi
            hi_total += coeff * lo
    return lo_total, hi_total


# --------------------------------------------------------------------------
# Bernstein z-variable systems
# --------------------------------------------------------------------------

@dataclass
class ZSystem:
    """Constraint rows of a Bernstein relaxation in `sum a_j z_j >= rhs` form.

    The top block (index 0) carries the expansion degree delta; lp3 adds
    lower-degree blocks.  Row kinds: nonneg, ubound, partition, recurrence
    (equalities are stored as paired >= rows).
    """

    blocks: list                 # degree vector per block; blocks[0] == delta
    block_index: list            # per block: dict MultiIndex -> z column
    nvars: int
    rows: list = field(default_factory=list)        # (dict col->coef, rhs)
    row_kinds: list = field(default_factory=list)

    def add_row(self, coeffs: dict, rhs: float, kind: str):
        self.rows.append((coeffs, rhs))
        self.row_kinds.append(kind)

    def top_size(self) -> int:
        return len(self.block_index[0])


def build_z_system(delta, kind: str, levels: str = "fixed-level-1") -> ZSystem:
    """Constraint system of the chosen relaxation over placeholder variables."""
    delta = tuple(int(d) for d in delta)
    n = len(delta)
    blocks = [delta]
    if kind == "lp3":
        if levels == "fixed-level-1":
            for r in range(n):
                if delta[r] >= 1:
                    lower = list(delta)
                    lower[r] -= 1
                    lower = tuple(lower)
                    if lower not in blocks:
                        blocks.append(lower)
        else:
            blocks += [d for d in monomial_basis(n, delta) if d != delta]

    block_index, offset = [], 0
    for bd in blocks:
        idx = {i: offset + k for k, i in enumerate(monomial_basis(n, bd))}
        block_index.append(idx)
        offset += len(idx)
    zs = ZSystem(blocks=blocks, block_index=block_index, nvars=offset)

    for b, bd in enumerate(blocks):
        idx = block_index[b]
        for i, col in idx.items():
            zs.add_row({col: 1.0}, 0.0, "nonneg")
            if kind in ("lp2", "lp3"):
                zs.add_row({col: -1.0}, -basis_value_bound(i, bd), "ubound")
        ones = {col: 1.0 for col in idx.values()}
        zs.add_row(dict(ones), 1.0, "partition")
        zs.add_row({c: -1.0 for c in ones}, -1.0, "partition")

    if kind == "lp3":
        axes = [r for r in range(n) if delta[r] >= 1]
        for rec in recurrence_constraints(delta, levels, axes=axes):
            (j_low, d_low) = rec.low
            low_block = blocks.index(d_low)
            coeffs = {block_index[low_block][j_low]: 1.0}
            for (idx_hi, d_hi), c in rec.high:
                hi_block = blocks.index(d_hi)
                col = block_index[hi_block][idx_hi]
                coeffs[col] = coeffs.get(col, 0.0) - c
            zs.add_row(dict(coeffs), 0.0, "recurrence")
            zs.add_row({c: -v for c, v in coeffs.items()}, 0.0, "recurrence")
    return zs


def _z_system_lp(zs: ZSystem, objective: dict) -> LinearProgram:
    prog = LinearProgram()
    prog.add_variables(zs.nvars, prefix="z", lower=0.0)
    for (coeffs, rhs), kind in zip(zs.rows, zs.row_kinds):
        if kind == "nonneg":
            continue  # covered by the variable lower bounds
        prog.add_constraint(coeffs, ">=", rhs)
    prog.set_objective(objective, sense="min")
    return prog


def _delta_for(method: RelaxMethod, q: Polynomial) -> tuple:
    deg = q.degree()
    if method.delta is None:
        return deg
    if any(d < g for d, g in zip(method.delta, deg)):
        raise DegreeTooLow(
            f"method degree {method.delta} below polynomial degree {deg}")
    return method.delta


def lower_bound(p: Polynomial, box: Box, method: RelaxMethod,
                tol: float = 1e-9, engine: str = "auto") -> float:
    """Certified lower bound of p over the box via the chosen relaxation."""
    if method.kind == "interval":
        return interval_bound(p, box)[0]
    if method.kind == "handelman":
        raise ValueError("handelman provides certificates, not lower bounds")
    q = affine_substitute(p, box)
    delta = _delta_for(method, q)
    tensor = bernstein_tensor(q, delta)
    zs = build_z_system(delta, method.kind, method.levels)
    order = monomial_basis(len(delta), delta)
    objective = {zs.block_index[0][i]: float(tensor[i]) for i in order}
    prog = _z_system_lp(zs, objective)
    out = lpmod.solve(prog, tol=tol, engine=engine)
    if not out.is_optimal:
        raise LpFailure(f"relaxation LP ended with status {out.status}")
    return float(out.objective)


def lower_bound_subdivided(p: Polynomial, box: Box, method: RelaxMethod,
                           splits: Optional[Sequence[Sequence[float]]] = None,
                           tol: float = 1e-9, engine: str = "auto") -> float:
    """Min of per-cell lower bounds over the grid induced by per-axis cuts."""
    if splits is None:
        splits = [[] for _ in range(box.n)]
    segments = []
    for l, cuts in enumerate(splits):
        cuts = sorted(cuts)
        lo, hi = box.lower[l], box.upper[l]
        if any(not lo < c < hi for c in cuts):
            raise ValueError(f"cut outside axis {l} range ({lo}, {hi})")
        points = [lo] + list(cuts) + [hi]
        segments.append(list(zip(points[:-1], points[1:])))
    best = np.inf
    for cell_ranges in itertools.product(*segments):
        cell = Box(tuple(r[0] for r in cell_ranges),
                   tuple(r[1] for r in cell_ranges))
        best = min(best, lower_bound(p, cell, method, tol=tol, engine=engine))
    return float(best)


def origin_splits(box: Box) -> list:
    """Per-axis cut lists placing the origin on cell boundaries."""
    return [[0.0] if lo < 0.0 < hi else []
            for lo, hi in zip(box.lower, box.upper)]


# --------------------------------------------------------------------------
# certificates
# --------------------------------------------------------------------------

@dataclass
class PositivityCertificate:
    """Data sufficient to recheck `p >= margin on domain` independently."""

    method: RelaxMethod
    polynomial: Polynomial
    margin: float
    tolerance: float
    box: Optional[Box] = None
    lp_value: Optional[float] = None
    data: dict = field(default_factory=dict)

    def verify(self, recon_tol: float = 1e-8, exact: bool = False) -> bool:
        """Reconstruction identity plus the bound claim, recomputed from scratch."""
        kind = self.method.kind
        if kind in ("lp1", "lp2", "lp3"):
            return self._verify_bernstein(recon_tol)
        if kind == "handelman":
            return self._verify_handelman(recon_tol, exact)
        if kind == "interval":
            lo, _ = interval_bound(self.polynomial, self.box)
            return lo >= self.margin - self.tolerance
        return False

    def _verify_bernstein(self, recon_tol: float) -> bool:
        delta = tuple(self.data["delta"])
        stored = {tuple(i): float(v) for i, v in self.data["bernstein_coeffs"]}
        fresh = bernstein_coeffs(
            affine_substitute(self.polynomial, self.box), delta)
        keys = set(stored) | set(fresh.coeffs)
        if any(abs(stored.get(k, 0.0) - fresh.coeffs.get(k, 0.0)) > recon_tol
               for k in keys):
            return False
        if self.method.kind == "lp1":
            return min(stored.values()) >= self.margin - self.tolerance
        value = lower_bound(self.polynomial, self.box,
                            self.method.with_delta(delta))
        return value >= self.margin - self.tolerance

    def _verify_handelman(self, recon_tol: float, exact: bool) -> bool:
        halfspaces = self.data["halfspaces"]
        exponents = self.data["exponents"]
        lams = self.data["multipliers"]
        if any(lam < -self.tolerance for lam in lams):
            return False
        n = self.polynomial.n
        if exact:
            acc: dict = {}
            for expo, lam in zip(exponents, lams):
                if lam == 0:
                    continue
                prod = {tuple([0] * n): Fraction(1)}
                for f, e in zip(halfspaces, expo):
                    ft = f.to_fractions()
                    for _ in range(e):
                        nxt: dict = {}
                        for i1, c1 in prod.items():
                            for i2, c2 in ft.items():
                                k = tuple(a + b for a, b in zip(i1, i2))
                                nxt[k] = nxt.get(k, Fraction(0)) + c1 * c2
                        prod = nxt
                for i, c in prod.items():
                    acc[i] = acc.get(i, Fraction(0)) + Fraction(lam) * c
            target = self.polynomial.to_fractions()
            shift = Fraction(self.margin)
            zero_idx = tuple([0] * n)
            target[zero_idx] = target.get(zero_idx, Fraction(0)) - shift
            keys = set(acc) | set(target)
            return all(abs(acc.get(k, Fraction(0)) - target.get(k, Fraction(0)))
                       <= Fraction(recon_tol) for k in keys)
        recon = Polynomial.zero(n)
        for expo, lam in zip(exponents, lams):
            if lam == 0:
                continue
            prod = Polynomial.constant(n, 1.0)
            for f, e in zip(halfspaces, expo):
                for _ in range(e):
                    prod = prod * f
            recon = recon + prod.scale(lam)
        target = self.polynomial - self.margin
        return recon.max_coeff_diff(target) <= recon_tol


def certify_nonneg(p: Polynomial, box: Box, method: RelaxMethod,
                   margin: float = 0.0, tol: float = 1e-9,
                   engine: str = "auto") -> Optional[PositivityCertificate]:
    """Certificate that p >= margin on the box, or None (unknown).

    A None result never claims that p drops below the margin anywhere.
    """
    if margin < 0:
        raise ValueError("margin must be >= 0")
    if method.kind == "handelman":
        halfspaces = box_halfspaces(box)
        cert = handelman_lp(p - margin, halfspaces,
                            method.handelman_degree, tol=tol, engine=engine)
        if cert is None:
            return None
        cert.polynomial = p
        cert.margin = margin
        cert.box = box
        return cert
    if method.kind == "interval":
        lo, hi = interval_bound(p, box)
        if lo >= margin - tol:
            return PositivityCertificate(
                method=method, polynomial=p, margin=margin, tolerance=tol,
                box=box, lp_value=lo,
                data={"interval": [lo, hi]})
        return None
    q = affine_substitute(p, box)
    delta = _delta_for(method, q)
    value = lower_bound(p, box, method.with_delta(delta), tol=tol, engine=engine)
    if value < margin - tol:
        return None
    coeffs = bernstein_coeffs(q, delta)
    return PositivityCertificate(
        method=method.with_delta(delta), polynomial=p, margin=margin,
        tolerance=tol, box=box, lp_value=value,
        data={"delta": list(delta),
              "bernstein_coeffs": [[list(i), v] for i, v in
                                   sorted(coeffs.coeffs.items(),
                                          key=lambda t: grlex_key(t[0]))]})


def box_halfspaces(box: Box) -> list:
    """Affine polynomials x_j - l_j and u_j - x_j that cut out the box."""
    out = []
    for j in range(box.n):
        x = Polynomial.variable(box.n, j)
        out.append(x - box.lower[j])
        out.append(Polynomial.constant(box.n, box.upper[j]) - x)
    return out


def handelman_lp(p: Polynomial, halfspaces: Sequence[Polynomial], degree: int,
                 term_cap: int = HANDELMAN_TERM_CAP, tol: float = 1e-9,
                 engine: str = "auto") -> Optional[PositivityCertificate]:
    """Search for p == sum_f lambda_f f over power products of the halfspaces.

    Exponents are capped per factor at `degree`.  None means no representation
    exists at this degree, not that p is negative anywhere.
    """
    if degree < 1:
        raise ValueError("degree must be >= 1")
    n = p.n
    for f in halfspaces:
        if f.n != n:
            raise ValueError("halfspace dimension mismatch")
        if f.total_degree() > 1:
            raise ValueError("halfspaces must be affine")
    m = len(halfspaces)
    exponents = list(itertools.product(range(degree + 1), repeat=m))
    products, total_terms = [], 0
    cache = {tuple([0] * m): Polynomial.constant(n, 1.0)}
    for expo in exponents:
        if expo not in cache:
            # reuse the product with the last nonzero exponent decremented
            last = max(k for k, e in enumerate(expo) if e)
            prev = list(expo)
            prev[last] -= 1
            cache[expo] = cache[tuple(prev)] * halfspaces[last]
        prod = cache[expo]
        total_terms += len(prod.terms)
        if total_terms > term_cap:
            raise ExpansionLimitExceeded(
                f"power-product expansion passed {term_cap} terms")
        products.append(prod)

    support = set(p.terms)
    for prod in products:
        support.update(prod.terms)
    support = sorted(support, key=grlex_key)
    row_of = {i: k for k, i in enumerate(support)}

    prog = LinearProgram()
    prog.add_variables(len(exponents), prefix="lam", lower=0.0)
    rows: list = [dict() for _ in support]
    for col, prod in enumerate(products):
        for i, c in prod.terms.items():
            rows[row_of[i]][col] = c
    for i, coeffs in zip(support, rows):
        prog.add_constraint(coeffs, "=", p.terms.get(i, 0.0))
    prog.set_objective({j: 1.0 for j in range(len(exponents))}, sense="min")

    out = lpmod.solve(prog, tol=tol, engine=engine)
    if out.status == lpmod.INFEASIBLE:
        return None
    if not out.is_optimal:
        raise LpFailure(f"handelman LP ended with status {out.status}")
    lams = [float(v) if abs(v) > 1e-13 else 0.0 for v in out.x]
    return PositivityCertificate(
        method=RelaxMethod.handelman(degree), polynomial=p, margin=0.0,
        tolerance=tol, box=None, lp_value=None,
        data={"halfspaces": list(halfspaces),
              "exponents": [list(e) for e in exponents],
              "multipliers": lams})


def rlt_lower_bound(p: Polynomial, box: Box, delta=None,
                    interval_bounds: bool = False, tol: float = 1e-9,
                    engine: str = "auto") -> float:
    """Plain reformulation-linearization bound over box power products.

    Placeholder variables stand in for the monomials of the unit-box form of
    p; each power product x^J (1-x)^(delta-J) expands to one nonnegativity
    row.  `interval_bounds` optionally adds per-monomial interval rows (off
    by default; the stronger Bernstein formulations subsume this baseline).
    """
    q = affine_substitute(p, box)
    delta = tuple(delta) if delta is not None else q.degree()
    if any(d < g for d, g in zip(delta, q.degree())):
        raise DegreeTooLow(f"degree {delta} below polynomial degree")
    n = q.n
    basis = monomial_basis(n, delta)
    col = {i: k for k, i in enumerate(basis)}
    prog = LinearProgram()
    prog.add_variables(len(basis), prefix="y")
    prog.add_constraint({col[tuple([0] * n)]: 1.0}, "=", 1.0)
    unit = Box.unit(n)
    one = Polynomial.constant(n, 1.0)
    xs = [Polynomial.variable(n, j) for j in range(n)]
    for J in basis:
        prod = Polynomial.constant(n, 1.0)
        for j, e in enumerate(J):
            prod = prod * xs[j] ** e
        for j, e in enumerate(J):
            prod = prod * (one - xs[j]) ** (delta[j] - e)
        prog.add_constraint({col[i]: c for i, c in prod.terms.items()}, ">=",
                            0.0)
        if interval_bounds:
            lo, hi = interval_bound(Polynomial.monomial(n, J), unit)
            prog.add_constraint({col[J]: 1.0}, ">=", lo)
            prog.add_constraint({col[J]: -1.0}, ">=", -hi)
    prog.set_objective({col[i]: c for i, c in q.terms.items()}, sense="min")
    out = lpmod.solve(prog, tol=tol, engine=engine)
    if out.status == lpmod.UNBOUNDED:
        return -np.inf
    if not out.is_optimal:
        raise LpFailure(f"RLT LP ended with status {out.status}")
    return float(out.objective)


def grid_minimum(p: Polynomial, box: Box, per_axis: int = 200) -> float:
    """Brute-force sampled minimum on a regular grid (test oracle)."""
    axes = [np.linspace(lo, hi, per_axis)
            for lo, hi in zip(box.lower, box.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return float(p.eval_many(pts).min())
