"""Polynomial Lyapunov function synthesis over a box region.

The search encodes nonnegativity of W(x,c) = -V'(x,c) - shift(x) per cell of
an orthant decomposition.  For the plain Bernstein relaxation this reduces to
sign constraints on the Bernstein coefficient vector of W; for the stronger
relaxations the quantifier over placeholder variables is removed with Farkas
multipliers, giving one joint LP in the template coefficients and the per-cell
multipliers.  Positive definiteness of the solved candidate is checked after
the fact; failures feed back as linear cuts on the coefficients.
"""

from __future__ import annotations

import hashlib
import itertools
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import lp as lpmod
from .bernstein import bernstein_tensor, conversion_matrix
from .errors import DegreeTooLow, LpFailure
from .lp import LinearProgram
from .poly import (Box, OdeSystem, ParametricPolynomial, Polynomial,
                   affine_substitute, grlex_key, lie_derivative, lie_matrix,
                   monomial_basis, transform_matrix)
from .relax import (PositivityCertificate, RelaxMethod, ZSystem,
                    build_z_system, lower_bound_subdivided, origin_splits)

FOUND = "found"
NOT_FOUND = "not_found"
INCONCLUSIVE = "inconclusive"

PD_TOL = 1e-9
LP1_CERT_TOL = 1e-7
FARKAS_CERT_TOL = 1e-6


def make_template(n: int, degree: int) -> ParametricPolynomial:
    """Template with one free coefficient per monomial of total degree 2..degree."""
    if degree < 2:
        raise ValueError("template degree must be >= 2")
    monos = [i for d in range(2, degree + 1)
             for i in itertools.product(range(d + 1), repeat=n) if sum(i) == d]
    monos = sorted(set(monos), key=grlex_key)
    return ParametricPolynomial.from_monomials(n, monos)


def orthant_cells(region: Box, split_axes: Sequence[int]) -> list:
    """2^k cells splitting the region at 0 along the chosen axes."""
    pieces = []
    for j in range(region.n):
        lo, hi = region.lower[j], region.upper[j]
        if j in split_axes:
            if not lo < 0.0 < hi:
                raise ValueError(f"axis {j} range ({lo},{hi}) does not straddle 0")
            pieces.append([(lo, 0.0), (0.0, hi)])
        else:
            pieces.append([(lo, hi)])
    return [Box(tuple(r[0] for r in combo), tuple(r[1] for r in combo))
            for combo in itertools.product(*pieces)]


def shift_polynomial(n: int, epsilon: float,
                     shift_axes: Optional[Sequence[int]] = None) -> Polynomial:
    """The definiteness shift epsilon * sum_{j in axes} x_j^2 (zero when eps=0)."""
    if epsilon == 0.0:
        return Polynomial.zero(n)
    axes = range(n) if shift_axes is None else shift_axes
    terms = {}
    for j in axes:
        e = [0] * n
        e[j] = 2
        terms[tuple(e)] = epsilon
    return Polynomial(n, terms)


@dataclass
class CellEncoding:
    """Linear constraints over (c, lambda_cell) making W >= 0 certified on a cell."""

    cell: Box
    delta: tuple
    grid: list                    # monomial basis of the full grid I <= delta
    coeff_matrix: np.ndarray      # M with g(c) = M c + offset
    offset: np.ndarray
    zsys: Optional[ZSystem]       # None for the plain (lp1) encoding


def encode_cell(template: ParametricPolynomial, cell: Box, system: OdeSystem,
                method: RelaxMethod, delta: Sequence[int], epsilon: float,
                shift_axes: Optional[Sequence[int]] = None,
                lie: Optional[tuple] = None) -> CellEncoding:
    """Constraints certifying -V'(x,c) - shift(x) >= 0 over one cell.

    With the plain relaxation the constraint block is just g(c) >= 0 for the
    Bernstein coefficient vector g(c) = B^T T^T (-D^T c - shift); the stronger
    relaxations quantify over placeholder variables and are dualized, so the
    caller must conjoin `A^T lam = ghat(c), b^T lam >= 0, lam >= 0` using the
    returned row system.
    """
    n = template.n
    if lie is None:
        lie = lie_matrix(system, template.monomials)
    D, mprime = lie
    shift = shift_polynomial(n, epsilon, shift_axes)

    needed = set(mprime) | set(shift.terms)
    need_deg = tuple(max((i[l] for i in needed), default=0) for l in range(n))
    delta = tuple(int(d) for d in delta)
    if any(d < g for d, g in zip(delta, need_deg)):
        raise DegreeTooLow(
            f"encoding needs degree {need_deg}, got {delta}; elevate the "
            f"Bernstein degree")

    grid = monomial_basis(n, delta)
    pos = {i: k for k, i in enumerate(grid)}
    G = len(grid)

    Dfull = np.zeros((template.num_params, G))
    embedded = template.coeff_map @ D  # rows per parameter over mprime
    for col, i in enumerate(mprime):
        Dfull[:, pos[i]] = embedded[:, col]
    shift_vec = np.zeros(G)
    for i, c in shift.terms.items():
        shift_vec[pos[i]] = c

    T = transform_matrix(cell, grid)
    B = conversion_matrix(n, delta)
    TB = T @ B
    M = -(Dfull @ TB).T            # = -B^T T^T D^T
    offset = -(TB.T @ shift_vec)   # = -B^T T^T shift

    zsys = None
    if method.kind in ("lp2", "lp3"):
        zsys = build_z_system(delta, method.kind, method.levels)
    elif method.kind != "lp1":
        raise ValueError(f"unsupported synthesis relaxation {method.kind!r}")
    return CellEncoding(cell=cell, delta=delta, grid=grid,
                        coeff_matrix=M, offset=offset, zsys=zsys)


@dataclass
class LyapunovQuery:
    system: OdeSystem
    region: Box
    template_degree: int = 2
    method: RelaxMethod = field(default_factory=RelaxMethod.lp1)
    split_axes: Optional[tuple] = None      # None = split every axis
    epsilon: float = 0.1                    # derivative definiteness shift
    shift_axes: Optional[tuple] = None      # None = shift on every axis
    eps_pd: float = 0.1                     # positivity margin for V
    coeff_bound: float = 5.0
    max_refinements: int = 10
    delta: Optional[tuple] = None           # None = degree of the encoded target
    engine: str = "auto"
    lp_tol: float = 1e-9

    def __post_init__(self):
        if not self.region.origin_interior():
            raise ValueError("origin must lie strictly inside the region")
        if self.epsilon < 0 or self.eps_pd <= 0 or self.coeff_bound <= 0:
            raise ValueError("epsilon >= 0, eps_pd > 0 and coeff_bound > 0 required")
        if self.system.n != self.region.n:
            raise ValueError("system and region dimensions differ")
        zero = tuple([0] * self.system.n)
        if any(p.terms.get(zero, 0.0) for p in self.system.rhs):
            raise ValueError("synthesis requires an equilibrium at the origin "
                             "(the field has a constant term)")


@dataclass
class PdReport:
    passed: bool
    bound: float
    witness: Optional[tuple] = None
    detail: str = ""


@dataclass
class LyapunovResult:
    status: str
    query: Optional[LyapunovQuery] = None
    V: Optional[Polynomial] = None
    coefficients: Optional[np.ndarray] = None
    cells: list = field(default_factory=list)
    derivative_certificates: list = field(default_factory=list)
    positivity_report: Optional[PdReport] = None
    refinement_points: list = field(default_factory=list)
    delta: Optional[tuple] = None
    epsilon: float = 0.0
    shift_axes: Optional[tuple] = None
    setup_ms: float = 0.0
    lp_ms: float = 0.0
    detail: str = ""
    stage: str = ""
    failure_kind: str = ""        # np | to | "" for honest not-found

    @property
    def found(self) -> bool:
        return self.status == FOUND


def _grid_witness(W: Polynomial, region: Box) -> tuple:
    """Most violating grid point of W (min over a fixed lattice)."""
    per_axis = 50 if region.n <= 3 else 20
    axes = [np.linspace(lo, hi, per_axis)
            for lo, hi in zip(region.lower, region.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    vals = W.eval_many(pts)
    k = int(np.argmin(vals))
    return tuple(pts[k]), float(vals[k])


def check_positive_definite(V: Polynomial, region: Box, eps_pd: float,
                            tol: float = PD_TOL) -> PdReport:
    """Certified check of V - eps_pd*||x||^2 >= 0 via per-orthant enclosures.

    Pass is sound.  On failure the report carries a grid point where the
    shifted function actually goes negative, when one exists; a missing
    witness means the relaxation was too coarse to decide.
    """
    if abs(V(tuple([0.0] * V.n))) > 1e-12:
        raise ValueError("candidate must vanish at the origin")
    W = V - shift_polynomial(V.n, eps_pd)
    method = RelaxMethod.lp1(W.degree())
    bound = lower_bound_subdivided(W, region, method, origin_splits(region))
    if bound >= -tol:
        return PdReport(True, bound)
    witness, value = _grid_witness(W, region)
    if value < -1e-12:
        return PdReport(False, bound, witness=witness,
                        detail=f"V - eps*||x||^2 = {value:g} at grid point")
    return PdReport(False, bound, witness=None,
                    detail="enclosure negative but no grid violation found")


def _quadratic_part(V: Polynomial) -> np.ndarray:
    Q = np.zeros((V.n, V.n))
    for i, c in V.terms.items():
        if sum(i) != 2:
            continue
        nz = [l for l, e in enumerate(i) if e]
        if len(nz) == 1:
            Q[nz[0], nz[0]] = c
        else:
            Q[nz[0], nz[1]] = Q[nz[1], nz[0]] = c / 2.0
    return Q


def _eigen_witness(V: Polynomial, region: Box, eps_pd: float):
    """Point along the softest eigendirection of the quadratic part where the
    eps_pd margin actually fails (the axis grid can miss a narrow cone)."""
    vals, vecs = np.linalg.eigh(_quadratic_part(V))
    shift = shift_polynomial(V.n, eps_pd)
    best = None
    for k in range(len(vals)):
        if vals[k] >= eps_pd:
            continue
        direction = vecs[:, k]
        for sign in (1.0, -1.0):
            d = sign * direction
            # largest step keeping the point inside the region
            scale = min((region.upper[j] / d[j]) if d[j] > 0 else
                        (region.lower[j] / d[j]) if d[j] < 0 else np.inf
                        for j in range(V.n))
            for t in (0.5 * scale, 0.25 * scale, 0.1 * scale, 0.02 * scale):
                y = tuple(t * v for v in d)
                margin = V(y) - shift(y) if not shift.is_zero() else V(y)
                if margin < -1e-12:
                    if best is None or margin < best[1]:
                        best = (y, margin)
    return best


def _push_points(V: Polynomial, region: Box) -> list:
    """Soft eigendirection points used as necessary-condition cuts.

    Any candidate able to pass the definiteness check satisfies
    V(y) >= eps_pd*||y||^2 at every region point, so cutting here can only
    discard candidates that were going to fail anyway."""
    vals, vecs = np.linalg.eigh(_quadratic_part(V))
    pts = []
    for k in np.argsort(vals)[:2]:
        d = vecs[:, k]
        scale = min((region.upper[j] / d[j]) if d[j] > 0 else
                    (region.lower[j] / d[j]) if d[j] < 0 else np.inf
                    for j in range(V.n))
        for sign in (1.0, -1.0):
            pts.append(tuple(sign * 0.5 * scale * v for v in d))
    return pts


def _pd_ladder(V: Polynomial, region: Box, eps_pd: float) -> PdReport:
    """Sound escalation beyond the plain check: tighter relaxations, then a
    quadratic-dominance argument splitting the region into a ball and slabs."""
    report = check_positive_definite(V, region, eps_pd)
    if report.passed or report.witness is not None:
        return report

    W = V - shift_polynomial(V.n, eps_pd)
    deg = W.degree()
    splits = origin_splits(region)
    for method in (RelaxMethod.lp2(deg), RelaxMethod.lp3(deg),
                   RelaxMethod.lp2(tuple(2 * d for d in deg))):
        try:
            bound = lower_bound_subdivided(W, region, method, splits)
        except LpFailure:
            continue
        if bound >= -PD_TOL:
            return PdReport(True, bound, detail=f"tightened via {method.label()}")

    hess = _quadratic_dominance(V, region, eps_pd)
    if hess is not None:
        return hess
    eig = _eigen_witness(V, region, eps_pd)
    if eig is not None:
        return PdReport(False, report.bound, witness=eig[0],
                        detail=f"eps_pd margin {eig[1]:g} along a soft "
                               f"eigendirection")
    return report


def _quadratic_dominance(V: Polynomial, region: Box,
                         eps_pd: float) -> Optional[PdReport]:
    n = V.n
    if any(sum(i) <= 1 and c for i, c in V.terms.items()):
        return None
    Q = np.zeros((n, n))
    for i, c in V.terms.items():
        if sum(i) != 2:
            continue
        nz = [l for l, e in enumerate(i) if e]
        if len(nz) == 1:
            Q[nz[0], nz[0]] = c
        else:
            Q[nz[0], nz[1]] = Q[nz[1], nz[0]] = c / 2.0
    lam = float(np.linalg.eigvalsh(Q)[0])
    if lam <= eps_pd:
        return None
    m3 = V.abs_coeff_sum(min_total_degree=3)
    inner = min(min(-lo, hi) for lo, hi in zip(region.lower, region.upper))
    if m3 == 0.0:
        return PdReport(True, lam - eps_pd, detail="positive definite quadratic form")
    r = min((lam - eps_pd) / m3, 0.9 * inner)
    if r <= 1e-6:
        return None
    # ball ||x||_inf <= r handled by the eigenvalue bound; cover the rest by
    # slabs |x_j| >= r and certify each by enclosure
    W = V - shift_polynomial(n, eps_pd)
    deg = W.degree()
    for j in range(n):
        for lo, hi in ((region.lower[j], -r), (r, region.upper[j])):
            slab_lo = list(region.lower)
            slab_hi = list(region.upper)
            slab_lo[j], slab_hi[j] = lo, hi
            slab = Box(tuple(slab_lo), tuple(slab_hi))
            cuts = origin_splits(slab)
            ok = False
            for method in (RelaxMethod.lp1(deg), RelaxMethod.lp2(deg),
                           RelaxMethod.lp2(tuple(2 * d for d in deg))):
                try:
                    if lower_bound_subdivided(W, slab, method, cuts) >= -PD_TOL:
                        ok = True
                        break
                except LpFailure:
                    continue
            if not ok:
                return None
    return PdReport(True, 0.0, detail=f"quadratic dominance, ball radius {r:g}")


def _assemble(query: LyapunovQuery, template: ParametricPolynomial,
              encodings: list, cuts: list) -> tuple:
    """Joint LP over shared c and per-cell multipliers; returns (lp, lam_slices)."""
    prog = LinearProgram()
    k = template.num_params
    c_vars = prog.add_variables(k, prefix="c", lower=-query.coeff_bound,
                                upper=query.coeff_bound)
    lam_slices = []
    for enc in encodings:
        M, v = enc.coeff_matrix, enc.offset
        if enc.zsys is None:
            for row in range(M.shape[0]):
                coeffs = {c_vars[j]: M[row, j] for j in range(k) if M[row, j]}
                prog.add_constraint(coeffs, ">=", -v[row])
            lam_slices.append(None)
            continue
        zs = enc.zsys
        lam = prog.add_variables(len(zs.rows), prefix="lam", lower=0.0)
        lam_slices.append(lam)
        by_col = [dict() for _ in range(zs.nvars)]
        for r, (coeffs, _) in enumerate(zs.rows):
            for col, a in coeffs.items():
                by_col[col][lam[r]] = a
        top = zs.top_size()
        for col in range(zs.nvars):
            coeffs = dict(by_col[col])
            rhs = 0.0
            if col < top:
                for j in range(k):
                    if M[col, j]:
                        coeffs[c_vars[j]] = coeffs.get(c_vars[j], 0.0) - M[col, j]
                rhs = v[col]
            prog.add_constraint(coeffs, "=", rhs)
        obj_row = {lam[r]: rhs for r, (_, rhs) in enumerate(zs.rows) if rhs}
        if obj_row:
            prog.add_constraint(obj_row, ">=", 0.0)
    for point, margin in cuts:
        values = np.array([float(np.prod(np.array(point, dtype=float)
                                         ** np.array(mono)))
                           for mono in template.monomials])
        row = template.coeff_map @ values
        coeffs = {c_vars[j]: row[j] for j in range(k) if row[j]}
        prog.add_constraint(coeffs, ">=", margin)
    prog.set_objective({c_vars[j]: 1.0 for j in range(k)}, sense="max")
    return prog, lam_slices


def _certificates(query: LyapunovQuery, V: Polynomial, encodings: list,
                  lam_values: list, delta: tuple) -> Optional[list]:
    """Re-derive every per-cell certificate from the instantiated V.

    The Bernstein vector of W = -V' - shift is recomputed from V itself (not
    from the encoding matrices); a mismatch voids the result.
    """
    W = (-lie_derivative(V, query.system)) - shift_polynomial(
        V.n, query.epsilon, query.shift_axes)
    certs = []
    for enc, lam in zip(encodings, lam_values):
        tensor = bernstein_tensor(affine_substitute(W, enc.cell), delta)
        order = enc.grid
        g = np.array([tensor[i] for i in order])
        if enc.zsys is None:
            if g.min() < -LP1_CERT_TOL:
                return None
            data = {"delta": list(delta),
                    "bernstein_coeffs": [[list(i), float(tensor[i])] for i in order]}
            cert = PositivityCertificate(
                method=query.method.with_delta(delta), polynomial=W,
                margin=0.0, tolerance=LP1_CERT_TOL, box=enc.cell,
                lp_value=float(g.min()), data=data)
        else:
            zs = enc.zsys
            ghat = np.zeros(zs.nvars)
            ghat[:zs.top_size()] = g
            resid = -ghat
            dual_obj = 0.0
            for r, (coeffs, rhs) in enumerate(zs.rows):
                lr = float(lam[r])
                dual_obj += rhs * lr
                if lr:
                    for col, a in coeffs.items():
                        resid[col] += a * lr
            if np.max(np.abs(resid)) > FARKAS_CERT_TOL or dual_obj < -FARKAS_CERT_TOL:
                return None
            data = {"delta": list(delta),
                    "bernstein_coeffs": [[list(i), float(tensor[i])] for i in order],
                    "farkas_multipliers": [float(v) for v in lam],
                    "row_kinds": list(zs.row_kinds),
                    "levels": query.method.levels}
            cert = PositivityCertificate(
                method=query.method.with_delta(delta), polynomial=W,
                margin=0.0, tolerance=FARKAS_CERT_TOL, box=enc.cell,
                lp_value=float(dual_obj), data=data)
        certs.append(cert)
    return certs


def _auto_delta(query: LyapunovQuery) -> tuple:
    template = make_template(query.system.n, query.template_degree)
    _, mprime = lie_matrix(query.system, template.monomials)
    shift = shift_polynomial(query.system.n, query.epsilon, query.shift_axes)
    needed = set(mprime) | set(shift.terms)
    return tuple(max((i[l] for i in needed), default=0)
                 for l in range(query.system.n))


def synthesize(query: LyapunovQuery) -> LyapunovResult:
    """Search for a Lyapunov function of the queried template and relaxation."""
    t0 = time.perf_counter()
    n = query.system.n
    template = make_template(n, query.template_degree)
    split = tuple(query.split_axes) if query.split_axes is not None \
        else tuple(range(n))
    cells = orthant_cells(query.region, split)

    lie = lie_matrix(query.system, template.monomials)
    delta = tuple(query.delta) if query.delta is not None else _auto_delta(query)

    encodings = [encode_cell(template, cell, query.system, query.method,
                             delta, query.epsilon, query.shift_axes, lie=lie)
                 for cell in cells]
    setup_ms = (time.perf_counter() - t0) * 1e3

    base = dict(query=query, cells=cells, delta=delta, epsilon=query.epsilon,
                shift_axes=query.shift_axes, setup_ms=setup_ms)
    cuts: list = []
    refinements: list = []
    lp_ms = 0.0
    last_report = None
    for _ in range(query.max_refinements + 1):
        prog, lam_slices = _assemble(query, template, encodings, cuts)
        t1 = time.perf_counter()
        out = lpmod.solve(prog, tol=query.lp_tol, engine=query.engine)
        lp_ms += (time.perf_counter() - t1) * 1e3
        if out.status == lpmod.INFEASIBLE:
            return LyapunovResult(NOT_FOUND, lp_ms=lp_ms,
                                  refinement_points=refinements,
                                  detail="derivative encoding infeasible", **base)
        if not out.is_optimal:
            return LyapunovResult(NOT_FOUND, lp_ms=lp_ms, failure_kind="np",
                                  refinement_points=refinements,
                                  detail=f"LP ended with {out.status}", **base)
        c = out.x[:template.num_params]
        V = template.instantiate(c)
        report = _pd_ladder(V, query.region, query.eps_pd)
        last_report = report
        if report.passed:
            lam_values = [None if sl is None else out.x[list(sl)]
                          for sl in lam_slices]
            certs = _certificates(query, V, encodings, lam_values, delta)
            if certs is None:
                return LyapunovResult(NOT_FOUND, lp_ms=lp_ms, failure_kind="np",
                                      refinement_points=refinements,
                                      detail="certificate recheck failed", **base)
            return LyapunovResult(FOUND, V=V, coefficients=c,
                                  derivative_certificates=certs,
                                  positivity_report=report,
                                  refinement_points=refinements,
                                  lp_ms=lp_ms, **base)
        if report.witness is None:
            pushes = _push_points(V, query.region)
            fresh = [y for y in pushes
                     if all(max(abs(a - b) for a, b in zip(y, p)) > 1e-9
                            for p, _ in cuts)]
            if fresh:
                for y in fresh:
                    refinements.append(tuple(float(v) for v in y))
                    cuts.append((y, query.eps_pd * float(sum(v * v for v in y))))
                continue
            return LyapunovResult(
                INCONCLUSIVE, lp_ms=lp_ms, positivity_report=report,
                refinement_points=refinements,
                detail="positivity neither provable nor refutable here", **base)
        y = report.witness
        refinements.append(tuple(float(v) for v in y))
        cuts.append((y, query.eps_pd * float(sum(v * v for v in y))))
    return LyapunovResult(INCONCLUSIVE, lp_ms=lp_ms,
                          positivity_report=last_report,
                          refinement_points=refinements,
                          detail="refinement budget exhausted", **base)


@dataclass
class EscalationStage:
    method: RelaxMethod
    delta_scale: int = 1
    epsilon: Optional[float] = None        # None = query epsilon
    label: str = ""


def default_schedule(query: LyapunovQuery) -> list:
    """Strong (shifted) passes through the three relaxations, then weak ones,
    then elevated-degree retries."""
    eps = query.epsilon
    stages = [
        EscalationStage(RelaxMethod.lp1(), 1, eps, "LP1"),
        EscalationStage(RelaxMethod.lp2(), 1, eps, "LP2"),
        EscalationStage(RelaxMethod.lp3(), 1, eps, "LP3"),
        EscalationStage(RelaxMethod.lp1(), 1, 0.0, "LP1/weak"),
        EscalationStage(RelaxMethod.lp2(), 1, 0.0, "LP2/weak"),
        EscalationStage(RelaxMethod.lp3(), 1, 0.0, "LP3/weak"),
        EscalationStage(RelaxMethod.lp2(), 2, eps, "LP2/2d"),
        EscalationStage(RelaxMethod.lp2(), 2, 0.0, "LP2/2d/weak"),
    ]
    if eps == 0.0:
        stages = [s for s in stages if s.epsilon == 0.0]
    return stages


def escalate(query: LyapunovQuery, schedule: Optional[list] = None,
             deadline_s: Optional[float] = None) -> LyapunovResult:
    """Run synthesize along a schedule; first Found wins.

    An exhausted schedule returns NotFound carrying one diagnostic line per
    stage (np for numeric trouble, to for a blown deadline).
    """
    start = time.perf_counter()
    stages = schedule if schedule is not None else default_schedule(query)
    diagnostics = []
    for stage in stages:
        if deadline_s is not None and time.perf_counter() - start > deadline_s:
            diagnostics.append((stage.label or stage.method.label(), "to"))
            continue
        q = replace(query, method=stage.method,
                    epsilon=query.epsilon if stage.epsilon is None else stage.epsilon)
        if stage.delta_scale != 1:
            base_delta = _auto_delta(q)
            q = replace(q, delta=tuple(stage.delta_scale * d for d in base_delta))
        try:
            result = synthesize(q)
        except (LpFailure, DegreeTooLow) as exc:
            diagnostics.append((stage.label or stage.method.label(), f"np: {exc}"))
            continue
        if result.found:
            result.stage = stage.label or stage.method.label()
            return result
        diagnostics.append((stage.label or stage.method.label(),
                            result.failure_kind or result.status))
    kinds = [m for _, m in diagnostics]
    failure_kind = "np" if any("np" in m for m in kinds) else \
        ("to" if any(m == "to" for m in kinds) else "")
    return LyapunovResult(
        NOT_FOUND, query=query, cells=[], delta=None,
        epsilon=query.epsilon, shift_axes=query.shift_axes,
        detail="; ".join(f"{lbl}: {msg}" for lbl, msg in diagnostics),
        failure_kind=failure_kind)


def system_hash(system: OdeSystem) -> str:
    """Stable content hash of a system (used to bind results to inputs)."""
    parts = []
    for p in system.rhs:
        for i, c in sorted(p.terms.items(), key=lambda t: grlex_key(t[0])):
            parts.append(f"{i}:{c:.17g}")
        parts.append("|")
    return hashlib.sha256(";".join(parts).encode()).hexdigest()[:16]


def sample_soundness(result: LyapunovResult, samples: int = 10_000,
                     seed: int = 0) -> int:
    """Count violations of V > 0 and V' <= -shift/2 at random region points."""
    if not result.found:
        raise ValueError("soundness sampling needs a Found result")
    query = result.query
    rng = np.random.default_rng(seed)
    pts = query.region.sample(rng, samples)
    V = result.V
    vd = lie_derivative(V, query.system)
    shift = shift_polynomial(V.n, result.epsilon, result.shift_axes)
    vvals = V.eval_many(pts)
    dvals = vd.eval_many(pts)
    svals = shift.eval_many(pts) if not shift.is_zero() else np.zeros(len(pts))
    far = np.max(np.abs(pts), axis=1) >= 1e-3
    bad_pos = int(np.sum(far & (vvals <= 0.0)))
    bad_der = int(np.sum(dvals > -0.5 * svals + 1e-12))
    return bad_pos + bad_der
