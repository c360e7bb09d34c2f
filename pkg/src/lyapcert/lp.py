"""Linear programming backend.

Two engines behind one model: a dense two-phase primal simplex with Bland's
anti-cycling rule (deterministic, optionally in exact rational arithmetic)
and scipy's HiGHS for instances too large for a dense tableau.  Infeasibility
detected by the simplex carries a Farkas ray over the standard-form system so
it can be rechecked independently.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERIC_FAILURE = "numeric_failure"

RELATIONS = ("<=", "=", ">=")

# auto engine: dense simplex below this tableau-cell count, HiGHS above
AUTO_SIMPLEX_CELLS = 60_000
MAX_PIVOTS = 200_000


@dataclass
class Constraint:
    coeffs: dict           # var index -> coefficient
    rel: str
    rhs: float


class LinearProgram:
    """Explicit LP model: bounded variables, relational rows, one objective."""

    def __init__(self):
        self.lower: list = []
        self.upper: list = []
        self.names: list = []
        self.constraints: list = []
        self.objective: dict = {}
        self.sense: str = "min"

    # -- building ----------------------------------------------------------

    def add_variable(self, name: Optional[str] = None,
                     lower: Optional[float] = None,
                     upper: Optional[float] = None) -> int:
        if lower is not None and upper is not None and lower > upper:
            raise ValueError(f"variable bounds cross: {lower} > {upper}")
        self.lower.append(lower)
        self.upper.append(upper)
        self.names.append(name or f"v{len(self.names)}")
        return len(self.names) - 1

    def add_variables(self, count: int, prefix: str = "v",
                      lower: Optional[float] = None,
                      upper: Optional[float] = None) -> range:
        start = len(self.names)
        for k in range(count):
            self.add_variable(f"{prefix}{start + k}", lower, upper)
        return range(start, start + count)

    def add_constraint(self, coeffs: Union[dict, Sequence[float]], rel: str,
                       rhs: float) -> int:
        if rel not in RELATIONS:
            raise ValueError(f"relation must be one of {RELATIONS}")
        if not isinstance(coeffs, dict):
            coeffs = {j: c for j, c in enumerate(coeffs) if c != 0}
        bad = [j for j in coeffs if not 0 <= j < len(self.names)]
        if bad:
            raise ValueError(f"unknown variable indices {bad}")
        self.constraints.append(Constraint(dict(coeffs), rel, float(rhs)))
        return len(self.constraints) - 1

    def set_objective(self, coeffs: Union[dict, Sequence[float]],
                      sense: str = "min"):
        if sense not in ("min", "max"):
            raise ValueError("sense must be min or max")
        if not isinstance(coeffs, dict):
            coeffs = {j: c for j, c in enumerate(coeffs) if c != 0}
        self.objective = dict(coeffs)
        self.sense = sense

    @property
    def num_vars(self) -> int:
        return len(self.names)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    # -- export --------------------------------------------------------------

    def to_text(self) -> str:
        """Human-readable LP interchange text (for debugging)."""
        def lin(coeffs):
            parts = []
            for j in sorted(coeffs):
                c = coeffs[j]
                if c == 0:
                    continue
                sign = "-" if c < 0 else ("+" if parts else "")
                mag = abs(c)
                parts.append(f"{sign} {mag:g} {self.names[j]}".strip())
            return " ".join(parts) or "0"

        lines = [f"{self.sense}: {lin(self.objective)};"]
        for k, row in enumerate(self.constraints):
            lines.append(f"r{k}: {lin(row.coeffs)} {row.rel} {row.rhs:g};")
        for j, (lo, hi) in enumerate(zip(self.lower, self.upper)):
            lo_s = "-inf" if lo is None else f"{lo:g}"
            hi_s = "+inf" if hi is None else f"{hi:g}"
            lines.append(f"bound: {lo_s} <= {self.names[j]} <= {hi_s};")
        return "\n".join(lines) + "\n"


@dataclass
class FarkasCertificate:
    """Ray proving {A s = b, s >= 0} empty: y^T A <= 0 and y^T b > 0."""

    matrix: list   # rows of the standard-form system (non-artificial columns)
    rhs: list
    ray: list

    def check_exact(self) -> bool:
        A = [[Fraction(a) for a in row] for row in self.matrix]
        b = [Fraction(v) for v in self.rhs]
        y = [Fraction(v) for v in self.ray]
        ncols = len(A[0]) if A else 0
        for j in range(ncols):
            if sum(y[i] * A[i][j] for i in range(len(A))) > 0:
                return False
        return sum(y[i] * b[i] for i in range(len(b))) > 0


@dataclass
class LpOutcome:
    status: str
    x: Optional[np.ndarray] = None
    objective: Optional[float] = None
    engine: str = "simplex"
    farkas: Optional[FarkasCertificate] = None
    detail: str = ""

    @property
    def is_optimal(self) -> bool:
        return self.status == OPTIMAL


# --------------------------------------------------------------------------
# dense two-phase simplex
# --------------------------------------------------------------------------

class _Standardizer:
    """Rewrites the model as min c^T s, A s = b, s >= 0 with a column map."""

    def __init__(self, lp: LinearProgram, exact: bool):
        self.exact = exact
        num = (lambda v: Fraction(v)) if exact else float
        self.num = num
        zero = num(0)

        # variable substitutions: x_j = offset + sign * s_col (or split pair)
        self.var_cols = []       # per original var: ("single", col, offset, sign) | ("split", cp, cm)
        cols = 0
        extra_rows = []          # (col, ub) rows from doubly-bounded vars
        for lo, hi in zip(lp.lower, lp.upper):
            if lo is not None:
                self.var_cols.append(("single", cols, num(lo), 1))
                if hi is not None:
                    extra_rows.append((cols, num(hi) - num(lo)))
                cols += 1
            elif hi is not None:
                self.var_cols.append(("single", cols, num(hi), -1))
                cols += 1
            else:
                self.var_cols.append(("split", cols, cols + 1))
                cols += 2
        self.struct_cols = cols

        rows = []
        for con in lp.constraints:
            coeffs = [zero] * cols
            shift = zero
            for j, a in con.coeffs.items():
                a = num(a)
                spec = self.var_cols[j]
                if spec[0] == "single":
                    _, col, off, sign = spec
                    coeffs[col] += a * sign
                    shift += a * off
                else:
                    _, cp, cm = spec
                    coeffs[cp] += a
                    coeffs[cm] -= a
            rows.append((coeffs, con.rel, num(con.rhs) - shift))
        for col, width in extra_rows:
            coeffs = [zero] * cols
            coeffs[col] = num(1)
            rows.append((coeffs, "<=", width))

        # normalize rhs >= 0, then append slack/surplus columns
        m = len(rows)
        slack_cols = 0
        for coeffs, rel, rhs in rows:
            if rel in ("<=", ">="):
                slack_cols += 1
        N = cols + slack_cols
        self.N = N
        self.m = m
        A = [[zero] * N for _ in range(m)]
        b = [zero] * m
        self.needs_artificial = [False] * m
        next_slack = cols
        for i, (coeffs, rel, rhs) in enumerate(rows):
            flip = rhs < 0
            if flip:
                coeffs = [-a for a in coeffs]
                rhs = -rhs
                rel = {"<=": ">=", ">=": "<=", "=": "="}[rel]
            A[i][:cols] = coeffs
            b[i] = rhs
            if rel == "<=":
                A[i][next_slack] = num(1)
                self.needs_artificial[i] = False
                next_slack += 1
            elif rel == ">=":
                A[i][next_slack] = num(-1)
                self.needs_artificial[i] = True
                next_slack += 1
            else:
                self.needs_artificial[i] = True
        self.A = A
        self.b = b

        self.c = [zero] * N
        sense = 1 if lp.sense == "min" else -1
        self.sense = sense
        self.obj_const = zero
        for j, a in lp.objective.items():
            a = num(a) * sense
            spec = self.var_cols[j]
            if spec[0] == "single":
                _, col, off, sign = spec
                self.c[col] += a * sign
                self.obj_const += a * off
            else:
                _, cp, cm = spec
                self.c[cp] += a
                self.c[cm] -= a

    def recover(self, s_values) -> np.ndarray:
        out = []
        for spec in self.var_cols:
            if spec[0] == "single":
                _, col, off, sign = spec
                out.append(float(off + sign * s_values[col]))
            else:
                _, cp, cm = spec
                out.append(float(s_values[cp] - s_values[cm]))
        return np.array(out)


def _simplex_solve(lp: LinearProgram, tol: float, exact: bool) -> LpOutcome:
    std = _Standardizer(lp, exact)
    m, N = std.m, std.N
    num = std.num
    zero, one = num(0), num(1)
    eps = zero if exact else tol * 1e-1
    feas_tol = zero if exact else tol

    n_art = sum(std.needs_artificial)
    width = N + n_art + 1  # + rhs column
    if exact:
        T = np.empty((m, width), dtype=object)
        for i in range(m):
            for j in range(N):
                T[i, j] = std.A[i][j]
            for j in range(N, N + n_art):
                T[i, j] = zero
            T[i, -1] = std.b[i]
    else:
        T = np.zeros((m, width))
        for i in range(m):
            T[i, :N] = [float(v) for v in std.A[i]]
            T[i, -1] = float(std.b[i])

    basis = [-1] * m
    art_col_of_row = {}
    col = N
    next_slack_reader = {}
    for i in range(m):
        if std.needs_artificial[i]:
            T[i, col] = one
            basis[i] = col
            art_col_of_row[i] = col
            col += 1
        else:
            # its slack column is the last nonzero among slack cols in row i
            for j in range(N - 1, std.struct_cols - 1, -1):
                if T[i, j] == one:
                    basis[i] = j
                    next_slack_reader[i] = j
                    break
    art_cols = set(art_col_of_row.values())

    def make_cost_row(costs):
        if exact:
            z = np.empty(width, dtype=object)
            for j in range(width):
                z[j] = -costs[j] if j < len(costs) else zero
            z[-1] = zero
        else:
            z = np.zeros(width)
            z[:len(costs)] = [-float(v) for v in costs]
        # express in terms of the current basis
        for i in range(len(basis)):
            cb = costs[basis[i]] if basis[i] < len(costs) else zero
            if cb != 0:
                z = z + cb * T[i]
        # cost row entry j currently holds (c_B B^-1 A_j - c_j); reduced cost
        # is its negation.
        return z

    def pivot(z, row, col_):
        nonlocal T
        piv = T[row, col_]
        T[row] = T[row] / piv
        colvals = T[:, col_].copy()
        colvals[row] = zero
        T = T - np.outer(colvals, T[row])
        if z[col_] != 0:
            z = z - z[col_] * T[row]
        basis[row] = col_
        return z

    def run_phase(z, allowed, pivots_left):
        while pivots_left > 0:
            pivots_left -= 1
            # Bland: smallest allowed index with positive cost-row entry
            enter = -1
            if exact:
                for j in range(width - 1):
                    if allowed[j] and z[j] > eps:
                        enter = j
                        break
            else:
                cand = np.flatnonzero(allowed & (z[:-1] > eps))
                enter = int(cand[0]) if cand.size else -1
            if enter < 0:
                return "optimal", z, pivots_left
            leave, best = -1, None
            for i in range(len(basis)):
                a = T[i, enter]
                if a > eps:
                    ratio = T[i, -1] / a
                    if best is None or ratio < best or \
                            (ratio == best and basis[i] < basis[leave]):
                        best, leave = ratio, i
            if leave < 0:
                return "unbounded", z, pivots_left
            z = pivot(z, leave, enter)
        return "pivot_limit", z, pivots_left

    # phase 1: drive artificials to zero
    budget = MAX_PIVOTS
    width_cols = width - 1
    allowed_mask = [j not in art_cols for j in range(width_cols)]
    if not exact:
        allowed_mask = np.array(allowed_mask, dtype=bool)
    if n_art:
        costs1 = [zero] * width_cols
        for c_ in art_cols:
            costs1[c_] = one
        z = make_cost_row(costs1)
        status, z, budget = run_phase(z, allowed_mask, budget)
        if status == "pivot_limit":
            return LpOutcome(NUMERIC_FAILURE, detail="pivot limit in phase 1")
        phase1_obj = sum(T[i, -1] for i in range(m) if basis[i] in art_cols)
        if phase1_obj > (zero if exact else max(feas_tol, 1e-9)):
            # infeasible; read the dual ray off the reader columns
            ray = []
            for i in range(len(basis)):
                if i in art_col_of_row:
                    ray.append(one + z[art_col_of_row[i]])
                else:
                    ray.append(z[next_slack_reader[i]])
            cert = FarkasCertificate(
                matrix=[[std.A[i][j] for j in range(N)] for i in range(m)],
                rhs=list(std.b), ray=ray)
            return LpOutcome(INFEASIBLE, farkas=cert,
                             detail=f"phase-1 objective {float(phase1_obj):g}")
        # pivot remaining basic artificials out; drop redundant rows
        drop = []
        for i in range(m):
            if basis[i] in art_cols:
                for j in range(N):
                    if (T[i, j] > eps or T[i, j] < -eps):
                        z = pivot(z, i, j)
                        break
                else:
                    drop.append(i)
        if drop:
            keep = [i for i in range(m) if i not in drop]
            T = T[keep]
            basis = [basis[i] for i in keep]
            m = len(keep)

    # phase 2
    costs2 = [zero] * width_cols
    for j in range(N):
        costs2[j] = std.c[j]
    z = make_cost_row(costs2)
    status, z, budget = run_phase(z, allowed_mask, budget)
    if status == "pivot_limit":
        return LpOutcome(NUMERIC_FAILURE, detail="pivot limit in phase 2")
    if status == "unbounded":
        return LpOutcome(UNBOUNDED)

    s_values = [zero] * width_cols
    for i in range(len(basis)):
        s_values[basis[i]] = T[i, -1]
    x = std.recover(s_values)
    # evaluate the user's objective directly on the recovered point
    obj = 0.0
    for j, a in lp.objective.items():
        obj += a * x[j]
    return LpOutcome(OPTIMAL, x=x, objective=obj)


# --------------------------------------------------------------------------
# scipy / HiGHS engine
# --------------------------------------------------------------------------

def _scipy_solve(lp: LinearProgram, tol: float) -> LpOutcome:
    from scipy.optimize import linprog
    from scipy.sparse import csr_matrix

    n = lp.num_vars
    sense = 1.0 if lp.sense == "min" else -1.0
    c = np.zeros(n)
    for j, a in lp.objective.items():
        c[j] = sense * a

    ub_rows, ub_rhs, eq_rows, eq_rhs = [], [], [], []
    for con in lp.constraints:
        if con.rel == "=":
            eq_rows.append(con.coeffs)
            eq_rhs.append(con.rhs)
        elif con.rel == "<=":
            ub_rows.append(con.coeffs)
            ub_rhs.append(con.rhs)
        else:
            ub_rows.append({j: -a for j, a in con.coeffs.items()})
            ub_rhs.append(-con.rhs)

    def sparse(rows):
        data, indices, indptr = [], [], [0]
        for row in rows:
            for j, a in row.items():
                indices.append(j)
                data.append(a)
            indptr.append(len(data))
        return csr_matrix((data, indices, indptr), shape=(len(rows), n))

    kw = {}
    if ub_rows:
        kw["A_ub"], kw["b_ub"] = sparse(ub_rows), np.array(ub_rhs)
    if eq_rows:
        kw["A_eq"], kw["b_eq"] = sparse(eq_rows), np.array(eq_rhs)
    bounds = [(lo, hi) for lo, hi in zip(lp.lower, lp.upper)]
    res = linprog(c, bounds=bounds, method="highs", **kw)
    if res.status == 0:
        x = np.asarray(res.x)
        obj = sum(a * x[j] for j, a in lp.objective.items())
        return LpOutcome(OPTIMAL, x=x, objective=obj, engine="scipy")
    if res.status == 2:
        return LpOutcome(INFEASIBLE, engine="scipy", detail=res.message)
    if res.status == 3:
        return LpOutcome(UNBOUNDED, engine="scipy", detail=res.message)
    return LpOutcome(NUMERIC_FAILURE, engine="scipy", detail=res.message)


def _max_violation(lp: LinearProgram, x: np.ndarray) -> float:
    worst = 0.0
    for con in lp.constraints:
        val = sum(a * x[j] for j, a in con.coeffs.items())
        if con.rel == "<=":
            worst = max(worst, val - con.rhs)
        elif con.rel == ">=":
            worst = max(worst, con.rhs - val)
        else:
            worst = max(worst, abs(val - con.rhs))
    for j, (lo, hi) in enumerate(zip(lp.lower, lp.upper)):
        if lo is not None:
            worst = max(worst, lo - x[j])
        if hi is not None:
            worst = max(worst, x[j] - hi)
    return worst


def solve(lp: LinearProgram, tol: float = 1e-9, engine: str = "auto",
          exact: bool = False) -> LpOutcome:
    """Solve the LP; statuses are optimal/infeasible/unbounded/numeric_failure.

    Numeric breakdown is reported as its own status, never as infeasible.
    Feasibility of an optimal point is re-verified against the model within a
    scaled tolerance before the status is trusted.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if exact:
        engine = "simplex"
    if engine == "auto":
        m, n = lp.num_constraints, lp.num_vars
        cells = m * (m + n)  # dense standard-form tableau size
        engine = "simplex" if cells <= AUTO_SIMPLEX_CELLS else "scipy"
    if engine == "simplex":
        out = _simplex_solve(lp, tol, exact)
    elif engine == "scipy":
        out = _scipy_solve(lp, tol)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    if out.is_optimal:
        viol = _max_violation(lp, out.x)
        scale = 1.0 + max((abs(c.rhs) for c in lp.constraints), default=0.0)
        if viol > max(tol, 1e-7) * scale:
            return LpOutcome(NUMERIC_FAILURE, engine=out.engine,
                             detail=f"optimal point violates constraints by {viol:g}")
    return out


def solve_linear_system(A, b, tol: float = 1e-9) -> Optional[np.ndarray]:
    """Minimum-norm solution of A x = b, or None when inconsistent.

    NoSolution is a value (None), not an error.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or A.shape[0] != b.shape[0]:
        raise ValueError("shape mismatch")
    x, *_ = np.linalg.lstsq(A, b, rcond=None)
    if np.max(np.abs(A @ x - b), initial=0.0) > tol:
        return None
    return x
