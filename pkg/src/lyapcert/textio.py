"""Text formats: polynomial and ODE-system grammars, certificate and result
JSON documents, and the tabular run report.

Variables are canonically x1..xn; the aliases x, y, z, w map to x1..x4 so
textbook systems paste directly.  Parsing is whitespace-insensitive and
accepts `**` as a synonym of `^` plus juxtaposed products like `2.5y^3` or
`10x^2y`.
"""

from __future__ import annotations

import json
import re
from typing import Optional, Sequence

import numpy as np

from .bernstein import bernstein_tensor
from .errors import ParseError
from .lyapunov import (LyapunovResult, shift_polynomial, system_hash,
                       _pd_ladder)
from .poly import (Box, OdeSystem, Polynomial, affine_substitute, grlex_key,
                   lie_derivative, monomial_basis)
from .relax import (PositivityCertificate, RelaxMethod, build_z_system)

ALIASES = {"x": "x1", "y": "x2", "z": "x3", "w": "x4"}
DISPLAY_PRUNE = 1e-9

_TOKEN = re.compile(r"""
    (?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_]\w*)
  | (?P<pow>\*\*|\^)
  | (?P<mul>\*)
  | (?P<div>/)
  | (?P<plus>\+)
  | (?P<minus>-)
  | (?P<ws>\s+)
""", re.VERBOSE)


def _tokenize(text: str):
    pos, out = 0, []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup != "ws":
            out.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    return out


def _canon_var(name: str, pos: int) -> str:
    name = ALIASES.get(name, name)
    if not re.fullmatch(r"x\d+", name):
        raise ParseError(f"unknown variable {name!r}", pos)
    return name


def _split_vars(ident: str, pos: int) -> list:
    """Split a juxtaposed identifier like `xy` or `x2y` into variable names."""
    out, i = [], 0
    while i < len(ident):
        ch = ident[i]
        if ch == "x" and i + 1 < len(ident) and ident[i + 1].isdigit():
            j = i + 1
            while j < len(ident) and ident[j].isdigit():
                j += 1
            out.append(ident[i:j])
            i = j
        elif ch in ALIASES:
            out.append(ch)
            i += 1
        else:
            raise ParseError(f"unknown variable {ident!r}", pos)
    return out


def parse_polynomial(text: str,
                     variables: Optional[Sequence[str]] = None) -> Polynomial:
    """Parse a signed sum of coefficient/monomial terms into canonical form.

    With a declared variable list, any other variable is rejected; otherwise
    the variable count is inferred from the largest index mentioned.
    """
    tokens = _tokenize(text)
    if not tokens:
        raise ParseError("empty polynomial", 0)
    declared = None
    if variables is not None:
        declared = {_canon_var(v, 0): k for k, v in enumerate(variables)}

    terms = []  # (sign, coeff, {var_index_name: exponent}, position)
    k = 0

    def expect_term(k):
        sign = 1.0
        while k < len(tokens) and tokens[k][0] in ("plus", "minus"):
            if tokens[k][0] == "minus":
                sign = -sign
            k += 1
        if k >= len(tokens):
            raise ParseError("dangling sign", tokens[-1][2])
        coeff = 1.0
        powers: dict = {}
        saw_factor = False
        while k < len(tokens):
            kind, value, pos = tokens[k]
            if kind in ("plus", "minus"):
                break
            if kind == "mul":
                k += 1
                continue
            if kind == "num":
                coeff *= float(value)
                k += 1
                if k < len(tokens) and tokens[k][0] == "div":
                    if k + 1 >= len(tokens) or tokens[k + 1][0] != "num":
                        raise ParseError("expected denominator", tokens[k][2])
                    denom = float(tokens[k + 1][1])
                    if denom == 0:
                        raise ParseError("zero denominator", tokens[k + 1][2])
                    coeff /= denom
                    k += 2
                saw_factor = True
                continue
            if kind == "name":
                names = [_canon_var(v, pos) for v in _split_vars(value, pos)]
                exp = 1
                k += 1
                if k < len(tokens) and tokens[k][0] == "pow":
                    if k + 1 >= len(tokens) or tokens[k + 1][0] != "num":
                        raise ParseError("expected integer exponent", tokens[k][2])
                    raw = tokens[k + 1][1]
                    if not raw.isdigit():
                        raise ParseError(f"exponent must be an integer, got {raw}",
                                         tokens[k + 1][2])
                    exp = int(raw)
                    k += 2
                # the exponent binds to the last variable of the run: xy^2 = x*y^2
                for v in names[:-1]:
                    powers[v] = powers.get(v, 0) + 1
                powers[names[-1]] = powers.get(names[-1], 0) + exp
                saw_factor = True
                continue
            raise ParseError(f"unexpected token {value!r}", pos)
        if not saw_factor:
            raise ParseError("empty term", tokens[min(k, len(tokens) - 1)][2])
        return k, (sign, coeff, powers)

    while k < len(tokens):
        k, term = expect_term(k)
        terms.append(term)

    mentioned = {v for _, _, powers in terms for v in powers}
    if declared is not None:
        unknown = mentioned - set(declared)
        if unknown:
            raise ParseError(f"undeclared variable(s) {sorted(unknown)}", 0)
        index_of = declared
        n = len(declared)
    else:
        n = max((int(v[1:]) for v in mentioned), default=1)
        index_of = {f"x{j+1}": j for j in range(n)}

    out: dict = {}
    for sign, coeff, powers in terms:
        index = [0] * n
        for v, e in powers.items():
            index[index_of[v]] += e
        key = tuple(index)
        out[key] = out.get(key, 0.0) + sign * coeff
    return Polynomial(n, out)


def format_polynomial(p: Polynomial, variables: Optional[Sequence[str]] = None,
                      prune: float = DISPLAY_PRUNE) -> str:
    """Canonical text form, graded-lex term order, tiny coefficients dropped."""
    names = list(variables) if variables else [f"x{j+1}" for j in range(p.n)]
    parts = []
    for index in sorted(p.terms, key=grlex_key):
        c = p.terms[index]
        if abs(c) < prune:
            continue
        factors = []
        for name, e in zip(names, index):
            if e == 1:
                factors.append(name)
            elif e > 1:
                factors.append(f"{name}^{e}")
        mag = abs(c)
        body = "*".join(([f"{mag:.12g}"] if (mag != 1.0 or not factors) else [])
                        + factors)
        parts.append(("- " if c < 0 else "+ ") + body)
    if not parts:
        return "0"
    first = parts[0]
    text = ("-" + first[2:]) if first.startswith("- ") else first[2:]
    return " ".join([text] + parts[1:])


_VARS_RE = re.compile(r"^vars\s+(.+)$")
_ODE_RE = re.compile(r"^d([A-Za-z_]\w*)/dt\s*=\s*(.+)$", re.DOTALL)
_REGION_POW_RE = re.compile(
    r"^region\s*\[\s*([^,\]]+)\s*,\s*([^,\]]+)\s*\]\s*(?:\^\s*(\d+))?$")
_REGION_AXIS_RE = re.compile(
    r"^region\s+([A-Za-z_]\w*)\s+in\s*\[\s*([^,\]]+)\s*,\s*([^,\]]+)\s*\]$")


def parse_system(text: str):
    """Parse a system file into (OdeSystem, Box, variable names).

    Statements end with ';'.  `vars` declares variables, one `d<var>/dt`
    line per variable defines the field, `region` lines bound the domain
    (default [-1,1]^n).
    """
    stripped = "\n".join(line.split("#", 1)[0] for line in text.splitlines())
    statements = [s.strip() for s in stripped.split(";") if s.strip()]
    names: list = []
    ode_texts: dict = {}
    region_whole = None
    region_axes: dict = {}
    for stmt in statements:
        m = _VARS_RE.match(stmt)
        if m:
            if names:
                raise ParseError("duplicate vars statement")
            names = m.group(1).split()
            if not names:
                raise ParseError("empty vars statement")
            continue
        m = _ODE_RE.match(stmt)
        if m:
            ode_texts[m.group(1)] = m.group(2)
            continue
        m = _REGION_POW_RE.match(stmt)
        if m:
            lo, hi = float(m.group(1)), float(m.group(2))
            region_whole = (lo, hi, int(m.group(3)) if m.group(3) else None)
            continue
        m = _REGION_AXIS_RE.match(stmt)
        if m:
            region_axes[m.group(1)] = (float(m.group(2)), float(m.group(3)))
            continue
        raise ParseError(f"unrecognized statement {stmt!r}")
    if not names:
        raise ParseError("missing vars statement")
    canon = [_canon_var(v, 0) for v in names]
    if len(set(canon)) != len(canon):
        raise ParseError("duplicate variable declaration")
    n = len(canon)

    rhs = []
    for raw_name, canon_name in zip(names, canon):
        key = raw_name if raw_name in ode_texts else None
        if key is None:
            for alias, target in ALIASES.items():
                if target == canon_name and alias in ode_texts:
                    key = alias
                    break
        if key is None and canon_name in ode_texts:
            key = canon_name
        if key is None:
            raise ParseError(f"missing ODE line for variable {raw_name!r}")
        rhs.append(parse_polynomial(ode_texts.pop(key), variables=names))
    if ode_texts:
        raise ParseError(f"ODE line(s) for undeclared variable(s) "
                         f"{sorted(ode_texts)}")

    lower = [-1.0] * n
    upper = [1.0] * n
    if region_whole is not None:
        lo, hi, power = region_whole
        if power is not None and power != n:
            raise ParseError(f"region power {power} != variable count {n}")
        lower = [lo] * n
        upper = [hi] * n
    for var, (lo, hi) in region_axes.items():
        cv = _canon_var(var, 0)
        if cv not in canon:
            raise ParseError(f"region for undeclared variable {var!r}")
        j = canon.index(cv)
        lower[j], upper[j] = lo, hi
    return OdeSystem(tuple(rhs)), Box(tuple(lower), tuple(upper)), names


def format_system(system: OdeSystem, box: Optional[Box] = None,
                  variables: Optional[Sequence[str]] = None) -> str:
    names = list(variables) if variables else [f"x{j+1}" for j in range(system.n)]
    lines = [f"vars {' '.join(names)};"]
    for name, p in zip(names, system.rhs):
        lines.append(f"d{name}/dt = {format_polynomial(p, names)};")
    if box is not None:
        if len(set(box.lower)) == 1 and len(set(box.upper)) == 1:
            lines.append(f"region [{box.lower[0]:g},{box.upper[0]:g}]^{box.n};")
        else:
            for name, lo, hi in zip(names, box.lower, box.upper):
                lines.append(f"region {name} in [{lo:g},{hi:g}];")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# certificate documents
# --------------------------------------------------------------------------

def _method_doc(method: RelaxMethod) -> dict:
    return {"kind": method.kind,
            "delta": list(method.delta) if method.delta else None,
            "handelman_degree": method.handelman_degree,
            "levels": method.levels}


def _method_from_doc(doc: dict) -> RelaxMethod:
    return RelaxMethod(doc["kind"],
                       tuple(doc["delta"]) if doc.get("delta") else None,
                       doc.get("handelman_degree", 2),
                       doc.get("levels", "fixed-level-1"))


def _box_doc(box: Optional[Box]):
    if box is None:
        return None
    return {"lower": list(box.lower), "upper": list(box.upper)}


def _box_from_doc(doc) -> Optional[Box]:
    if doc is None:
        return None
    return Box(tuple(doc["lower"]), tuple(doc["upper"]))


def certificate_to_doc(cert: PositivityCertificate) -> dict:
    data = dict(cert.data)
    if "halfspaces" in data:
        data["halfspaces"] = [format_polynomial(f, prune=0.0)
                              for f in data["halfspaces"]]
    return {
        "document": "positivity-certificate",
        "method": _method_doc(cert.method),
        "polynomial": format_polynomial(cert.polynomial, prune=0.0),
        "n": cert.polynomial.n,
        "margin": cert.margin,
        "tolerance": cert.tolerance,
        "box": _box_doc(cert.box),
        "lp_value": cert.lp_value,
        "data": data,
    }


def certificate_from_doc(doc: dict) -> PositivityCertificate:
    n = int(doc["n"])
    names = [f"x{j+1}" for j in range(n)]
    data = dict(doc["data"])
    if "halfspaces" in data:
        data["halfspaces"] = [parse_polynomial(t, variables=names)
                              for t in data["halfspaces"]]
    if "bernstein_coeffs" in data:
        data["bernstein_coeffs"] = [[tuple(i), float(v)]
                                    for i, v in data["bernstein_coeffs"]]
    return PositivityCertificate(
        method=_method_from_doc(doc["method"]),
        polynomial=parse_polynomial(doc["polynomial"], variables=names),
        margin=float(doc["margin"]),
        tolerance=float(doc["tolerance"]),
        box=_box_from_doc(doc.get("box")),
        lp_value=doc.get("lp_value"),
        data=data)


def check_certificate_doc(doc: dict) -> tuple:
    """Re-verify a serialized certificate by independent recomputation."""
    try:
        cert = certificate_from_doc(doc)
    except (KeyError, ValueError, TypeError) as exc:
        return False, f"malformed certificate: {exc}"
    ok = cert.verify()
    return ok, "certificate verified" if ok else "reconstruction mismatch"


# --------------------------------------------------------------------------
# Lyapunov result documents
# --------------------------------------------------------------------------

def lyapunov_result_to_doc(result: LyapunovResult,
                           variables: Optional[Sequence[str]] = None) -> dict:
    q = result.query
    doc = {
        "document": "lyapunov-result",
        "status": result.status,
        "system_hash": system_hash(q.system) if q else None,
        "region": _box_doc(q.region) if q else None,
        "template_degree": q.template_degree if q else None,
        "method": _method_doc(q.method) if q else None,
        "cells": [_box_doc(c) for c in result.cells],
        "V": [[list(i), c] for i, c in
              sorted(result.V.terms.items(), key=lambda t: grlex_key(t[0]))]
             if result.V is not None else None,
        "epsilon": result.epsilon,
        "shift_axes": list(result.shift_axes) if result.shift_axes else None,
        "eps_pd": q.eps_pd if q else None,
        "delta": list(result.delta) if result.delta else None,
        "certificates": [certificate_to_doc(c)
                         for c in result.derivative_certificates],
        "refinements": [list(p) for p in result.refinement_points],
        "timings": {"setup_ms": result.setup_ms, "lp_ms": result.lp_ms},
        "stage": result.stage,
        "detail": result.detail,
        "failure_kind": result.failure_kind,
    }
    if variables:
        doc["variables"] = list(variables)
    return doc


def check_lyapunov_doc(doc: dict, system_text: str) -> tuple:
    """Recheck a found result against its system: hash binding, per-cell
    derivative certificates rebuilt from the stored V, and positivity."""
    if doc.get("status") != "found":
        return False, "only found results carry a checkable certificate"
    system, region, _names = parse_system(system_text)
    if doc.get("system_hash") != system_hash(system):
        return False, "system hash mismatch"
    n = system.n
    V = Polynomial(n, {tuple(i): float(c) for i, c in doc["V"]})
    epsilon = float(doc.get("epsilon") or 0.0)
    shift_axes = doc.get("shift_axes")
    shift = shift_polynomial(n, epsilon,
                             tuple(shift_axes) if shift_axes else None)
    W = (-lie_derivative(V, system)) - shift
    delta = tuple(doc["delta"])
    grid = monomial_basis(n, delta)
    for cdoc in doc["certificates"]:
        cell = _box_from_doc(cdoc["box"])
        tensor = bernstein_tensor(affine_substitute(W, cell), delta)
        stored = {tuple(i): float(v)
                  for i, v in cdoc["data"]["bernstein_coeffs"]}
        if any(abs(stored.get(i, 0.0) - float(tensor[i])) > 1e-8 for i in grid):
            return False, f"bernstein coefficients differ on cell {cdoc['box']}"
        kind = cdoc["method"]["kind"]
        if kind == "lp1":
            if min(stored.values()) < -1e-7:
                return False, "stored lp1 certificate has a negative coefficient"
        else:
            zs = build_z_system(delta, kind,
                                cdoc["data"].get("levels", "fixed-level-1"))
            lam = cdoc["data"]["farkas_multipliers"]
            if len(lam) != len(zs.rows):
                return False, "multiplier count mismatch"
            if min(lam) < -1e-9:
                return False, "negative Farkas multiplier"
            ghat = np.zeros(zs.nvars)
            for k, i in enumerate(grid):
                ghat[k] = tensor[i]
            resid = -ghat
            dual_obj = 0.0
            for r, (coeffs, rhs) in enumerate(zs.rows):
                lr = float(lam[r])
                dual_obj += rhs * lr
                if lr:
                    for col, a in coeffs.items():
                        resid[col] += a * lr
            if np.max(np.abs(resid)) > 1e-6:
                return False, "Farkas identity violated"
            if dual_obj < -1e-6:
                return False, "Farkas objective negative"
    eps_pd = float(doc.get("eps_pd") or 0.1)
    report = _pd_ladder(V, region, eps_pd)
    if not report.passed:
        return False, "positive definiteness recheck failed"
    return True, "lyapunov certificate verified"


# --------------------------------------------------------------------------
# report tables
# --------------------------------------------------------------------------

REPORT_COLUMNS = ("Relaxation", "Lyapunov", "#Boxes", "Setup", "LPTime")


def report_rows(results: Sequence, variables=None) -> list:
    rows = []
    for r in results:
        if r.found:
            fn = format_polynomial(r.V, variables)
        else:
            kind = r.failure_kind or ("to" if "deadline" in r.detail else "")
            fn = "x" + (f" ({kind})" if kind else "")
        rows.append({
            "relaxation": (r.stage or (r.query.method.label() if r.query else "?")),
            "lyapunov": fn,
            "boxes": len(r.cells),
            "setup_s": round(r.setup_ms / 1e3, 3),
            "lp_s": round(r.lp_ms / 1e3, 3),
            "status": r.status,
        })
    return rows


def emit_report(results: Sequence, fmt: str = "text", variables=None) -> str:
    """Run summary in the usual relaxation/boxes/timing layout."""
    rows = report_rows(results, variables)
    if fmt == "json":
        return json.dumps({"columns": list(REPORT_COLUMNS), "rows": rows},
                          indent=2)
    if fmt != "text":
        raise ValueError(f"unknown report format {fmt!r}")
    table = [list(REPORT_COLUMNS)]
    for row in rows:
        table.append([row["relaxation"], row["lyapunov"], str(row["boxes"]),
                      f"{row['setup_s']:.3f}", f"{row['lp_s']:.3f}"])
    widths = [max(len(r[j]) for r in table) for j in range(len(REPORT_COLUMNS))]
    lines = []
    for k, row in enumerate(table):
        lines.append(" | ".join(cell.ljust(w) for cell, w in zip(row, widths)))
        if k == 0:
            lines.append("-+-".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
