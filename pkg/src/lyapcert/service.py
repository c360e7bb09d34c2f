"""HTTP service wrapping the toolkit.

One endpoint per command: bound, certify, handelman, lyapunov, genbench,
check.  The conversion-matrix caches persist across requests, so a resident
service amortizes setup across repeated queries on the same degrees.  The CLI
drives these endpoints either in-process or over the network.
"""

from __future__ import annotations

from typing import List, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from . import benchgen
from .errors import (DegreeTooLow, ExpansionLimitExceeded, GenerationFailure,
                     LpFailure, ParseError)
from .lyapunov import (LyapunovQuery, escalate, sample_soundness,
                       synthesize)
from .poly import Box
from .relax import RelaxMethod, certify_nonneg, handelman_lp, interval_bound, \
    lower_bound
from .textio import (certificate_to_doc, check_certificate_doc,
                     check_lyapunov_doc, format_polynomial, format_system,
                     lyapunov_result_to_doc, parse_polynomial, parse_system)

app = FastAPI(title="lyapcert",
              description="LP-relaxation positivity certificates and "
                          "polynomial Lyapunov function synthesis")


class BoxModel(BaseModel):
    lower: List[float]
    upper: List[float]

    def to_box(self) -> Box:
        return Box(tuple(self.lower), tuple(self.upper))

    @classmethod
    def from_box(cls, box: Box) -> "BoxModel":
        return cls(lower=list(box.lower), upper=list(box.upper))


class BoundRequest(BaseModel):
    polynomial: str
    box: BoxModel
    degree: Optional[List[int]] = None
    lp3: bool = False
    lp3_levels: str = "full"


class BoundResponse(BaseModel):
    lp1: float
    lp2: float
    lp3: Optional[float] = None
    interval: float


class CertifyRequest(BaseModel):
    polynomial: str
    box: BoxModel
    method: str = "lp2"                  # interval | handelman | lp1 | lp2 | lp3
    degree: Optional[List[int]] = None
    handelman_degree: int = 2
    lp3_levels: str = "fixed-level-1"
    margin: float = 0.0
    tolerance: float = 1e-9


class CertifyResponse(BaseModel):
    status: str                          # certified | unknown
    certificate: Optional[dict] = None


class HandelmanRequest(BaseModel):
    polynomial: str
    halfspaces: List[str]
    degree: int = 2
    tolerance: float = 1e-9


class LyapunovRequest(BaseModel):
    system: str
    template_degree: int = 2
    method: str = "auto"                 # auto runs the escalation schedule
    split_axes: Optional[List[int]] = None
    epsilon: float = 0.1
    shift_axes: Optional[List[int]] = None
    eps_pd: float = 0.1
    coeff_bound: float = 5.0
    max_refinements: int = 10
    lp3_levels: str = "fixed-level-1"
    region: Optional[BoxModel] = None    # overrides the file's region line
    timeout_s: Optional[float] = None
    soundness_samples: int = 0           # >0 re-samples the found result


class LyapunovResponse(BaseModel):
    status: str
    result: dict
    lyapunov: Optional[str] = None
    soundness_violations: Optional[int] = None


class GenbenchRequest(BaseModel):
    n: int = 2
    field_degree: int = 3
    v1_form: str = "quad-diag"
    seed: int = 0
    max_tries: int = 100
    reveal: bool = False


class GenbenchResponse(BaseModel):
    system: str
    sidecar: dict


class CheckRequest(BaseModel):
    certificate: dict
    system: Optional[str] = None         # required for lyapunov-result docs


class CheckResponse(BaseModel):
    valid: bool
    detail: str


def _fail(exc: Exception) -> HTTPException:
    if isinstance(exc, (ParseError, ValueError, DegreeTooLow)):
        return HTTPException(status_code=400, detail=str(exc))
    if isinstance(exc, (LpFailure, ExpansionLimitExceeded)):
        return HTTPException(status_code=422, detail=f"numeric: {exc}")
    return HTTPException(status_code=500, detail=str(exc))


def _method(kind: str, degree, handelman_degree: int,
            levels: str) -> RelaxMethod:
    delta = tuple(degree) if degree else None
    return RelaxMethod(kind, delta, handelman_degree, levels)


@app.get("/health")
def health():
    return {"status": "ok"}


@app.post("/bound", response_model=BoundResponse)
def bound(req: BoundRequest):
    try:
        box = req.box.to_box()
        p = parse_polynomial(req.polynomial,
                             variables=[f"x{j+1}" for j in range(box.n)])
        delta = tuple(req.degree) if req.degree else None
        out = {
            "lp1": lower_bound(p, box, RelaxMethod.lp1(delta)),
            "lp2": lower_bound(p, box, RelaxMethod.lp2(delta)),
            "interval": interval_bound(p, box)[0],
        }
        if req.lp3:
            out["lp3"] = lower_bound(
                p, box, RelaxMethod.lp3(delta, levels=req.lp3_levels))
        return BoundResponse(**out)
    except Exception as exc:  # noqa: BLE001 - mapped to HTTP statuses
        raise _fail(exc) from exc


@app.post("/certify", response_model=CertifyResponse)
def certify(req: CertifyRequest):
    try:
        box = req.box.to_box()
        p = parse_polynomial(req.polynomial,
                             variables=[f"x{j+1}" for j in range(box.n)])
        method = _method(req.method, req.degree, req.handelman_degree,
                         req.lp3_levels)
        cert = certify_nonneg(p, box, method, margin=req.margin,
                              tol=req.tolerance)
        if cert is None:
            return CertifyResponse(status="unknown")
        return CertifyResponse(status="certified",
                               certificate=certificate_to_doc(cert))
    except Exception as exc:
        raise _fail(exc) from exc


@app.post("/handelman", response_model=CertifyResponse)
def handelman(req: HandelmanRequest):
    try:
        halfspaces = [parse_polynomial(t) for t in req.halfspaces]
        n = max(f.n for f in halfspaces)
        names = [f"x{j+1}" for j in range(n)]
        halfspaces = [parse_polynomial(t, variables=names)
                      for t in req.halfspaces]
        p = parse_polynomial(req.polynomial, variables=names)
        cert = handelman_lp(p, halfspaces, req.degree, tol=req.tolerance)
        if cert is None:
            return CertifyResponse(status="unknown")
        return CertifyResponse(status="certified",
                               certificate=certificate_to_doc(cert))
    except Exception as exc:
        raise _fail(exc) from exc


@app.post("/lyapunov", response_model=LyapunovResponse)
def lyapunov(req: LyapunovRequest):
    try:
        system, region, names = parse_system(req.system)
        if req.region is not None:
            region = req.region.to_box()
        query = LyapunovQuery(
            system=system, region=region,
            template_degree=req.template_degree,
            method=RelaxMethod("lp1" if req.method == "auto" else req.method,
                               levels=req.lp3_levels),
            split_axes=tuple(req.split_axes) if req.split_axes is not None else None,
            epsilon=req.epsilon,
            shift_axes=tuple(req.shift_axes) if req.shift_axes is not None else None,
            eps_pd=req.eps_pd, coeff_bound=req.coeff_bound,
            max_refinements=req.max_refinements)
        if req.method == "auto":
            result = escalate(query, deadline_s=req.timeout_s)
        else:
            result = synthesize(query)
        doc = lyapunov_result_to_doc(result, variables=names)
        violations = None
        if result.found and req.soundness_samples > 0:
            violations = sample_soundness(result, req.soundness_samples)
        return LyapunovResponse(
            status=result.status, result=doc,
            lyapunov=format_polynomial(result.V, names) if result.V else None,
            soundness_violations=violations)
    except Exception as exc:
        raise _fail(exc) from exc


@app.post("/genbench", response_model=GenbenchResponse)
def genbench(req: GenbenchRequest):
    try:
        spec = benchgen.BenchSpec(n=req.n, field_degree=req.field_degree,
                                  v1_form=req.v1_form, seed=req.seed,
                                  max_tries=req.max_tries)
        bench = benchgen.generate(spec)
        names = [f"x{j+1}" for j in range(req.n)]
        sidecar = {
            "seed": req.seed,
            "n": req.n,
            "field_degree": req.field_degree,
            "v1_form": req.v1_form,
            "residual": bench.residual,
            "tries": bench.tries,
        }
        if req.reveal:
            sidecar["v1"] = format_polynomial(bench.hidden_v1, names)
            sidecar["v2"] = format_polynomial(bench.hidden_v2, names)
        return GenbenchResponse(
            system=format_system(bench.system, Box.symmetric(req.n), names),
            sidecar=sidecar)
    except GenerationFailure as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    except Exception as exc:
        raise _fail(exc) from exc


@app.post("/check", response_model=CheckResponse)
def check(req: CheckRequest):
    try:
        doc = req.certificate
        if doc.get("document") == "lyapunov-result":
            if not req.system:
                raise ParseError("lyapunov result check needs the system text")
            ok, detail = check_lyapunov_doc(doc, req.system)
        else:
            ok, detail = check_certificate_doc(doc)
        return CheckResponse(valid=ok, detail=detail)
    except Exception as exc:
        raise _fail(exc) from exc
