"""Command-line client.

Thin shell over the HTTP service: every subcommand builds a request and sends
it either to an in-process application instance (default) or to a remote
server given with --server.  Exit codes: 0 success, 1 parse/IO errors or a
failed check, 2 honest unknown/not-found, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNKNOWN = 2
EXIT_NUMERIC = 3


class ServiceClient:
    """POST wrapper over the in-process app or a remote base URL."""

    def __init__(self, server: str | None, timeout_s: float | None):
        self.timeout = timeout_s
        if server:
            import httpx
            self._client = httpx.Client(base_url=server.rstrip("/"),
                                        timeout=timeout_s or 600.0)
        else:
            import warnings
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                from starlette.testclient import TestClient
            from .service import app
            self._client = TestClient(app, raise_server_exceptions=False)

    def post(self, path: str, payload: dict):
        resp = self._client.post(path, json=payload)
        try:
            body = resp.json()
        except ValueError:
            body = {"detail": resp.text}
        return resp.status_code, body


def _http_exit(code: int, body: dict) -> int:
    detail = body.get("detail", body)
    print(f"error: {detail}", file=sys.stderr)
    if code == 400:
        return EXIT_ERROR
    if code == 422:
        return EXIT_NUMERIC
    return EXIT_ERROR


_BOX_PART = re.compile(r"\[\s*([^,\]]+)\s*,\s*([^,\]]+)\s*\]")


def parse_box_arg(text: str) -> dict:
    """`[a,b]^n` or `[a,b]x[c,d]x...` into a box document."""
    text = text.strip()
    m = re.fullmatch(r"(\[[^\]]+\])\s*\^\s*(\d+)", text)
    if m:
        lo, hi = _BOX_PART.fullmatch(m.group(1)).groups()
        n = int(m.group(2))
        return {"lower": [float(lo)] * n, "upper": [float(hi)] * n}
    parts = re.split(r"(?<=\])\s*x\s*(?=\[)", text)
    lower, upper = [], []
    for part in parts:
        m = _BOX_PART.fullmatch(part.strip())
        if not m:
            raise ValueError(f"cannot parse box segment {part!r}")
        lower.append(float(m.group(1)))
        upper.append(float(m.group(2)))
    return {"lower": lower, "upper": upper}


def _parse_degree(text: str | None):
    if not text:
        return None
    return [int(v) for v in text.replace(",", " ").split()]


def _parse_axes(text: str | None, names: list):
    if text is None or text == "all":
        return None
    if text in ("none", ""):
        return []
    canon = {"x": "x1", "y": "x2", "z": "x3", "w": "x4"}
    out = []
    for tok in text.replace(",", " ").split():
        tok = canon.get(tok, tok)
        if tok in names:
            out.append(names.index(tok))
        elif tok.startswith("x") and tok[1:].isdigit():
            out.append(int(tok[1:]) - 1)
        else:
            raise ValueError(f"unknown axis {tok!r}")
    return out


def _write_json(path: str, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def cmd_bound(client: ServiceClient, args) -> int:
    payload = {"polynomial": args.poly, "box": parse_box_arg(args.box),
               "degree": _parse_degree(args.degree), "lp3": args.lp3,
               "lp3_levels": args.lp3_levels}
    code, body = client.post("/bound", payload)
    if code != 200:
        return _http_exit(code, body)
    print(json.dumps(body, indent=2))
    return EXIT_OK


def cmd_certify(client: ServiceClient, args) -> int:
    payload = {"polynomial": args.poly, "box": parse_box_arg(args.box),
               "method": args.method, "degree": _parse_degree(args.degree),
               "handelman_degree": args.handelman_degree,
               "lp3_levels": args.lp3_levels, "margin": args.margin,
               "tolerance": args.tol}
    code, body = client.post("/certify", payload)
    if code != 200:
        return _http_exit(code, body)
    if body["status"] != "certified":
        print("unknown: no certificate at this relaxation")
        return EXIT_UNKNOWN
    if args.output:
        _write_json(args.output, body["certificate"])
        print(f"certificate written to {args.output}")
    else:
        print(json.dumps(body["certificate"], indent=2))
    return EXIT_OK


def cmd_handelman(client: ServiceClient, args) -> int:
    halfspaces = [h.strip() for chunk in args.halfspaces
                  for h in chunk.split(";") if h.strip()]
    payload = {"polynomial": args.poly, "halfspaces": halfspaces,
               "degree": args.degree, "tolerance": args.tol}
    code, body = client.post("/handelman", payload)
    if code != 200:
        return _http_exit(code, body)
    if body["status"] != "certified":
        print(f"unknown: no degree-{args.degree} representation")
        return EXIT_UNKNOWN
    if args.output:
        _write_json(args.output, body["certificate"])
        print(f"certificate written to {args.output}")
    else:
        print(json.dumps(body["certificate"], indent=2))
    return EXIT_OK


def cmd_lyapunov(client: ServiceClient, args) -> int:
    try:
        text = open(args.system).read()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    # variable names are needed to map --split tokens to axis indices
    names_guess = []
    m = re.search(r"vars\s+([^;]+);", text)
    if m:
        names_guess = m.group(1).split()
    try:
        split = _parse_axes(args.split, names_guess)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    epsilon = 0.0 if args.weak else args.epsilon
    payload = {"system": text, "template_degree": args.degree,
               "method": args.method, "split_axes": split,
               "epsilon": epsilon, "eps_pd": args.eps_pd,
               "coeff_bound": args.coeff_bound,
               "max_refinements": args.max_refinements,
               "lp3_levels": args.lp3_levels,
               "timeout_s": client.timeout,
               "soundness_samples": args.soundness}
    if args.region:
        payload["region"] = parse_box_arg(args.region)
    code, body = client.post("/lyapunov", payload)
    if code != 200:
        return _http_exit(code, body)
    result = body["result"]
    if args.output:
        _write_json(args.output, result)
    status = body["status"]
    if status == "found":
        stage = result.get("stage") or result.get("method", {}).get("kind", "")
        print(f"found ({stage}): V = {body['lyapunov']}")
        if body.get("soundness_violations") is not None:
            print(f"soundness violations: {body['soundness_violations']}")
        if args.report:
            print(_report_from_doc(result, args.report))
        return EXIT_OK
    print(f"{status}: {result.get('detail', '')}")
    return EXIT_UNKNOWN


def _report_from_doc(result_doc: dict, fmt: str) -> str:
    from .textio import REPORT_COLUMNS
    row = [result_doc.get("stage") or result_doc.get("method", {}).get("kind", "?"),
           "found" if result_doc.get("status") == "found" else "x",
           str(len(result_doc.get("cells", []))),
           f"{result_doc.get('timings', {}).get('setup_ms', 0.0)/1e3:.3f}",
           f"{result_doc.get('timings', {}).get('lp_ms', 0.0)/1e3:.3f}"]
    if fmt == "json":
        return json.dumps({"columns": list(REPORT_COLUMNS), "rows": [row]})
    widths = [max(len(c), len(h)) for c, h in zip(row, REPORT_COLUMNS)]
    head = " | ".join(h.ljust(w) for h, w in zip(REPORT_COLUMNS, widths))
    sep = "-+-".join("-" * w for w in widths)
    line = " | ".join(c.ljust(w) for c, w in zip(row, widths))
    return "\n".join([head, sep, line])


def cmd_genbench(client: ServiceClient, args) -> int:
    payload = {"n": args.n, "field_degree": args.field_degree,
               "v1_form": "quartic-diag" if args.v1 == "quartic" else "quad-diag",
               "seed": args.seed, "max_tries": args.max_tries,
               "reveal": args.reveal}
    code, body = client.post("/genbench", payload)
    if code != 200:
        return _http_exit(code, body)
    out = args.output or f"bench-seed{args.seed}.ode"
    with open(out, "w") as fh:
        fh.write(body["system"])
    sidecar = os.path.splitext(out)[0] + ".json"
    _write_json(sidecar, body["sidecar"])
    print(f"system written to {out}, sidecar to {sidecar}")
    return EXIT_OK


def cmd_check(client: ServiceClient, args) -> int:
    try:
        doc = json.load(open(args.certificate))
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    payload = {"certificate": doc}
    if args.system:
        try:
            payload["system"] = open(args.system).read()
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_ERROR
    code, body = client.post("/check", payload)
    if code != 200:
        return _http_exit(code, body)
    print(("valid: " if body["valid"] else "INVALID: ") + body["detail"])
    return EXIT_OK if body["valid"] else EXIT_ERROR


def cmd_serve(args) -> int:
    import uvicorn
    uvicorn.run("lyapcert.service:app", host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="lyapcert",
        description="Polynomial positivity certificates and Lyapunov "
                    "function synthesis via LP relaxations")
    ap.add_argument("--server", default=os.environ.get("LYAPCERT_SERVER"),
                    help="remote service URL (default: run in-process)")
    ap.add_argument("--tol", type=float,
                    default=float(os.environ.get("LYAPCERT_TOL", "1e-9")))
    ap.add_argument("--timeout-s", type=float,
                    default=float(os.environ.get("LYAPCERT_TIMEOUT_S", "0"))
                    or None)
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bound", help="lower bounds from each relaxation")
    b.add_argument("-p", "--poly", required=True)
    b.add_argument("--box", required=True, help="e.g. '[0,1]' or '[-1,1]^2'")
    b.add_argument("--degree", help="Bernstein degree, e.g. '2,2'")
    b.add_argument("--lp3", action="store_true")
    b.add_argument("--lp3-levels", default="full",
                   choices=["fixed-level-1", "full"])

    c = sub.add_parser("certify", help="positivity certificate over a box")
    c.add_argument("-p", "--poly", required=True)
    c.add_argument("--box", required=True)
    c.add_argument("--method", default="lp2",
                   choices=["interval", "handelman", "lp1", "lp2", "lp3"])
    c.add_argument("--degree")
    c.add_argument("-D", "--handelman-degree", type=int, default=2)
    c.add_argument("--lp3-levels", default="fixed-level-1",
                   choices=["fixed-level-1", "full"])
    c.add_argument("--margin", type=float, default=0.0)
    c.add_argument("-o", "--output")

    h = sub.add_parser("handelman", help="power-product certificate over "
                                         "affine halfspaces")
    h.add_argument("-p", "--poly", required=True)
    h.add_argument("--halfspaces", action="append", required=True,
                   help="semicolon-separated affine polynomials, each >= 0")
    h.add_argument("-D", "--degree", type=int, default=2)
    h.add_argument("-o", "--output")

    ly = sub.add_parser("lyapunov", help="synthesize a Lyapunov function")
    ly.add_argument("system", help="path to an .ode system file")
    ly.add_argument("--degree", type=int, default=2, help="template degree")
    ly.add_argument("--method", default="auto",
                    choices=["auto", "lp1", "lp2", "lp3"])
    ly.add_argument("--split", default="all",
                    help="axes to bisect at 0: 'all', 'none' or e.g. 'x1,x2'")
    ly.add_argument("--epsilon", type=float, default=0.1)
    ly.add_argument("--weak", action="store_true",
                    help="drop the derivative shift (Lyapunov stability only)")
    ly.add_argument("--eps-pd", type=float, default=0.1)
    ly.add_argument("--coeff-bound", type=float, default=5.0)
    ly.add_argument("--max-refinements", type=int, default=10)
    ly.add_argument("--lp3-levels", default="fixed-level-1",
                    choices=["fixed-level-1", "full"])
    ly.add_argument("--region", help="override the file's region")
    ly.add_argument("--soundness", type=int, default=0,
                    help="sample count for a post-hoc soundness check")
    ly.add_argument("--report", choices=["text", "json"])
    ly.add_argument("-o", "--output", help="write the result JSON here")

    g = sub.add_parser("genbench", help="generate a provably stable benchmark")
    g.add_argument("--n", type=int, default=2)
    g.add_argument("--field-degree", type=int, default=3)
    g.add_argument("--v1", default="quad", choices=["quad", "quartic"])
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--max-tries", type=int, default=100)
    g.add_argument("--reveal", action="store_true",
                   help="include the hidden V1/V2 pair in the sidecar")
    g.add_argument("-o", "--output")

    k = sub.add_parser("check", help="re-verify an emitted certificate file")
    k.add_argument("certificate")
    k.add_argument("--system", help=".ode file for lyapunov-result documents")

    s = sub.add_parser("serve", help="run the HTTP service")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=871)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        return cmd_serve(args)
    if args.command == "genbench" and args.seed is None:
        args.seed = int(os.environ.get("LYAPCERT_SEED", "0"))
    client = ServiceClient(args.server, args.timeout_s)
    handlers = {"bound": cmd_bound, "certify": cmd_certify,
                "handelman": cmd_handelman, "lyapunov": cmd_lyapunov,
                "genbench": cmd_genbench, "check": cmd_check}
    return handlers[args.command](client, args)


if __name__ == "__main__":
    sys.exit(main())
