"""Thin command-line client for the experiment service.

Each subcommand builds the same request model the HTTP service accepts and
dispatches it either in process (default; no server required) or to a running
service via --server.  Reports are written atomically, as JSON or CSV, and
every output embeds its run manifest; ``rerun`` replays a manifest (verifying
input hashes) and reproduces the original bytes.

Exit codes: 0 success, 2 input error, 3 exact computation infeasible (use the
Monte Carlo estimators).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
from pathlib import Path

from fastapi import HTTPException
from pydantic import ValidationError

from . import __version__
from .reports import report_to_csv
from .service import app as service_app
from .service import schemas

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3

_ENDPOINTS = {
    "backtest": ("/backtest", schemas.BacktestRequest, schemas.BacktestResponse, service_app.backtest),
    "cover": ("/cover", schemas.CoverRequest, schemas.CoverResponse, service_app.cover),
    "rho": ("/rho", schemas.RhoRequest, schemas.RhoResponse, service_app.rho),
    "simulate": ("/simulate", schemas.SimulateRequest, schemas.SimulateResponse, service_app.simulate),
    "regret-sweep": ("/regret-sweep", schemas.RegretSweepRequest, schemas.RegretSweepResponse, service_app.regret_sweep),
}


class CliError(Exception):
    def __init__(self, message: str, exit_code: int = EXIT_INPUT):
        super().__init__(message)
        self.exit_code = exit_code


def dispatch(subcommand: str, payload: dict, server: str | None) -> dict:
    """Send a request to the service, in process or over HTTP."""
    path, req_model, resp_model, handler = _ENDPOINTS[subcommand]
    if server:
        import httpx

        try:
            resp = httpx.post(server.rstrip("/") + path, json=payload, timeout=None)
        except httpx.HTTPError as exc:
            raise CliError(f"cannot reach {server}: {exc}", EXIT_INPUT) from exc
        if resp.status_code == 409:
            raise CliError(resp.json().get("detail", "infeasible"), EXIT_INFEASIBLE)
        if resp.status_code != 200:
            raise CliError(f"server returned {resp.status_code}: {resp.text}", EXIT_INPUT)
        return resp.json()
    try:
        request = req_model(**payload)
    except ValidationError as exc:
        raise CliError(str(exc), EXIT_INPUT) from exc
    try:
        result = handler(request)
    except HTTPException as exc:
        code = EXIT_INFEASIBLE if exc.status_code == 409 else EXIT_INPUT
        raise CliError(str(exc.detail), code) from exc
    # normalize through the response model exactly as the HTTP layer would
    return resp_model.model_validate(result).model_dump()


def _write_atomic(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(report: dict, out: str | None, fmt: str) -> None:
    text = (
        json.dumps(report, indent=2, sort_keys=True) + "\n"
        if fmt == "json"
        else report_to_csv(report)
    )
    if out:
        _write_atomic(Path(out), text)
    else:
        sys.stdout.write(text)
    for warning in report.get("warnings") or []:
        print(f"warning: {warning}", file=sys.stderr)


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from exc


def _parse_class(text: str) -> dict:
    if text == "threshold1d":
        return {"family": "threshold1d"}
    if text == "product-threshold":
        return {"family": "product_threshold"}
    if text.startswith("product-threshold:"):
        return {"family": "product_threshold", "dim": int(text.split(":", 1)[1])}
    if text.startswith("finite:"):
        spec = json.loads(_read_text(text.split(":", 1)[1]))
        return {"family": "finite", **spec}
    raise CliError(f"unknown class spec: {text!r}")


def _parse_json_arg(text: str) -> dict:
    text = text.strip()
    if text.startswith("{"):
        return json.loads(text)
    return json.loads(_read_text(text))


def _parse_points(text: str):
    groups = [g for g in text.split(";") if g.strip()]
    rows = [[float(v) for v in g.split(",") if v.strip()] for g in groups]
    if len(rows) == 1:
        return rows[0]
    return rows


def _parse_horizons(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="unifolio", description=__doc__)
    parser.add_argument("--version", action="version", version=f"unifolio {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--format", choices=["json", "csv"], default="json")
        p.add_argument("--server", help="dispatch to a running service instead of in process")

    p = sub.add_parser("backtest", help="wealth report for a price CSV")
    p.add_argument("--input", required=True, help="price CSV (date,ticker1,ticker2,...)")
    p.add_argument("--class", dest="klass", default="threshold1d",
                   help="threshold1d | product-threshold[:dim] | finite:<json file>")
    p.add_argument("--side", default="prev-first", help="prev-first | history:<k>")
    p.add_argument("--samples", type=int, default=10_000, help="Monte Carlo draws per representative")
    p.add_argument("--seed", type=int, default=0)
    common(p)

    p = sub.add_parser("cover", help="minimal empirical covering of a sample")
    p.add_argument("--class", dest="klass", default="threshold1d")
    p.add_argument("--points", required=True,
                   help="comma-separated values; semicolons separate vector points")
    common(p)

    p = sub.add_parser("rho", help="centered disagreement growth diagnostics")
    p.add_argument("--process", default='{"kind": "uniform"}',
                   help="side process JSON (inline or a file path)")
    p.add_argument("--class", dest="klass", default="threshold1d")
    p.add_argument("--horizons", default="64,128,256,512,1024,2048,4096")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    common(p)

    p = sub.add_parser("simulate", help="Monte Carlo (or exact) mixture-portfolio wealth")
    p.add_argument("--input", help="price CSV; alternatively use --process")
    p.add_argument("--process", help="market process JSON (inline or a file path)")
    p.add_argument("--horizon", type=int, help="days to generate when using --process")
    p.add_argument("--estimator", choices=["up", "statewise", "mixture"], default="mixture")
    p.add_argument("--class", dest="klass", default="threshold1d")
    p.add_argument("--side", default="prev-first")
    p.add_argument("--threshold", type=float, default=1.0,
                   help="state threshold for the statewise estimator")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--exact", action="store_true", help="exact oracle instead of Monte Carlo")
    common(p)

    p = sub.add_parser("regret-sweep", help="regret and growth-bound table over horizons")
    p.add_argument("--process", required=True, help="market process JSON (inline or a file path)")
    p.add_argument("--class", dest="klass", default="threshold1d")
    p.add_argument("--side", default="prev-first")
    p.add_argument("--horizons", default="16,32,64,128")
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    common(p)

    p = sub.add_parser("rerun", help="replay a report's manifest and reproduce it")
    p.add_argument("--manifest", required=True, help="a previously written JSON report")
    common(p)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def _payload_from_args(args: argparse.Namespace) -> tuple[str, dict]:
    sub = args.subcommand
    if sub == "backtest":
        return sub, {
            "csv_text": _read_text(args.input),
            "function_class": _parse_class(args.klass),
            "side": args.side,
            "samples": args.samples,
            "seed": args.seed,
            "input_name": args.input,
        }
    if sub == "cover":
        return sub, {"function_class": _parse_class(args.klass), "points": _parse_points(args.points)}
    if sub == "rho":
        return sub, {
            "process": _parse_json_arg(args.process),
            "function_class": _parse_class(args.klass),
            "horizons": _parse_horizons(args.horizons),
            "trials": args.trials,
            "seed": args.seed,
        }
    if sub == "simulate":
        if (args.input is None) == (args.process is None):
            raise CliError("simulate needs exactly one of --input or --process")
        payload = {
            "estimator": args.estimator,
            "function_class": _parse_class(args.klass),
            "side": args.side,
            "threshold": args.threshold,
            "samples": args.samples,
            "seed": args.seed,
            "exact": args.exact,
        }
        if args.input:
            payload.update(csv_text=_read_text(args.input), input_name=args.input)
        else:
            payload.update(process=_parse_json_arg(args.process), horizon=args.horizon)
        return sub, payload
    if sub == "regret-sweep":
        return sub, {
            "process": _parse_json_arg(args.process),
            "function_class": _parse_class(args.klass),
            "side": args.side,
            "horizons": _parse_horizons(args.horizons),
            "trials": args.trials,
            "seed": args.seed,
        }
    raise CliError(f"unknown subcommand: {sub!r}")


def _payload_from_manifest(report: dict) -> tuple[str, dict]:
    manifest = report.get("manifest") or {}
    sub = manifest.get("subcommand")
    config = dict(manifest.get("config") or {})
    if sub not in _ENDPOINTS:
        raise CliError(f"manifest has no runnable subcommand: {sub!r}")
    payload = dict(config)
    payload["timestamp"] = manifest.get("timestamp")
    source = payload.pop("input", None)
    if source is not None:
        name = source.get("name")
        if not name:
            raise CliError("manifest does not record the input path; cannot rerun")
        text = _read_text(name)
        digest = hashlib.sha256(text.encode()).hexdigest()
        if digest != source.get("sha256"):
            raise CliError(f"input {name} changed since the original run (hash mismatch)")
        payload["csv_text"] = text
        payload["input_name"] = name
    return sub, payload


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.subcommand == "serve":
            import uvicorn

            uvicorn.run("unifolio.service.app:app", host=args.host, port=args.port)
            return EXIT_OK
        if args.subcommand == "rerun":
            report = json.loads(_read_text(args.manifest))
            sub, payload = _payload_from_manifest(report)
            result = dispatch(sub, payload, args.server)
            emit(result, args.out, args.format)
            return EXIT_OK
        sub, payload = _payload_from_args(args)
        result = dispatch(sub, payload, args.server)
        emit(result, args.out, args.format)
        return EXIT_OK
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
