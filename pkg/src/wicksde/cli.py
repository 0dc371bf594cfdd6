"""Command-line front end.

The CLI is a thin client of the HTTP service: it parses flags into a
RunConfig, posts the corresponding request (to an in-process app by default,
or to ``--server URL``), renders the JSON report as text/CSV/JSON and maps
outcomes to exit codes:

    0  success
    2  usage error (bad flags, unknown model, non-divisor resolutions)
    3  an assertion embedded in the command failed (e.g. exactness residual
       above tolerance, a bound violation)
    4  runtime/numeric failure (aborted paths, I/O or transport errors)
"""

from __future__ import annotations

import argparse
import asyncio
import sys

import httpx
from pydantic import BaseModel

from . import models, reporting
from .schemes import SchemeKind

__all__ = ["RunConfig", "build_parser", "parse_args", "run", "main"]

DEFAULT_RESOLUTIONS = (8, 16, 32, 64, 128)
DEFAULT_PROBES = models.DEFAULT_PROBES


class RunConfig(BaseModel):
    command: str
    model: str
    schemes: list[str] = ["wick"]
    resolutions: list[int] = list(DEFAULT_RESOLUTIONS)
    n_ref: int = 1024
    n_paths: int = 20000
    seed: int = 42
    horizon: float = 1.0
    n: int = 64
    tolerance: float = 1e-12
    probes: list[float] = list(DEFAULT_PROBES)
    initial: float | None = None
    output_path: str | None = None
    output_format: str = "text"
    server: str | None = None


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", required=True, help="model spec, e.g. linear:alpha=2.0")
    p.add_argument("--initial", type=float, default=None,
                   help="initial value (default: the model's)")
    p.add_argument("--seed", type=int, default=42, help="64-bit seed (default 42)")
    p.add_argument("--n-paths", type=int, default=20000, dest="n_paths")
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--output", "-o", default=None, dest="output_path",
                   help="write the report here instead of stdout")
    p.add_argument("--format", choices=("text", "csv", "json"), default="text",
                   dest="output_format")
    p.add_argument("--server", default=None,
                   help="base URL of a running service (default: in-process)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wicksde",
        description="Strong-approximation studies for drift-less scalar Ito SDEs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("converge", help="strong-error convergence study with order fit")
    _add_common(p)
    p.add_argument("--scheme", action="append", dest="schemes", metavar="SCHEME",
                   help="euler | milstein | wick | wick_truncated:ORDER (repeatable; "
                        "default wick)")
    p.add_argument("--resolutions", default=",".join(map(str, DEFAULT_RESOLUTIONS)),
                   help="comma-separated step counts (default 8,16,32,64,128)")
    p.add_argument("--n-ref", type=int, default=1024, dest="n_ref",
                   help="reference grid resolution (default 1024)")

    p = sub.add_parser("exactness", help="node-wise residual of Wick paths vs closed form")
    _add_common(p)
    p.add_argument("--n", type=int, default=64, help="grid resolution (default 64)")
    p.add_argument("--tolerance", type=float, default=1e-12,
                   help="max allowed relative residual (default 1e-12)")

    p = sub.add_parser("lemma1", help="second moments of Wick paths vs the a-priori bound")
    _add_common(p)
    p.add_argument("--n", type=int, default=32, help="grid resolution (default 32)")

    p = sub.add_parser("gap", help="Wick/Milstein mean-square gap rate vs resolution")
    _add_common(p)
    p.add_argument("--resolutions", default=",".join(map(str, DEFAULT_RESOLUTIONS)),
                   help="comma-separated step counts (default 8,16,32,64,128)")

    p = sub.add_parser("validate", help="check a model against its declared constants")
    _add_common(p)
    p.add_argument("--probes", default=",".join(f"{x:g}" for x in DEFAULT_PROBES),
                   help="comma-separated probe points")

    p = sub.add_parser("serve", help="run the HTTP service with uvicorn")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def _parse_int_list(parser, text: str, flag: str) -> list[int]:
    try:
        values = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        parser.error(f"{flag} must be a comma-separated list of integers, got {text!r}")
    if not values:
        parser.error(f"{flag} must be nonempty")
    return values


def parse_args(argv) -> RunConfig:
    """Parse and fully validate CLI arguments into a RunConfig.

    Usage errors (unknown model, malformed parameters, non-divisor
    resolutions, ...) terminate with exit code 2 and a message naming the
    offending flag.
    """
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.command == "serve":
        parser.error("serve starts the service and does not produce a RunConfig")
    return _namespace_to_config(parser, ns)


def _namespace_to_config(parser: argparse.ArgumentParser, ns) -> RunConfig:
    try:
        models.resolve_model(ns.model)
    except ValueError as exc:
        parser.error(f"--model: {exc}")
    if not 0 <= ns.seed < 2**64:
        parser.error(f"--seed must be a 64-bit unsigned integer, got {ns.seed}")
    if ns.horizon <= 0:
        parser.error(f"--horizon must be positive, got {ns.horizon}")
    if ns.n_paths < 1:
        parser.error(f"--n-paths must be positive, got {ns.n_paths}")

    cfg = dict(
        command=ns.command,
        model=ns.model,
        initial=ns.initial,
        seed=ns.seed,
        n_paths=ns.n_paths,
        horizon=ns.horizon,
        output_path=ns.output_path,
        output_format=ns.output_format,
        server=ns.server,
    )

    if ns.command in ("converge", "gap"):
        resolutions = _parse_int_list(parser, ns.resolutions, "--resolutions")
        if any(b <= a for a, b in zip(resolutions, resolutions[1:])):
            parser.error(f"--resolutions must be strictly increasing, got {resolutions}")
        cfg["resolutions"] = resolutions
        if ns.command == "gap" and len(resolutions) < 3:
            parser.error("--resolutions needs at least 3 entries for a gap fit")
    if ns.command == "converge":
        schemes = ns.schemes or ["wick"]
        for s in schemes:
            try:
                SchemeKind.parse(s)
            except ValueError as exc:
                parser.error(f"--scheme: {exc}")
        cfg["schemes"] = schemes
        for n in cfg["resolutions"]:
            if ns.n_ref % n != 0:
                parser.error(f"--n-ref: resolution {n} does not divide n_ref {ns.n_ref}")
        cfg["n_ref"] = ns.n_ref
        if ns.output_format == "csv" and len(schemes) != 1:
            parser.error("--format csv supports exactly one --scheme")
    if ns.command in ("exactness", "lemma1"):
        if ns.n < 1:
            parser.error(f"--n must be positive, got {ns.n}")
        cfg["n"] = ns.n
    if ns.command == "exactness":
        cfg["tolerance"] = ns.tolerance
        if ns.output_format == "csv":
            parser.error("--format csv is not supported for exactness")
    if ns.command == "validate":
        try:
            cfg["probes"] = [float(tok) for tok in ns.probes.split(",") if tok.strip()]
        except ValueError:
            parser.error(f"--probes must be comma-separated numbers, got {ns.probes!r}")
        if not cfg["probes"]:
            parser.error("--probes must be nonempty")
        if ns.output_format == "csv":
            parser.error("--format csv is not supported for validate")

    return RunConfig(**cfg)


def _request_payload(config: RunConfig) -> dict:
    base = {"model": config.model}
    if config.command == "converge":
        base.update(
            schemes=config.schemes,
            resolutions=config.resolutions,
            n_ref=config.n_ref,
            n_paths=config.n_paths,
            seed=config.seed,
            horizon=config.horizon,
            initial=config.initial,
        )
    elif config.command == "exactness":
        base.update(
            n=config.n, n_paths=config.n_paths, seed=config.seed,
            horizon=config.horizon, initial=config.initial,
            tolerance=config.tolerance,
        )
    elif config.command == "lemma1":
        base.update(
            n=config.n, n_paths=config.n_paths, seed=config.seed,
            horizon=config.horizon, initial=config.initial,
        )
    elif config.command == "gap":
        base.update(
            resolutions=config.resolutions, n_paths=config.n_paths,
            seed=config.seed, horizon=config.horizon, initial=config.initial,
        )
    elif config.command == "validate":
        base.update(probes=config.probes)
    else:
        raise ValueError(f"unknown command {config.command!r}")
    return base


def _post(config: RunConfig, payload: dict) -> httpx.Response:
    path = f"/{config.command}"
    if config.server:
        with httpx.Client(base_url=config.server, timeout=None) as client:
            return client.post(path, json=payload)

    from .service.app import create_app

    async def go():
        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(
            transport=transport, base_url="http://wicksde.internal", timeout=None
        ) as client:
            return await client.post(path, json=payload)

    return asyncio.run(go())


def _failure_note(config: RunConfig, payload: dict) -> str:
    if config.command == "exactness":
        return (
            f"exactness residual {reporting.fnum(payload['max_relative_deviation'])} "
            f"exceeds tolerance {reporting.fnum(payload['tolerance'])}"
        )
    if config.command in ("lemma1", "gap"):
        worst = max(payload["violations"], key=lambda v: v["slack"])
        return (
            f"{payload['quantity']} exceeds its bound at {worst['location']}: "
            f"empirical {reporting.fnum(worst['empirical'])} > bound "
            f"{reporting.fnum(worst['bound'])}"
        )
    if config.command == "validate":
        return f"model {payload['model']} violates {len(payload['violations'])} invariant(s)"
    return "assertion failed"


def run(config: RunConfig) -> int:
    """Execute a RunConfig: post the request, emit the report, map exit codes."""
    try:
        response = _post(config, _request_payload(config))
    except httpx.HTTPError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return 4

    if response.status_code in (400, 404, 422):
        print(f"usage error: {response.text}", file=sys.stderr)
        return 2
    if response.status_code != 200:
        print(f"service error {response.status_code}: {response.text}", file=sys.stderr)
        return 4

    payload = response.json()
    if config.output_format == "json":
        rendered = reporting.render_json(payload)
    elif config.output_format == "csv":
        rendered = reporting.render_csv(config.command, payload)
    else:
        rendered = reporting.render_text(config.command, payload)

    if config.output_path:
        try:
            with open(config.output_path, "w") as fh:
                fh.write(rendered)
        except OSError as exc:
            print(f"cannot write {config.output_path}: {exc}", file=sys.stderr)
            return 4
    else:
        sys.stdout.write(rendered)

    if config.command != "converge" and not payload.get("passed", True):
        print(f"assertion failed: {_failure_note(config, payload)}", file=sys.stderr)
        return 3
    return 0


def main_serve(ns) -> int:
    import uvicorn

    uvicorn.run("wicksde.service.app:app", host=ns.host, port=ns.port)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv if argv is not None else sys.argv[1:])
    if ns.command == "serve":
        return main_serve(ns)
    config = _namespace_to_config(parser, ns)
    try:
        return run(config)
    except Exception as exc:  # pragma: no cover - defensive
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
