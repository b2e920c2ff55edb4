"""Thin command-line client for the compute service.

Reads a JSON config with a "cmd" field (validate | holonomy | burgers |
symmetry | minimize | homogenize), POSTs it to the service (in-process
ASGI by default, ``--server URL`` for a running instance), and writes
the artifacts locally: ``report.json`` always, ``convergence.csv`` for
homogenize runs, and a ``run_meta.json`` sidecar carrying the
non-deterministic metadata so the data files stay byte-identical across
identical runs.

Exit codes: 0 success, 2 config/validation failure, 3 mathematical
obstruction (incompatible disclination), 4 numerical failure.
"""
from __future__ import annotations

import argparse
import asyncio
import datetime
import json
import sys
from pathlib import Path

import httpx

from . import __version__

COMMANDS = ("validate", "holonomy", "burgers", "symmetry", "minimize", "homogenize")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_OBSTRUCTION = 3
EXIT_NUMERICAL = 4


def _post_inprocess(path: str, payload: dict) -> httpx.Response:
    from .service.app import app

    async def go():
        transport = httpx.ASGITransport(app=app, raise_app_exceptions=False)
        async with httpx.AsyncClient(transport=transport,
                                     base_url="http://defectmech") as client:
            return await client.post(path, json=payload, timeout=None)

    return asyncio.run(go())


def _post_remote(server: str, path: str, payload: dict) -> httpx.Response:
    with httpx.Client(base_url=server, timeout=None) as client:
        return client.post(path, json=payload)


def _parse_tol_overrides(items) -> dict:
    out = {}
    for item in items:
        if "=" not in item:
            raise ValueError(f"--tol expects NAME=VALUE, got {item!r}")
        name, _, value = item.partition("=")
        out[name.strip()] = float(value)
    return out


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    if x is None:
        return ""
    return str(x)


def write_convergence_csv(rows, path: Path) -> None:
    lines = ["n,quantity,error,observed_order"]
    for row in rows:
        lines.append(",".join(_fmt(row[k]) for k in ("n", "quantity", "error",
                                                     "observed_order")))
    path.write_text("\n".join(lines) + "\n")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="defectmech",
        description="Defect measurement, symmetry obstruction and homogenization "
        "experiments for material-uniform bodies (thin client).",
    )
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", default=".", help="output directory for artifacts")
    ap.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE",
                    help="tolerance override (repeatable)")
    ap.add_argument("--seed", type=int, default=None,
                    help="seed for symmetry-scan sample sets")
    ap.add_argument("--server", default=None,
                    help="base URL of a running service (default: in-process)")
    args = ap.parse_args(argv)

    cfg_path = Path(args.config)
    try:
        text = cfg_path.read_text()
    except OSError as ex:
        print(f"error: cannot read config: {ex}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        config = json.loads(text)
    except json.JSONDecodeError as ex:
        print(f"error: malformed JSON at line {ex.lineno}, column {ex.colno}: "
              f"{ex.msg}", file=sys.stderr)
        return EXIT_CONFIG
    if not isinstance(config, dict) or "cmd" not in config:
        print("error: config must be an object with a 'cmd' field", file=sys.stderr)
        return EXIT_CONFIG
    cmd = config.pop("cmd")
    if cmd not in COMMANDS:
        print(f"error: unknown cmd {cmd!r}; expected one of {', '.join(COMMANDS)}",
              file=sys.stderr)
        return EXIT_CONFIG

    try:
        overrides = _parse_tol_overrides(args.tol)
    except ValueError as ex:
        print(f"error: {ex}", file=sys.stderr)
        return EXIT_CONFIG
    if overrides:
        if cmd == "symmetry":
            print("error: the symmetry command has no tolerance record; use 'tol'",
                  file=sys.stderr)
            return EXIT_CONFIG
        merged = dict(config.get("tolerances", {}))
        merged.update(overrides)
        config["tolerances"] = merged
    if args.seed is not None:
        if cmd == "symmetry":
            config["seed"] = args.seed
        else:
            print("note: --seed only affects the symmetry command; ignored",
                  file=sys.stderr)

    if args.server:
        response = _post_remote(args.server, f"/{cmd}", config)
    else:
        response = _post_inprocess(f"/{cmd}", config)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = {
        "cmd": cmd,
        "config": str(cfg_path),
        "version": __version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "server": args.server or "in-process",
        "status_code": response.status_code,
    }
    (out_dir / "run_meta.json").write_text(json.dumps(meta, indent=2) + "\n")

    body = response.json()
    if response.status_code != 200:
        err = body.get("error", {"kind": "internal", "message": str(body)})
        (out_dir / "error.json").write_text(
            json.dumps({"cmd": cmd, "error": err}, indent=2, sort_keys=True) + "\n"
        )
        print(f"error [{err.get('kind')}]: {err.get('message')}", file=sys.stderr)
        if err.get("kind") == "obstruction":
            return EXIT_OBSTRUCTION
        if err.get("kind") == "numerical":
            return EXIT_NUMERICAL
        return EXIT_CONFIG

    report = {"cmd": cmd, "result": body}
    (out_dir / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n"
    )
    if cmd == "homogenize":
        write_convergence_csv(body["rows"], out_dir / "convergence.csv")
    print(f"{cmd}: ok -> {out_dir / 'report.json'}")
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
