"""Command line: a thin client over the service.

`regulata run` posts each config to the in-process app (or to a remote
server with --server), then writes whatever artifacts come back under
<out>/<config-stem>/. `regulata verify` prints the pre-flight check table.
Exit codes: 0 success, 2 configuration error, 3 simulation or transport
error, 4 verification failed.
"""

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import httpx

from .errors import ConfigError

_OUT_ENV = "REGULATA_OUT"


def _client(server):
    if server:
        return httpx.Client(base_url=server, timeout=httpx.Timeout(600.0))
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app)


def _read_config(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc


def _out_root(args, data):
    if args.out:
        return Path(args.out)
    env = os.environ.get(_OUT_ENV)
    if env:
        return Path(env)
    if isinstance(data, dict) and data.get("out_dir"):
        return Path(data["out_dir"])
    return Path("out")


def _write_artifacts(dest, payload):
    dest.mkdir(parents=True, exist_ok=True)
    written = []
    if payload.get("csv"):
        (dest / "trajectory.csv").write_text(payload["csv"])
        written.append("trajectory.csv")
    report = payload.get("report")
    if report is not None and report.get("config", {}).get("emit_report", True):
        (dest / "report.json").write_text(json.dumps(report, indent=2) + "\n")
        written.append("report.json")
    svgs = payload.get("svgs") or {}
    if svgs:
        plot_dir = dest / "plots"
        plot_dir.mkdir(exist_ok=True)
        for name, svg in sorted(svgs.items()):
            (plot_dir / f"{name}.svg").write_text(svg)
        written.append(f"plots/ ({len(svgs)} svg)")
    return written


def _run_one(path, args):
    try:
        data = _read_config(path)
    except ConfigError as exc:
        print(f"{path}: error: {exc}", file=sys.stderr)
        return 2
    try:
        with _client(args.server) as client:
            resp = client.post("/run", json={"config": data})
    except httpx.HTTPError as exc:
        print(f"{path}: transport error: {exc}", file=sys.stderr)
        return 3
    if resp.status_code == 400:
        print(f"{path}: config error: {_detail(resp)}", file=sys.stderr)
        return 2
    if resp.status_code != 200:
        print(f"{path}: simulation error: {_detail(resp)}", file=sys.stderr)
        return 3
    payload = resp.json()
    dest = _out_root(args, data) / Path(path).stem
    written = _write_artifacts(dest, payload)
    report = payload["report"]
    print(
        f"{path}: {report['scenario']} finished, "
        f"{report['samples']} samples in {report['runtime_seconds']:.2f}s "
        f"-> {dest} [{', '.join(written) or 'no artifacts'}]"
    )
    return 0


def _detail(resp):
    try:
        return resp.json().get("detail", resp.text)
    except ValueError:
        return resp.text


def cmd_run(args):
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return 2
    if args.jobs == 1 or len(args.configs) == 1:
        codes = [_run_one(path, args) for path in args.configs]
    else:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            codes = list(pool.map(lambda p: _run_one(p, args), args.configs))
    return max(codes)


def cmd_verify(args):
    try:
        data = _read_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        with _client(args.server) as client:
            resp = client.post("/verify", json={"config": data, "seed": args.seed})
    except httpx.HTTPError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return 3
    if resp.status_code == 400:
        print(f"config error: {_detail(resp)}", file=sys.stderr)
        return 2
    if resp.status_code != 200:
        print(f"error: {_detail(resp)}", file=sys.stderr)
        return 3
    payload = resp.json()
    print(f"{'check':32}  {'status':6}  detail")
    for row in payload["checks"]:
        status = "pass" if row["passed"] else "FAIL"
        print(f"{row['name']:32}  {status:6}  {row['detail']}")
    if not payload["passed"]:
        print("verification failed", file=sys.stderr)
        return 4
    return 0


def cmd_serve(args):
    try:
        import uvicorn
    except ImportError:
        print("error: serving needs uvicorn (pip install regulata[serve])",
              file=sys.stderr)
        return 2
    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="regulata",
        description="Simulate and check learning internal-model regulators.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run scenario configs and write artifacts")
    p_run.add_argument("configs", nargs="+", help="scenario config files (JSON)")
    p_run.add_argument("--out", help=f"artifact root (else ${_OUT_ENV}, else "
                                     "the config's out_dir, else ./out)")
    p_run.add_argument("--jobs", type=int, default=1,
                       help="run up to this many configs concurrently")
    p_run.add_argument("--seed", type=int, default=0,
                       help="accepted for symmetry; runs are deterministic")
    p_run.add_argument("--server", help="use a running service instead of "
                                        "the in-process app")
    p_run.set_defaults(fn=cmd_run)

    p_verify = sub.add_parser("verify",
                              help="run the pre-flight checks for one config")
    p_verify.add_argument("config", help="scenario config file (JSON)")
    p_verify.add_argument("--seed", type=int, default=0,
                          help="seed for the randomized algebra probes")
    p_verify.add_argument("--server", help="use a running service instead of "
                                           "the in-process app")
    p_verify.set_defaults(fn=cmd_verify)

    p_serve = sub.add_parser("serve", help="serve the HTTP API")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.set_defaults(fn=cmd_serve)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.fn(args)


def console():
    sys.exit(main())


if __name__ == "__main__":
    console()
