"""Thin command-line client over the verification service.

By default every subcommand talks to an in-process instance of the HTTP
service, so no server needs to be running; --server points the same requests
at a remote one instead.  Reports land on stdout pretty-printed, or at --out
in canonical single-line form.  Exit status: 0 when every requested suite
passes, 1 on suite failure, 2 on parse or precondition errors, 3 when a jet
budget is exhausted.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_PARSE = 2
EXIT_BUDGET = 3

COMMANDS = ("solve", "volume", "obstruction", "gjms", "flow", "w-flow", "verify-all")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ambientkit",
        description="verification suites for weighted ambient expansions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_flags = argparse.ArgumentParser(add_help=False)
    run_flags.add_argument("--scenario", required=True,
                           help="scenario JSON file, or builtin:<name>")
    run_flags.add_argument("--order", type=int, help="solve order K")
    run_flags.add_argument("--spatial-degree", type=int,
                           help="spatial jet degree (default 2K+2)")
    run_flags.add_argument("--backend", choices=("rational", "float"))
    run_flags.add_argument("--grid", help="quadrature sizes, e.g. 8x8x8")
    run_flags.add_argument("--out", help="write the report here instead of stdout")
    run_flags.add_argument("--format", choices=("json", "csv"), default="json")
    run_flags.add_argument("--server",
                           help="base URL of a running service "
                                "(default: in-process)")
    for name in COMMANDS:
        sub.add_parser(name, parents=[run_flags],
                       help="run the %s suite%s" % (name, "s" if name == "verify-all" else ""))

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def scenario_argument(raw):
    """A builtin reference passes through; anything else is a JSON file."""
    if raw.startswith("builtin:"):
        return raw
    path = Path(raw)
    try:
        text = path.read_text()
    except OSError as e:
        raise ValueError("cannot read scenario file %s: %s" % (raw, e))
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ValueError("scenario file %s is not valid JSON: %s" % (raw, e))


def _client(server):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=600.0)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service import create_app

    return TestClient(create_app())


def _emit(args, doc):
    from .report import dumps_canonical, report_csv

    if args.format == "csv":
        text = report_csv(doc["report"])
    elif args.out:
        text = dumps_canonical(doc["report"])
    else:
        text = dumps_canonical(doc["report"], pretty=True)
    if args.out:
        Path(args.out).write_text(text)
        print("report written to %s" % args.out, file=sys.stderr)
    else:
        sys.stdout.write(text)
    for suite in doc["report"]["suites"]:
        state = "SKIP" if suite["skipped"] else ("pass" if suite["passed"] else "FAIL")
        print("suite %-12s %s" % (suite["name"], state), file=sys.stderr)
    print("elapsed %.2fs" % doc["seconds"], file=sys.stderr)


def run_command(args):
    try:
        scenario = scenario_argument(args.scenario)
    except ValueError as e:
        print("error: %s" % e, file=sys.stderr)
        return EXIT_PARSE
    payload = {"scenario": scenario}
    for key in ("order", "spatial_degree", "backend", "grid"):
        val = getattr(args, key)
        if val is not None:
            payload[key] = val
    with _client(args.server) as client:
        resp = client.post("/" + args.command, json=payload)
    if resp.status_code == 200:
        doc = resp.json()
        _emit(args, doc)
        return EXIT_PASS if doc["passed"] else EXIT_FAIL
    if resp.status_code in (400, 422):
        try:
            body = resp.json()
        except ValueError:
            body = {}
        code = body.get("error", "parse")
        detail = body.get("detail", resp.text)
        print("error (%s): %s" % (code, detail), file=sys.stderr)
        return EXIT_BUDGET if code == "budget" else EXIT_PARSE
    print("service error %d: %s" % (resp.status_code, resp.text), file=sys.stderr)
    return EXIT_FAIL


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        import uvicorn

        from .service import create_app

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return EXIT_PASS
    return run_command(args)


if __name__ == "__main__":
    sys.exit(main())
