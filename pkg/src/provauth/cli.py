"""Command-line front end.

    provauth check <file>
    provauth query <file> -q "<formula>" [--exclude a,b] [--within a,b] [--json] [--audit log]
    provauth provenance <file> -q "<belief>"
    provauth conflicts <file>

Exit codes: 0 holds / clean, 1 denied / errors found, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from datetime import datetime, timezone
from typing import List, Optional

from provauth.engine import EngineConfig, RoundsExceeded, detect_conflicts, saturate
from provauth.model import Believes, is_ground
from provauth.parser import (
    FormulaSyntaxError, PolicyError, errors, format_agents, parse_formula,
    parse_policy, pretty, validate,
)
from provauth.provenance import (
    UnsupportedQueryShape, holds, holds_constrained, minimal_provenances, proof_to_dict,
)

EXIT_OK, EXIT_NO, EXIT_ERROR = 0, 1, 2


def _csv(value: str) -> frozenset:
    return frozenset(a.strip() for a in value.split(",") if a.strip())


def _read(path: str) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def _report(diags, path, stream) -> None:
    for d in diags:
        print(d.format(path), file=stream)


def _load(args, stderr):
    """-> (raw bytes, policy base) or an exit code."""
    try:
        raw = _read(args.file)
    except OSError as e:
        print(f"{args.file}: cannot read: {e.strerror or e}", file=stderr)
        return EXIT_ERROR
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        print(f"{args.file}: not UTF-8: {e}", file=stderr)
        return EXIT_ERROR
    cfg = EngineConfig(depth_bound=args.depth)
    try:
        pb = parse_policy(text, cfg.depth_bound)
    except PolicyError as e:
        _report(e.diagnostics, args.file, stderr)
        return EXIT_NO
    return raw, pb


def cmd_check(args, stdout, stderr) -> int:
    loaded = _load(args, stderr)
    if isinstance(loaded, int):
        return loaded
    _, pb = loaded
    diags = validate(pb, EngineConfig(depth_bound=args.depth))
    _report(diags, args.file, stderr)
    if errors(diags) or (args.strict and diags):
        return EXIT_NO
    print(f"{args.file}: ok ({len(pb.statements)} statements)", file=stdout)
    return EXIT_OK


def _closure(args, stderr):
    loaded = _load(args, stderr)
    if isinstance(loaded, int):
        return EXIT_ERROR
    raw, pb = loaded
    try:
        return raw, saturate(pb, EngineConfig(depth_bound=args.depth))
    except PolicyError as e:
        _report(e.diagnostics, args.file, stderr)
    except RoundsExceeded as e:
        print(f"{args.file}: {e}", file=stderr)
    return EXIT_ERROR


def audit_append(log_path: str, record: dict) -> None:
    """Append one JSON line; the file is created if missing and never rewritten."""
    line = json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n"
    with open(log_path, "a", encoding="utf-8") as fh:
        fh.write(line)


def audit_record(raw: bytes, query: str, decision: str, result=None) -> dict:
    return {
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds").replace("+00:00", "Z"),
        "policy_sha256": hashlib.sha256(raw).hexdigest(),
        "query": query,
        "decision": decision,
        "provenances": [sorted(p) for p in result.provenances] if result else [],
        "proofs": [proof_to_dict(a.proof) for a in result.answers] if result else [],
    }


def cmd_query(args, stdout, stderr) -> int:
    loaded = _closure(args, stderr)
    if isinstance(loaded, int):
        if args.audit:
            raw = b""
            try:
                raw = _read(args.file)
            except OSError:
                pass
            _audit(args, audit_record(raw, args.query, "error"), stderr)
        return loaded
    raw, closure = loaded

    try:
        q = parse_formula(args.query)
        if args.exclude is not None or args.within is not None:
            result = holds_constrained(closure, q, args.exclude or frozenset(), args.within)
        else:
            result = holds(closure, q)
    except (FormulaSyntaxError, UnsupportedQueryShape) as e:
        print(f"query: {e}", file=stderr)
        code = EXIT_ERROR
        if args.audit:
            code = max(code, _audit(args, audit_record(raw, args.query, "error"), stderr))
        return code

    if args.json:
        print(json.dumps(result.to_dict(), indent=2), file=stdout)
    else:
        print("HOLDS" if result.holds else "DENIED", file=stdout)
        for a in result.answers:
            print(f"{pretty(a.belief)}  {format_agents(a.provenance)}", file=stdout)

    code = EXIT_OK if result.holds else EXIT_NO
    if args.audit:
        decision = "holds" if result.holds else "denied"
        code = max(code, _audit(args, audit_record(raw, args.query, decision, result), stderr))
    return code


def _audit(args, record, stderr) -> int:
    try:
        audit_append(args.audit, record)
    except OSError as e:
        print(f"{args.audit}: cannot append audit record: {e.strerror or e}", file=stderr)
        return EXIT_ERROR
    return EXIT_OK


def cmd_provenance(args, stdout, stderr) -> int:
    loaded = _closure(args, stderr)
    if isinstance(loaded, int):
        return loaded
    _, closure = loaded
    try:
        belief = parse_formula(args.query)
    except FormulaSyntaxError as e:
        print(f"query: {e}", file=stderr)
        return EXIT_ERROR
    if not isinstance(belief, Believes) or not is_ground(belief):
        print("query: provenance needs a ground belief 'A says ...'", file=stderr)
        return EXIT_ERROR
    sets = minimal_provenances(closure, belief)
    for p in sets:
        print(format_agents(p), file=stdout)
    return EXIT_OK if sets else EXIT_NO


def cmd_conflicts(args, stdout, stderr) -> int:
    loaded = _closure(args, stderr)
    if isinstance(loaded, int):
        return loaded
    _, closure = loaded
    found = sorted(detect_conflicts(closure), key=lambda c: (c.agent, pretty(c.formula), c.kind))
    for c in found:
        print(f"{c.kind}: {c.agent} {pretty(c.formula)}", file=stdout)
    return EXIT_NO if found else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("file", help="policy file")
    common.add_argument("--depth", type=int, default=3, help="modal depth bound (default 3)")

    p = argparse.ArgumentParser(prog="provauth", description="Provenance-aware authorization policies.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", parents=[common], help="parse and validate a policy file")
    c.add_argument("--strict", action="store_true", help="treat warnings as errors")
    c.set_defaults(func=cmd_check)

    q = sub.add_parser("query", parents=[common], help="evaluate an authorization query")
    q.add_argument("-q", "--query", required=True)
    q.add_argument("--exclude", type=_csv, help="comma-separated agents no provenance may contain")
    q.add_argument("--within", type=_csv, help="comma-separated agents every provenance must lie in")
    q.add_argument("--json", action="store_true", help="print the result with proofs as JSON")
    q.add_argument("--audit", metavar="PATH", help="append an audit record to PATH")
    q.set_defaults(func=cmd_query)

    v = sub.add_parser("provenance", parents=[common], help="list minimal provenance sets of a belief")
    v.add_argument("-q", "--query", required=True)
    v.set_defaults(func=cmd_provenance)

    k = sub.add_parser("conflicts", parents=[common], help="report conflicting beliefs")
    k.set_defaults(func=cmd_conflicts)
    return p


def main(argv: Optional[List[str]] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_ERROR if e.code else EXIT_OK
    if args.depth < 1:
        print("--depth must be at least 1", file=stderr)
        return EXIT_ERROR
    return args.func(args, stdout, stderr)


if __name__ == "__main__":
    sys.exit(main())
