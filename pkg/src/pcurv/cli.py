"""Command line interface: ``pcurv check | reduce | monodromy | corpus-verify``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .cache import ResultCache, default_cache_dir, record_key
from .commands import EXIT_INPUT, EXIT_NEGATIVE, EXIT_OK, RUNNERS, compare_payloads, effective_params
from .corpus import corpus_dir
from .errors import CacheCorrupt, ParseError
from .io import document_kind, operator_from_doc, parse_scenario, serialize_operator

FLAG_PARAMS = {
    "check": ("primes_max",),
    "reduce": ("q_order", "primes_max"),
    "monodromy": ("k_max", "tolerance", "step_fraction", "q"),
}


def _fraction_arg(s: str) -> float:
    if "/" in s:
        a, b = s.split("/", 1)
        return int(a) / int(b)
    return float(s)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--cache-dir", type=Path, default=None,
                        help="result cache directory (default: $PCURV_CACHE or ~/.cache/pcurv)")
    common.add_argument("--no-cache", action="store_true", help="neither read nor write the cache")
    common.add_argument("--emit", choices=("json", "text"), default="text")

    p = argparse.ArgumentParser(prog="pcurv", description=__doc__)
    p.add_argument("--version", action="version", version=f"pcurv {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", parents=[common], help="sweep p-curvature over primes")
    c.add_argument("input", type=Path, help="operator or scenario file")
    c.add_argument("--primes-max", type=int, default=None)

    r = sub.add_parser("reduce", parents=[common], help="reduce to a constant matrix and certify")
    r.add_argument("input", type=Path)
    r.add_argument("--q-order", type=int, default=None)
    r.add_argument("--primes-max", type=int, default=None)

    m = sub.add_parser("monodromy", parents=[common], help="numerical monodromy and finite order")
    m.add_argument("input", type=Path)
    m.add_argument("--tolerance", type=float, default=None)
    m.add_argument("--k-max", type=int, default=None)
    m.add_argument("--step-fraction", type=_fraction_arg, default=None)
    m.add_argument("--q", type=float, default=None, help="numeric value of q")

    v = sub.add_parser("corpus-verify", parents=[common], help="run every corpus scenario against its golden file")
    v.add_argument("--corpus", type=Path, default=None)
    v.add_argument("--update-golden", action="store_true")
    v.add_argument("--tolerance", type=float, default=1e-9)
    return p


def load_input(path: Path, command: str) -> tuple[bytes, dict, dict]:
    """Returns canonical operator bytes, scenario params and operator metadata."""
    data = path.read_bytes()
    kind, doc = document_kind(data)
    params: dict = {}
    if kind == "scenario":
        sc = parse_scenario(doc)
        if sc["command"] != command:
            raise ParseError(f"scenario is for {sc['command']!r}, not {command!r}", field="command")
        params = sc["params"]
        op_path = (path.parent / sc["operator"])
        _, doc = document_kind(op_path.read_bytes())
    conn = operator_from_doc(doc)
    return serialize_operator(conn), params, doc.get("metadata", {})


def execute(command: str, operator: bytes, params: dict, cache: ResultCache | None) -> tuple[int, dict, str]:
    from .io import parse_operator

    eff = effective_params(command, params)
    key = record_key(operator, command, eff)
    status = "off"
    if cache is not None:
        try:
            found = cache.lookup(key)
            if found.hit:
                return found.record.exit_code, found.record.payload, "hit"
            status = "miss (version changed)" if found.version_mismatch else "miss"
        except CacheCorrupt as exc:
            print(f"warning: {exc}; recomputing", file=sys.stderr)
            status = "corrupt, recomputed"
    conn = parse_operator(operator)
    code, payload = RUNNERS[command](conn, **eff)
    if cache is not None:
        cache.store(key, command, code, payload)
    return code, payload, status


def render_text(command: str, code: int, payload: dict, meta: dict) -> str:
    lines = []
    if meta.get("name"):
        lines.append(f"operator: {meta['name']}")
    lines.append(f"verdict: {payload.get('verdict', '?')} (exit {code})")
    if command == "check":
        c = payload["counts"]
        lines.append(f"primes {payload['prime_range'][0]}..{payload['prime_range'][1]}: "
                     f"{c['vanishes']} vanish, {c['nonzero']} nonzero, {c['bad_prime']} bad")
        for r in payload["reports"]:
            if r["status"] != "vanishes":
                extra = r.get("witness", {}).get("entry") or r.get("reason", "")
                lines.append(f"  p = {r['p']}: {r['status']} {extra}")
        if "truncation" in payload:
            lines.append(f"  (at truncation order {payload['truncation']})")
    elif command == "reduce":
        for k in ("M", "pullback", "twist", "A0", "gauge_log", "gauge_log_digest", "certificate", "reason"):
            if k in payload:
                lines.append(f"  {k}: {payload[k]}")
    else:
        for k in ("order", "residual", "angles", "M", "error"):
            if k in payload:
                lines.append(f"  {k}: {payload[k]}")
        for s in payload.get("samples", []):
            lines.append(f"  q = {s['q']}: order {s['order']}, residual {s['residual']}")
    return "\n".join(lines)


def _cache(args) -> ResultCache | None:
    if args.no_cache:
        return None
    return ResultCache(args.cache_dir or default_cache_dir())


def corpus_verify(args) -> int:
    root = args.corpus or corpus_dir()
    golden_dir = root / "golden"
    golden_dir.mkdir(exist_ok=True) if args.update_golden else None
    failures = 0
    for sc_path in sorted((root / "scenarios").glob("*.json")):
        sc = parse_scenario(sc_path.read_bytes())
        operator, params, _ = load_input(sc_path, sc["command"])
        code, payload, _ = execute(sc["command"], operator, params, _cache(args))
        gpath = golden_dir / f"{sc['name']}.json"
        problems = []
        if sc["expect_exit"] is not None and code != sc["expect_exit"]:
            problems.append(f"exit {code}, expected {sc['expect_exit']}")
        if args.update_golden:
            gpath.write_text(json.dumps({"exit_code": code, "payload": payload}, indent=2, sort_keys=True) + "\n")
        elif not gpath.exists():
            problems.append("no golden file")
        else:
            gold = json.loads(gpath.read_text())
            if gold["exit_code"] != code:
                problems.append(f"exit {code}, golden {gold['exit_code']}")
            problems.extend(compare_payloads(payload, gold["payload"], args.tolerance))
        status = "ok" if not problems else "FAIL"
        failures += bool(problems)
        if args.emit == "text":
            print(f"{status:4} {sc['name']} (exit {code})" + ("" if not problems else ": " + "; ".join(problems[:3])))
    if args.emit == "json":
        print(json.dumps({"failures": failures}))
    return EXIT_OK if failures == 0 else EXIT_NEGATIVE


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "corpus-verify":
            return corpus_verify(args)
        operator, params, meta = load_input(args.input, args.command)
        for name in FLAG_PARAMS[args.command]:
            v = getattr(args, name, None)
            if v is not None:
                params[name] = v
        code, payload, status = execute(args.command, operator, params, _cache(args))
    except (ParseError, OSError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.emit == "json":
        print(json.dumps({"command": args.command, "exit_code": code, "cache": status, "payload": payload},
                         indent=2, sort_keys=True))
    else:
        print(render_text(args.command, code, payload, meta))
        print(f"cache: {status}")
    return code


if __name__ == "__main__":
    sys.exit(main())
