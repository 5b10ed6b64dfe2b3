"""The check / reduce / monodromy pipelines behind the CLI.

Each runner returns ``(exit_code, payload)``; payloads are plain JSON data.
Exit codes: 0 positive, 2 negative certificate, 3 input error, 4 numeric
failure.
"""

from __future__ import annotations

import math
from math import inf
from typing import Any

from sympy import primerange

from .connection import ConnectionRel, GaugeLog
from .errors import NegativeCertificate, NumericFailure, OrderJump
from .gauge import composite_is_integral, diagonalize_and_twist, lemma_A0_check, reduce_to_constant
from .monodromy import LoopSpec, monodromy_of_annulus, neighborhood_order_propagation
from .pcurvature import sweep_primes

EXIT_OK = 0
EXIT_NEGATIVE = 2
EXIT_INPUT = 3
EXIT_NUMERIC = 4

DEFAULTS = {
    "check": {"primes_max": 50},
    "reduce": {"q_order": 8, "primes_max": 7},
    "monodromy": {"k_max": 12, "tolerance": 1e-8, "step_fraction": 1 / 3, "q": 0.0},
}


def effective_params(command: str, params: dict) -> dict:
    out = dict(DEFAULTS[command])
    out.update({k: v for k, v in params.items() if v is not None})
    if "loop" in out:
        loop = dict(out["loop"])
        c = loop.get("center")
        if c is not None and not isinstance(c, (list, tuple)):
            c = complex(c)
            loop["center"] = [c.real, c.imag]
        out["loop"] = loop
    return out


def run_check(conn: ConnectionRel, primes_max: int = 50, **_) -> tuple[int, dict]:
    summary = sweep_primes(conn, primes_max)
    payload = summary.to_json()
    if conn.true_prec != inf:
        payload["truncation"] = str(conn.true_prec)
    nonzero = summary.nonzero_primes
    payload["verdict"] = "nonzero" if nonzero else "all good primes vanish"
    return (EXIT_NEGATIVE if nonzero else EXIT_OK), payload


def _matrix_repr(m) -> list[list[str]]:
    return [[repr(x) for x in row] for row in m]


def run_reduce(conn: ConnectionRel, q_order: int = 8, primes_max: int = 7, **_) -> tuple[int, dict]:
    """Katz check, diagonalize-and-twist, reduction to ``A0`` and the ``A0`` lemma."""
    M = q_order
    if conn.true_prec != inf:
        M = min(M, math.floor(conn.true_prec))
    payload: dict[str, Any] = {"M": M, "alpha_interval": ["0", "0"]}
    log = GaugeLog(conn.rank)
    try:
        twisted, info = diagonalize_and_twist(conn, log)
        payload["eigenvalues_mod_q"] = [str(v) for v in info.eigenvalues]
        payload["pullback"] = info.pullback
        payload["twist"] = list(info.twist)
        state = reduce_to_constant(twisted, M, log)
        payload["A0"] = _matrix_repr(state.A0)
        payload["gauge_log"] = state.log.labels()
        payload["gauge_log_digest"] = state.log.digest()
        integral = composite_is_integral(state.log)
        payload["composite_integral"] = integral
        verdict = lemma_A0_check(state.A0, [int(p) for p in primerange(2, primes_max + 1)], M)
        payload["A0_check"] = {"primes": list(verdict.primes), "skipped": list(verdict.skipped),
                               "label": verdict.label}
    except NegativeCertificate as exc:
        payload["verdict"] = "negative"
        payload["certificate"] = exc.kind
        payload["reason"] = str(exc)
        payload["witness"] = _jsonable(exc.witness)
        return EXIT_NEGATIVE, payload
    if not integral:
        payload["verdict"] = "negative"
        payload["certificate"] = "NonIntegralGauge"
        return EXIT_NEGATIVE, payload
    payload["verdict"] = "positive"
    payload["certificate"] = f"A0 = 0 mod q^{M}, integral gauge"
    return EXIT_OK, payload


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (int, str, bool)) or x is None:
        return x
    if isinstance(x, float):
        return x if math.isfinite(x) else str(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return str(x)


def _loop(params: dict) -> LoopSpec:
    given = params.get("loop") or {}
    kw = {}
    if "center" in given:
        c = given["center"]
        kw["center"] = complex(c[0], c[1]) if isinstance(c, (list, tuple)) else complex(c)
    if "radius" in given:
        kw["radius"] = float(given["radius"])
    if "samples" in given:
        kw["samples"] = int(given["samples"])
    return LoopSpec(**kw)


def run_monodromy(conn: ConnectionRel, **params) -> tuple[int, dict]:
    params = effective_params("monodromy", params)
    loop = _loop(params)
    k_max, tol, sf = int(params["k_max"]), float(params["tolerance"]), float(params["step_fraction"])
    payload: dict[str, Any] = {"loop": {"center": [loop.center.real, loop.center.imag], "radius": loop.radius,
                                        "samples": loop.samples},
                               "k_max": k_max, "tolerance": tol}
    try:
        if params.get("q_samples"):
            samples = [float(s) for s in params["q_samples"]]
            results = []
            for qs in samples:
                r = monodromy_of_annulus(conn, loop, qs, step_fraction=sf, k_max=k_max, tol=tol)
                results.append({"q": qs, **r.to_json(10)})
            payload["samples"] = results
            if params.get("propagate"):
                try:
                    v = neighborhood_order_propagation(conn, samples, loop, k_max, tol)
                    payload["order"] = v.order
                    payload["verdict"] = f"order {v.order} at every sample"
                except OrderJump as exc:
                    payload["verdict"] = "order jump"
                    payload["witness"] = _jsonable(exc.witness)
                    return EXIT_NEGATIVE, payload
            else:
                orders = {r["order"] for r in results}
                payload["order"] = orders.pop() if len(orders) == 1 else None
        else:
            r = monodromy_of_annulus(conn, loop, float(params["q"]), step_fraction=sf, k_max=k_max, tol=tol)
            payload.update(r.to_json(10))
            payload["q"] = float(params["q"])
            payload["angles"] = r.diagnostics["angles"]
    except NumericFailure as exc:
        payload["verdict"] = "numeric failure"
        payload["error"] = f"{type(exc).__name__}: {exc}"
        return EXIT_NUMERIC, payload
    if payload.get("order") is None:
        payload.setdefault("verdict", f"no finite order <= {k_max} within {tol}")
        return EXIT_NEGATIVE, payload
    payload.setdefault("verdict", f"order {payload['order']}")
    return EXIT_OK, payload


RUNNERS = {"check": run_check, "reduce": run_reduce, "monodromy": run_monodromy}


def compare_payloads(a: Any, b: Any, tol: float = 1e-9, path: str = "") -> list[str]:
    """Differences between two payloads; floats are compared to ``tol``."""
    if isinstance(a, dict) and isinstance(b, dict):
        out = []
        for k in sorted(set(a) | set(b)):
            if k not in a or k not in b:
                out.append(f"{path}.{k}: present on one side only")
            else:
                out.extend(compare_payloads(a[k], b[k], tol, f"{path}.{k}"))
        return out
    if isinstance(a, list) and isinstance(b, list):
        if len(a) != len(b):
            return [f"{path}: length {len(a)} != {len(b)}"]
        out = []
        for i, (x, y) in enumerate(zip(a, b)):
            out.extend(compare_payloads(x, y, tol, f"{path}[{i}]"))
        return out
    if isinstance(a, float) or isinstance(b, float):
        if isinstance(a, (int, float)) and isinstance(b, (int, float)) and not isinstance(a, bool):
            return [] if abs(a - b) <= tol else [f"{path}: {a} != {b}"]
    return [] if a == b else [f"{path}: {a!r} != {b!r}"]

