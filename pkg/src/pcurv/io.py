"""Strict JSON formats for operators and scenarios.

Operator document::

    {
      "kind": "operator",
      "format_version": 1,
      "ring": "rational_laurent_t" | "biseries_qt",
      "derivation": "t_ddt" | "ddt",
      "scale": [term, ...] | null,
      "basis": "cyclic" | "general",
      "rank": n,
      "ram_t": 1, "ram_q": 1,
      "q_precision": null | {"num": .., "den": ..},
      "matrix": [[[term, ...], ...], ...],
      "metadata": {"name": .., "description": .., "oracle": ..}
    }

A term is ``{"t_pow": i, "q_pow": j, "num": a, "den": b}`` meaning
``(a/b) t^(i/ram_t) q^(j/ram_q)``; ``q_pow`` may be omitted for rational
Laurent rings.  Numbers are integers only.  Unknown fields are rejected.
"""

from __future__ import annotations

import json
from fractions import Fraction
from math import inf, lcm
from typing import Any

from .connection import CYCLIC, DDT, GENERAL, T_DDT, ConnectionRel, Derivation
from .errors import ParseError, SchemaVersionError
from .series import BiSeries

FORMAT_VERSION = 1
RATIONAL = "rational_laurent_t"
BISERIES = "biseries_qt"

_OPERATOR_FIELDS = {"kind", "format_version", "ring", "derivation", "scale", "basis", "rank", "ram_t", "ram_q",
                    "q_precision", "matrix", "metadata"}
_OPERATOR_REQUIRED = {"kind", "format_version", "ring", "derivation", "rank", "matrix"}
_TERM_FIELDS = {"t_pow", "q_pow", "num", "den"}
_META_FIELDS = {"name", "description", "oracle"}
_SCENARIO_FIELDS = {"kind", "format_version", "name", "operator", "command", "params", "expect_exit", "description"}
_SCENARIO_PARAMS = {
    "check": {"primes_max"},
    "reduce": {"q_order", "primes_max"},
    "monodromy": {"loop", "q", "q_samples", "k_max", "tolerance", "step_fraction", "propagate"},
}
_LOOP_FIELDS = {"center", "radius", "samples"}


def _load(data: bytes | str) -> Any:
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not UTF-8: {exc}") from None
    try:
        return json.loads(data, parse_float=_reject_float, parse_constant=_reject_float)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from None


def _reject_float(s: str):
    raise ParseError(f"floating point literal {s} not allowed; use num/den integer pairs")


def _int(x: Any, field: str) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise ParseError("expected an integer", field=field)
    return x


def _check_fields(obj: Any, allowed: set, required: set, where: str) -> None:
    if not isinstance(obj, dict):
        raise ParseError("expected an object", field=where)
    extra = set(obj) - allowed
    if extra:
        raise ParseError(f"unknown field {sorted(extra)[0]!r}", field=f"{where}.{sorted(extra)[0]}" if where else sorted(extra)[0])
    missing = required - set(obj)
    if missing:
        raise ParseError(f"missing field {sorted(missing)[0]!r}", field=sorted(missing)[0])


def _parse_terms(terms: Any, ram_t: int, ram_q: int, prec, where: str, allow_q: bool) -> BiSeries:
    if not isinstance(terms, list):
        raise ParseError("expected a list of terms", field=where)
    coeffs: dict[tuple[Fraction, Fraction], Fraction] = {}
    for n, term in enumerate(terms):
        w = f"{where}[{n}]"
        _check_fields(term, _TERM_FIELDS, {"t_pow", "num", "den"}, w)
        tp = _int(term["t_pow"], f"{w}.t_pow")
        qp = _int(term.get("q_pow", 0), f"{w}.q_pow")
        if qp and not allow_q:
            raise ParseError("q_pow in a rational Laurent ring", field=f"{w}.q_pow")
        num = _int(term["num"], f"{w}.num")
        den = _int(term["den"], f"{w}.den")
        if den <= 0:
            raise ParseError("den must be positive", field=f"{w}.den")
        key = (Fraction(tp, ram_t), Fraction(qp, ram_q))
        if key in coeffs:
            raise ParseError("duplicate term", field=w)
        coeffs[key] = Fraction(num, den)
    return BiSeries.from_dict({k: c for k, c in coeffs.items() if c}, prec)


def parse_operator(data: bytes | str | dict) -> ConnectionRel:
    doc = data if isinstance(data, dict) else _load(data)
    return operator_from_doc(doc)


def operator_from_doc(doc: Any) -> ConnectionRel:
    _check_fields(doc, _OPERATOR_FIELDS, _OPERATOR_REQUIRED, "")
    if doc["kind"] != "operator":
        raise ParseError("kind must be 'operator'", field="kind")
    version = _int(doc["format_version"], "format_version")
    if version != FORMAT_VERSION:
        raise SchemaVersionError(f"format_version {version} is not supported (expected {FORMAT_VERSION})",
                                 field="format_version")
    ring = doc["ring"]
    if ring not in (RATIONAL, BISERIES):
        raise ParseError(f"unknown ring {ring!r}", field="ring")
    der = doc["derivation"]
    if der not in (T_DDT, DDT):
        raise ParseError(f"unknown derivation {der!r}", field="derivation")
    basis = doc.get("basis", GENERAL)
    if basis not in (CYCLIC, GENERAL):
        raise ParseError(f"unknown basis {basis!r}", field="basis")
    rank = _int(doc["rank"], "rank")
    if rank < 1:
        raise ParseError("rank must be positive", field="rank")
    ram_t = _int(doc.get("ram_t", 1), "ram_t")
    ram_q = _int(doc.get("ram_q", 1), "ram_q")
    if ram_t < 1 or ram_q < 1:
        raise ParseError("ramification indices must be positive", field="ram_t")
    prec = inf
    if doc.get("q_precision") is not None:
        if ring != BISERIES:
            raise ParseError("q_precision only applies to biseries_qt", field="q_precision")
        qp = doc["q_precision"]
        _check_fields(qp, {"num", "den"}, {"num", "den"}, "q_precision")
        d = _int(qp["den"], "q_precision.den")
        if d <= 0:
            raise ParseError("den must be positive", field="q_precision.den")
        prec = Fraction(_int(qp["num"], "q_precision.num"), d)
    meta = doc.get("metadata", {})
    _check_fields(meta, _META_FIELDS, set(), "metadata")
    for k, v in meta.items():
        if not isinstance(v, str):
            raise ParseError("metadata values must be strings", field=f"metadata.{k}")
    allow_q = ring == BISERIES
    rows = doc["matrix"]
    if not isinstance(rows, list) or len(rows) != rank:
        raise ParseError(f"matrix must have {rank} rows", field="matrix")
    matrix = []
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != rank:
            raise ParseError(f"row {i} must have {rank} entries", field=f"matrix[{i}]")
        matrix.append(tuple(_parse_terms(x, ram_t, ram_q, prec, f"matrix[{i}][{j}]", allow_q)
                            for j, x in enumerate(row)))
    scale = None
    if doc.get("scale") is not None:
        scale = _parse_terms(doc["scale"], ram_t, 1, inf, "scale", False)
    try:
        return ConnectionRel(tuple(matrix), Derivation(der, scale), basis)
    except ValueError as exc:
        raise ParseError(str(exc), field="matrix") from None


def operator_metadata(data: bytes | str | dict) -> dict:
    doc = data if isinstance(data, dict) else _load(data)
    return dict(doc.get("metadata", {}))


def _terms_of(x: BiSeries, ram_t: int, ram_q: int, with_q: bool) -> list[dict]:
    out = []
    for e, f, c in x.items():
        c = Fraction(c)
        term = {"t_pow": int(e * ram_t)}
        if with_q:
            term["q_pow"] = int(f * ram_q)
        term["num"] = c.numerator
        term["den"] = c.denominator
        out.append(term)
    return out


def operator_to_doc(conn: ConnectionRel, metadata: dict | None = None) -> dict:
    if conn.field_char != 0:
        raise ValueError("only characteristic-0 connections are serialized")
    entries = [x for row in conn.matrix for x in row]
    scale = conn.derivation.scale
    ram_t = lcm(*(x.ram_t for x in entries), scale.ram_t if scale is not None else 1)
    ram_q = lcm(*(x.ram_q for x in entries))
    has_q = any(f != 0 for x in entries for _, f, _ in x.items())
    prec = conn.true_prec
    biseries = has_q or prec != inf
    if prec != inf:
        ram_q = lcm(ram_q, Fraction(prec).denominator)
    doc = {
        "kind": "operator",
        "format_version": FORMAT_VERSION,
        "ring": BISERIES if biseries else RATIONAL,
        "derivation": conn.derivation.base,
        "scale": _terms_of(scale, ram_t, 1, False) if scale is not None else None,
        "basis": conn.basis_tag,
        "rank": conn.rank,
        "ram_t": ram_t,
        "ram_q": ram_q,
        "q_precision": None if prec == inf else {"num": Fraction(prec).numerator, "den": Fraction(prec).denominator},
        "matrix": [[_terms_of(x, ram_t, ram_q, biseries) for x in row] for row in conn.matrix],
        "metadata": dict(metadata or {}),
    }
    return doc


def dumps(doc: Any) -> str:
    """Canonical text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def serialize_operator(conn: ConnectionRel, metadata: dict | None = None) -> bytes:
    return dumps(operator_to_doc(conn, metadata)).encode()


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------


def _positive_number(x: Any, field: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, str)):
        raise ParseError("expected an integer or a decimal string", field=field)
    try:
        v = float(x)
    except ValueError:
        raise ParseError("not a number", field=field) from None
    if not v > 0:
        raise ParseError("must be positive", field=field)
    return v


def _number(x: Any, field: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, str)):
        raise ParseError("expected an integer or a decimal string", field=field)
    try:
        return float(x)
    except ValueError:
        raise ParseError("not a number", field=field) from None


def parse_scenario(data: bytes | str | dict) -> dict:
    """Validate a scenario and return it with numeric parameters decoded.

    Monodromy parameters are decimal strings (the numeric side is floating
    point anyway); exact parameters are integers.
    """
    doc = data if isinstance(data, dict) else _load(data)
    _check_fields(doc, _SCENARIO_FIELDS, {"kind", "format_version", "name", "operator", "command"}, "")
    if doc["kind"] != "scenario":
        raise ParseError("kind must be 'scenario'", field="kind")
    version = _int(doc["format_version"], "format_version")
    if version != FORMAT_VERSION:
        raise SchemaVersionError(f"format_version {version} is not supported", field="format_version")
    cmd = doc["command"]
    if cmd not in _SCENARIO_PARAMS:
        raise ParseError(f"unknown command {cmd!r}", field="command")
    if not isinstance(doc["operator"], str):
        raise ParseError("operator must be a relative path", field="operator")
    params = doc.get("params", {})
    _check_fields(params, _SCENARIO_PARAMS[cmd], set(), "params")
    out: dict[str, Any] = {}
    for k, v in params.items():
        f = f"params.{k}"
        if k in ("primes_max", "q_order", "k_max"):
            out[k] = _int(v, f)
            if k == "primes_max" and out[k] < 2:
                raise ParseError("prime range bound must be at least 2", field=f)
            if out[k] < 1:
                raise ParseError("must be positive", field=f)
        elif k in ("tolerance", "step_fraction"):
            out[k] = _positive_number(v, f)
        elif k == "q":
            out[k] = _number(v, f)
        elif k == "q_samples":
            if not isinstance(v, list) or not v:
                raise ParseError("expected a nonempty list", field=f)
            out[k] = [_number(s, f"{f}[{i}]") for i, s in enumerate(v)]
        elif k == "propagate":
            if not isinstance(v, bool):
                raise ParseError("expected a boolean", field=f)
            out[k] = v
        elif k == "loop":
            _check_fields(v, _LOOP_FIELDS, set(), f)
            loop = {}
            if "center" in v:
                c = v["center"]
                if not isinstance(c, list) or len(c) != 2:
                    raise ParseError("center is [re, im]", field=f"{f}.center")
                loop["center"] = complex(_number(c[0], f"{f}.center"), _number(c[1], f"{f}.center"))
            if "radius" in v:
                loop["radius"] = _positive_number(v["radius"], f"{f}.radius")
            if "samples" in v:
                loop["samples"] = _int(v["samples"], f"{f}.samples")
            out[k] = loop
    expect = doc.get("expect_exit")
    if expect is not None and expect not in (0, 2, 3, 4):
        raise ParseError("expect_exit must be one of 0, 2, 3, 4", field="expect_exit")
    return {"name": doc["name"], "operator": doc["operator"], "command": cmd, "params": out,
            "expect_exit": expect, "description": doc.get("description", "")}


def document_kind(data: bytes | str) -> tuple[str, dict]:
    doc = _load(data)
    if not isinstance(doc, dict) or doc.get("kind") not in ("operator", "scenario"):
        raise ParseError("document kind must be 'operator' or 'scenario'", field="kind")
    return doc["kind"], doc
