import json
from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pcurv import corpus
from pcurv import matrix as mx
from pcurv.connection import ConnectionRel, Derivation
from pcurv.errors import ParseError, SchemaVersionError
from pcurv.io import (document_kind, operator_metadata, operator_to_doc, parse_operator, parse_scenario,
                      serialize_operator)
from pcurv.series import BiSeries

from strategies import connections, nonzero_fractions

exponents = st.builds(F, st.integers(-4, 4), st.sampled_from([1, 2, 3]))


@st.composite
def q_connections(draw):
    n = draw(st.integers(1, 3))
    prec = draw(st.sampled_from([float("inf"), 3, F(7, 2)]))
    rows = []
    for _ in range(n):
        row = []
        for _ in range(n):
            terms = {(draw(exponents), draw(exponents)): draw(nonzero_fractions)
                     for _ in range(draw(st.integers(0, 3)))}
            row.append(BiSeries.from_dict(terms, prec))
        rows.append(row)
    return ConnectionRel(mx.as_matrix(rows), Derivation(draw(st.sampled_from(["t_ddt", "ddt"]))))


@pytest.mark.parametrize("name", sorted(corpus.ENTRIES))
def test_corpus_files_round_trip(name):
    path = corpus.corpus_dir() / f"{name}.json"
    data = path.read_bytes()
    conn = parse_operator(data)
    assert conn == corpus.build_entry(name)
    assert serialize_operator(conn, operator_metadata(data)) == data
    assert operator_metadata(data)["oracle"]


@given(st.one_of(connections(t_range=(-3, 3)), q_connections()))
def test_random_round_trip(conn):
    data = serialize_operator(conn)
    back = parse_operator(data)
    assert back == conn
    assert serialize_operator(back) == data


def _doc():
    return operator_to_doc(corpus.rank_one(F(1, 2)))


def _term(doc):
    return doc["matrix"][0][0][0]


@pytest.mark.parametrize("mutate,field", [
    (lambda d: _term(d).update(num=0.5), "num"),
    (lambda d: _term(d).update(den=0), "den"),
    (lambda d: d.update(colour="red"), "colour"),
    (lambda d: d.pop("matrix"), "matrix"),
    (lambda d: d.update(rank=2), "matrix"),
    (lambda d: d.update(derivation="d_dq"), "derivation"),
    (lambda d: _term(d).update(q_pow=1), "q_pow"),
    (lambda d: _term(d).update(extra=1), "extra"),
])
def test_strict_errors_name_the_field(mutate, field):
    doc = _doc()
    mutate(doc)
    with pytest.raises(ParseError) as exc:
        parse_operator(json.dumps(doc))
    assert field in str(exc.value)


def test_version_is_checked():
    doc = _doc()
    doc["format_version"] = 2
    with pytest.raises(SchemaVersionError):
        parse_operator(json.dumps(doc))


def test_float_literals_rejected_anywhere():
    text = json.dumps(_doc()).replace('"den": 2', '"den": 2.0')
    with pytest.raises(ParseError):
        parse_operator(text)


def test_syntax_error_reports_line():
    with pytest.raises(ParseError) as exc:
        parse_operator('{\n"kind": "operator",\n oops}')
    assert exc.value.line == 3


def test_scenario_validation():
    good = {"kind": "scenario", "format_version": 1, "name": "x", "operator": "../rank1_half.json",
            "command": "monodromy", "params": {"tolerance": "1e-8", "q_samples": ["0", "0.1"]}, "expect_exit": 0}
    sc = parse_scenario(json.dumps(good))
    assert sc["params"]["q_samples"] == [0.0, 0.1]
    for bad_params, field in [({"tolerance": "-1"}, "tolerance"), ({"k_max": 0}, "k_max"),
                              ({"primes_max": 5}, "primes_max"), ({"q_samples": []}, "q_samples")]:
        doc = dict(good, params=bad_params)
        with pytest.raises(ParseError) as exc:
            parse_scenario(json.dumps(doc))
        assert field in str(exc.value)
    with pytest.raises(ParseError):
        parse_scenario(json.dumps(dict(good, command="check", params={"primes_max": 1})))
    with pytest.raises(ParseError):
        parse_scenario(json.dumps(dict(good, expect_exit=1)))
    with pytest.raises(ParseError, match="floating point"):
        parse_scenario(json.dumps(dict(good, params={"tolerance": 1e-8})))


def test_document_kind():
    assert document_kind(serialize_operator(corpus.rank_one(0)))[0] == "operator"
    with pytest.raises(ParseError):
        document_kind(b'{"kind": "recipe"}')
