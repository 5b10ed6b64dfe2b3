from fractions import Fraction as F

import pytest

from pcurv import corpus
from pcurv import matrix as mx
from pcurv.connection import GaugeMatrix, dual, gauge_transform, is_companion
from pcurv.series import BiSeries

N = 20


def hypergeometric_series(a, b, c, n):
    coeffs, term = [], F(1)
    for k in range(n):
        coeffs.append(term)
        term = term * (a + k) * (b + k) / ((c + k) * (k + 1))
    return BiSeries.from_dict({(k, 0): x for k, x in enumerate(coeffs)})


@pytest.mark.parametrize("abc", [(F(1, 2), F(1, 2), 1), (F(1, 3), F(2, 3), F(3, 2)), (1, 2, 3)])
def test_hypergeometric_entry_annihilates_series(abc):
    a, b, c = (F(x) for x in abc)
    conn = corpus.hypergeometric(a, b, c)
    y = hypergeometric_series(a, b, c, N)
    # rows (y, Dy) are flat for the dual connection along the same derivation
    w = (y, y.D())
    d = dual(conn)
    der = conn.derivation.apply
    residual = [der(w[j]) + sum((w[i] * d.matrix[j][i] for i in range(2)), BiSeries.zero()) for j in range(2)]
    for r in residual:
        assert all(k >= N for k in r.t_support())
    assert any(not r.is_zero() for r in residual)  # truncation is visible, so the check is not vacuous


def test_trivializable_flat_basis():
    g = GaugeMatrix.of([[1, corpus.t()], [corpus.t(-1), 2]])
    conn = corpus.trivializable_rank2()
    # D(g) + A g = 0, so the columns of g are flat
    assert mx.is_zero(gauge_transform(conn, g).matrix)


def test_planted_entries_are_exact():
    for name in ("planted_rank2", "planted_rank3"):
        conn = corpus.build_entry(name)
        assert conn.true_prec == float("inf")
    assert corpus.build_entry("planted_rank1").true_prec == 16


def test_witness_is_companion():
    assert is_companion(corpus.nonintegral_witness().matrix)


def test_every_entry_has_an_oracle_and_scenarios_resolve():
    for name, (_, desc, oracle) in corpus.ENTRIES.items():
        assert desc and oracle
    for name, operator, command, params, expect in corpus.SCENARIOS:
        assert operator in corpus.ENTRIES
        assert (corpus.corpus_dir() / "scenarios" / f"{name}.json").exists()
        assert (corpus.corpus_dir() / "golden" / f"{name}.json").exists()
