import math
from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pcurv import corpus
from pcurv import matrix as mx
from pcurv.connection import ConnectionRel, GaugeLog
from pcurv.errors import IrrationalEigenvalues, KatzCheckFailed, NonzeroA0, NotSemisimple
from pcurv.gauge import (bound_for, composite_is_integral, constant_mod_q, diagonalize_and_twist, lemma_A0_check,
                         rational_eigen, reduce_to_constant, reduction_step, start_reduction, three_circle_bound,
                         valuation_at)
from pcurv.growth import is_integral
from pcurv.series import BiSeries, q, t

from strategies import biseries

plants = st.tuples(st.integers(1, 3), st.integers(2, 6), st.integers(0, 10_000), st.booleans())


def build_plant(rank, M, seed, exact):
    if rank == 1:
        return corpus.planted_rank1_family(M, seed=seed, q_prec=M)
    return corpus.planted_family(rank, M, seed=seed, exact=exact)


def rank1(x):
    return ConnectionRel(mx.as_matrix([[x]]))


@given(plants)
def test_planted_round_trip(args):
    rank, M, seed, exact = args
    conn, plant = build_plant(rank, M, seed, exact)
    state = reduce_to_constant(conn, M)
    assert mx.is_zero(state.A0)
    g = state.log.composite()
    assert mx.truncate(mx.matmul(plant.matrix, g.matrix), M) == mx.identity(rank, prec=M)
    assert composite_is_integral(state.log)
    assert state.log.replay(conn.truncate(M)).matrix == state.conn.matrix


@given(plants)
def test_steps_raise_the_q_order(args):
    rank, M, seed, exact = args
    conn, _ = build_plant(rank, M, seed, exact)
    state = start_reduction(conn, M)
    while not state.done:
        e = state.stage
        reduction_step(state)
        assert state.stage > e
        for row in state.residual():
            for x in row:
                assert x.is_zero() or x.q_valuation() > e


@given(st.lists(biseries(t_range=(-2, 2), q_range=(1, 3), prec=4), min_size=1, max_size=4))
def test_integral_input_gives_integral_gauge(entries):
    conn = ConnectionRel(mx.as_matrix([[sum(entries, BiSeries.zero(4))]]))
    state = reduce_to_constant(conn, 4)
    assert composite_is_integral(state.log)
    assert all(x.is_constant_in_t() for row in state.conn.matrix for x in row)


def test_single_monomial_composite_is_exponential():
    M = 6
    state = reduce_to_constant(rank1(q() * t()), M)
    assert mx.is_zero(state.A0)
    # A' = A + D(g)/g vanishes for g = exp(-q t)
    expected = BiSeries.from_dict({(k, k): F((-1) ** k, math.factorial(k)) for k in range(M)}, M)
    assert state.log.composite().matrix[0][0] == expected
    assert len(reduce_to_constant(rank1(q() * t()), 2).log) == 1


def test_constant_terms_go_to_A0():
    state = reduce_to_constant(rank1(q() * (t() + t(-1) + 5)), 6)
    assert state.A0[0][0] == BiSeries.from_dict({(0, 1): 5}, 6)
    (e, c), = state.steps[:1]
    assert e == 1
    assert c[0][0] == BiSeries.from_dict({(1, 1): 1, (-1, 1): -1})


def test_mixed_orders():
    state = reduce_to_constant(rank1(q() * t() + q(2)), 6)
    assert state.A0[0][0] == BiSeries.from_dict({(0, 2): 1}, 6)
    # I - q C is not exp(-q C), so every later stage has work to do
    assert [e for e, _ in state.steps] == [1, 2, 3, 4, 5]
    assert [e for e, _ in reduce_to_constant(rank1(q() * t() + q(2)), 3).steps] == [1, 2]


def test_twist_diagonal():
    conn = ConnectionRel(mx.as_matrix([[1, 0], [0, 2]]))
    out, info = diagonalize_and_twist(conn)
    assert info.twist == (1, 2)
    assert info.pullback == 1
    assert mx.is_zero(out.matrix)


def test_twist_needs_pullback_for_fractions():
    log = GaugeLog(1)
    out, info = diagonalize_and_twist(rank1(F(1, 2) + q() * t()), log)
    assert info.pullback == 2
    assert out.matrix[0][0].q_valuation() >= 1
    assert len(log) >= 1


def test_twist_conjugates_to_diagonal():
    conn = ConnectionRel(mx.as_matrix([[F(1, 2), 1], [0, F(1, 3)]]))
    values, _ = rational_eigen(constant_mod_q(conn))
    assert sorted(values) == [F(1, 3), F(1, 2)]
    out, info = diagonalize_and_twist(conn)
    assert info.pullback == 6 and sorted(info.twist) == [2, 3]
    assert mx.is_zero(out.matrix)
    with pytest.raises(KatzCheckFailed):
        constant_mod_q(corpus.direct_sum_gauged())


def test_preprocessing_certificates():
    with pytest.raises(KatzCheckFailed):
        constant_mod_q(rank1(t()))
    with pytest.raises(NotSemisimple):
        rational_eigen([[F(0), F(1)], [F(0), F(0)]])
    with pytest.raises(IrrationalEigenvalues):
        rational_eigen([[F(0), F(2)], [F(1), F(0)]])


@pytest.mark.parametrize("name", ["rank1_zero", "rank1_half", "rank1_third", "planted_rank2", "planted_rank3",
                                  "planted_rank1"])
def test_twist_keeps_unit_circle_integrality(name):
    conn = corpus.build_entry(name)
    out, _ = diagonalize_and_twist(conn)
    assert all(is_integral(x) for row in out.matrix for x in row)


def test_A0_classification():
    zero = mx.zeros(2, prec=3)
    v = lemma_A0_check(zero, [5, 7], 3)
    assert v.zero and v.primes == (5, 7)
    qi = mx.as_matrix([[q(), 0], [0, q()]])
    qn = mx.as_matrix([[0, q()], [0, 0]])
    for a0 in (qi, qn):
        with pytest.raises(NonzeroA0) as exc:
            lemma_A0_check(a0, [5, 7], 3)
        assert exc.value.witness["q_order"] == "1"
        assert exc.value.witness["psi_nonzero_at"] == [5, 7]


def test_A0_bad_primes_skipped():
    v = lemma_A0_check(mx.zeros(1, prec=3), [2, 3], 3)
    assert v.primes == (2, 3)
    with pytest.raises(NonzeroA0):
        lemma_A0_check(mx.as_matrix([[q() * F(1, 5)]]), [5, 7], 3)


def test_three_circle_bound_interpolates():
    b = three_circle_bound(4, 2, 1)
    assert b.slope == F(3, 2)
    assert b(1) == F(5, 2)
    with pytest.raises(ValueError):
        b(3)
    f = BiSeries.from_dict({(2, 1): 1, (-1, 2): 1})
    assert valuation_at(f, F(1, 2)) == F(3, 2)


def _concave(f, alphas):
    vals = [valuation_at(f, a) for a in alphas]
    return all(vals[i] * 2 >= vals[i - 1] + vals[i + 1] for i in range(1, len(vals) - 1))


@given(plants)
def test_reduction_gauges_are_concave_and_bounded(args):
    rank, M, seed, exact = args
    conn, _ = build_plant(rank, M, seed, exact)
    state = reduce_to_constant(conn, M)
    grid = [F(k, 4) for k in range(-8, 9)]
    for _, c in state.steps:
        for row in c:
            for x in row:
                if not x.is_zero():
                    assert _concave(x, grid)
        assert valuation_at(c, F(1, 2)) >= bound_for(c)(F(1, 2))
