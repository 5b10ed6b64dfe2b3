from fractions import Fraction as F

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from pcurv import corpus
from pcurv import matrix as mx
from pcurv.connection import GaugeLog, companion_from_operator, reduce_connection_mod_p
from pcurv.errors import AllIntegral, BoundViolated
from pcurv.growth import (NormData, Radius, check_growth, extract_ell_nu, is_integral, shear, shearing_twist,
                          verify_extremal_bounds)
from pcurv.pcurvature import p_curvature_matrix, sweep_primes
from pcurv.series import BiSeries

from strategies import biseries, nonzero_fractions

alphas = st.builds(F, st.integers(-6, 6), st.integers(1, 4))


def witness_column():
    return [BiSeries.from_dict({(2, -4): 1}), BiSeries.from_dict({(0, -1): 1})]


@st.composite
def nonintegral_companions(draw):
    n = draw(st.integers(1, 3))
    col = [draw(biseries(t_range=(-2, 3), q_range=(-3, 2), prec=float("inf"), max_terms=3)) for _ in range(n)]
    assume(any(x.q_valuation() < 0 for x in col))
    return companion_from_operator(col)


def test_worked_example():
    conn = corpus.nonintegral_witness()
    norm = extract_ell_nu(conn)
    assert (norm.val_ell, norm.nu) == (-2, 1)
    sheared, _ = shear(conn)
    expect = mx.as_matrix([[0, BiSeries.from_dict({(1, -4): 1})],
                           [BiSeries.from_dict({(1, 0): 1}), BiSeries.from_dict({(0, -1): 1, (0, 0): -1})]])
    assert sheared.matrix == expect


def test_worked_example_has_nonzero_p_curvature_mod_5():
    conn = corpus.nonintegral_witness().truncate(4)
    psi = p_curvature_matrix(reduce_connection_mod_p(conn, 5), 5)
    assert not mx.is_zero(psi)


def test_integral_input_signals():
    with pytest.raises(AllIntegral):
        extract_ell_nu(companion_from_operator([BiSeries.from_dict({(3, 0): 1, (-1, 2): 5})]))
    assert verify_extremal_bounds(corpus.rank_one(1), None)


def test_bound_violation_is_reported():
    norm = NormData(F(-1), F(0), ((0, F(0)),))
    bad = companion_from_operator([BiSeries.from_dict({(0, -2): 1})])
    with pytest.raises(BoundViolated):
        verify_extremal_bounds(bad, norm)


def test_shearing_twist_exponents():
    g = shearing_twist(3, F(1, 2))
    assert [g.matrix[i][i] for i in range(3)] == [BiSeries.from_dict({(-i * F(1, 2), 0): 1}) for i in range(3)]


def test_growth_violation_names_the_circle():
    f = BiSeries.from_dict({(2, -1): 1})
    ok, v = check_growth(f, Radius(1), Radius(F(1, 2)))
    assert ok and v is None
    ok, v = check_growth(f, Radius(0), Radius(0))
    assert not ok and v.t_exp == 2 and v.radius == 1 and v.margin == -1
    ok, v = check_growth(BiSeries.from_dict({(1, 0): 1}), Radius(0), Radius(-1))
    assert not ok and v.radius == 2


@given(biseries(q_range=(-2, 3)))
def test_unit_circle_means_integral_coefficients(f):
    ok, _ = check_growth(f, Radius.unit(), Radius.unit())
    assert ok == all(j >= 0 for _, j, _ in f.items())
    assert is_integral(f) == ok


@given(biseries(q_range=(-2, 3)), alphas, alphas, alphas, alphas)
def test_monotone_in_the_annulus(f, a, b, c, d):
    inner, outer = max(a, b), min(a, b)
    big_inner, big_outer = inner + abs(c), outer - abs(d)
    if check_growth(f, Radius(big_inner), Radius(big_outer))[0]:
        assert check_growth(f, Radius(inner), Radius(outer))[0]


@given(nonintegral_companions(), nonzero_fractions, biseries(t_range=(-2, 2), q_range=(0, 2), prec=float("inf")))
def test_ell_nu_invariant_under_units(conn, c, w):
    u = BiSeries.constant(c) + w.shift(0, 1)
    scaled = companion_from_operator([u * f for f in conn.last_column()])
    a, b = extract_ell_nu(conn), extract_ell_nu(scaled)
    assert (a.val_ell, a.nu) == (b.val_ell, b.nu)


@given(nonintegral_companions())
def test_shear_then_bounds_hold(conn):
    log = GaugeLog(conn.rank)
    sheared, norm = shear(conn, log)
    assert verify_extremal_bounds(sheared, norm).attaining
    assert len(log) == 1


@pytest.mark.parametrize("name", ["rank1_zero", "rank1_half", "rank1_third", "trivializable_rank2",
                                  "planted_rank2", "planted_rank3"])
def test_vanishing_p_curvature_entries_are_integral(name):
    conn = corpus.build_entry(name)
    s = sweep_primes(conn, 11, p_min=5)
    assert s.all_good_vanish()
    assert all(is_integral(x) for row in conn.matrix for x in row)
