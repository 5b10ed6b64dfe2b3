from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pcurv.errors import BadPrime, NotAUnit, RamificationOverflow, UnboundedSupport
from pcurv.series import (MAX_RAMIFICATION, BiSeries, LaurentPoly, ModP, QSeries, geometric_inverse,
                          q, q_valuation_profile, reduce_mod_p, rescale_ramification, t)

from strategies import biseries, nonzero_fractions

GOOD_PRIMES = [7, 11, 13]


def test_modp_arithmetic():
    a = ModP(F(1, 2), 5)
    assert a == 3
    assert a * 2 == 1
    assert a ** 4 == 1
    assert 1 / a == 2
    with pytest.raises(BadPrime):
        ModP(F(1, 5), 5)
    with pytest.raises(ValueError):
        ModP(1, 5) + ModP(1, 7)


def test_zero_coefficients_not_stored():
    f = t() - t()
    assert f.is_zero()
    assert BiSeries.from_dict({(1, 0): 0, (0, 0): 1}) == BiSeries.constant(1)


def test_truncation_is_pessimistic():
    a = BiSeries.from_dict({(0, 1): 1}, 3)
    b = BiSeries.from_dict({(1, 0): 1}, 5)
    assert (a + b).trunc == 3
    # q * (... + O(q^5)) is known to O(q^6) but (...+O(q^3)) * t only to O(q^3)
    assert (a * b).true_prec() == 3
    assert (a * BiSeries.constant(2)).true_prec() == 3


def test_truncate_drops_terms():
    f = BiSeries.from_dict({(0, 0): 1, (1, 3): 2})
    assert f.truncate(3) == BiSeries.from_dict({(0, 0): 1}, 3)


def test_fractional_exponents_reconcile():
    half = t(F(1, 2))
    assert half * half == t()
    assert (half * half).ram_t == 1
    assert (q(F(1, 3)) ** 3) == q()


def test_ramification_cap():
    with pytest.raises(RamificationOverflow):
        t(F(1, MAX_RAMIFICATION + 1))


def test_D_and_ddt():
    f = BiSeries.from_dict({(3, 0): 2, (-1, 1): 1})
    assert f.D() == BiSeries.from_dict({(3, 0): 6, (-1, 1): -1})
    assert f.ddt() == BiSeries.from_dict({(2, 0): 6, (-2, 1): -1})
    assert t(F(1, 2)).D() == t(F(1, 2)) * F(1, 2)


def test_geometric_inverse_needs_unit():
    with pytest.raises(NotAUnit):
        geometric_inverse(BiSeries.from_dict({(1, 0): 1}, 4))
    with pytest.raises(NotAUnit):
        geometric_inverse(BiSeries.from_dict({(0, 1): 1}, 4))
    with pytest.raises(UnboundedSupport):
        geometric_inverse(BiSeries.from_dict({(0, 0): 1, (1, 1): 1}))


def test_geometric_inverse_example():
    u = BiSeries.from_dict({(0, 0): 2, (1, 1): 1}, 4)
    inv = geometric_inverse(u)
    assert inv == BiSeries.from_dict({(0, 0): F(1, 2), (1, 1): F(-1, 4), (2, 2): F(1, 8), (3, 3): F(-1, 16)}, 4)


def test_valuation_profile():
    f = BiSeries.from_dict({(0, 2): 1, (0, 3): 1, (1, -1): 5})
    assert f.q_valuation() == -1
    assert list(q_valuation_profile(f).true_entries()) == [(0, 2), (1, -1)]


def test_qseries_and_laurent():
    s = QSeries({0: 1, 1: 1}, prec=4)
    assert s * s.inverse() == QSeries({0: 1}, prec=4)
    p = LaurentPoly.from_dict({2: 1, -1: 3})
    assert p.D() == LaurentPoly.from_dict({2: 2, -1: -3})


def test_reduce_mod_p_flags_bad_prime():
    with pytest.raises(BadPrime) as exc:
        reduce_mod_p(BiSeries.from_dict({(0, 0): F(3, 5)}), 5)
    assert exc.value.p == 5


@given(biseries(), biseries(), biseries())
def test_ring_axioms(a, b, c):
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a + b == b + a
    assert a * b == b * a


@given(biseries(), biseries())
def test_D_is_a_derivation(f, g):
    assert (f * g).D() == f.D() * g + f * g.D()
    assert (f * g).ddt() == f.ddt() * g + f * g.ddt()


@given(biseries(q_range=(1, 4)), nonzero_fractions)
def test_geometric_inverse_round_trip(w, c):
    u = w + BiSeries.constant(c, w.trunc)
    inv = geometric_inverse(u)
    assert u * inv == BiSeries.constant(1, u.trunc)


@given(biseries(), biseries(), st.sampled_from(GOOD_PRIMES))
def test_reduce_mod_p_is_a_homomorphism(f, g, p):
    assert reduce_mod_p(f * g, p) == reduce_mod_p(f, p) * reduce_mod_p(g, p)
    assert reduce_mod_p(f + g, p) == reduce_mod_p(f, p) + reduce_mod_p(g, p)


@given(biseries(), st.integers(1, 6))
def test_ramification_coherence(f, factor):
    terms, prec, rt, rq = rescale_ramification(f, factor)
    back = BiSeries(terms, prec, rt, rq)
    assert back == f
    assert (back.ram_t, back.ram_q) == (f.ram_t, f.ram_q)
