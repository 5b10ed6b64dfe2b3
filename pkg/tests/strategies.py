"""Hypothesis strategies shared by the tests."""

from fractions import Fraction

from hypothesis import strategies as st

from pcurv import matrix as mx
from pcurv.connection import ConnectionRel, Derivation
from pcurv.series import BiSeries

small_fractions = st.builds(Fraction, st.integers(-5, 5), st.integers(1, 4))
nonzero_fractions = small_fractions.filter(bool)


@st.composite
def biseries(draw, t_range=(-2, 2), q_range=(0, 3), prec=5, max_terms=4):
    n = draw(st.integers(0, max_terms))
    terms = {}
    for _ in range(n):
        k = draw(st.integers(*t_range))
        j = draw(st.integers(*q_range))
        terms[(k, j)] = draw(nonzero_fractions)
    return BiSeries.from_dict(terms, prec)


@st.composite
def laurent_polys(draw, t_range=(-2, 3), max_terms=3):
    n = draw(st.integers(0, max_terms))
    terms = {}
    for _ in range(n):
        terms[(draw(st.integers(*t_range)), 0)] = draw(nonzero_fractions)
    return BiSeries.from_dict(terms)


@st.composite
def connections(draw, max_rank=3, t_range=(0, 3), derivation=None):
    n = draw(st.integers(1, max_rank))
    rows = [[draw(laurent_polys(t_range=t_range)) for _ in range(n)] for _ in range(n)]
    der = derivation or draw(st.sampled_from(["t_ddt", "ddt"]))
    return ConnectionRel(mx.as_matrix(rows), Derivation(der))
