"""Reduction of a connection on the unit annulus to a constant matrix.

The pipeline is

1. ``diagonalize_and_twist``: make ``A mod q`` diagonal with integer
   entries (after a pullback ``t = s^m``) and twist by ``diag(t^-d_k)`` so
   that ``A = 0 mod q``;
2. ``reduce_to_constant``: repeatedly take the lowest q-power ``q^e B`` of
   ``A - A_0``, put its t-constant part into ``A_0`` and kill the rest with
   the gauge ``I - q^e C`` where ``D(C) = B``;
3. ``lemma_A0_check``: a constant matrix ``A_0 = 0 mod q`` with vanishing
   p-curvature ``A_0^p - A_0`` must itself vanish.

Verdicts are exact statements modulo ``q^M``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import inf, lcm
from typing import Iterable, Sequence

import sympy

from . import matrix as mx
from .connection import (
    T_DDT,
    ConnectionRel,
    Derivation,
    GaugeLog,
    GaugeMatrix,
    diagonal_twist,
    gauge_transform,
    pullback,
)
from .errors import (
    BadPrime,
    IrrationalEigenvalues,
    KatzCheckFailed,
    NonzeroA0,
    NotSemisimple,
    RamificationOverflow,
)
from .matrix import Matrix
from .series import MAX_RAMIFICATION, BiSeries, QSeries

UNIT_INTERVAL = (Fraction(0), Fraction(0))


# ---------------------------------------------------------------------------
# Preprocessing: A mod q constant, then trivial mod q
# ---------------------------------------------------------------------------


def constant_mod_q(conn: ConnectionRel) -> list[list[Fraction]]:
    """``A mod q`` as a rational matrix; raises KatzCheckFailed if it depends on t."""
    out = []
    for i, row in enumerate(conn.matrix):
        vals = []
        for j, x in enumerate(row):
            if x.q_valuation() < 0:
                raise KatzCheckFailed(f"entry ({i},{j}) has negative q-valuation", witness=(i, j, repr(x)))
            r = x.mod_q()
            if any(e != 0 for e, _ in r.items()):
                raise KatzCheckFailed(f"A mod q is not constant in t at ({i},{j}): {r!r}", witness=(i, j, repr(r)))
            vals.append(Fraction(r.coefficient(0)))
        out.append(vals)
    return out


def _sym(m: Sequence[Sequence[Fraction]]) -> sympy.Matrix:
    return sympy.Matrix([[sympy.Rational(x.numerator, x.denominator) for x in row] for row in m])


def _frac(x) -> Fraction:
    x = sympy.Rational(x)
    return Fraction(int(x.p), int(x.q))


def rational_eigen(a0: Sequence[Sequence[Fraction]]) -> tuple[list[Fraction], list[list[Fraction]]]:
    """Eigenvalues and an eigenbasis (as columns) of a rational matrix.

    Raises IrrationalEigenvalues when the characteristic polynomial does not
    split over Q, NotSemisimple when an eigenspace is too small.
    """
    m = _sym(a0)
    n = m.shape[0]
    lam = sympy.Symbol("lam")
    cp = m.charpoly(lam)
    _, factors = sympy.factor_list(cp.as_expr(), lam)
    roots: list[tuple[Fraction, int]] = []
    for fac, mult in factors:
        poly = sympy.Poly(fac, lam)
        if poly.degree() != 1:
            raise IrrationalEigenvalues(f"characteristic polynomial has factor {fac}", witness=str(cp.as_expr()))
        c1, c0 = poly.all_coeffs()
        roots.append((_frac(-c0 / c1), mult))
    values: list[Fraction] = []
    columns: list[list[Fraction]] = []
    for r, mult in sorted(roots):
        space = (m - sympy.Rational(r.numerator, r.denominator) * sympy.eye(n)).nullspace()
        if len(space) != mult:
            raise NotSemisimple(f"eigenvalue {r} has multiplicity {mult} but eigenspace dimension {len(space)}",
                                witness={"eigenvalue": str(r), "algebraic": mult, "geometric": len(space)})
        for v in space:
            values.append(r)
            columns.append([_frac(x) for x in v])
    return values, columns


@dataclass(frozen=True)
class TwistInfo:
    eigenvalues: tuple[Fraction, ...]
    pullback: int
    twist: tuple[int, ...]


def diagonalize_and_twist(conn: ConnectionRel, log: GaugeLog | None = None) -> tuple[ConnectionRel, TwistInfo]:
    """Make the connection matrix vanish mod q.

    Denominators of the eigenvalues of ``A mod q`` are cleared by pulling
    back along ``t = s^m``, which multiplies the matrix by ``m``; the gauges
    applied afterwards (eigenbasis, then ``diag(t^-d_k)``) go to ``log`` and
    act on the pulled-back connection.
    """
    a0 = constant_mod_q(conn)
    n = conn.rank
    if all(x == 0 for row in a0 for x in row):
        return conn, TwistInfo(tuple([Fraction(0)] * n), 1, tuple([0] * n))
    values, columns = rational_eigen(a0)
    m = lcm(*(v.denominator for v in values))
    if m > 1:
        if conn.derivation != Derivation(T_DDT):
            raise ValueError("denominator clearing needs the derivation t d/dt")
        if m > MAX_RAMIFICATION:
            raise RamificationOverflow(f"pullback index {m} exceeds {MAX_RAMIFICATION}")
        conn = pullback(conn, m)
    d = [int(v * m) for v in values]
    x = tuple(tuple(Fraction(columns[j][i]) for j in range(n)) for i in range(n))
    is_identity = all(x[i][j] == (1 if i == j else 0) for i in range(n) for j in range(n))
    if not is_identity:
        conn = gauge_transform(conn, GaugeMatrix.of(x, tag="eigenbasis"), log, label="eigenbasis")
        if log is not None:
            log.entries[-1].alpha_interval = UNIT_INTERVAL
    if any(d):
        conn = gauge_transform(conn, diagonal_twist([-k for k in d]), log, label=f"twist{tuple(d)}")
        if log is not None:
            log.entries[-1].alpha_interval = UNIT_INTERVAL
    return conn, TwistInfo(tuple(values), m, tuple(d))


# ---------------------------------------------------------------------------
# Inductive reduction
# ---------------------------------------------------------------------------


@dataclass
class ReductionState:
    """Single-owner state of a reduction run.

    Invariant: ``conn.matrix - A0`` only has q-exponents ``>= stage``, and
    ``A0`` is constant in t and vanishes mod q.
    """

    conn: ConnectionRel
    stage: Fraction
    A0: Matrix
    log: GaugeLog
    M: int
    # (e, q^e C_e) for every gauge actually applied
    steps: list[tuple[Fraction, Matrix]] = field(default_factory=list)

    @property
    def done(self) -> bool:
        return self.stage >= self.M

    def residual(self) -> Matrix:
        return mx.matsub(self.conn.matrix, self.A0)

    def A0_qseries(self) -> list[list[QSeries]]:
        return [[x.coefficient(0) for x in row] for row in self.A0]


def _lowest_q_exponent(m: Matrix):
    e = inf
    for row in m:
        for x in row:
            for _, j, _ in x.items():
                e = min(e, j)
    return e


def start_reduction(conn: ConnectionRel, M: int = 8, log: GaugeLog | None = None) -> ReductionState:
    conn = conn.truncate(M)
    for row in conn.matrix:
        for x in row:
            if x.q_valuation() <= 0 and not x.is_zero():
                raise ValueError("reduction needs A = 0 mod q; run diagonalize_and_twist first")
    zero = mx.zeros(conn.rank, prec=M)
    log = log if log is not None else GaugeLog(conn.rank)
    state = ReductionState(conn, Fraction(0), zero, log, M)
    state.stage = Fraction(min(_lowest_q_exponent(conn.matrix), M))
    return state


def reduction_step(state: ReductionState) -> ReductionState:
    """Remove the lowest q-power ``q^e B`` of ``A - A0``.

    The t^0 part of ``B`` is added to ``A0``; for the rest the gauge
    ``I - q^e C`` with ``C = sum B_k t^k / k`` is applied.
    """
    if state.done:
        return state
    e = state.stage
    n = state.conn.rank
    res = state.residual()
    const = [[BiSeries.zero() for _ in range(n)] for _ in range(n)]
    c_rows = [[BiSeries.zero() for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(n):
            for k, c in res[i][j].q_coefficient(e).items():
                if k == 0:
                    const[i][j] = const[i][j] + BiSeries.from_dict({(k, e): c})
                else:
                    c_rows[i][j] = c_rows[i][j] + BiSeries.from_dict({(k, e): c / k})
    const_m = mx.truncate(mx.as_matrix(const), state.M)
    state.A0 = mx.matadd(state.A0, const_m)
    cm = mx.as_matrix(c_rows)
    conn = state.conn
    if not mx.is_zero(cm):
        t_gauge = mx.truncate(mx.matsub(mx.identity(n, prec=state.M), cm), state.M)
        g = GaugeMatrix.of(t_gauge, tag=f"I - q^{e} C")
        conn = gauge_transform(conn, g, state.log, label=f"step q^{e}")
        state.log.entries[-1].alpha_interval = UNIT_INTERVAL
        state.steps.append((e, cm))
    state.conn = conn
    nxt = _lowest_q_exponent(mx.matsub(conn.matrix, state.A0))
    if nxt <= e:
        raise AssertionError(f"reduction stalled at q^{e}")
    state.stage = Fraction(min(nxt, state.M)) if nxt != inf else Fraction(state.M)
    return state


def reduce_to_constant(conn: ConnectionRel, M: int = 8, log: GaugeLog | None = None) -> ReductionState:
    """Run reduction steps until ``A = A0 mod q^M``.

    The returned state carries ``A0``, the gauge log and the list of
    ``(e, C_e)`` pairs.
    """
    state = start_reduction(conn, M, log)
    while not state.done:
        reduction_step(state)
    return state


def composite_is_integral(log: GaugeLog) -> bool:
    g = log.composite()
    return all(x.q_valuation() >= 0 for mat in (g.matrix, g.inverse) for row in mat for x in row)


# ---------------------------------------------------------------------------
# A_0 check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class A0Verdict:
    zero: bool
    M: int
    primes: tuple[int, ...]
    skipped: tuple[int, ...]
    nilpotent: bool

    @property
    def label(self) -> str:
        return f"A0 = 0 at truncation order {self.M}" if self.zero else "A0 nonzero"


def _lowest_witness(a0: Matrix):
    best = None
    for i, row in enumerate(a0):
        for j, x in enumerate(row):
            for k, e, c in x.items():
                if best is None or e < best[0]:
                    best = (e, i, j, c)
    return best


def lemma_A0_check(a0: Matrix, primes: Iterable[int], M: int) -> A0Verdict:
    """Constant ``A0 = 0 mod q``: vanishing p-curvature ``A0^p - A0`` forces ``A0 = 0``.

    For each prime not dividing a denominator, ``A0^p - A0`` is computed mod
    ``(p, q^M)`` and compared with ``-A0``.  Raises NonzeroA0 with the
    lowest-order entry when ``A0`` is nonzero mod ``q^M``.
    """
    a0 = mx.truncate(mx.as_matrix(a0), M)
    n = len(a0)
    for row in a0:
        for x in row:
            if not x.is_zero() and x.q_valuation() <= 0:
                raise ValueError("A0 must vanish mod q")
            if not x.is_constant_in_t():
                raise ValueError("A0 must be constant in t")
    checked, skipped = [], []
    psi_report = {}
    for p in primes:
        try:
            red = mx.matmap(lambda x: x.reduce_mod_p(p).truncate(M), a0)
        except BadPrime:
            skipped.append(p)
            continue
        psi = mx.truncate(mx.matsub(mx.matpow(red, p), red), M)
        # A0 = 0 mod q gives A0^p = 0 mod q^p, so psi_p = -A0 below that order
        psi_report[p] = not mx.is_zero(psi)
        checked.append(p)
    nilpotent = mx.is_zero(mx.truncate(mx.matpow(a0, n), M)) if n else True
    w = _lowest_witness(a0)
    if w is not None:
        e, i, j, c = w
        raise NonzeroA0(
            f"A0 has a nonzero q^{e} term at ({i},{j})",
            witness={"q_order": str(e), "entry": [i, j], "coefficient": str(c),
                     "psi_nonzero_at": [p for p, nz in psi_report.items() if nz]},
        )
    return A0Verdict(True, M, tuple(checked), tuple(skipped), nilpotent)


# ---------------------------------------------------------------------------
# Three-circle bound
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThreeCircleBound:
    """Linear interpolation of q-valuations between ``|t| = 1`` and ``|t| = |q|^alpha_inner``."""

    val_inner: Fraction
    alpha_inner: Fraction
    val_unit: Fraction

    @property
    def slope(self) -> Fraction:
        return (self.val_inner - self.val_unit) / self.alpha_inner

    def __call__(self, alpha) -> Fraction:
        alpha = Fraction(alpha)
        if not 0 <= alpha <= self.alpha_inner:
            raise ValueError("alpha outside the interpolation interval")
        return self.val_unit + alpha * self.slope


def three_circle_bound(val_inner, alpha_inner, val_unit) -> ThreeCircleBound:
    alpha_inner = Fraction(alpha_inner)
    if alpha_inner <= 0:
        raise ValueError("alpha_inner must be positive")
    return ThreeCircleBound(Fraction(val_inner), alpha_inner, Fraction(val_unit))


def valuation_at(f: BiSeries | Matrix, alpha) -> Fraction | float:
    """``min (v_q(c) + k alpha)`` over the terms ``c t^k``: the valuation of the sup norm on ``|t| = |q|^alpha``."""
    alpha = Fraction(alpha)
    if isinstance(f, BiSeries):
        return min((j + k * alpha for k, j, _ in f.items()), default=inf)
    return min((valuation_at(x, alpha) for row in f for x in row), default=inf)


def bound_for(f: BiSeries | Matrix, alpha_inner=1) -> ThreeCircleBound:
    return three_circle_bound(valuation_at(f, alpha_inner), alpha_inner, valuation_at(f, 0))
