"""Integrality on annuli, worked entirely in valuation space.

A radius ``|q|^alpha`` is stored as the exact rational ``alpha``.  A series
``sum a_k t^k`` is bounded by 1 on the circle of that radius iff
``v_q(a_k) + k * alpha >= 0`` for every ``k``.  Sizes ``|x| = |q|^v(x)``
never become floats.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .connection import CYCLIC, ConnectionRel, GaugeLog, GaugeMatrix, diagonal_twist, gauge_transform, is_companion
from .errors import AllIntegral, BoundViolated
from .series import BiSeries, as_fraction


@dataclass(frozen=True)
class Radius:
    """The radius ``|q|^alpha``; ``alpha = 0`` is the unit circle."""

    alpha: Fraction

    def __post_init__(self):
        object.__setattr__(self, "alpha", as_fraction(self.alpha))

    @classmethod
    def unit(cls) -> Radius:
        return cls(Fraction(0))


@dataclass(frozen=True)
class Violation:
    t_exp: Fraction
    radius: int  # 1 for the inner circle, 2 for the outer
    margin: Fraction


def check_growth(f: BiSeries, r1: Radius, r2: Radius) -> tuple[bool, Violation | None]:
    """Is ``f`` bounded by 1 on both boundary circles of the annulus ``r1 <= |t| <= r2``?

    Returns the verdict and the first violation in (t-exponent, radius) order.
    """
    if r1.alpha < r2.alpha:
        raise ValueError("inner radius must not exceed outer radius")
    worst: dict[Fraction, Fraction] = {}
    for k, j, _ in f.items():
        if k not in worst or j < worst[k]:
            worst[k] = j
    for k in sorted(worst):
        for idx, r in ((1, r1), (2, r2)):
            margin = worst[k] + k * r.alpha
            if margin < 0:
                return False, Violation(k, idx, margin)
    return True, None


def is_integral(f: BiSeries) -> bool:
    """Membership in the ring of functions bounded by 1 on ``|t| = 1``."""
    return check_growth(f, Radius.unit(), Radius.unit())[0]


@dataclass(frozen=True)
class NormData:
    """``l = |q|^val_ell`` and the slope ``nu`` of the extremal coefficients."""

    val_ell: Fraction
    nu: Fraction
    attaining: tuple[tuple[int, Fraction], ...]

    def __post_init__(self):
        if not self.attaining:
            raise ValueError("attaining set must be nonempty")


def _coefficient_valuations(f: BiSeries) -> dict[Fraction, Fraction]:
    vals: dict[Fraction, Fraction] = {}
    for i, j, _ in f.items():
        if i not in vals or j < vals[i]:
            vals[i] = j
    return vals


def extract_ell_nu(conn: ConnectionRel) -> NormData:
    """Read ``l`` and ``nu`` off the last column ``f_0 .. f_{n-1}`` of a companion matrix.

    ``v(l) = min v_q(a_{k,i}) / (n - k)`` and ``nu`` is the largest
    ``i / (n - k)`` among the pairs attaining it.  Fractional t-exponents are
    handled natively, so no ``t -> t^(1/n!)`` substitution is needed.
    """
    if conn.basis_tag != CYCLIC and not is_companion(conn.matrix):
        raise ValueError("extract_ell_nu needs a companion matrix")
    n = conn.rank
    col = conn.last_column()
    scaled = []
    for k, f in enumerate(col):
        for i, v in _coefficient_valuations(f).items():
            scaled.append((v / (n - k), k, i))
    if not scaled or min(s[0] for s in scaled) >= 0:
        raise AllIntegral("every coefficient is q-integral")
    val_ell = min(s[0] for s in scaled)
    attaining = sorted((k, i) for v, k, i in scaled if v == val_ell)
    nu = max(Fraction(i) / (n - k) for k, i in attaining)
    return NormData(val_ell, nu, tuple(attaining))


def shearing_twist(n: int, nu: Fraction | int) -> GaugeMatrix:
    """``diag(1, t^-nu, ..., t^-(n-1)nu)``."""
    nu = as_fraction(nu)
    return diagonal_twist([-k * nu for k in range(n)], tag=f"shear(nu={nu})")


@dataclass(frozen=True)
class ExtremalCheck:
    attaining: tuple[tuple[int, Fraction], ...]

    def __bool__(self) -> bool:
        return True


def verify_extremal_bounds(sheared: ConnectionRel, norm: NormData | None) -> ExtremalCheck:
    """Check the size bounds on ``b_{k,i}``, where ``t^-(n-k-1)nu f_k = sum b_{k,i} t^i``.

    Every ``|b_{k,i}| <= l^(n-k)``, strictly for ``i > nu``, with equality at
    some ``i = nu``.  ``norm=None`` stands for integral input that was never
    twisted and passes vacuously.
    """
    if norm is None:
        return ExtremalCheck(())
    n = sheared.rank
    col = sheared.last_column()
    attaining = []
    for k, b in enumerate(col):
        bound = (n - k) * norm.val_ell
        for i, v in sorted(_coefficient_valuations(b).items()):
            if v < bound:
                raise BoundViolated(f"|b_({k},{i})| exceeds l^{n - k}", witness=(k, i, v, bound))
            if v == bound:
                if i > norm.nu:
                    raise BoundViolated(f"|b_({k},{i})| = l^{n - k} with i > nu", witness=(k, i, v, bound))
                if i == norm.nu:
                    attaining.append((k, i))
    if not attaining:
        raise BoundViolated("no coefficient attains the extremal size at i = nu", witness=None)
    return ExtremalCheck(tuple(attaining))


def shear(conn: ConnectionRel, log: GaugeLog | None = None) -> tuple[ConnectionRel, NormData]:
    """Extract ``(l, nu)``, apply the shearing twist and check the bounds.

    Raises :class:`AllIntegral` when there is nothing to do.
    """
    norm = extract_ell_nu(conn)
    g = shearing_twist(conn.rank, norm.nu)
    out = gauge_transform(conn, g, log, label=g.tag)
    verify_extremal_bounds(out, norm)
    return out, norm


def last_column_valuations(conn: ConnectionRel) -> Sequence[dict[Fraction, Fraction]]:
    return [_coefficient_valuations(f) for f in conn.last_column()]
