"""Connections relative to a chosen basis, and gauge transformations.

Convention: coordinates are columns and

    nabla(delta) v = delta(v) + A v,

so a flat section solves ``delta(x) + A x = 0``.  A gauge ``T`` expresses
old coordinates through new ones (``x = T x'``); the transformed matrix is

    A' = T^-1 (A T + delta(T)).

With this rule the companion matrix has its free coefficients in the last
column, the diagonal twist ``diag(t^-d_k)`` acts by ``a'_kj = t^(d_k - d_j)
a_kj`` and ``a'_kk = a_kk - d_k``, and a column ``x`` with ``delta(x) + A x =
0`` maps to ``T^-1 x``, which solves the transformed system.

The derivation ``delta`` is ``t d/dt`` or ``d/dt``, optionally multiplied by
a Laurent polynomial ``scale``.  The scale lets operators whose companion
matrix has a polynomial denominator ``h`` (hypergeometric equations) be
stored exactly: along ``h t d/dt`` the matrix is ``h A``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from fractions import Fraction
from math import inf
from typing import Sequence

from . import matrix as mx
from .errors import SingularGauge
from .matrix import Matrix, Vector
from .series import BiSeries, as_fraction

T_DDT = "t_ddt"
DDT = "ddt"
CYCLIC = "cyclic"
GENERAL = "general"


@dataclass(frozen=True)
class Derivation:
    """``scale * base`` with ``base`` one of ``t d/dt`` and ``d/dt``."""

    base: str = T_DDT
    scale: BiSeries | None = None

    def __post_init__(self):
        if self.base not in (T_DDT, DDT):
            raise ValueError(f"unknown derivation {self.base!r}")
        if self.scale is not None:
            s = BiSeries.coerce(self.scale)
            object.__setattr__(self, "scale", None if s == BiSeries.constant(1) else s)

    def apply(self, f: BiSeries) -> BiSeries:
        out = f.D() if self.base == T_DDT else f.ddt()
        return out if self.scale is None else self.scale * out

    def on_t(self) -> BiSeries:
        """The image of the coordinate ``t``."""
        return self.apply(BiSeries.from_dict({(1, 0): 1}))

    @property
    def tag(self) -> str:
        return self.base

    def reduce_mod_p(self, p: int) -> Derivation:
        return self if self.scale is None else Derivation(self.base, self.scale.reduce_mod_p(p))


@dataclass(frozen=True)
class ConnectionRel:
    """A rank-n connection matrix with its derivation and basis provenance."""

    matrix: Matrix
    derivation: Derivation = field(default_factory=Derivation)
    basis_tag: str = GENERAL

    def __post_init__(self):
        rows = mx.as_matrix(self.matrix)
        n = len(rows)
        if n == 0 or any(len(r) != n for r in rows):
            raise ValueError("connection matrix must be square and nonempty")
        rows = _common_prec(rows)
        object.__setattr__(self, "matrix", rows)
        if self.basis_tag not in (CYCLIC, GENERAL):
            raise ValueError(f"unknown basis tag {self.basis_tag!r}")
        if self.basis_tag == CYCLIC and not is_companion(rows):
            raise ValueError("basis_tag 'cyclic' requires companion shape")
        chars = {x.characteristic() for row in rows for x in row} - {None}
        if len(chars) > 1:
            raise ValueError(f"mixed characteristics {chars}")

    @property
    def rank(self) -> int:
        return len(self.matrix)

    @property
    def field_char(self) -> int:
        c = mx.char_of(self.matrix)
        if c is None and self.derivation.scale is not None:
            c = self.derivation.scale.characteristic()
        return c or 0

    @property
    def prec(self):
        return mx.matrix_prec(self.matrix)

    @property
    def true_prec(self):
        return min(x.true_prec() for row in self.matrix for x in row)

    @property
    def ring_tag(self) -> str:
        exact_t = all(x.prec == inf and all(j == 0 for _, j in x.terms) for row in self.matrix for x in row)
        return "rational_laurent_t" if exact_t else "biseries_qt"

    def entry(self, i: int, j: int) -> BiSeries:
        return self.matrix[i][j]

    def truncate(self, prec) -> ConnectionRel:
        return replace(self, matrix=mx.truncate(self.matrix, prec))

    def with_matrix(self, m: Matrix, basis_tag: str | None = None) -> ConnectionRel:
        return ConnectionRel(m, self.derivation, basis_tag or self.basis_tag)

    def last_column(self) -> list[BiSeries]:
        return [row[-1] for row in self.matrix]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ConnectionRel):
            return NotImplemented
        return (self.derivation == other.derivation and self.basis_tag == other.basis_tag
                and mx.equal(self.matrix, other.matrix))

    __hash__ = None  # type: ignore[assignment]


def _common_prec(rows: Matrix, *others: Matrix) -> Matrix:
    # all entries share one truncation order
    true = min(x.true_prec() for m in (rows, *others) for row in m for x in row)
    if true == inf:
        return rows
    return mx.matmap(lambda x: x.truncate(true), rows)


def is_companion(a: Matrix) -> bool:
    n = len(a)
    for i in range(n):
        for j in range(n - 1):
            x = a[i][j]
            if i == j + 1:
                if x != 1:
                    return False
            elif not x.is_zero():
                return False
    return True


def companion_from_operator(coeffs: Sequence, derivation: Derivation | None = None) -> ConnectionRel:
    """Companion matrix with ones on the subdiagonal and ``f_0 .. f_{n-1}`` in the last column.

    In the cyclic basis ``e_k = nabla^k e_0`` this encodes
    ``nabla^n e_0 = sum_k f_k nabla^k e_0``.
    """
    f = [BiSeries.coerce(c) for c in coeffs]
    if not f:
        raise ValueError("need at least one coefficient")
    n = len(f)
    one = BiSeries.constant(f[0]._one())
    rows = []
    for i in range(n):
        row = [BiSeries.zero()] * n
        if i > 0:
            row[i - 1] = one
        row[n - 1] = f[i]
        rows.append(tuple(row))
    return ConnectionRel(tuple(rows), derivation or Derivation(), CYCLIC)


def apply_nabla(conn: ConnectionRel, v: Sequence) -> Vector:
    """``nabla(delta) v = delta(v) + A v`` on a coordinate column."""
    v = mx.as_vector(v)
    if len(v) != conn.rank:
        raise ValueError(f"vector length {len(v)} != rank {conn.rank}")
    av = mx.matvec(conn.matrix, v)
    return tuple(conn.derivation.apply(x) + y for x, y in zip(v, av))


def dual(conn: ConnectionRel) -> ConnectionRel:
    """The dual connection, matrix ``-A^T``.

    Row vectors ``w`` with ``delta(w) = w A`` (e.g. ``(y, Dy, ..)`` for a
    solution ``y`` of the scalar operator) are its flat sections.
    """
    return ConnectionRel(mx.matscale(mx.transpose(conn.matrix), -1), conn.derivation, GENERAL)


# ---------------------------------------------------------------------------
# Gauges
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaugeMatrix:
    """An invertible change of basis with its inverse computed up front."""

    matrix: Matrix
    inverse: Matrix
    tag: str = "general"

    @classmethod
    def of(cls, t: Sequence[Sequence], tag: str = "general", inverse: Sequence[Sequence] | None = None) -> GaugeMatrix:
        m = mx.as_matrix(t)
        if inverse is None:
            inv = mx.inverse(m)
        else:
            inv = mx.as_matrix(inverse)
        prec = min(x.true_prec() for mat in (m, inv) for row in mat for x in row)
        n = len(m)
        check = mx.matsub(mx.matmul(m, inv), mx.identity(n, mx.char_of(m)))
        if not all(x.truncate(prec).is_zero() for row in check for x in row):
            raise SingularGauge("supplied inverse does not invert the gauge")
        return cls(m, inv, tag)

    @property
    def rank(self) -> int:
        return len(self.matrix)

    def reduce_mod_p(self, p: int) -> GaugeMatrix:
        red = lambda x: x.reduce_mod_p(p)
        return GaugeMatrix(mx.matmap(red, self.matrix), mx.matmap(red, self.inverse), self.tag)


def identity_gauge(n: int, char: int | None = None) -> GaugeMatrix:
    one = mx.identity(n, char)
    return GaugeMatrix(one, one, "constant")


def diagonal_twist(exponents: Sequence[int | Fraction], tag: str = "diagonal-twist") -> GaugeMatrix:
    """``diag(t^e_0, ..., t^e_{n-1})`` with its exact inverse."""
    es = [as_fraction(e) for e in exponents]
    fwd = mx.diagonal([BiSeries.from_dict({(e, 0): 1}) for e in es])
    inv = mx.diagonal([BiSeries.from_dict({(-e, 0): 1}) for e in es])
    return GaugeMatrix(fwd, inv, tag)


def compose(second: GaugeMatrix, first: GaugeMatrix) -> GaugeMatrix:
    """The single gauge equal to applying ``first`` and then ``second``."""
    return GaugeMatrix(mx.matmul(first.matrix, second.matrix), mx.matmul(second.inverse, first.inverse),
                       "composite")


def transformed_matrix(conn: ConnectionRel, g: GaugeMatrix) -> Matrix:
    if g.rank != conn.rank:
        raise ValueError("gauge rank does not match connection rank")
    a = conn.matrix
    t = g.matrix
    dt = mx.matmap(conn.derivation.apply, t)
    new = mx.matmul(g.inverse, mx.matadd(mx.matmul(a, t), dt))
    return _common_prec(new, a, t, g.inverse)


def gauge_transform(conn: ConnectionRel, g: GaugeMatrix, log: GaugeLog | None = None,
                    label: str = "") -> ConnectionRel:
    """Change basis by ``g``: ``A' = g^-1 (A g + delta(g))``.

    If ``log`` is given the gauge is appended to it.
    """
    new = conn.with_matrix(transformed_matrix(conn, g), GENERAL)
    if log is not None:
        log.append(g, label or g.tag)
    return new


@dataclass
class GaugeLogEntry:
    gauge: GaugeMatrix
    label: str
    alpha_interval: tuple[Fraction, Fraction] | None = None


@dataclass
class GaugeLog:
    """Append-only record of the gauges applied during one reduction run."""

    rank: int
    entries: list[GaugeLogEntry] = field(default_factory=list)
    _composite: GaugeMatrix | None = None

    def append(self, g: GaugeMatrix, label: str, alpha_interval=None) -> None:
        self.entries.append(GaugeLogEntry(g, label, alpha_interval))
        self._composite = g if self._composite is None else compose(g, self._composite)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def composite(self, char: int | None = None) -> GaugeMatrix:
        return self._composite if self._composite is not None else identity_gauge(self.rank, char)

    def replay(self, conn: ConnectionRel) -> ConnectionRel:
        for e in self.entries:
            conn = gauge_transform(conn, e.gauge)
        return conn

    def labels(self) -> list[str]:
        return [e.label for e in self.entries]

    def digest(self) -> str:
        h = hashlib.sha256()
        for e in self.entries:
            h.update(e.label.encode())
            for row in e.gauge.matrix:
                for x in row:
                    h.update(repr(x).encode())
                    h.update(b"|")
            h.update(b"\n")
        return h.hexdigest()


# ---------------------------------------------------------------------------
# Reduction mod p and substitutions
# ---------------------------------------------------------------------------


def reduce_connection_mod_p(conn: ConnectionRel, p: int) -> ConnectionRel:
    """Entry-wise reduction; raises :class:`BadPrime` when a denominator is divisible by ``p``."""
    if conn.field_char not in (0, p):
        raise ValueError(f"connection already in characteristic {conn.field_char}")
    if conn.field_char == p:
        return conn
    m = mx.matmap(lambda x: x.reduce_mod_p(p), conn.matrix)
    der = conn.derivation.reduce_mod_p(p)
    return ConnectionRel(m, der, conn.basis_tag)


def substitute_t_power(f: BiSeries, m: int | Fraction) -> BiSeries:
    """``f(t) -> f(s^m)``, returned in the variable ``s`` (still printed as ``t``)."""
    m = as_fraction(m)
    terms = {(k * m.numerator, j): c for (k, j), c in f.terms.items()}
    return BiSeries(terms, f.prec, f.ram_t * m.denominator, f.ram_q)


def pullback(conn: ConnectionRel, m: int) -> ConnectionRel:
    """Pull back along ``t = s^m``.

    For ``D = t d/dt`` one has ``s d/ds = m D``, so the matrix along
    ``s d/ds`` is ``m A(s^m)``.
    """
    if conn.derivation != Derivation(T_DDT):
        raise ValueError("pullback is implemented for the plain derivation t d/dt")
    new = mx.matmap(lambda x: substitute_t_power(x, m) * m, conn.matrix)
    return ConnectionRel(new, conn.derivation, GENERAL)

