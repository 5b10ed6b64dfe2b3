"""Small dense matrices over the series rings.

Matrices are tuples of row tuples.  Entries are :class:`BiSeries`; the
helpers only use ring operations, so they work unchanged in characteristic
0 and p.  Ranks stay tiny (<= 4), so determinants use cofactor expansion.
"""

from __future__ import annotations

from fractions import Fraction
from math import inf
from typing import Callable, Sequence

from .errors import SingularGauge, UnboundedSupport
from .series import BiSeries, ModP, Scalar

Matrix = tuple[tuple[BiSeries, ...], ...]
Vector = tuple[BiSeries, ...]


def as_matrix(rows: Sequence[Sequence]) -> Matrix:
    return tuple(tuple(BiSeries.coerce(x) for x in row) for row in rows)


def as_vector(entries: Sequence) -> Vector:
    return tuple(BiSeries.coerce(x) for x in entries)


def _unit(char: int | None) -> Scalar:
    return ModP(1, char) if char else Fraction(1)


def identity(n: int, char: int | None = None, prec=inf) -> Matrix:
    one = _unit(char)
    return tuple(tuple(BiSeries.constant(one if i == j else 0, prec) for j in range(n)) for i in range(n))


def zeros(n: int, m: int | None = None, prec=inf) -> Matrix:
    return tuple(tuple(BiSeries.zero(prec) for _ in range(n if m is None else m)) for _ in range(n))


def matmul(a: Matrix, b: Matrix) -> Matrix:
    n, k, m = len(a), len(b), len(b[0])
    if len(a[0]) != k:
        raise ValueError("incompatible shapes")
    out = []
    for i in range(n):
        row = []
        for j in range(m):
            acc = a[i][0] * b[0][j]
            for l in range(1, k):
                acc = acc + a[i][l] * b[l][j]
            row.append(acc)
        out.append(tuple(row))
    return tuple(out)


def matvec(a: Matrix, v: Vector) -> Vector:
    return tuple(_dot(row, v) for row in a)


def _dot(row, v):
    acc = row[0] * v[0]
    for x, y in zip(row[1:], v[1:]):
        acc = acc + x * y
    return acc


def matadd(a: Matrix, b: Matrix) -> Matrix:
    return tuple(tuple(x + y for x, y in zip(ra, rb)) for ra, rb in zip(a, b))


def matsub(a: Matrix, b: Matrix) -> Matrix:
    return tuple(tuple(x - y for x, y in zip(ra, rb)) for ra, rb in zip(a, b))


def matscale(a: Matrix, c) -> Matrix:
    return tuple(tuple(x * c for x in row) for row in a)


def matmap(f: Callable[[BiSeries], BiSeries], a: Matrix) -> Matrix:
    return tuple(tuple(f(x) for x in row) for row in a)


def transpose(a: Matrix) -> Matrix:
    return tuple(zip(*a))


def matpow(a: Matrix, e: int) -> Matrix:
    result = identity(len(a), char_of(a))
    base = a
    while e:
        if e & 1:
            result = matmul(result, base)
        e >>= 1
        if e:
            base = matmul(base, base)
    return result


def char_of(a: Matrix) -> int | None:
    for row in a:
        for x in row:
            c = x.characteristic()
            if c is not None:
                return c
    return None


def is_zero(a: Matrix) -> bool:
    return all(x.is_zero() for row in a for x in row)


def matrix_prec(a: Matrix):
    return min(x.prec for row in a for x in row) if a else inf


def truncate(a: Matrix, prec) -> Matrix:
    return matmap(lambda x: x.truncate(prec), a)


def q_valuation(a: Matrix):
    return min(x.q_valuation() for row in a for x in row)


def det(a: Matrix) -> BiSeries:
    n = len(a)
    if n == 1:
        return a[0][0]
    if n == 2:
        return a[0][0] * a[1][1] - a[0][1] * a[1][0]
    acc = None
    for j in range(n):
        if a[0][j].is_zero():
            continue
        term = a[0][j] * det(_minor(a, 0, j))
        if j % 2:
            term = -term
        acc = term if acc is None else acc + term
    return acc if acc is not None else BiSeries.zero(matrix_prec(a))


def _minor(a: Matrix, i: int, j: int) -> Matrix:
    return tuple(tuple(x for c, x in enumerate(row) if c != j) for r, row in enumerate(a) if r != i)


def adjugate(a: Matrix) -> Matrix:
    n = len(a)
    if n == 1:
        return ((BiSeries.constant(_unit(char_of(a))),),)
    cof = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            d = det(_minor(a, i, j))
            cof[j][i] = -d if (i + j) % 2 else d
    return tuple(tuple(row) for row in cof)


def inverse(a: Matrix) -> Matrix:
    """Inverse of a q-integral matrix whose reduction mod q is invertible over K[t, t^-1].

    The reduction ``a0`` must have a monomial determinant ``c t^k``; then
    ``a0^-1 = adj(a0) / det(a0)`` exactly, and the q-adic correction is a
    Neumann series that terminates at the working precision (or because the
    correction is nilpotent, for exact input).
    """
    n = len(a)
    prec = matrix_prec(a)
    if q_valuation(a) < 0:
        raise SingularGauge("matrix has negative q-valuation")
    a0 = tuple(tuple(BiSeries.coerce(x.mod_q()) for x in row) for row in a)
    d0 = det(a0)
    if len(d0.terms) != 1:
        raise SingularGauge(f"determinant mod q is {d0!r}, not a unit of K[t, t^-1]")
    (k, j), c = next(iter(d0.terms.items()))
    d0_inv = BiSeries({(-k, -j): 1 / c}, inf, d0.ram_t, d0.ram_q)
    a0_inv = matscale(adjugate(a0), d0_inv)
    one = identity(n, char_of(a), prec)
    corr = matsub(one, matmul(a0_inv, a))
    if is_zero(corr):
        return truncate(a0_inv, prec)
    total, power = one, one
    limit = n + 1 if prec == inf else None
    steps = 0
    while True:
        power = matmul(power, corr)
        steps += 1
        if is_zero(power):
            break
        if limit is not None and steps > limit:
            raise UnboundedSupport("exact inverse is an infinite series; truncate the gauge first")
        total = matadd(total, power)
    return truncate(matmul(total, a0_inv), prec)


def equal(a: Matrix, b: Matrix) -> bool:
    return all(x == y for ra, rb in zip(a, b) for x, y in zip(ra, rb))


def congruent(a: Matrix, b: Matrix, order) -> bool:
    return all(x.congruent(y, order) for ra, rb in zip(a, b) for x, y in zip(ra, rb))


def diagonal(entries: Sequence) -> Matrix:
    n = len(entries)
    return tuple(tuple(BiSeries.coerce(entries[i]) if i == j else BiSeries.zero() for j in range(n)) for i in range(n))


def format_matrix(a: Matrix) -> str:
    return "[" + ",\n ".join("[" + ", ".join(repr(x) for x in row) + "]" for row in a) + "]"
