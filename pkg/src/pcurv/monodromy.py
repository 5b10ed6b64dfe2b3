"""Formal solutions and numerical monodromy.

Flat sections are columns ``x`` with ``delta(x) + A x = 0``.  Around a base
point ``t0`` we write ``t = t0 + y``; the connection along ``d/dy`` has
matrix ``A_y`` and the fundamental solution ``U`` with ``U(0) = I`` solves
``U' = -A_y U``, i.e. ``U_{i+1} = -sum_j A_j U_{i-j} / (i+1)``.

Monodromy is the matrix ``M`` with ``Y(end) = M Y(start)`` after continuing
a fundamental solution once counterclockwise around the loop, starting from
``Y(P) = I``.  For ``A = [c]`` along ``t d/dt`` the solution ``t^-c`` gives
``M = exp(-2 pi i c)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import inf
from typing import Sequence

import numpy as np

from . import matrix as mx
from .connection import DDT, T_DDT, ConnectionRel, Derivation
from .errors import NoConvergence, OrderJump, SingularityTooClose
from .matrix import Matrix
from .series import BiSeries, as_fraction

# ---------------------------------------------------------------------------
# Exact formal solutions
# ---------------------------------------------------------------------------


def _y_coefficient(x: BiSeries, i: int) -> BiSeries:
    # coefficient of y^i, where y lives in the t slot
    terms = {(0, j): c for k, j, c in x.items() if k == i}
    return BiSeries.from_dict(terms, x.true_prec())


def _y_truncate(x: BiSeries, order: int) -> BiSeries:
    return BiSeries.from_dict({(k, j): c for k, j, c in x.items() if k < order}, x.true_prec())


def _y_poly(coeffs: Sequence[BiSeries]) -> BiSeries:
    out = BiSeries.zero()
    for i, c in enumerate(coeffs):
        if not c.is_zero():
            out = out + c.shift(i, 0)
        elif c.true_prec() != inf:
            out = out + c
    return out


def _binomial_series(k: Fraction, order: int) -> list[Fraction]:
    """Coefficients of ``(1 + y)^k`` up to ``y^(order-1)``."""
    out = [Fraction(1)]
    for r in range(order - 1):
        out.append(out[-1] * (k - r) / (r + 1))
    return out


def _expand_at(x: BiSeries, t0: Fraction, order: int) -> BiSeries:
    """``x(t0 + y)`` as a series in ``y`` (stored in the t slot) mod ``y^order``."""
    acc: dict[tuple[int, Fraction], object] = {}
    for k, j, c in x.items():
        if k.denominator != 1 and t0 != 1:
            raise ValueError("fractional t-exponents can only be expanded at t0 = 1")
        lead = t0 ** int(k) if k.denominator == 1 else Fraction(1)
        # (t0 + y)^k = t0^k (1 + y/t0)^k
        for r, b in enumerate(_binomial_series(k, order)):
            if b:
                key = (r, j)
                acc[key] = acc.get(key, 0) + c * lead * b / t0 ** r
    return BiSeries.from_dict({kj: c for kj, c in acc.items() if c}, x.true_prec())


def _series_inverse(coeffs: list, order: int) -> list:
    inv = [1 / coeffs[0]]
    for r in range(1, order):
        s = sum(coeffs[i] * inv[r - i] for i in range(1, min(r, len(coeffs) - 1) + 1))
        inv.append(-s / coeffs[0])
    return inv


def recenter(conn: ConnectionRel, t0=1, order: int = 12) -> ConnectionRel:
    """The connection along ``d/dy`` at ``t = t0 + y``, as series in ``y`` mod ``y^order``.

    Along ``h t d/dt`` the matrix is divided by ``(t0 + y) h(t0 + y)``.
    """
    t0 = as_fraction(t0)
    if t0 == 0:
        raise SingularityTooClose("cannot recenter at t = 0")
    der = conn.derivation
    den = [Fraction(0)] * order
    if der.base == T_DDT:
        den[0], den[1] = t0, Fraction(1)
    else:
        den[0] = Fraction(1)
    if der.scale is not None:
        h = _expand_at(der.scale, t0, order)
        if any(j != 0 for _, j, _ in h.items()):
            raise ValueError("scale must not depend on q")
        hc = [Fraction(_y_coefficient(h, r).coefficient(0).coefficient(0)) for r in range(order)]
        den = [sum(den[i] * hc[r - i] for i in range(r + 1)) for r in range(order)]
    if den[0] == 0:
        raise SingularityTooClose(f"t0 = {t0} is a singular point")
    inv = _y_poly([BiSeries.constant(c) for c in _series_inverse(den, order)])
    a = mx.matmap(lambda x: _y_truncate(_expand_at(x, t0, order) * inv, order), conn.matrix)
    return ConnectionRel(a, Derivation(DDT))


@dataclass(frozen=True)
class FormalSolution:
    """``U = sum U_i y^i`` (y in the t slot) with ``U_0 = I``."""

    U: Matrix
    base_point: Fraction
    y_order: int
    q_order: Fraction | float
    conn_y: ConnectionRel

    def coefficient(self, i: int) -> Matrix:
        return mx.matmap(lambda x: _y_coefficient(x, i), self.U)

    def defect(self) -> Matrix:
        """``dU/dy + A_y U`` modulo ``y^(y_order - 1)``."""
        a = self.conn_y.matrix
        d = mx.matadd(mx.matmap(lambda x: x.ddt(), self.U), mx.matmul(a, self.U))
        return mx.matmap(lambda x: _y_truncate(x, self.y_order - 1), d)

    def evaluate(self, y: complex, q: complex = 0.0) -> np.ndarray:
        n = len(self.U)
        out = np.zeros((n, n), dtype=complex)
        for i in range(n):
            for j in range(n):
                for e, v in self.U[i][j].specialize_q(q).items():
                    out[i, j] += v * y ** int(e)
        return out


def formal_solution(a: Matrix | ConnectionRel, y_order: int, q_order=inf, base_point=0) -> FormalSolution:
    """Solve ``U' = -A U``, ``U(0) = I`` by the recursion, exactly.

    ``a`` holds series in ``y`` (t slot) and ``q``; a ConnectionRel along
    ``d/dy`` is accepted as is.
    """
    if isinstance(a, ConnectionRel):
        if a.derivation != Derivation(DDT):
            raise ValueError("formal_solution expects a connection along d/dy; use recenter first")
        conn = a
    else:
        conn = ConnectionRel(mx.as_matrix(a), Derivation(DDT))
    if q_order != inf:
        conn = conn.truncate(q_order)
    am = conn.matrix
    n = conn.rank
    for row in am:
        for x in row:
            if any(k < 0 or k.denominator != 1 for k in x.t_support()):
                raise ValueError("A must be a power series in y")
    coeffs = [mx.matmap(lambda x: _y_coefficient(x, i), am) for i in range(y_order)]
    us = [mx.identity(n, prec=q_order)]
    for i in range(y_order - 1):
        acc = mx.matmul(coeffs[0], us[i])
        for j in range(1, i + 1):
            acc = mx.matadd(acc, mx.matmul(coeffs[j], us[i - j]))
        us.append(mx.matscale(acc, Fraction(-1, i + 1)))
    u = tuple(
        tuple(_y_poly([us[k][r][c] for k in range(y_order)]) for c in range(n)) for r in range(n)
    )
    if q_order != inf:
        u = mx.truncate(u, q_order)
    return FormalSolution(u, as_fraction(base_point), y_order, q_order, conn)


# ---------------------------------------------------------------------------
# Numeric continuation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NumericConnection:
    """A connection specialised at a numeric ``q``: entries are ``{t_exp: complex}``."""

    entries: tuple[tuple[dict, ...], ...]
    base: str
    scale: dict | None

    @property
    def rank(self) -> int:
        return len(self.entries)

    def singular_points(self) -> list[complex]:
        pts = []
        neg = any(e < 0 for row in self.entries for f in row for e in f)
        if self.base == T_DDT or neg:
            pts.append(0j)
        if self.scale:
            lo = min(self.scale)
            hi = max(self.scale)
            coeffs = [self.scale.get(Fraction(k), 0j) for k in range(int(hi), int(lo) - 1, -1)]
            if len(coeffs) > 1:
                pts.extend(complex(r) for r in np.roots(coeffs))
            if lo < 0:
                pts.append(0j)
        return pts

    def matrix_at(self, t: complex) -> np.ndarray:
        n = self.rank
        out = np.zeros((n, n), dtype=complex)
        for i in range(n):
            for j in range(n):
                out[i, j] = sum(c * t ** int(e) for e, c in self.entries[i][j].items())
        den = t if self.base == T_DDT else 1.0
        if self.scale:
            den = den * sum(c * t ** int(e) for e, c in self.scale.items())
        return out / den


def specialize(conn: ConnectionRel, q: complex = 0.0) -> NumericConnection:
    for row in conn.matrix:
        for x in row:
            if any(k.denominator != 1 for k in x.t_support()):
                raise ValueError("numeric continuation needs integer t-exponents")
    entries = tuple(tuple(x.specialize_q(q) for x in row) for row in conn.matrix)
    scale = conn.derivation.scale.specialize_q(q) if conn.derivation.scale is not None else None
    return NumericConnection(entries, conn.derivation.base, scale)


def _taylor(f: dict, tc: complex, order: int) -> np.ndarray:
    """Coefficients of ``sum c t^e`` at ``t = tc + y``."""
    out = np.zeros(order, dtype=complex)
    for e, c in f.items():
        e = int(e)
        b = 1.0
        for r in range(order):
            out[r] += c * b * tc ** (e - r)
            b = b * (e - r) / (r + 1)
            if b == 0:
                break
    return out


def _local_matrix(nc: NumericConnection, tc: complex, order: int) -> np.ndarray:
    """``A_y`` at ``t = tc + y`` as an array of shape (order, n, n)."""
    n = nc.rank
    a = np.zeros((order, n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            a[:, i, j] = _taylor(nc.entries[i][j], tc, order)
    den = np.zeros(order, dtype=complex)
    if nc.base == T_DDT:
        den[0], den[1] = tc, 1.0
    else:
        den[0] = 1.0
    if nc.scale:
        h = _taylor(nc.scale, tc, order)
        den = np.convolve(den, h)[:order]
    inv = np.zeros(order, dtype=complex)
    inv[0] = 1 / den[0]
    for r in range(1, order):
        inv[r] = -np.dot(den[1:r + 1], inv[r - 1::-1][:r]) / den[0]
    out = np.zeros_like(a)
    for r in range(order):
        out[r] = np.tensordot(inv[:r + 1][::-1], a[:r + 1], axes=(0, 0))
    return out


def _transport(nc: NumericConnection, tc: complex, h: complex, max_terms: int) -> np.ndarray:
    """Fundamental matrix from ``tc`` to ``tc + h``."""
    order = 48
    while True:
        a = _local_matrix(nc, tc, order)
        n = nc.rank
        u = [np.eye(n, dtype=complex)]
        total = np.eye(n, dtype=complex)
        head = 1.0
        hp = 1.0 + 0j
        small = 0
        for i in range(order - 1):
            acc = np.zeros((n, n), dtype=complex)
            for j in range(i + 1):
                acc += a[j] @ u[i - j]
            nxt = -acc / (i + 1)
            u.append(nxt)
            hp *= h
            term = nxt * hp
            total += term
            size = np.abs(term).max()
            head = max(head, size)
            small = small + 1 if size < 1e-16 * head else 0
            if small >= 4:
                return total
        if order >= max_terms:
            raise NoConvergence(f"Taylor series at {tc} did not converge in {max_terms} terms")
        order = min(2 * order, max_terms)


def continue_solution(conn: ConnectionRel | NumericConnection, path: Sequence[complex], q: complex = 0.0,
                      step_fraction: float = 1 / 3, clearance: float = 1e-6,
                      max_terms: int = 768) -> np.ndarray:
    """Transport ``Y = I`` at ``path[0]`` along the polyline; returns ``Y(path[-1])``."""
    nc = conn if isinstance(conn, NumericConnection) else specialize(conn, q)
    sing = nc.singular_points()

    def dist(z):
        return min((abs(z - s) for s in sing), default=inf)

    pts = [complex(z) for z in path]
    y = np.eye(nc.rank, dtype=complex)
    for a, b in zip(pts, pts[1:]):
        seg = b - a
        length = abs(seg)
        pos = 0.0
        while pos < length:
            z = a + seg * (pos / length)
            d = dist(z)
            if d < clearance:
                raise SingularityTooClose(f"path passes within {d:.3g} of a singular point")
            step = min(length - pos, step_fraction * d)
            # do not jump over a singularity sitting near the segment
            y = _transport(nc, z, seg / length * step, max_terms) @ y
            pos += step
            if length - pos < 1e-15 * max(1.0, length):
                break
    return y


@dataclass(frozen=True)
class LoopSpec:
    """Counterclockwise circle ``|t - center| = radius`` sampled at ``samples`` points.

    The base point is ``center + radius``.
    """

    center: complex = 0j
    radius: float = 1.0
    samples: int = 16
    clearance: float = 1e-3

    def __post_init__(self):
        if self.radius <= 0 or self.samples < 4:
            raise ValueError("loop needs positive radius and at least 4 samples")

    @property
    def base_point(self) -> complex:
        return complex(self.center) + self.radius

    def path(self, samples: int | None = None) -> list[complex]:
        k = samples or self.samples
        return [complex(self.center) + self.radius * np.exp(2j * np.pi * s / k) for s in range(k + 1)]

    def check_clearance(self, sing: Sequence[complex]) -> None:
        for s in sing:
            if abs(abs(s - self.center) - self.radius) < self.clearance:
                raise SingularityTooClose(f"singular point {s} lies on the loop")


@dataclass
class MonodromyResult:
    M: np.ndarray
    residual: float
    order: int | None = None
    order_tolerance: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_json(self, digits: int = 12) -> dict:
        def r(z):
            z = complex(z)
            return [round(z.real, digits) + 0.0, round(z.imag, digits) + 0.0]

        return {
            "M": [[r(z) for z in row] for row in self.M],
            "residual": float(f"{float(self.residual):.3e}"),
            "order": self.order,
            "order_tolerance": self.order_tolerance,
        }


def monodromy_of_annulus(conn: ConnectionRel, loop: LoopSpec = LoopSpec(), q: complex = 0.0,
                         step_fraction: float = 1 / 3, k_max: int | None = 12,
                         tol: float = 1e-8) -> MonodromyResult:
    """Continue once around ``loop``; the residual compares with a second loop sampled differently."""
    nc = specialize(conn, q)
    loop.check_clearance(nc.singular_points())
    m1 = continue_solution(nc, loop.path(), step_fraction=step_fraction)
    m2 = continue_solution(nc, loop.path(loop.samples + 7), step_fraction=step_fraction * 0.8)
    res = MonodromyResult(m1, float(np.abs(m1 - m2).max()))
    if k_max is not None:
        k, diag = finite_order(m1, k_max, tol)
        res.order, res.order_tolerance, res.diagnostics = k, tol, diag
    return res


def finite_order(m: MonodromyResult | np.ndarray, k_max: int = 12, tol: float = 1e-8):
    """Smallest ``k <= k_max`` with ``||M^k - I|| <= tol`` (spectral norm), and eigenvalue diagnostics."""
    a = m.M if isinstance(m, MonodromyResult) else np.asarray(m, dtype=complex)
    n = a.shape[0]
    eig = np.linalg.eigvals(a)
    diag = {
        "eigenvalues": [complex(z) for z in eig],
        "modulus_defect": [float(abs(z) - 1) for z in eig],
        "angles": [str(Fraction(float(np.angle(z) / (2 * np.pi)) % 1).limit_denominator(k_max)) for z in eig],
    }
    p = np.eye(n, dtype=complex)
    for k in range(1, k_max + 1):
        p = p @ a
        if np.linalg.norm(p - np.eye(n), 2) <= tol:
            return k, diag
    return None, diag


# ---------------------------------------------------------------------------
# Families over q
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CongruenceReport:
    m: int
    samples: tuple[float, ...]
    deltas: tuple[float, ...]
    slope: float
    passed: bool
    slope_tolerance: float

    def to_json(self) -> dict:
        return {"m": self.m, "samples": list(self.samples), "deltas": [float(f"{d:.6e}") for d in self.deltas],
                "slope": self.slope if math.isfinite(self.slope) else "inf", "passed": self.passed}


def family_congruence_check(conn1: ConnectionRel, conn2: ConnectionRel, m: int, q_samples: Sequence[float],
                            loop: LoopSpec = LoopSpec(), slope_tolerance: float = 0.1,
                            floor: float = 1e-12) -> CongruenceReport:
    """Compare monodromies of two families congruent mod ``q^m``.

    The slope of ``log ||M1 - M2||`` against ``log |q|`` should be at least
    ``m``.  Differences below ``floor`` at every sample count as an
    infinite slope.
    """
    if not mx.congruent(conn1.matrix, conn2.matrix, m):
        raise ValueError(f"families are not congruent mod q^{m}")
    deltas = []
    for qs in q_samples:
        a = monodromy_of_annulus(conn1, loop, qs, k_max=None).M
        b = monodromy_of_annulus(conn2, loop, qs, k_max=None).M
        deltas.append(float(np.linalg.norm(a - b, 2)))
    usable = [(abs(qs), d) for qs, d in zip(q_samples, deltas) if d > floor]
    if len(usable) < 2:
        slope = inf if len(usable) == 0 else float("nan")
    else:
        xs = np.log([u[0] for u in usable])
        ys = np.log([u[1] for u in usable])
        slope = float(np.polyfit(xs, ys, 1)[0])
    passed = slope == inf or (math.isfinite(slope) and slope >= m - slope_tolerance)
    return CongruenceReport(m, tuple(q_samples), tuple(deltas), slope, passed, slope_tolerance)


@dataclass(frozen=True)
class PropagationVerdict:
    order: int
    samples: tuple[float, ...]
    orders: tuple[int | None, ...]
    residuals: tuple[float, ...]


def neighborhood_order_propagation(family: ConnectionRel, q_samples: Sequence[float], loop: LoopSpec = LoopSpec(),
                                   k_max: int = 12, tol: float = 1e-8) -> PropagationVerdict:
    """Check that the monodromy order is the same at every sample.

    Raises OrderJump with the per-sample orders when it is not.
    """
    orders, residuals = [], []
    for qs in q_samples:
        r = monodromy_of_annulus(family, loop, qs, k_max=k_max, tol=tol)
        orders.append(r.order)
        residuals.append(r.residual)
    found = [o for o in orders if o is not None]
    if not found or any(o != found[0] for o in orders):
        witness = [{"q": qs, "order": o, "residual": r} for qs, o, r in zip(q_samples, orders, residuals)]
        raise OrderJump("monodromy order is not constant along the family", witness=witness)
    return PropagationVerdict(found[0], tuple(q_samples), tuple(orders), tuple(residuals))
