"""p-curvature in characteristic p.

For a derivation ``delta`` and connection matrix ``A`` the p-curvature
``psi_p = nabla(delta)^p - nabla(delta^p)`` is linear over functions.  Its
matrix comes from the recursion

    A_1 = A,    A_{k+1} = delta(A_k) + A A_k,

where column ``i`` of ``A_k`` is ``nabla^k e_i``.  In characteristic p the
derivation ``delta^p`` is again a multiple ``c * delta``; ``c = 1`` for
``t d/dt`` (since ``n^p = n``), ``c = 0`` for ``d/dt``, and for a scaled
derivation ``delta = a d/dt`` Hochschild's formula gives
``c = (delta^(p-2)(a))'``.  Hence ``psi_p = A_p - c A``.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from math import inf, lcm
from typing import Iterable

from sympy import primerange

from . import matrix as mx
from .connection import T_DDT, ConnectionRel, Derivation, apply_nabla, reduce_connection_mod_p
from .errors import BadPrime, CharMismatch, NotMultiplicationOperator
from .matrix import Matrix
from .series import BiSeries, ModP

VANISHES = "vanishes"
NONZERO = "nonzero"
BAD_PRIME = "bad_prime"


def _require_char(conn: ConnectionRel, p: int) -> None:
    ch = conn.field_char
    if ch != p:
        # an all-zero matrix carries no characteristic of its own
        if ch == 0 and mx.char_of(conn.matrix) is None and conn.derivation.scale is None:
            return
        raise CharMismatch(f"connection is in characteristic {ch}, expected {p}")


def delta_power_factor(derivation: Derivation, p: int) -> BiSeries:
    """The function ``c`` with ``delta^p = c * delta`` on F_p[t, t^-1]."""
    one = ModP(1, p)
    if derivation.scale is None:
        return BiSeries.constant(one if derivation.base == T_DDT else 0)
    a = derivation.on_t()
    x = a
    for _ in range(p - 2):
        x = derivation.apply(x)
    return x.ddt()


def p_curvature_matrix(conn: ConnectionRel, p: int) -> Matrix:
    """Matrix of ``psi_p`` on the coordinate basis of a characteristic-p connection."""
    _require_char(conn, p)
    a = conn.matrix
    delta = conn.derivation.apply
    ak = a
    for _ in range(p - 1):
        ak = mx.matadd(mx.matmap(delta, ak), mx.matmul(a, ak))
    c = delta_power_factor(conn.derivation, p)
    return mx.matsub(ak, mx.matscale(a, c))


def _exact_quotient(f: BiSeries, g: BiSeries) -> BiSeries:
    """``f / g`` for q-free Laurent polynomials when the division is exact."""
    if f.is_zero():
        return f
    if any(j != 0 for _, j in f.terms) or any(j != 0 for _, j in g.terms):
        raise ValueError("exact quotient is only for Laurent polynomials in t")
    rt = lcm(f.ram_t, g.ram_t)
    ft, _ = f.rescaled(rt, 1)
    gt, _ = g.rescaled(rt, 1)
    num = {k: c for (k, _), c in ft.items()}
    den = {k: c for (k, _), c in gt.items()}
    # shift to ordinary polynomials, then long division
    nlo, dlo = min(num), min(den)
    num = {k - nlo: c for k, c in num.items()}
    den = {k - dlo: c for k, c in den.items()}
    top_d = max(den)
    lead = den[top_d]
    quot = {}
    while num and max(num) >= top_d:
        top = max(num)
        c = num[top] / lead
        shift = top - top_d
        quot[shift + nlo - dlo] = c
        for k, d in den.items():
            val = num.get(k + shift, 0) - c * d
            if val:
                num[k + shift] = val
            else:
                num.pop(k + shift, None)
    if num:
        raise ArithmeticError("division is not exact")
    return BiSeries(quot and {(k, 0): c for k, c in quot.items()}, inf, rt, 1)


def p_curvature_bruteforce_oracle(conn: ConnectionRel, p: int, probes: Iterable[int] = (0, 1, 2)) -> Matrix:
    """Evaluate ``nabla(delta)^p - nabla(delta^p)`` literally on coordinate vectors.

    ``delta^p`` is identified by applying ``delta`` p times to ``t``; the
    residual is then checked to commute with multiplication by ``t^j`` for
    each probe ``j``.
    """
    _require_char(conn, p)
    n = conn.rank
    one = ModP(1, p)
    der = conn.derivation
    # delta^p as a derivation: delta^p = (delta^p(t) / delta(t)) * delta
    dp_t = BiSeries.from_dict({(1, 0): one})
    for _ in range(p):
        dp_t = der.apply(dp_t)
    ratio = _exact_quotient(dp_t, der.on_t())

    def psi(v):
        w = v
        for _ in range(p):
            w = apply_nabla(conn, w)
        lower = apply_nabla(conn, v)
        return tuple(x - ratio * y for x, y in zip(w, lower))

    def basis(i, j=0):
        return tuple(BiSeries.from_dict({(j, 0): one}) if k == i else BiSeries.zero() for k in range(n))

    cols = [psi(basis(i)) for i in range(n)]
    for j in probes:
        tj = BiSeries.from_dict({(j, 0): one})
        for i in range(n):
            got = psi(basis(i, j))
            want = tuple(tj * x for x in cols[i])
            if any(not (a - b).is_zero() for a, b in zip(got, want)):
                raise NotMultiplicationOperator(f"psi_p(t^{j} e_{i}) != t^{j} psi_p(e_{i})")
    return tuple(tuple(cols[j][i] for j in range(n)) for i in range(n))


# ---------------------------------------------------------------------------
# Reports and sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PCurvatureReport:
    p: int
    status: str
    derivation: str
    witness: tuple[int, int, str] | None = None
    reason: str | None = None
    truncation: Fraction | None = None

    def __post_init__(self):
        if self.status == NONZERO and self.witness is None:
            raise ValueError("a nonzero report needs a witness entry")

    @property
    def label(self) -> str:
        if self.status == VANISHES and self.truncation is not None:
            return f"vanishes at truncation order {self.truncation}"
        return self.status

    def to_json(self) -> dict:
        out = {"p": self.p, "status": self.status, "derivation": self.derivation}
        if self.witness is not None:
            i, j, entry = self.witness
            out["witness"] = {"row": i, "col": j, "entry": entry}
        if self.reason is not None:
            out["reason"] = self.reason
        if self.truncation is not None:
            out["truncation"] = str(self.truncation)
        return out


@dataclass(frozen=True)
class SweepSummary:
    p_min: int
    p_max: int
    reports: tuple[PCurvatureReport, ...]
    counts: dict = field(default_factory=dict)

    def __post_init__(self):
        counts = {VANISHES: 0, NONZERO: 0, BAD_PRIME: 0}
        for r in self.reports:
            counts[r.status] += 1
        object.__setattr__(self, "counts", counts)

    @property
    def primes(self) -> list[int]:
        return [r.p for r in self.reports]

    @property
    def exceptional(self) -> list[int]:
        """Primes that did not vanish, bad ones included."""
        return [r.p for r in self.reports if r.status != VANISHES]

    @property
    def bad_primes(self) -> list[int]:
        return [r.p for r in self.reports if r.status == BAD_PRIME]

    @property
    def nonzero_primes(self) -> list[int]:
        return [r.p for r in self.reports if r.status == NONZERO]

    def all_good_vanish(self) -> bool:
        return self.counts[NONZERO] == 0

    def report(self, p: int) -> PCurvatureReport:
        for r in self.reports:
            if r.p == p:
                return r
        raise KeyError(p)

    def to_json(self) -> dict:
        return {
            "prime_range": [self.p_min, self.p_max],
            "counts": dict(self.counts),
            "exceptional_primes": self.exceptional,
            "reports": [r.to_json() for r in self.reports],
        }


def _first_nonzero(m: Matrix):
    for i, row in enumerate(m):
        for j, x in enumerate(row):
            if not x.is_zero():
                return i, j, repr(x)
    return None


def p_curvature_report(conn: ConnectionRel, p: int) -> PCurvatureReport:
    """Reduce a characteristic-0 connection mod ``p`` and classify its p-curvature."""
    tag = conn.derivation.base
    trunc = conn.true_prec if conn.true_prec != inf else None
    try:
        red = reduce_connection_mod_p(conn, p)
        psi = p_curvature_matrix(red, p)
    except BadPrime as exc:
        return PCurvatureReport(p, BAD_PRIME, tag, reason=str(exc), truncation=trunc)
    w = _first_nonzero(psi)
    if w is None:
        return PCurvatureReport(p, VANISHES, tag, truncation=trunc)
    return PCurvatureReport(p, NONZERO, tag, witness=w, truncation=trunc)


def sweep_primes(conn: ConnectionRel, p_max: int, p_min: int = 2, workers: int = 1) -> SweepSummary:
    """p-curvature verdict for every prime in ``[p_min, p_max]``.

    Bad primes are recorded as such and never counted as vanishing.
    """
    if conn.field_char != 0:
        raise CharMismatch("sweep_primes expects a characteristic-0 connection")
    primes = [int(p) for p in primerange(p_min, p_max + 1)]
    if workers > 1 and len(primes) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(p_curvature_report, [conn] * len(primes), primes))
    else:
        reports = [p_curvature_report(conn, p) for p in primes]
    reports.sort(key=lambda r: r.p)
    return SweepSummary(p_min, p_max, tuple(reports))


def rank_one_closed_form(a: BiSeries, p: int) -> BiSeries:
    """``a^p + D^(p-1)(a) - a`` for a rank-1 connection along ``t d/dt`` in characteristic p."""
    x = a
    for _ in range(p - 1):
        x = x.D()
    return a ** p + x - a
