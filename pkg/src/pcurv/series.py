"""Exact arithmetic kernel.

Scalars are :class:`fractions.Fraction` (characteristic 0) or :class:`ModP`
(characteristic p).  On top of them sit three sparse containers:

* :class:`QSeries`     -- Laurent series in ``q`` known modulo ``q^prec``;
* :class:`LaurentPoly` -- finite Laurent polynomials in ``t``;
* :class:`BiSeries`    -- truncated elements of ``K[[q]]<t, t^-1>`` (and of
  ``K((q))<t, t^-1>`` when negative q-powers occur), stored as a map
  ``(t_exp, q_exp) -> coeff`` with one absolute q-precision.

Fractional exponents are stored as integers together with a ramification
index (``true exponent = stored / ram``).  Binary operations rescale to the
lcm of the operands' indices; constructors bring every object back to its
minimal index, so equality is structural.  Zero coefficients are never
stored.  All objects are immutable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from math import gcd, inf
from typing import Callable, Iterable, Iterator, Mapping, Union

from .errors import BadPrime, NotAUnit, RamificationOverflow, UnboundedSupport

#: Upper bound on any ramification index (t or q).  The finite extensions the
#: algorithms pass to are never bounded a priori, so we refuse to grow past it.
MAX_RAMIFICATION = 5040

Prec = Union[int, float]  # an int, or math.inf for exact objects


def _lcm(a: int, b: int) -> int:
    return a * b // gcd(a, b)


def _check_ram(r: int) -> int:
    if r < 1:
        raise ValueError(f"ramification index must be >= 1, got {r}")
    if r > MAX_RAMIFICATION:
        raise RamificationOverflow(f"ramification index {r} exceeds cap {MAX_RAMIFICATION}")
    return r


def as_fraction(x: int | Fraction | str) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


# ---------------------------------------------------------------------------
# Residues mod p
# ---------------------------------------------------------------------------


class ModP:
    """An element of the prime field F_p."""

    __slots__ = ("v", "p")

    def __init__(self, value: int | Fraction | ModP, p: int):
        if isinstance(value, ModP):
            if value.p != p:
                raise ValueError(f"cannot mix F_{value.p} and F_{p}")
            v = value.v
        elif isinstance(value, Fraction):
            if value.denominator % p == 0:
                raise BadPrime(p, value)
            v = value.numerator * pow(value.denominator, -1, p)
        else:
            v = int(value)
        self.v = v % p
        self.p = p

    def _coerce(self, other) -> ModP | None:
        if isinstance(other, ModP):
            if other.p != self.p:
                raise ValueError(f"cannot mix F_{self.p} and F_{other.p}")
            return other
        if isinstance(other, (int, Fraction)):
            return ModP(other, self.p)
        return None

    def __add__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is None else ModP(self.v + o.v, self.p)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is None else ModP(self.v - o.v, self.p)

    def __rsub__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is None else ModP(o.v - self.v, self.p)

    def __mul__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is None else ModP(self.v * o.v, self.p)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        if o.v == 0:
            raise ZeroDivisionError(f"division by zero in F_{self.p}")
        return ModP(self.v * pow(o.v, -1, self.p), self.p)

    def __rtruediv__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is None else o / self

    def __neg__(self):
        return ModP(-self.v, self.p)

    def __pow__(self, e: int):
        if e < 0:
            return ModP(pow(pow(self.v, -1, self.p), -e, self.p), self.p)
        return ModP(pow(self.v, e, self.p), self.p)

    def __bool__(self) -> bool:
        return self.v != 0

    def __eq__(self, other) -> bool:
        if isinstance(other, ModP):
            return self.p == other.p and self.v == other.v
        if isinstance(other, int):
            return (self.v - other) % self.p == 0
        if isinstance(other, Fraction):
            if other.denominator % self.p == 0:
                return False
            return self.v == ModP(other, self.p).v
        return NotImplemented

    def __hash__(self) -> int:
        return hash(("ModP", self.v, self.p))

    def __int__(self) -> int:
        return self.v

    def __repr__(self) -> str:
        return f"{self.v} (mod {self.p})"

    def __str__(self) -> str:
        return str(self.v)


Coeff = Union[Fraction, ModP]
Scalar = Union[int, Fraction, ModP]


def coeff_char(c: Coeff) -> int:
    return c.p if isinstance(c, ModP) else 0


def reduce_scalar(c: Scalar, p: int) -> ModP:
    """Reduce a rational scalar into F_p; raises :class:`BadPrime` on a denominator clash."""
    return ModP(c, p)


def _scalar(x) -> bool:
    return isinstance(x, (int, Fraction, ModP))


def _norm_scalar(x: Scalar) -> Coeff:
    return Fraction(x) if isinstance(x, int) else x


def _format_exp(e: Fraction) -> str:
    return str(e) if e.denominator == 1 else f"({e})"


def _format_coeff(c: Coeff) -> str:
    s = str(c)
    return f"({s})" if ("/" in s or s.startswith("-")) else s


# ---------------------------------------------------------------------------
# One-variable sparse containers
# ---------------------------------------------------------------------------


class _Univariate:
    """Shared machinery for :class:`LaurentPoly` and :class:`QSeries`."""

    __slots__ = ("terms", "ram", "prec")
    var = "x"

    def __init__(self, terms: Mapping[int, Scalar] | None = None, ram: int = 1, prec: Prec = inf):
        _check_ram(ram)
        if prec != inf:
            prec = int(prec)
        clean = {int(k): _norm_scalar(c) for k, c in (terms or {}).items() if c and k < prec}
        g = ram
        for k in clean:
            g = gcd(g, k)
        if prec != inf:
            g = gcd(g, prec)
        if g > 1:
            clean = {k // g: c for k, c in clean.items()}
            ram //= g
            if prec != inf:
                prec //= g
        self.terms: dict[int, Coeff] = clean
        self.ram = ram
        self.prec = prec

    # construction ---------------------------------------------------------

    @classmethod
    def _make(cls, terms, ram, prec):
        return cls(terms, ram, prec) if cls is QSeries else cls(terms, ram)

    @classmethod
    def monomial(cls, coeff: Scalar, exponent: int | Fraction = 0, **kw):
        e = as_fraction(exponent)
        return cls._make({e.numerator: coeff}, e.denominator, kw.get("prec", inf))

    # bookkeeping ----------------------------------------------------------

    def _at(self, ram: int) -> dict[int, Coeff]:
        f = ram // self.ram
        return {k * f: c for k, c in self.terms.items()} if f != 1 else self.terms

    def _prec_at(self, ram: int) -> Prec:
        return self.prec * (ram // self.ram) if self.prec != inf else inf

    def _common(self, other) -> int:
        if type(other) is not type(self):
            raise TypeError(f"cannot combine {type(self).__name__} with {type(other).__name__}")
        return _check_ram(_lcm(self.ram, other.ram))

    def rescaled(self, ram: int) -> tuple[dict[int, Coeff], Prec]:
        """Terms and precision re-expressed over ramification ``ram`` (a multiple of ``self.ram``)."""
        if ram % self.ram:
            raise ValueError(f"{ram} is not a multiple of {self.ram}")
        return dict(self._at(ram)), self._prec_at(ram)

    def is_zero(self) -> bool:
        return not self.terms

    def items(self) -> Iterator[tuple[Fraction, Coeff]]:
        """(true exponent, coefficient) pairs in increasing exponent order."""
        for k in sorted(self.terms):
            yield Fraction(k, self.ram), self.terms[k]

    def coefficient(self, exponent: int | Fraction) -> Coeff | int:
        e = as_fraction(exponent) * self.ram
        if e.denominator != 1:
            return 0
        return self.terms.get(e.numerator, 0)

    def support(self) -> list[Fraction]:
        return [Fraction(k, self.ram) for k in sorted(self.terms)]

    def characteristic(self) -> int | None:
        for c in self.terms.values():
            return coeff_char(c)
        return None

    def map_coefficients(self, f: Callable[[Coeff], Scalar]):
        return self._make({k: f(c) for k, c in self.terms.items()}, self.ram, self.prec)

    def true_prec(self) -> Fraction | float:
        return Fraction(self.prec, self.ram) if self.prec != inf else inf

    # arithmetic -----------------------------------------------------------

    def __add__(self, other):
        if _scalar(other):
            other = self.monomial(other, 0)
        elif type(other) is not type(self):
            return NotImplemented
        r = self._common(other)
        out = dict(self._at(r))
        for k, c in other._at(r).items():
            out[k] = out[k] + c if k in out else c
        return self._make(out, r, min(self._prec_at(r), other._prec_at(r)))

    __radd__ = __add__

    def __neg__(self):
        return self._make({k: -c for k, c in self.terms.items()}, self.ram, self.prec)

    def __sub__(self, other):
        if _scalar(other):
            return self + (-other)
        if type(other) is not type(self):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def valuation_stored(self) -> Prec:
        return min(self.terms) if self.terms else self.prec

    def __mul__(self, other):
        if _scalar(other):
            return self._make({k: c * other for k, c in self.terms.items()}, self.ram, self.prec)
        if type(other) is not type(self):
            return NotImplemented
        r = self._common(other)
        a, b = self._at(r), other._at(r)
        pa, pb = self._prec_at(r), other._prec_at(r)
        va = min(a) if a else pa
        vb = min(b) if b else pb
        prec = min(pa + min(vb, 0), pb + min(va, 0))
        out: dict[int, Coeff] = {}
        for k1, c1 in a.items():
            for k2, c2 in b.items():
                k = k1 + k2
                if k >= prec:
                    continue
                out[k] = out[k] + c1 * c2 if k in out else c1 * c2
        return self._make(out, r, prec)

    __rmul__ = __mul__

    def __pow__(self, e: int):
        if e < 0:
            return self.monomial_inverse() ** (-e)
        result = self.monomial(self._one_coeff(), 0, prec=inf)
        base = self
        while e:
            if e & 1:
                result = result * base
            e >>= 1
            if e:
                base = base * base
        return result

    def _one_coeff(self) -> Coeff:
        ch = self.characteristic()
        return ModP(1, ch) if ch else Fraction(1)

    def monomial_inverse(self):
        if len(self.terms) != 1 or self.prec != inf:
            raise NotAUnit(f"{self!r} is not an exact monomial")
        (k, c), = self.terms.items()
        return self._make({-k: 1 / c}, self.ram, inf)

    def is_monomial(self) -> bool:
        return len(self.terms) == 1

    def __eq__(self, other) -> bool:
        if _scalar(other):
            other = self.monomial(other, 0, prec=self.prec)
        if type(other) is not type(self):
            return NotImplemented
        return self.ram == other.ram and self.prec == other.prec and self.terms == other.terms

    def __hash__(self) -> int:
        return hash((type(self).__name__, self.ram, self.prec, frozenset(self.terms.items())))

    def __repr__(self) -> str:
        if not self.terms:
            s = "0"
        else:
            parts = []
            for e, c in self.items():
                if e == 0:
                    parts.append(str(c))
                else:
                    mono = f"{self.var}" if e == 1 else f"{self.var}^{_format_exp(e)}"
                    parts.append(mono if c == 1 else f"{_format_coeff(c)}*{mono}")
            s = " + ".join(parts)
        if self.prec != inf:
            s += f" + O({self.var}^{_format_exp(self.true_prec())})"
        return s


class LaurentPoly(_Univariate):
    """Finite Laurent polynomial in ``t`` over Q or F_p."""

    __slots__ = ()
    var = "t"

    def __init__(self, terms: Mapping[int, Scalar] | None = None, ram: int = 1):
        super().__init__(terms, ram, inf)

    @classmethod
    def from_dict(cls, coeffs: Mapping[int | Fraction, Scalar]) -> LaurentPoly:
        """Build from ``{true_exponent: coeff}``."""
        r = 1
        for e in coeffs:
            r = _lcm(r, as_fraction(e).denominator)
        return cls({int(as_fraction(e) * r): c for e, c in coeffs.items()}, r)

    def D(self) -> LaurentPoly:
        """The derivation t d/dt."""
        return LaurentPoly({k: c * Fraction(k, self.ram) for k, c in self.terms.items()}, self.ram)

    def ddt(self) -> LaurentPoly:
        r = self.ram
        return LaurentPoly({k - r: c * Fraction(k, r) for k, c in self.terms.items()}, r)

    def constant_term(self) -> Coeff | int:
        return self.terms.get(0, 0)

    def reduce_mod_p(self, p: int) -> LaurentPoly:
        return reduce_mod_p(self, p)

    def evaluate(self, x: complex) -> complex:
        return sum(complex(_to_float(c)) * _cpow(x, e) for e, c in self.items())


class QSeries(_Univariate):
    """Laurent series in ``q`` with coefficients in Q or F_p, known modulo ``q^prec``.

    ``prec`` is stored in units of ``1/ram``, like the exponents; ``math.inf``
    marks an exact (finite) series.
    """

    __slots__ = ()
    var = "q"

    def __init__(self, terms: Mapping[int, Scalar] | None = None, ram: int = 1, prec: Prec = inf):
        super().__init__(terms, ram, prec)

    @property
    def trunc(self) -> Prec:
        return self.prec

    def valuation(self) -> Fraction | float:
        v = self.valuation_stored()
        return Fraction(v, self.ram) if v != inf else inf

    def coefficients(self) -> list[Coeff]:
        """Dense list of coefficients for exponents ``0 .. prec-1`` (stored units)."""
        if self.prec == inf:
            raise UnboundedSupport("dense view needs a finite truncation order")
        if self.terms and min(self.terms) < 0:
            raise ValueError("dense view is for series with nonnegative valuation")
        zero = ModP(0, self.characteristic()) if self.characteristic() else Fraction(0)
        return [self.terms.get(k, zero) for k in range(self.prec)]

    def inverse(self) -> QSeries:
        """Inverse of a unit of ``K[[q]]`` (constant term nonzero) at the same precision."""
        c0 = self.terms.get(0)
        if not c0 or min(self.terms) < 0:
            raise NotAUnit(f"{self!r} is not a unit of K[[q]]")
        w = QSeries({k: -c / c0 for k, c in self.terms.items() if k != 0}, self.ram, self.prec)
        if self.prec == inf and not w.is_zero():
            raise UnboundedSupport("inverse of a non-constant exact series needs a truncation")
        total = QSeries({0: Fraction(1) if not coeff_char(c0) else ModP(1, c0.p)}, self.ram, self.prec)
        power = total
        while True:
            power = power * w
            if power.is_zero():
                break
            total = total + power
        return total * (1 / c0)

    def truncate(self, prec: int | Fraction) -> QSeries:
        p = as_fraction(prec) * self.ram
        r = self.ram * p.denominator
        terms, old = self.rescaled(r)
        return QSeries(terms, r, min(old, int(p * p.denominator)))

    def evaluate(self, q: complex) -> complex:
        return sum(complex(_to_float(c)) * _cpow(q, e) for e, c in self.items())

    def reduce_mod_p(self, p: int) -> QSeries:
        return reduce_mod_p(self, p)


def _to_float(c: Coeff) -> float:
    if isinstance(c, ModP):
        raise TypeError("numeric evaluation of characteristic-p data")
    return float(c)


def _cpow(x: complex, e: Fraction) -> complex:
    if e.denominator == 1:
        return complex(x) ** int(e)
    return complex(x) ** float(e)


# ---------------------------------------------------------------------------
# Bi-series
# ---------------------------------------------------------------------------


class BiSeries:
    """Truncated two-sided series in ``t`` with q-series coefficients.

    ``terms`` maps stored ``(t_exp, q_exp)`` pairs to nonzero coefficients;
    ``prec`` is the absolute q-precision (stored units of ``1/ram_q``, or
    ``inf`` for exact data).  ``t_band``, when given, is a declared
    ``(lo, hi)`` range of true t-exponents that the support must respect.
    """

    __slots__ = ("terms", "prec", "ram_t", "ram_q", "t_band")

    def __init__(
        self,
        terms: Mapping[tuple[int, int], Scalar] | None = None,
        prec: Prec = inf,
        ram_t: int = 1,
        ram_q: int = 1,
        t_band: tuple[Fraction, Fraction] | None = None,
    ):
        _check_ram(ram_t)
        _check_ram(ram_q)
        if prec != inf:
            prec = int(prec)
        clean = {(int(k), int(j)): _norm_scalar(c) for (k, j), c in (terms or {}).items() if c and j < prec}
        gt, gq = ram_t, ram_q
        for k, j in clean:
            gt = gcd(gt, k)
            gq = gcd(gq, j)
        if prec != inf:
            gq = gcd(gq, prec)
        if gt > 1 or gq > 1:
            clean = {(k // gt, j // gq): c for (k, j), c in clean.items()}
            ram_t //= gt
            ram_q //= gq
            if prec != inf:
                prec //= gq
        if t_band is not None:
            lo, hi = Fraction(t_band[0]), Fraction(t_band[1])
            for k, _ in clean:
                if not lo <= Fraction(k, ram_t) <= hi:
                    raise UnboundedSupport(f"t-exponent {Fraction(k, ram_t)} outside declared band {t_band}")
            t_band = (lo, hi)
        self.terms: dict[tuple[int, int], Coeff] = clean
        self.prec = prec
        self.ram_t = ram_t
        self.ram_q = ram_q
        self.t_band = t_band

    # construction ---------------------------------------------------------

    @classmethod
    def from_dict(cls, coeffs: Mapping[tuple, Scalar], prec: int | Fraction | float = inf) -> BiSeries:
        """Build from ``{(t_exp, q_exp): coeff}`` with true (possibly fractional) exponents."""
        rt = rq = 1
        for e, f in coeffs:
            rt = _lcm(rt, as_fraction(e).denominator)
            rq = _lcm(rq, as_fraction(f).denominator)
        if prec != inf:
            rq = _lcm(rq, as_fraction(prec).denominator)
            prec = int(as_fraction(prec) * rq)
        terms = {(int(as_fraction(e) * rt), int(as_fraction(f) * rq)): c for (e, f), c in coeffs.items()}
        return cls(terms, prec, rt, rq)

    @classmethod
    def constant(cls, c: Scalar, prec: Prec = inf) -> BiSeries:
        return cls({(0, 0): c}, prec)

    @classmethod
    def zero(cls, prec: Prec = inf) -> BiSeries:
        return cls({}, prec)

    @classmethod
    def coerce(cls, x) -> BiSeries:
        if isinstance(x, BiSeries):
            return x
        if _scalar(x):
            return cls.constant(x)
        if isinstance(x, LaurentPoly):
            return cls({(k, 0): c for k, c in x.terms.items()}, inf, x.ram, 1)
        if isinstance(x, QSeries):
            return cls({(0, j): c for j, c in x.terms.items()}, x.prec, 1, x.ram)
        raise TypeError(f"cannot coerce {type(x).__name__} to BiSeries")

    def _make(self, terms, prec, ram_t, ram_q) -> BiSeries:
        return BiSeries(terms, prec, ram_t, ram_q)

    # bookkeeping ----------------------------------------------------------

    def rescaled(self, ram_t: int, ram_q: int) -> tuple[dict[tuple[int, int], Coeff], Prec]:
        """Terms and precision over ramification indices that are multiples of ours."""
        if ram_t % self.ram_t or ram_q % self.ram_q:
            raise ValueError("target ramification must be a multiple of the current one")
        ft, fq = ram_t // self.ram_t, ram_q // self.ram_q
        terms = {(k * ft, j * fq): c for (k, j), c in self.terms.items()} if ft != 1 or fq != 1 else dict(self.terms)
        return terms, (self.prec * fq if self.prec != inf else inf)

    def _common(self, other: BiSeries):
        rt = _check_ram(_lcm(self.ram_t, other.ram_t))
        rq = _check_ram(_lcm(self.ram_q, other.ram_q))
        a, pa = self.rescaled(rt, rq)
        b, pb = other.rescaled(rt, rq)
        return a, pa, b, pb, rt, rq

    def is_zero(self) -> bool:
        return not self.terms

    @property
    def trunc(self) -> Prec:
        return self.prec

    def true_prec(self) -> Fraction | float:
        return Fraction(self.prec, self.ram_q) if self.prec != inf else inf

    def characteristic(self) -> int | None:
        for c in self.terms.values():
            return coeff_char(c)
        return None

    def items(self) -> Iterator[tuple[Fraction, Fraction, Coeff]]:
        """(t exponent, q exponent, coefficient) in true exponents, sorted."""
        for k, j in sorted(self.terms):
            yield Fraction(k, self.ram_t), Fraction(j, self.ram_q), self.terms[(k, j)]

    def t_support(self) -> list[Fraction]:
        return sorted({Fraction(k, self.ram_t) for k, _ in self.terms})

    def q_valuation(self) -> Fraction | float:
        if not self.terms:
            return self.true_prec()
        return Fraction(min(j for _, j in self.terms), self.ram_q)

    def coefficient(self, t_exp: int | Fraction) -> QSeries:
        """The q-series multiplying ``t^t_exp``."""
        e = as_fraction(t_exp) * self.ram_t
        if e.denominator != 1:
            return QSeries({}, self.ram_q, self.prec)
        k0 = e.numerator
        return QSeries({j: c for (k, j), c in self.terms.items() if k == k0}, self.ram_q, self.prec)

    def q_coefficient(self, q_exp: int | Fraction) -> LaurentPoly:
        """The Laurent polynomial in ``t`` multiplying ``q^q_exp``."""
        e = as_fraction(q_exp) * self.ram_q
        if e.denominator != 1:
            return LaurentPoly()
        if self.prec != inf and e.numerator >= self.prec:
            raise ValueError(f"q^{q_exp} is beyond the truncation order")
        j0 = e.numerator
        return LaurentPoly({k: c for (k, j), c in self.terms.items() if j == j0}, self.ram_t)

    def q_exponents(self) -> list[Fraction]:
        return sorted({Fraction(j, self.ram_q) for _, j in self.terms})

    def is_constant_in_t(self) -> bool:
        return all(k == 0 for k, _ in self.terms)

    def constant_in_t(self) -> BiSeries:
        return BiSeries({kj: c for kj, c in self.terms.items() if kj[0] == 0}, self.prec, self.ram_t, self.ram_q)

    def truncate(self, prec: int | Fraction | float) -> BiSeries:
        """Forget everything at or beyond ``q^prec`` (true exponent)."""
        if prec == inf:
            return self
        p = as_fraction(prec)
        rq = _check_ram(_lcm(self.ram_q, p.denominator))
        terms, old = self.rescaled(self.ram_t, rq)
        return BiSeries(terms, min(old, int(p * rq)), self.ram_t, rq)

    def mod_q(self) -> LaurentPoly:
        """Reduction modulo ``q`` (requires q-integral data)."""
        if self.terms and min(j for _, j in self.terms) < 0:
            raise ValueError("reduction mod q of a non-integral series")
        return self.q_coefficient(0) if (self.prec == inf or self.prec > 0) else LaurentPoly()

    def map_coefficients(self, f: Callable[[Coeff], Scalar]) -> BiSeries:
        return BiSeries({kj: f(c) for kj, c in self.terms.items()}, self.prec, self.ram_t, self.ram_q)

    def with_ramification(self, ram_t: int, ram_q: int) -> tuple[dict, Prec]:
        return self.rescaled(ram_t, ram_q)

    # arithmetic -----------------------------------------------------------

    def __add__(self, other):
        try:
            other = BiSeries.coerce(other)
        except TypeError:
            return NotImplemented
        a, pa, b, pb, rt, rq = self._common(other)
        for kj, c in b.items():
            a[kj] = a[kj] + c if kj in a else c
        return BiSeries(a, min(pa, pb), rt, rq)

    __radd__ = __add__

    def __neg__(self) -> BiSeries:
        return BiSeries({kj: -c for kj, c in self.terms.items()}, self.prec, self.ram_t, self.ram_q)

    def __sub__(self, other):
        try:
            other = BiSeries.coerce(other)
        except TypeError:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if _scalar(other):
            return BiSeries({kj: c * other for kj, c in self.terms.items()}, self.prec, self.ram_t, self.ram_q)
        try:
            other = BiSeries.coerce(other)
        except TypeError:
            return NotImplemented
        a, pa, b, pb, rt, rq = self._common(other)
        va = min(j for _, j in a) if a else pa
        vb = min(j for _, j in b) if b else pb
        prec = min(pa + min(vb, 0), pb + min(va, 0))
        out: dict[tuple[int, int], Coeff] = {}
        b_items = list(b.items())
        for (k1, j1), c1 in a.items():
            for (k2, j2), c2 in b_items:
                j = j1 + j2
                if j >= prec:
                    continue
                key = (k1 + k2, j)
                out[key] = out[key] + c1 * c2 if key in out else c1 * c2
        result = BiSeries(out, prec, rt, rq)
        if self.t_band is not None and other.t_band is not None:
            band = (self.t_band[0] + other.t_band[0], self.t_band[1] + other.t_band[1])
            result = BiSeries(result.terms, result.prec, result.ram_t, result.ram_q, band)
        return result

    __rmul__ = __mul__

    def __pow__(self, e: int) -> BiSeries:
        if e < 0:
            return geometric_inverse(self) ** (-e)
        result = BiSeries.constant(self._one())
        base = self
        while e:
            if e & 1:
                result = result * base
            e >>= 1
            if e:
                base = base * base
        return result

    def _one(self) -> Coeff:
        ch = self.characteristic()
        return ModP(1, ch) if ch else Fraction(1)

    def shift(self, t_exp: int | Fraction = 0, q_exp: int | Fraction = 0) -> BiSeries:
        """Multiply by the monomial ``t^t_exp q^q_exp``."""
        return self * BiSeries.from_dict({(t_exp, q_exp): 1})

    def D(self) -> BiSeries:
        """The derivation t d/dt."""
        return BiSeries({(k, j): c * Fraction(k, self.ram_t) for (k, j), c in self.terms.items()},
                        self.prec, self.ram_t, self.ram_q)

    def ddt(self) -> BiSeries:
        r = self.ram_t
        return BiSeries({(k - r, j): c * Fraction(k, r) for (k, j), c in self.terms.items()},
                        self.prec, r, self.ram_q)

    def __eq__(self, other) -> bool:
        if _scalar(other) or isinstance(other, (LaurentPoly, QSeries)):
            other = BiSeries.coerce(other)
            other = BiSeries(other.terms, self.prec, other.ram_t, other.ram_q)
        if not isinstance(other, BiSeries):
            return NotImplemented
        return (self.prec == other.prec and self.ram_t == other.ram_t
                and self.ram_q == other.ram_q and self.terms == other.terms)

    def __hash__(self) -> int:
        return hash(("BiSeries", self.prec, self.ram_t, self.ram_q, frozenset(self.terms.items())))

    def congruent(self, other, order: int | Fraction) -> bool:
        """True iff ``self - other`` vanishes modulo ``q^order``."""
        diff = (self - BiSeries.coerce(other))
        v = diff.q_valuation()
        return v >= order

    # numeric specialisation ------------------------------------------------

    def specialize_q(self, q: complex) -> dict[Fraction, complex]:
        """Evaluate the q-coefficients at a numeric ``q``: ``{t_exp: complex}``."""
        out: dict[Fraction, complex] = {}
        for e, f, c in self.items():
            out[e] = out.get(e, 0j) + complex(_to_float(c)) * _cpow(q, f)
        return out

    def reduce_mod_p(self, p: int) -> BiSeries:
        return reduce_mod_p(self, p)

    def __repr__(self) -> str:
        if not self.terms:
            s = "0"
        else:
            parts = []
            for e, f, c in self.items():
                mono = []
                if f != 0:
                    mono.append("q" if f == 1 else f"q^{_format_exp(f)}")
                if e != 0:
                    mono.append("t" if e == 1 else f"t^{_format_exp(e)}")
                m = "*".join(mono)
                if not m:
                    parts.append(str(c))
                else:
                    parts.append(m if c == 1 else f"{_format_coeff(c)}*{m}")
            s = " + ".join(parts)
        if self.prec != inf:
            s += f" + O(q^{_format_exp(self.true_prec())})"
        return s


# ---------------------------------------------------------------------------
# Valuation profile
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValProfile:
    """Per-t-exponent q-adic valuations, stored as integers over ``ram_t``/``ram_q``."""

    entries: tuple[tuple[int, int], ...]
    ram_t: int = 1
    ram_q: int = 1

    def true_entries(self) -> list[tuple[Fraction, Fraction]]:
        return [(Fraction(k, self.ram_t), Fraction(v, self.ram_q)) for k, v in self.entries]

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)


# ---------------------------------------------------------------------------
# Functional API
# ---------------------------------------------------------------------------


def add(a: BiSeries, b: BiSeries) -> BiSeries:
    return BiSeries.coerce(a) + BiSeries.coerce(b)


def mul(a: BiSeries, b: BiSeries) -> BiSeries:
    return BiSeries.coerce(a) * BiSeries.coerce(b)


def derivation_D(f):
    """Apply ``t d/dt``; ``t^k`` goes to ``k t^k`` with ``k`` read as the true exponent."""
    return f.D()


def geometric_inverse(u: BiSeries, prec: int | Fraction | float = inf) -> BiSeries:
    """Invert a bi-series that is a nonzero t-constant modulo ``q``.

    Writes ``u = c (1 - w)`` with ``w`` divisible by a positive power of ``q``
    and sums the geometric series up to the working precision, which is the
    smaller of ``u.prec`` and ``prec``.
    """
    u = BiSeries.coerce(u)
    if prec != inf:
        u = u.truncate(prec)
    if u.terms and min(j for _, j in u.terms) < 0:
        raise NotAUnit(f"{u!r} has negative q-valuation")
    c = u.terms.get((0, 0))
    if not c or any(j == 0 and k != 0 for k, j in u.terms):
        raise NotAUnit(f"{u!r} is not a nonzero constant modulo q")
    inv_c = 1 / c
    w = BiSeries({kj: -a * inv_c for kj, a in u.terms.items() if kj != (0, 0)}, u.prec, u.ram_t, u.ram_q)
    if w.is_zero():
        return BiSeries({(0, 0): inv_c}, u.prec, u.ram_t, u.ram_q)
    if u.prec == inf:
        raise UnboundedSupport("inverse of an exact non-constant unit has infinite support; give a truncation")
    total = BiSeries({(0, 0): u._one()}, u.prec, u.ram_t, u.ram_q)
    power = total
    while True:
        power = power * w
        if power.is_zero():
            break
        total = total + power
    return total * inv_c


def q_valuation_profile(f: BiSeries) -> ValProfile:
    f = BiSeries.coerce(f)
    best: dict[int, int] = {}
    for (k, j) in f.terms:
        if k not in best or j < best[k]:
            best[k] = j
    return ValProfile(tuple(sorted(best.items())), f.ram_t, f.ram_q)


def reduce_mod_p(f, p: int):
    """Coefficient-wise reduction into F_p.

    Raises :class:`BadPrime` naming the first offending coefficient, which
    tells a sweep that ``p`` has to be excluded.
    """
    def red(c: Coeff) -> ModP:
        if isinstance(c, ModP):
            if c.p != p:
                raise ValueError(f"already reduced modulo {c.p}")
            return c
        if c.denominator % p == 0:
            raise BadPrime(p, c)
        return ModP(c, p)

    if _scalar(f):
        return red(_norm_scalar(f))
    return f.map_coefficients(red)


def rescale_ramification(f: BiSeries, factor: int) -> tuple[dict, Prec, int, int]:
    """Express ``f`` over ``(factor*ram_t, factor*ram_q)``; the inverse is the canonical constructor."""
    return (*f.rescaled(f.ram_t * factor, f.ram_q * factor), f.ram_t * factor, f.ram_q * factor)


def t(exp: int | Fraction = 1) -> BiSeries:
    """Shorthand for the monomial ``t^exp``."""
    return BiSeries.from_dict({(exp, 0): 1})


def q(exp: int | Fraction = 1) -> BiSeries:
    """Shorthand for the monomial ``q^exp``."""
    return BiSeries.from_dict({(0, exp): 1})


def lcm_all(values: Iterable[int]) -> int:
    return math.lcm(*values)
