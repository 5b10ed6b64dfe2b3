"""Exception hierarchy.

Several of these are signals rather than failures: ``AllIntegral`` tells the
caller a shearing step is unnecessary, and the ``NegativeCertificate``
subclasses carry a definitive "no" together with a witness.
"""

from __future__ import annotations

from typing import Any


class PcurvError(Exception):
    """Base class for all toolkit errors."""


class BadPrime(PcurvError, ValueError):
    def __init__(self, p: int, coefficient: Any = None, reason: str = "denominator clash"):
        self.p = p
        self.coefficient = coefficient
        self.reason = reason
        msg = f"BadPrime({p}): {reason}"
        if coefficient is not None:
            msg += f" at coefficient {coefficient}"
        super().__init__(msg)


class NotAUnit(PcurvError, ArithmeticError):
    pass


class UnboundedSupport(PcurvError, ArithmeticError):
    pass


class RamificationOverflow(PcurvError, ArithmeticError):
    pass


class CharMismatch(PcurvError, ValueError):
    pass


class NotMultiplicationOperator(PcurvError):
    """The brute-force residual ``psi_p`` acted as a differential operator."""


class SingularGauge(PcurvError, ArithmeticError):
    pass


class AllIntegral(PcurvError):
    """Every coefficient is already q-integral; no shearing is needed."""


class BoundViolated(PcurvError):
    def __init__(self, message: str, witness: Any = None):
        self.witness = witness
        super().__init__(message)


class NegativeCertificate(PcurvError):
    """A definitive negative answer at the stated truncation, with a witness."""

    kind = "NegativeCertificate"

    def __init__(self, message: str, witness: Any = None):
        self.witness = witness
        super().__init__(message)


class NotSemisimple(NegativeCertificate):
    kind = "NotSemisimple"


class IrrationalEigenvalues(NegativeCertificate):
    kind = "IrrationalEigenvalues"


class KatzCheckFailed(NegativeCertificate):
    kind = "KatzCheckFailed"


class NonzeroA0(NegativeCertificate):
    kind = "NonzeroA0"


class NumericFailure(PcurvError):
    pass


class SingularityTooClose(NumericFailure):
    pass


class NoConvergence(NumericFailure):
    pass


class OrderJump(PcurvError):
    def __init__(self, message: str, witness: Any = None):
        self.witness = witness
        super().__init__(message)


class ParseError(PcurvError, ValueError):
    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class SchemaVersionError(ParseError):
    pass


class CacheCorrupt(PcurvError):
    pass
