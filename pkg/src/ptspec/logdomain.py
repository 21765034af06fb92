"""Log-domain complex arithmetic.

Values of the connection function grow like exp(K m^... |lambda|^rho) and
overflow doubles long before the interesting lambda range is exhausted, so
every externally visible quantity is carried as (log-modulus, phase).
Phases are stored unwrapped where the producer tracks continuity; consumers
that need a principal phase reduce it themselves.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from .errors import RangeError

_EXP_LIMIT = 700.0  # exp() overflows just above 709


@dataclass(frozen=True)
class LogValue:
    """A complex number exp(logmod + i*phase).

    logmod = -inf encodes an exact zero (phase is then meaningless but kept).
    """

    logmod: float
    phase: float

    @staticmethod
    def from_complex(w: complex) -> "LogValue":
        w = complex(w)
        if w == 0:
            return LogValue(float("-inf"), 0.0)
        return LogValue(math.log(abs(w)), cmath.phase(w))

    @staticmethod
    def from_log(logw: complex) -> "LogValue":
        """Interpret a complex logarithm (possibly with unwrapped imag part)."""
        logw = complex(logw)
        return LogValue(logw.real, logw.imag)

    def to_complex(self) -> complex:
        if self.logmod == float("-inf"):
            return 0j
        if abs(self.logmod) >= _EXP_LIMIT:
            raise RangeError(f"logmod {self.logmod:.3g} outside native float range")
        return cmath.exp(complex(self.logmod, self.phase))

    def is_zero(self) -> bool:
        return self.logmod == float("-inf")

    def mul(self, other: "LogValue") -> "LogValue":
        return LogValue(self.logmod + other.logmod, self.phase + other.phase)

    def div(self, other: "LogValue") -> "LogValue":
        if other.is_zero():
            raise ZeroDivisionError("LogValue division by exact zero")
        if self.is_zero():
            return self
        return LogValue(self.logmod - other.logmod, self.phase - other.phase)

    def pow(self, k: float) -> "LogValue":
        if self.is_zero():
            return self
        return LogValue(k * self.logmod, k * self.phase)

    def conj(self) -> "LogValue":
        return LogValue(self.logmod, -self.phase)

    def neg(self) -> "LogValue":
        return LogValue(self.logmod, self.phase + math.pi)

    def scale(self, w: complex) -> "LogValue":
        """Multiply by a native complex number."""
        return self.mul(LogValue.from_complex(w))

    def abs_ratio(self, other: "LogValue") -> float:
        """|self/other| as a float, saturating instead of overflowing."""
        d = self.logmod - other.logmod
        if d >= _EXP_LIMIT:
            return float("inf")
        if d <= -_EXP_LIMIT:
            return 0.0
        return math.exp(d)

    def __repr__(self) -> str:
        return f"LogValue(logmod={self.logmod!r}, phase={self.phase!r})"


def log_sum(terms: list[LogValue]) -> tuple[LogValue, float]:
    """Sum of LogValues by max-extraction.

    Returns (sum, cancellation_margin) where the margin is
    max_term_logmod - result_logmod; a margin above ~30 means the sum lost
    most of its double-precision budget to cancellation.
    """
    live = [t for t in terms if not t.is_zero()]
    if not live:
        return LogValue(float("-inf"), 0.0), 0.0
    top = max(t.logmod for t in live)
    acc = 0j
    for t in live:
        acc += cmath.exp(complex(t.logmod - top, t.phase))
    if acc == 0:
        return LogValue(float("-inf"), 0.0), float("inf")
    out = LogValue(top + math.log(abs(acc)), cmath.phase(acc))
    return out, top - out.logmod
