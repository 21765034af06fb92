"""Problem constants and exact angle bookkeeping.

Everything downstream (rays, sector rotations, eigenvalue maps) reads m, rho
and omega from one frozen object so that branch decisions never disagree
between modules over the last floating-point bit.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from .errors import DomainError

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SpectralParams:
    M: int
    eps: float
    level: int
    m: float
    rho: float
    omega: complex


def make_params(M: int, eps: float, level: int, allow_level_mismatch: bool = False) -> SpectralParams:
    """Build the constant bundle for the oscillator x^{2M}(ix)^eps.

    The auxiliary ODE normalization divides by 2-m and the seed loses all
    accuracy as m -> 1, so both m = 2 and m <= 1 are rejected outright.
    """
    if not isinstance(M, int) or isinstance(M, bool) or M < 1:
        raise DomainError(f"M must be a positive integer, got {M!r}")
    if level not in (1, 2):
        raise DomainError(f"level must be 1 or 2, got {level!r}")
    m = 2.0 * M + float(eps)
    if m <= 1.0:
        raise DomainError(f"m = 2M + eps = {m:g} <= 1: method breaks down")
    if m == 2.0:
        raise DomainError("m = 2 excluded: solution normalization divides by 2 - m")
    if level != M and not allow_level_mismatch:
        raise DomainError(
            f"level {level} != M {M}; pass allow_level_mismatch=True to study the determinant anyway"
        )
    rho = 0.5 + 1.0 / m
    omega = cmath.exp(2j * math.pi / (m + 2.0))
    return SpectralParams(M=M, eps=float(eps), level=level, m=m, rho=rho, omega=omega)


def accumulation_angle_formula(m: float, level: int) -> float:
    """Limit argument of large non-real eigenvalues, by level.

    Pure formula, evaluable even at degenerate m (m = 2 gives 0 for level 1).
    """
    if level == 1:
        return math.pi * (2.0 - m) / (2.0 + m)
    if level == 2:
        return math.pi * (4.0 - m) / (2.0 + m)
    raise DomainError(f"level must be 1 or 2, got {level!r}")


def accumulation_angles(p: SpectralParams) -> tuple[float, float]:
    theta = accumulation_angle_formula(p.m, p.level)
    return (theta, -theta)


def wrap_principal(angle: float) -> float:
    """Reduce an angle to (-pi, pi]."""
    a = math.remainder(angle, _TWO_PI)
    if a <= -math.pi:
        a += _TWO_PI
    return a


def rotate_by_omega_power(j: int, lam: complex, p: SpectralParams) -> complex:
    """omega^j * lam with the argument reduced to the principal range.

    Reduction happens on the angle, not by multiplying complex numbers, so
    the result lands on exactly the ray the branch bookkeeping dictates.
    """
    lam = complex(lam)
    if lam == 0:
        raise DomainError("rotation undefined at lambda = 0")
    ang = wrap_principal(cmath.phase(lam) + j * _TWO_PI / (p.m + 2.0))
    return abs(lam) * cmath.exp(1j * ang)


def rotate_principal(k: int, lam: complex, p: SpectralParams) -> complex:
    """omega^{2k} * lam on the principal sheet."""
    return rotate_by_omega_power(2 * k, lam, p)
