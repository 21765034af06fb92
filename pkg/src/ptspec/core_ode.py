"""Stiff-safe integration of w'' = q(z) w along complex rays.

The state is (log w, w'/w) rather than (w, w'): the recessive solution
spans thousands of orders of magnitude over one ray, and only the log
survives in doubles.  The logarithmic derivative S obeys the Riccati
equation S' = q - S^2 and log w just integrates S, so one embedded
Cash-Karp 5(4) pair advances both.

All heavy lifting is vectorized over a batch of coefficient functions
(in practice: one ray shared by many lambda values).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import binom

from .errors import PoleEncountered, SeedError, StepFailure
from .params import SpectralParams

# Cash-Karp tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 3 / 5, 1.0, 7 / 8])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [3 / 10, -9 / 10, 6 / 5],
    [-11 / 54, 5 / 2, -70 / 27, 35 / 27],
    [1631 / 55296, 175 / 512, 575 / 13824, 44275 / 110592, 253 / 4096],
]
_B5 = np.array([37 / 378, 0.0, 250 / 621, 125 / 594, 0.0, 512 / 1771])
_B4 = np.array([2825 / 27648, 0.0, 18575 / 48384, 13525 / 55296, 277 / 14336, 1 / 4])
_BD = _B5 - _B4  # embedded error weights; applied to stages, never by subtraction

STATUS_OK = 0
STATUS_POLE = 1
STATUS_STEPFAIL = 2


@dataclass(frozen=True)
class PathSpec:
    """Directed segment z(t) = start + direction * t, t in [0, length]."""

    start: complex
    direction: complex
    length: float

    def __post_init__(self):
        if abs(abs(self.direction) - 1.0) > 1e-12:
            raise ValueError("direction must have modulus 1")
        if not self.length > 0:
            raise ValueError("length must be positive")

    def at(self, t: float) -> complex:
        return self.start + self.direction * t


def ray_inward(radius: float, angle: float) -> PathSpec:
    """Ray from radius*e^{i angle} straight to the origin."""
    d = cmath.exp(1j * angle)
    return PathSpec(start=radius * d, direction=-d, length=radius)


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-11
    abs_tol: float = 1e-13
    initial_step: float = 0.0  # 0 = choose from the seed slope
    min_step: float = 0.0  # 0 = 1e-13 * path length
    max_steps: int = 40000
    pole_guard: float = 1e8

    def __post_init__(self):
        if not (0.0 < self.rel_tol < 1.0):
            raise ValueError("rel_tol must lie in (0, 1)")


@dataclass
class OdeState:
    """log_amp = log w (phase unwrapped along the producing path), S = w'/w."""

    log_amp: complex
    S: complex
    est_error: float = 0.0


def wkb_seed(z0: complex, lam: complex, p: SpectralParams) -> OdeState:
    """State of the recessive solution at large |z0|, leading order only.

    Keeps the lambda term in the exponent for every m (it is subdominant for
    m > 2 but harmless, and required for m < 2 where it grows).
    """
    z0 = complex(z0)
    lam = complex(lam)
    m = p.m
    if abs(lam) * abs(z0) ** (-m) >= 0.1 or abs(z0) ** (-(m + 2) / 2) >= 0.1:
        raise SeedError(f"|z0| = {abs(z0):g} too small for the asymptotic seed")
    log_amp = (
        -(m / 4.0) * cmath.log(z0)
        - (2.0 / (m + 2.0)) * z0 ** ((m + 2.0) / 2.0)
        - (lam / (2.0 - m)) * z0 ** ((2.0 - m) / 2.0)
    )
    S = -(m / 4.0) / z0 - z0 ** (m / 2.0) - 0.5 * lam * z0 ** (-m / 2.0)
    # dominant omissions: log(1 + lam z0^-m)/4, the k>=2 exponent terms, and
    # the second correction order
    x = abs(lam) * abs(z0) ** (-m)
    err = (
        0.25 * x
        + 0.125 * x * x * abs(z0) ** (1.0 + m / 2.0) / (1.5 * m - 1.0)
        + (m * m / 8.0) * abs(z0) ** (-m / 2.0 - 1.0)
    )
    return OdeState(log_amp=log_amp, S=S, est_error=err)


def wkb_seed_refined(z0: complex, lams: np.ndarray, m: float, kmax: int = 40):
    """Seed with correction orders up to S4 resummed as series in lam*z0^-m.

    Returns (log_amp, S, err_estimate) with arrays over the lambda batch.
    Residual decays like |z0|^-(2m+4); at the default cutoff radius this is
    below 1e-11 for every m > 1.  Requires |lam| * |z0|^-m <= 0.5.
    """
    z0 = complex(z0)
    lams = np.asarray(lams, dtype=complex)
    x = lams * z0 ** (-m)
    if np.any(np.abs(x) > 0.5):
        raise SeedError("refined seed series needs |lambda| <= 0.5 |z0|^m")

    q0 = z0**m + lams
    qp = m * z0 ** (m - 1)
    qpp = m * (m - 1) * z0 ** (m - 2)
    qppp = m * (m - 1) * (m - 2) * z0 ** (m - 3)
    qpppp = m * (m - 1) * (m - 2) * (m - 3) * z0 ** (m - 4)

    ks = np.arange(kmax)
    xk = x[None, :] ** ks[:, None]  # (kmax, n)

    # leftover of the exact exponent integral beyond the two normalized terms
    cP = binom(0.5, ks) / (ks * m - m / 2.0 - 1.0)
    cP[:2] = 0.0
    P = z0 ** (1.0 + m / 2.0) * (cP @ xk)

    # integral of the second correction order, term by term
    cI2 = (-(m * (m - 1) / 8.0) * binom(-1.5, ks) + (5.0 * m * m / 32.0) * binom(-2.5, ks)) / (
        ks * m + m / 2.0 + 1.0
    )
    I2 = z0 ** (-m / 2.0 - 1.0) * (cI2 @ xk)

    # third order integrates in closed form
    I3 = qpp / (16.0 * q0**2) - 5.0 * qp**2 / (64.0 * q0**3)

    mu1 = m
    mu2 = m * (m - 1)
    mu3 = m * (m - 1) * (m - 2)
    mu4 = m * (m - 1) * (m - 2) * (m - 3)
    cI4 = (
        -(mu4 / 32.0) * binom(-2.5, ks)
        + ((7.0 / 32.0) * mu1 * mu3 + (5.0 / 32.0) * mu2**2) * binom(-3.5, ks)
        - (221.0 / 256.0) * mu1**2 * mu2 * binom(-4.5, ks)
        + (1105.0 / 2048.0) * mu1**4 * binom(-5.5, ks)
    ) / (ks * m + 1.5 * m + 3.0)
    I4 = z0 ** (-1.5 * m - 3.0) * (cI4 @ xk)

    log_amp = (
        -0.25 * np.log(q0)
        - (2.0 / (m + 2.0)) * z0 ** ((m + 2.0) / 2.0)
        - (lams / (2.0 - m)) * z0 ** ((2.0 - m) / 2.0)
        + P
        - I2
        - I3
        - I4
    )

    S2 = -qpp / (8.0 * q0**1.5) + 5.0 * qp**2 / (32.0 * q0**2.5)
    S3 = -qppp / (16.0 * q0**2) + (9.0 / 32.0) * qp * qpp / q0**3 - (15.0 / 64.0) * qp**3 / q0**4
    S4 = (
        -qpppp / (32.0 * q0**2.5)
        + (7.0 / 32.0) * qp * qppp / q0**3.5
        + (5.0 / 32.0) * qpp**2 / q0**3.5
        - (221.0 / 256.0) * qp**2 * qpp / q0**4.5
        + (1105.0 / 2048.0) * qp**4 / q0**5.5
    )
    S = -np.sqrt(q0) - qp / (4.0 * q0) + S2 + S3 + S4

    # next omitted order, amplified when lambda competes with z0^m
    xmax = float(np.max(np.abs(x))) if x.size else 0.0
    err = 3.0 * abs(z0) ** (-(2.0 * m + 4.0)) * (1.0 - min(xmax, 0.5)) ** -5.5
    return log_amp, S, err


def cutoff_radius(m: float, lam_abs: float) -> float:
    """Starting radius for inward integration.

    The first branch keeps the bare-seed margin comfortable at small
    |lambda|; the second stops the radius (and with it the stiffness-limited
    step count) from growing faster than the refined seed actually needs.
    """
    base = 4.0 * (40.0 + lam_abs) ** (1.0 / m)
    big = max((2.5 * lam_abs) ** (1.0 / m), 4.0 * 40.0 ** (1.0 / m))
    return max(10.0, min(base, big))


def _integrate_batch(
    qfun: Callable[[complex], np.ndarray],
    path: PathSpec,
    L0: np.ndarray,
    S0: np.ndarray,
    cfg: IntegratorConfig,
):
    """Advance the batch state along the path with common adaptive steps.

    Returns (L, S, err_acc, status).  Elements that hit the pole guard or
    block the step size are frozen and flagged rather than killing the batch.
    """
    L = np.array(L0, dtype=complex)
    S = np.array(S0, dtype=complex)
    n = L.shape[0]
    err_acc = np.zeros(n)
    status = np.full(n, STATUS_OK, dtype=int)
    active = np.ones(n, dtype=bool)

    T = path.length
    d = path.direction
    min_step = cfg.min_step if cfg.min_step > 0 else 1e-13 * T
    smax = float(np.max(np.abs(S))) if n else 0.0
    h = cfg.initial_step if cfg.initial_step > 0 else min(T / 20.0, 0.5 / (1.0 + smax))
    h = max(h, min_step)

    t = 0.0
    errold = 1.0
    # stage S values and the d-free slope q - S^2, kept as matrices so the
    # weighted sums go through single dot products
    SI = np.empty((6, n), dtype=complex)
    K = np.empty((6, n), dtype=complex)
    arows = [np.asarray(row, dtype=float) for row in _A]
    b5 = np.asarray(_B5)
    bd = np.asarray(_BD)
    steps = 0
    while T - t > 1e-14 * T:
        if steps >= cfg.max_steps:
            status[active] = STATUS_STEPFAIL
            active[:] = False
            break
        steps += 1
        h = min(h, T - t)
        hd = h * d

        with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
            for i in range(6):
                Si = S if i == 0 else S + hd * (arows[i] @ K[:i])
                SI[i] = Si
                z = path.at(t + _C[i] * h)
                K[i] = qfun(z) - Si * Si
            incL = hd * (b5 @ SI)
            incS = hd * (b5 @ K)
            L5 = L + incL
            S5 = S + incS
            bad = ~np.all(np.isfinite(SI), axis=0) | (np.abs(SI).max(axis=0) > cfg.pole_guard)
            bad |= ~np.isfinite(S5) | (np.abs(S5) > cfg.pole_guard)

            newly_poled = bad & active
            if np.any(newly_poled):
                status[newly_poled] = STATUS_POLE
                active &= ~newly_poled
                if not np.any(active):
                    break

            errL = h * np.abs(bd @ SI)
            errS = h * np.abs(bd @ K)
            scaleL = cfg.abs_tol + cfg.rel_tol * np.abs(incL)
            scaleS = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(S), np.abs(S5))
            ratio = np.where(active, np.maximum(errL / scaleL, errS / scaleS), 0.0)
        err = float(np.max(ratio)) if np.any(active) else 0.0

        if err <= 1.0:
            L = np.where(active, L5, L)
            S = np.where(active, S5, S)
            # second term: rounding floor of the running log amplitude
            err_acc = np.where(active, err_acc + errL + 2.3e-16 * np.abs(L5), err_acc)
            t += h
            fac = 0.9 * (err + 1e-30) ** -0.14 * errold**0.08
            h *= min(5.0, max(0.2, fac))
            errold = max(err, 1e-4)
        else:
            if h <= min_step * 1.0000001:
                blockers = active & (np.maximum(errL / scaleL, errS / scaleS) > 1.0)
                status[blockers] = STATUS_STEPFAIL
                active &= ~blockers
                if not np.any(active):
                    break
                h = min_step * 2.0
                continue
            h *= max(0.2, 0.9 * err**-0.2)
            h = max(h, min_step)

    return L, S, err_acc, status


def integrate(q: Callable[[complex], complex], path: PathSpec, seed: OdeState, cfg: IntegratorConfig) -> OdeState:
    """Single-coefficient front end; raises on pole or step failure."""

    def qvec(z: complex) -> np.ndarray:
        return np.array([q(z)], dtype=complex)

    L, S, err, status = _integrate_batch(
        qvec, path, np.array([seed.log_amp], dtype=complex), np.array([seed.S], dtype=complex), cfg
    )
    ray = cmath.phase(path.start) if path.start != 0 else cmath.phase(path.direction)
    if status[0] == STATUS_POLE:
        raise PoleEncountered("logarithmic derivative exceeded the pole guard", ray_angle=ray)
    if status[0] == STATUS_STEPFAIL:
        raise StepFailure("minimum step or step budget reached before path end", ray_angle=ray)
    return OdeState(log_amp=complex(L[0]), S=complex(S[0]), est_error=seed.est_error + float(err[0]))
