"""Evaluation of the recessive solution of y'' = (z^m + lambda) y at the origin.

f(lambda) = y0(0, lambda) and f1(lambda) = y0'(0, lambda) are obtained by
seeding the WKB state far out on an integration ray and integrating the
Riccati/log-amplitude pair inward.  Inward is the numerically stable
direction for the recessive solution, so the only care needed is ray
placement: for lambda near the negative real axis the solution has zeros
close to the positive real z-axis and the ray is nudged off it.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core_ode import (
    STATUS_OK,
    STATUS_POLE,
    IntegratorConfig,
    PathSpec,
    _integrate_batch,
    cutoff_radius,
    wkb_seed_refined,
)
from .errors import PoleEncountered, StepFailure
from .logdomain import LogValue
from .params import SpectralParams, rotate_principal

# lambda closer than this to the negative real axis gets a pre-nudged ray
_NEG_AXIS_MARGIN = 0.08
_NUDGE = 0.05
_RETRY_STEP = 0.03
_CONFIRM_STEP = 0.02
_MAX_RETRIES = 5
_EST_ERROR_CAP = 1e-6


@dataclass(frozen=True)
class FValue:
    f: LogValue
    f1: LogValue
    ray_angle: float
    est_error: float


def _default_ray(lam: complex) -> float:
    if lam == 0:
        return 0.0
    a = cmath.phase(lam)
    if a > math.pi - _NEG_AXIS_MARGIN:
        return -_NUDGE
    if a < -math.pi + _NEG_AXIS_MARGIN:
        return _NUDGE
    return 0.0


def _ray_limit(m: float) -> float:
    return min(math.pi / m, math.pi / 2.0) - 0.05


def _run_ray(lams: np.ndarray, phi: float, m: float, cfg: IntegratorConfig):
    """One shared inward path for every coefficient in lams."""
    R = cutoff_radius(m, float(np.max(np.abs(lams))))
    z0 = R * cmath.exp(1j * phi)
    L0, S0, seed_err = wkb_seed_refined(z0, lams, m)
    path = PathSpec(start=z0, direction=-cmath.exp(1j * phi), length=R)

    def q(z: complex) -> np.ndarray:
        return z**m + lams

    L, S, err, status = _integrate_batch(q, path, L0, S0, cfg)
    return L, S, err + seed_err, status


def _pack(L: complex, S: complex, phi: float, err: float) -> FValue:
    if err >= _EST_ERROR_CAP:
        raise StepFailure(f"estimated relative error {err:.2e} exceeds budget", ray_angle=phi)
    f = LogValue.from_log(L)
    return FValue(f=f, f1=f.mul(LogValue.from_complex(S)), ray_angle=phi, est_error=err)


def _retry_single(lam: complex, phi0: float, m: float, cfg: IntegratorConfig) -> FValue:
    arg = cmath.phase(lam)
    sgn = -1.0 if arg >= 0 else 1.0
    lim = _ray_limit(m)
    last_angle = phi0
    for k in range(1, _MAX_RETRIES + 1):
        phi = max(-lim, min(lim, phi0 + sgn * _RETRY_STEP * k))
        last_angle = phi
        arr = np.array([lam], dtype=complex)
        L, S, err, status = _run_ray(arr, phi, m, cfg)
        if status[0] != STATUS_OK:
            continue
        # confirm on a further-perturbed ray; the spread goes into the error
        phi2 = max(-lim, min(lim, phi + sgn * _CONFIRM_STEP))
        L2, _, err2, status2 = _run_ray(arr, phi2, m, cfg)
        spread = abs(L[0] - L2[0]) if status2[0] == STATUS_OK else 10.0 * float(err[0])
        return _pack(L[0], S[0], phi, float(err[0]) + spread)
    raise PoleEncountered(
        f"no admissible integration ray found for lambda={lam!r}", ray_angle=last_angle
    )


def eval_f_many(
    lams: Sequence[complex] | Iterable[complex],
    p: SpectralParams,
    cfg: IntegratorConfig | None = None,
) -> list[FValue]:
    """Batch evaluation; coefficients sharing a ray share one integration."""
    cfg = cfg if cfg is not None else IntegratorConfig()
    lam_list = [complex(v) for v in lams]
    out: list[FValue | None] = [None] * len(lam_list)
    groups: dict[float, list[int]] = {}
    for i, lam in enumerate(lam_list):
        groups.setdefault(_default_ray(lam), []).append(i)

    for phi, idx in groups.items():
        arr = np.array([lam_list[i] for i in idx], dtype=complex)
        L, S, err, status = _run_ray(arr, phi, p.m, cfg)
        for pos, i in enumerate(idx):
            if status[pos] == STATUS_OK:
                out[i] = _pack(L[pos], S[pos], phi, float(err[pos]))
            else:
                out[i] = _retry_single(lam_list[i], phi, p.m, cfg)
    return out  # type: ignore[return-value]


def eval_f(lam: complex, p: SpectralParams, cfg: IntegratorConfig | None = None) -> FValue:
    return eval_f_many([lam], p, cfg)[0]


def eval_f_rotated(
    k: int, lam: complex, p: SpectralParams, cfg: IntegratorConfig | None = None
) -> FValue:
    """f at the branch-reduced argument omega^(2k) lambda."""
    return eval_f(rotate_principal(k, lam, p), p, cfg)
