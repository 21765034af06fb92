import math
from types import SimpleNamespace

import numpy as np
import pytest

from ptspec import sibuya
from ptspec.asym import make_constants, psi_fit
from ptspec.determinants import (
    _flags_and_error,
    _real_axis_zeros,
    calibrate_sign,
    eval_C,
    eval_C_many,
    eval_D,
    eval_D_many,
    eval_numerator_C,
    eval_numerator_C_many,
)
from ptspec.errors import DomainError, PoleEncountered, StepFailure
from ptspec.logdomain import LogValue
from ptspec.params import make_params, rotate_by_omega_power

from oracle_helpers import cubic_pt_levels, half_line_dirichlet_levels, quartic_levels

P15 = make_params(M=1, eps=-0.5, level=1)
P25 = make_params(M=2, eps=-1.5, level=2)
P35 = make_params(M=2, eps=-0.5, level=2)


def bisect_f_zero(p, lo, hi, floor=4e-7):
    # plain bisection; a pole trip means the trial point sits on the zero itself
    def val(t):
        return sibuya.eval_f(complex(t), p).f.to_complex().real

    vlo = val(lo)
    assert vlo * val(hi) < 0
    while hi - lo > floor:
        mid = 0.5 * (lo + hi)
        try:
            vm = val(mid)
        except (PoleEncountered, StepFailure):
            return mid
        if vm == 0.0:
            return mid
        if (vm < 0) == (vlo < 0):
            lo, vlo = mid, vm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_real_lambda_gives_real_C():
    for lam in (0.7, -2.2, 5.0, -8.5):
        dv = eval_C(lam, P15)
        assert abs(math.sin(dv.value.phase)) < 1e-7
        assert len(dv.terms) == 2


def test_real_lambda_gives_real_D():
    for lam in (0.8, 3.0, -4.0, 10.0):
        dv = eval_D(lam, P25)
        assert abs(math.sin(dv.value.phase)) < 1e-7
        assert len(dv.terms) == 3


def test_value_is_log_quotient():
    dv = eval_C(1.3 - 0.4j, P15)
    assert dv.value.logmod == pytest.approx(dv.numerator.logmod - dv.denominator.logmod, abs=1e-12)
    dphi = math.remainder(dv.value.phase - dv.numerator.phase + dv.denominator.phase, 2 * math.pi)
    assert abs(dphi) < 1e-12


def test_level_preconditions():
    with pytest.raises(DomainError):
        eval_C(1.0, P25)
    with pytest.raises(DomainError):
        eval_D(1.0, P15)


def test_no_zero_inside_accumulation_sector():
    # lambda=3 lies inside |arg| < pi/7 for m=1.5 where C stays zero-free
    dv = eval_C(3.0, P15)
    assert math.exp(dv.value.logmod) > 1.0
    assert abs(math.sin(dv.value.phase)) < 1e-7


def test_D_equals_product_of_rotated_C_minus_one():
    rng = np.random.default_rng(20)
    r = 20.0 * np.sqrt(rng.uniform(0.0, 1.0, 50))
    th = rng.uniform(-math.pi, math.pi, 50)
    lams = [complex(rr * math.cos(tt), rr * math.sin(tt)) for rr, tt in zip(r, th)]
    p1 = make_params(M=2, eps=-0.5, level=1, allow_level_mismatch=True)
    dvs = eval_D_many(lams, P35)
    cps = eval_C_many([rotate_by_omega_power(1, l, P35) for l in lams], p1)
    cms = eval_C_many([rotate_by_omega_power(-1, l, P35) for l in lams], p1)
    for dv, cp, cm in zip(dvs, cps, cms):
        lhs = dv.value.to_complex()
        rhs = cp.value.to_complex() * cm.value.to_complex() - 1.0
        assert abs(lhs - rhs) <= 1e-6 * max(1.0, abs(lhs), abs(rhs))


def test_calibration_cubic():
    em = calibrate_sign(P15)
    assert em.calibrated and em.sign_convention == 1
    assert calibrate_sign(P15) is em

    cal = make_params(M=1, eps=1.0, level=1)
    zeros = _real_axis_zeros(cal, em.sign_convention, 0.35, 9.6, 186)
    oracle = cubic_pt_levels()
    for z, e in zip(zeros[:3], oracle[:3]):
        assert abs(em.E_of_lambda(z) - e) < 2e-6 * e


def test_calibration_quartic():
    em = calibrate_sign(P25)
    assert em.calibrated and em.sign_convention == 1

    cal = make_params(M=2, eps=0.0, level=2)
    zeros = _real_axis_zeros(cal, em.sign_convention, 0.35, 9.6, 186)
    oracle = quartic_levels()
    for z, e in zip(zeros[:3], oracle[:3]):
        assert abs(em.E_of_lambda(z) - e) < 2e-6 * e


def test_eigenmap_involutive():
    em = calibrate_sign(P15)
    for e in (1.0, -2.5, 3.7 + 0.4j):
        assert em.E_of_lambda(em.lambda_of_E(e)) == e


def test_numerator_envelope_on_positive_axis():
    # N(lambda) ~ 2 sin(pi m) d rho-power envelope; the exponential rate is -K_m
    # and the algebraic factor is lambda^(-1/4 - m rho)
    K = make_constants(P15.m).K_m
    lams = np.geomspace(50.0, 500.0, 28)
    nvals = eval_numerator_C_many([complex(l) for l in lams], P15)
    logmods = np.array([nv.logmod for nv in nvals])
    cols = np.stack([np.ones_like(lams), lams**P15.rho, np.log(lams)], axis=1)
    coef, *_ = np.linalg.lstsq(cols, logmods, rcond=None)
    assert abs(coef[1] + K) < 0.02 * abs(K)
    assert abs(coef[2] + 0.25 + P15.m * P15.rho) < 0.05
    amp = 2.0 ** (2.0 - P15.m) * math.gamma(P15.m + 1.0) / 8.0
    assert abs(coef[0] - math.log(amp)) < 0.05


def test_numerator_conjugate_symmetry():
    lams = [1.2 + 0.8j, -3.0 + 2.5j, 6.0 - 4.0j]
    upper = eval_numerator_C_many(lams, P15)
    lower = eval_numerator_C_many([l.conjugate() for l in lams], P15)
    for a, b in zip(upper, lower):
        assert abs(a.logmod - b.logmod) < 1e-7
        assert abs(math.remainder(a.phase + b.phase, 2 * math.pi)) < 1e-7


def psi_tail_fit(m, n_int, scan):
    # strip the known envelope off f on the positive axis and fit the
    # remaining series for its leading non-integer power
    p = make_params(M=2, eps=m - 4.0, level=2)
    K = make_constants(m).K_m
    mus = np.geomspace(25.0, 200.0, 36)
    lams = mus ** (1.0 / p.rho)
    fvs = sibuya.eval_f_many([complex(l) for l in lams], p)
    ys = np.array(
        [
            (fv.f.to_complex() * l**0.25 * math.exp(-K * mu)).real
            for fv, l, mu in zip(fvs, lams, mus)
        ]
    )
    return psi_fit(mus, ys, n_int=n_int, scan=scan)


def test_nonint_tail_vanishes_at_integer_m():
    fit_gen = psi_tail_fit(2.5, 2, (1.7, 3.3))
    fit_int = psi_tail_fit(3.0, 3, (2.2, 3.8))
    assert fit_gen.fit_residual < 1e-8 and fit_int.fit_residual < 1e-8
    assert abs(fit_gen.nonint_exponent - 2.5) < 0.05
    d = -(2.0 ** (1.0 - 2.5)) * math.gamma(3.5) / 8.0
    assert abs(fit_gen.nonint_coeff - d) < 0.05 * abs(d)
    muref = 70.0
    size_gen = abs(fit_gen.nonint_coeff) * muref ** (2.5 - fit_gen.nonint_exponent)
    size_int = abs(fit_int.nonint_coeff) * muref ** (3.0 - fit_int.nonint_exponent)
    assert size_int < 1e-3 * size_gen


def test_level2_numerator_nonint_term():
    # window starts at lambda=20 so the third summand (doubly decaying) is dead
    lams = np.geomspace(20.0, 120.0, 36)
    dvs = eval_D_many([complex(l) for l in lams], P25)
    mus = lams**P25.rho
    w = np.array([dv.numerator.to_complex().real for dv in dvs]) * np.sqrt(lams)
    best = None
    for pexp in np.linspace(2.2, 2.8, 121):
        cols = np.stack([mus**-pexp, mus ** (-pexp - 1), mus ** (-pexp - 2)], axis=1)
        coef, *_ = np.linalg.lstsq(cols, w, rcond=None)
        resid = float(np.sqrt(np.mean((cols @ coef - w) ** 2)))
        if best is None or resid < best[0]:
            best = (resid, pexp, coef[0])
    _, pexp, lead = best
    m = P25.m
    assert abs(pexp - m) <= 0.01
    target = -(2.0 ** (2.0 - m)) * math.sin(math.pi * m) * math.gamma(m + 1.0) / 8.0
    assert abs(lead - target) < 0.05 * abs(target)


def test_numerator_vanishes_at_f_zeros():
    levels = half_line_dirichlet_levels(P15.m, 2)
    for (lo, hi), e in zip([(-2.9, -2.5), (-5.8, -5.4)], levels):
        zhat = bisect_f_zero(P15, lo, hi)
        assert abs(zhat + e) < 1e-4
        # offset keeps the endpoint log-derivative finite; the ratio bound
        # has three orders of headroom left
        dv = eval_C(zhat - 1e-6, P15)
        scale = max(t.logmod for t in dv.terms)
        assert dv.numerator.logmod - scale < math.log(1e-4)


def test_division_flag_fires_where_f_decays():
    # for m<2 the denominator decays on the positive axis while the numerator
    # terms grow, so the quotient warning must appear by lambda=10
    assert "division_near_zero" in eval_C(10.0, P15).flags
    assert "division_near_zero" not in eval_C(5.0, P15).flags
    assert "division_near_zero" not in eval_C(-2.2, P15).flags


def test_flag_thresholds():
    one = LogValue.from_complex(1.0)
    fv = SimpleNamespace(est_error=1e-12)
    flags, err = _flags_and_error((one, one), (fv, fv), 31.0, LogValue.from_complex(1e-13), 0.0)
    assert flags == ("cancellation", "division_near_zero")
    assert err == pytest.approx(math.exp(31.0) * 2e-12)
    flags, _ = _flags_and_error((one, one), (fv, fv), 29.0, one, 0.0)
    assert flags == ()
