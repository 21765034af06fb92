import cmath
import math

import numpy as np
import pytest
from scipy.special import gammaln

from ptspec import asym
from ptspec.errors import DomainError, NotContractive
from ptspec.params import SpectralParams


def params_for(m: float, level: int = 1) -> SpectralParams:
    return SpectralParams(
        M=level, eps=m - 2.0 * level, level=level, m=m, rho=0.5 + 1.0 / m,
        omega=cmath.exp(2j * math.pi / (m + 2)),
    )


def reflection_Km(m: float) -> float:
    # analytic continuation of the Beta integral for the regularized area
    return math.gamma(1 / m) * math.gamma(-0.5 - 1 / m) / (m * math.gamma(-0.5))


@pytest.mark.parametrize("m", [1.5, 2.5, 3.0, 4.0])
def test_Km_against_reflection_oracle(m):
    assert asym.compute_Km(m) == pytest.approx(reflection_Km(m), abs=1e-9)


def test_Km_signs_and_domain():
    assert asym.compute_Km(1.5) < 0
    assert asym.compute_Km(2.5) > 0
    with pytest.raises(DomainError):
        asym.compute_Km(2.0)
    with pytest.raises(DomainError):
        asym.compute_Km(1.0)


def test_Km_quadrature_refinement_stable():
    for m in (1.5, 3.0):
        assert abs(asym._km_quadrature(m, 8) - asym._km_quadrature(m, 16)) < 1e-9


def test_c1_values():
    # Beta(1,1) = 1 through the same log-gamma route
    assert math.exp(gammaln(1.0) + gammaln(1.0) - gammaln(2.0)) == pytest.approx(1.0)
    m = 3.0
    beta = math.gamma(5 / 3) * math.gamma(5 / 6) / math.gamma(5 / 3 + 5 / 6)
    assert asym.compute_c1(m) == pytest.approx(3.0 / 32.0 * beta, rel=1e-12)


def test_phi_small_and_large():
    m = 2.5
    z = 0.01
    expect = z + z ** (m + 1) / (2 * (m + 1))
    assert abs(asym.liouville_phi(z, m) - expect) < 1e-12
    assert asym.liouville_phi(0.0, m) == 0
    big = asym.liouville_phi(1e4, 3.0)
    assert abs(big * (1e4) ** (-2.5) - 2.0 / 5.0) < 1e-3


def test_phi_branch_seams_agree():
    # same point evaluated by the series and by the bridge quadrature
    for m in (1.5, 2.5, 3.0):
        K = asym.compute_Km(m)
        x, w = np.polynomial.legendre.leggauss(40)
        z = 0.85
        t = (z + 2.0) / 2.0 + (2.0 - z) / 2.0 * x
        bridge = asym._phi_asym(2.0, m, K) - (2.0 - z) / 2.0 * np.dot(w, np.sqrt(1 + t**m))
        assert abs(complex(asym._phi_series(z, m)) - bridge) < 1e-12


def test_phi_domain_and_monotonicity():
    with pytest.raises(DomainError):
        asym.liouville_phi(-1.0 + 0j, 2.5)
    h = 1e-6
    d = (asym.liouville_phi(h, 2.5) - asym.liouville_phi(0.0, 2.5)) / h
    assert d == pytest.approx(1.0, abs=1e-6)


def test_g_limits():
    m = 2.5
    assert asym.liouville_g(1e-3, m) * (1e-3) ** (2 - m) == pytest.approx(m * (m - 1) / 4, rel=0.01)
    assert abs(asym.liouville_g(1e3, m)) * 1e6 < 1.0
    assert asym.liouville_g(0.0, 3.0) == 0.0
    assert asym.liouville_g(0.0, 1.5) == math.inf


@pytest.mark.parametrize("m", [1.5, 2.5, 3.0])
def test_g_integrates_to_twice_c1(m):
    # the full-line mass of g is twice the leading expansion coefficient
    _, wp, _, gv, u_max, _, _, g_first, dtdu, a_tail, _ = asym._picard_grid(m)
    _, wv = asym._gl01(8)
    total = float(np.sum(wp * (gv @ wv))) + u_max * float(np.dot(wv, g_first * dtdu)) + a_tail
    assert total == pytest.approx(2.0 * asym.compute_c1(m), abs=1e-10)


def test_watson_ratio():
    r100 = asym.watson_check(100.0, 2.5)
    r1000 = asym.watson_check(1000.0, 2.5)
    assert abs(r100 - 1.0) < 0.05
    assert abs(r1000 - 1.0) < abs(r100 - 1.0)
    assert abs(asym.watson_check(100.0, 1.5) - 1.0) < 0.05


def test_picard_large_mu_bound():
    m = 2.5
    _, wp, _, gv, u_max, _, _, g_first, dtdu, a_tail, _ = asym._picard_grid(m)
    _, wv = asym._gl01(8)
    g1 = float(np.sum(wp * (np.abs(gv) @ wv))) + u_max * float(
        np.dot(wv, np.abs(g_first * dtdu))
    ) + abs(a_tail)
    F = asym.picard_F0(1e4, m)
    assert abs(F - 1.0) < g1 / 2e4 * 1.1


def test_picard_not_contractive_for_small_mu():
    with pytest.raises(NotContractive):
        asym.picard_F0(0.05, 2.5)


def test_picard_deterministic():
    assert asym.picard_F0(37.0, 2.5) == asym.picard_F0(37.0, 2.5)


def test_cross_path_agreement_with_ode():
    # strongest cross-validation: Picard fixed point vs the Riccati march
    from ptspec.sibuya import eval_f

    m = 2.5
    p = params_for(m)
    K = asym.compute_Km(m)
    mu = 50.0
    lam = mu ** (1.0 / p.rho)
    fv = eval_f(lam, p)
    lhs = math.exp(fv.f.logmod + 0.25 * math.log(lam) - K * lam**p.rho) * math.cos(fv.f.phase)
    rhs = asym.picard_F0(mu, m)
    assert abs(lhs - rhs) / rhs < 1e-6


def test_psi_fit_separates_the_noninteger_power():
    m = 2.5
    mus = np.geomspace(25.0, 200.0, 25)
    vals = [asym.picard_F0(float(mu), m) for mu in mus]
    fit = asym.psi_fit(mus, vals, 2, scan=(1.7, 3.3))
    assert 2.45 <= fit.nonint_exponent <= 2.55
    c1 = asym.compute_c1(m)
    assert abs(fit.integer_coeffs[0] - c1) / c1 < 0.005
    # measured amplitude of the mu^-m term; fixes the prefactor 2^(1-m)/8
    expect = -(2.0 ** (1.0 - m)) * math.gamma(m + 1.0) / 8.0
    assert fit.nonint_coeff == pytest.approx(expect, rel=0.05)


def test_psi_fit_exponent_stable_across_windows():
    m = 2.5
    for lo, hi in ((25.0, 50.0), (50.0, 100.0), (100.0, 200.0)):
        mw = np.geomspace(lo, hi, 15)
        vw = [asym.picard_F0(float(mu), m) for mu in mw]
        fw = asym.psi_fit(mw, vw, 2, scan=(1.7, 3.3))
        assert 2.45 <= fw.nonint_exponent <= 2.55


def test_indicator_theoretical_values_and_symmetry():
    p = params_for(1.5)
    K = asym.compute_Km(1.5)
    assert asym.indicator_theoretical(0.0, p) == pytest.approx(K)
    assert asym.indicator_theoretical(math.pi, p) == pytest.approx(K * math.cos(p.rho * math.pi))
    for th in (0.3, 1.1, 2.7):
        assert asym.indicator_theoretical(th, p) == pytest.approx(
            asym.indicator_theoretical(-th, p)
        )
        for level in (1, 2):
            q = params_for(3.5 if level == 2 else 1.5, level)
            assert asym.indicator_piecewise_numerator(th, q) == pytest.approx(
                asym.indicator_piecewise_numerator(-th, q)
            )


def test_numerator_indicator_corner_at_accumulation_angle():
    p = params_for(1.5)
    corner = math.pi * (2 - p.m) / (2 + p.m)
    h = 1e-4

    def slope(th):
        return (
            asym.indicator_piecewise_numerator(th + h, p)
            - asym.indicator_piecewise_numerator(th - h, p)
        ) / (2 * h)

    jump = abs(slope(corner + 2 * h) - slope(corner - 2 * h))
    smooth = abs(slope(corner + 0.3 + 2 * h) - slope(corner + 0.3 - 2 * h))
    assert jump > 0.5
    assert smooth < 0.01


def test_indicator_estimate_validates_radii():
    with pytest.raises(DomainError):
        asym.indicator_estimate(lambda z: 0.0, 0.0, [1.0, 2.0], 1.0)
    with pytest.raises(DomainError):
        asym.indicator_estimate(lambda z: 0.0, 0.0, [1.0, 2.0, 1.5], 1.0)


def test_asr_roots_constants_and_shape():
    p = params_for(1.5)
    c = asym.make_constants(1.5)
    assert c.a > 0  # K<0 and sin(pi rho)<0 cancel
    assert c.b == pytest.approx(-c.a / 4.0)
    roots = [asym.asr_roots(n, p) for n in range(1, 8)]
    assert all(r.imag == 0 and r.real < 0 for r in roots)
    assert all(roots[i + 1].real < roots[i].real for i in range(len(roots) - 1))
    with pytest.raises(DomainError):
        asym.asr_roots(0, p)
