"""Closed-form constants, the Liouville transform, and the Picard oracle.

Everything here works on the positive ray of the auxiliary variable (or in
the sector where that ray can be rotated), independent of the ODE
integrator, so the two sides can cross-validate each other.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import binom, gammaln

from .errors import DomainError, InversionFailure, NotContractive
from .params import SpectralParams, wrap_principal

_SERIES_EDGE = 0.85
_ASYM_EDGE = 2.0


@lru_cache(maxsize=32)
def _gl(n: int):
    x, w = leggauss(n)
    return x, w


@lru_cache(maxsize=32)
def _gl01(n: int):
    x, w = leggauss(n)
    return (x + 1.0) / 2.0, w / 2.0


# ---------------------------------------------------------------------------
# constants

def compute_c1(m: float) -> float:
    """(m/32) B(2 - 1/m, 1/2 + 1/m), evaluated through log-gamma."""
    if m <= 1:
        raise DomainError("m must exceed 1")
    lb = gammaln(2.0 - 1.0 / m) + gammaln(0.5 + 1.0 / m) - gammaln(2.5)
    return float(m / 32.0 * math.exp(lb))


def _sqrt_excess_tail(z, m: float, kmax: int = 60):
    """Integral of sqrt(1+t^m) - t^(m/2) from z to infinity, term by term.

    The k=1 term reproduces the -z^((2-m)/2)/(2-m) counterterm, so the same
    series serves both m < 2 and m > 2.
    """
    ks = np.arange(1, kmax)
    coef = binom(0.5, ks) / (m * ks - m / 2.0 - 1.0)
    zz = np.asarray(z)
    zp = np.power(zz[..., None], m / 2.0 + 1.0 - m * ks)
    s = zp @ coef
    return s if zz.ndim else complex(s)


def _phi_series(z, m: float, kmax: int = 240):
    ks = np.arange(kmax)
    coef = binom(0.5, ks) / (1.0 + ks * m)
    if np.ndim(z):
        w = np.power(z[..., None], m)
        pw = w ** ks
        return z * (pw @ coef)
    w = z**m
    return z * complex(np.dot(coef, w**ks))


@lru_cache(maxsize=64)
def compute_Km(m: float) -> float:
    """Regularized area between sqrt(1+t^m) and its two-term growth."""
    if m <= 1 or m == 2.0:
        raise DomainError("K_m needs m > 1, m != 2")
    return _km_quadrature(m, 8)


def _km_quadrature(m: float, npanels: int) -> float:
    head = float(np.real(_phi_series(_SERIES_EDGE, m)))
    x, w = _gl(20)
    edges = np.linspace(_SERIES_EDGE, _ASYM_EDGE, npanels + 1)
    mid = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        t = (a + b) / 2.0 + (b - a) / 2.0 * x
        mid += (b - a) / 2.0 * float(np.dot(w, np.sqrt(1.0 + t**m)))
    grown = (2.0 / (m + 2.0)) * _ASYM_EDGE ** ((m + 2.0) / 2.0)
    tail = float(np.real(_sqrt_excess_tail(_ASYM_EDGE, m)))
    return head + mid - grown + tail


@dataclass(frozen=True)
class AsymConstants:
    K_m: float
    c1: float
    a: float
    b: float
    rho: float


def make_constants(m: float) -> AsymConstants:
    K = compute_Km(m)
    rho = 0.5 + 1.0 / m
    a = math.pi / (K * math.sin(math.pi * rho))
    return AsymConstants(K_m=K, c1=compute_c1(m), a=a, b=-a / 4.0, rho=rho)


# ---------------------------------------------------------------------------
# Liouville transform: Phi, its inverse, and g

def _phi_asym(z, m: float, K: float):
    lead = (2.0 / (m + 2.0)) * z ** ((m + 2.0) / 2.0)
    return K + lead - _sqrt_excess_tail(z, m)


def liouville_phi(z: complex, m: float) -> complex:
    """Distance variable of the Liouville map: integral of sqrt(1+t^m)."""
    if m <= 1:
        raise DomainError("m must exceed 1")
    z = complex(z)
    if z == 0:
        return 0j
    if abs(cmath.phase(z)) >= math.pi / m:
        raise DomainError("z outside the sector |arg z| < pi/m")
    az = abs(z)
    if az <= _SERIES_EDGE:
        return complex(_phi_series(z, m))
    if m == 2.0:
        # elementary antiderivative; the asymptotic split has a pole at m=2
        return 0.5 * (z * cmath.sqrt(1 + z * z) + cmath.asinh(z))
    K = compute_Km(m)
    if az >= _ASYM_EDGE:
        return complex(_phi_asym(z, m, K))
    zb = _ASYM_EDGE * cmath.exp(1j * cmath.phase(z))
    x, w = _gl(40)
    t = (z + zb) / 2.0 + (zb - z) / 2.0 * x
    seg = (zb - z) / 2.0 * complex(np.dot(w, np.sqrt(1.0 + t**m)))
    return complex(_phi_asym(zb, m, K)) - seg


def _phi_real_vec(z: np.ndarray, m: float, K: float) -> np.ndarray:
    out = np.empty_like(z)
    lo = z <= _SERIES_EDGE
    hi = z >= _ASYM_EDGE
    mid = ~(lo | hi)
    if lo.any():
        out[lo] = np.real(_phi_series(z[lo], m))
    if hi.any():
        out[hi] = np.real(_phi_asym(z[hi], m, K))
    if mid.any():
        zm = z[mid]
        x, w = _gl(40)
        t = (zm[:, None] + _ASYM_EDGE) / 2.0 + (_ASYM_EDGE - zm[:, None]) / 2.0 * x
        seg = (_ASYM_EDGE - zm) / 2.0 * (np.sqrt(1.0 + t**m) @ w)
        out[mid] = np.real(_phi_asym(_ASYM_EDGE, m, K)) - seg
    return out


def _invert_phi(zeta: np.ndarray, m: float) -> np.ndarray:
    """Newton solve of Phi(z) = zeta on the positive ray (Phi is convex)."""
    zeta = np.asarray(zeta, dtype=float)
    K = compute_Km(m)
    z = np.where(
        zeta < 1.2,
        zeta,
        ((m + 2.0) * np.maximum(zeta - K, 0.3) / 2.0) ** (2.0 / (m + 2.0)),
    )
    for _ in range(60):
        dz = (_phi_real_vec(z, m, K) - zeta) / np.sqrt(1.0 + z**m)
        z = np.maximum(z - dz, 0.0)
        if np.all(np.abs(dz) <= 1e-14 * (1.0 + z)):
            return z
    raise InversionFailure("Newton iteration for Phi^-1 did not settle")


def _g_from_z(z: np.ndarray, m: float) -> np.ndarray:
    Q = z**m + 1.0
    Qp = m * z ** (m - 1.0)
    Qpp = m * (m - 1.0) * z ** (m - 2.0)
    return -(5.0 / 16.0) * Qp**2 / Q**3 + Qpp / (4.0 * Q**2)


def _g_vec(zeta: np.ndarray, m: float) -> np.ndarray:
    return _g_from_z(_invert_phi(zeta, m), m)


def liouville_g(zeta: float, m: float) -> float:
    if zeta < 0:
        raise DomainError("zeta must be nonnegative")
    if zeta == 0.0:
        if m > 2:
            return 0.0
        return math.inf
    return float(_g_vec(np.array([zeta]), m)[0])


def _g_tail_integral(z: float, m: float, kmax: int = 40) -> float:
    """Integral of g from zeta(z) to infinity via the descending series."""
    ks = np.arange(kmax)
    coef = (m * (m - 1.0) / 4.0) * binom(-1.5, ks) - (5.0 * m**2 / 16.0) * binom(-2.5, ks)
    x = z ** (-m)
    return float(z ** (-m / 2.0 - 1.0) * np.dot(coef / (ks * m + m / 2.0 + 1.0), x**ks))


# ---------------------------------------------------------------------------
# Picard iteration for F(0, mu)

_T_MIN = 1e-6
_T_MAX = 2e4
_RATIO = 1.25
_NNODE = 8


@lru_cache(maxsize=16)
def _shift_tensor():
    v, _ = _gl01(_NNODE)
    J = np.zeros((_NNODE, _NNODE, _NNODE))
    for l in range(_NNODE):
        for j in range(l + 1):
            J[l, j, :] = binom(l, j) * v ** (l - j)
    return J


@lru_cache(maxsize=16)
def _vander_inv():
    v, _ = _gl01(_NNODE)
    V = np.vander(v, _NNODE, increasing=True)
    return np.linalg.inv(V)


def _exp_moments(b: np.ndarray, X: np.ndarray, jmax: int = _NNODE) -> np.ndarray:
    """E_j = integral of exp(-b s) s^j over [0, X], stacked over j."""
    b, X = np.broadcast_arrays(np.asarray(b, float), np.asarray(X, float))
    E = np.empty((jmax,) + b.shape)
    bx = b * X
    eb = np.exp(-np.minimum(bx, 700.0))
    E[0] = (1.0 - eb) / b
    Xp = np.ones_like(X)
    for j in range(1, jmax):
        Xp = Xp * X
        E[j] = (j * E[j - 1] - Xp * eb) / b
    small = bx < 8.0
    if small.any():
        bs = bx[small]
        Xs = X[small]
        js = np.arange(jmax)[:, None]
        acc = np.zeros((jmax, bs.size))
        term = np.ones_like(bs)
        for k in range(60):
            acc += term / (js + k + 1.0)
            term = term * (-bs) / (k + 1.0)
            if np.max(np.abs(term)) < 1e-18:
                break
        E[:, small] = Xs ** (js + 1) * acc
    return E


@lru_cache(maxsize=8)
def _picard_grid(m: float):
    n_pan = int(math.ceil(math.log(_T_MAX / _T_MIN) / math.log(_RATIO)))
    ratio = (_T_MAX / _T_MIN) ** (1.0 / n_pan)
    edges = _T_MIN * ratio ** np.arange(n_pan + 1)
    a = edges[:-1]
    wp = np.diff(edges)
    v, wv = _gl01(_NNODE)
    t = a[:, None] + wp[:, None] * v[None, :]
    g = _g_vec(t.ravel(), m).reshape(t.shape)

    gamma = 1.0 / (m - 1.0)
    u_max = _T_MIN ** (m - 1.0)
    u_nodes = u_max * v
    t_first = u_nodes**gamma
    g_first = _g_vec(t_first, m)
    dtdu = gamma * u_nodes ** (gamma - 1.0)

    zT = float(_invert_phi(np.array([_T_MAX]), m)[0])
    a_tail = _g_tail_integral(zT, m)
    g_at_T = float(_g_vec(np.array([_T_MAX]), m)[0])
    return a, wp, t, g, u_max, u_nodes, t_first, g_first, dtdu, a_tail, g_at_T


def picard_F0(mu: float, m: float, max_iter: int = 60) -> float:
    """F(0, mu) by iterating the ray integral equation to a fixed point."""
    if mu <= 0:
        raise DomainError("mu must be positive")
    a, wp, t, g, u_max, u_nodes, t_first, g_first, dtdu, a_tail, g_at_T = _picard_grid(m)
    v, wv = _gl01(_NNODE)
    Vinv = _vander_inv()
    J = _shift_tensor()
    beta = 2.0 * mu
    gamma = 1.0 / (m - 1.0)

    h_first_g = g_first * dtdu
    g_norm = float(np.sum(wp * (np.abs(g) @ wv)) + u_max * np.dot(wv, np.abs(h_first_g)) + abs(a_tail))
    if g_norm / beta >= 0.5:
        raise NotContractive(f"||g||_1/(2 mu) = {g_norm / beta:.3f} is not a contraction margin")

    # mu-dependent moment tables (F-independent, so computed once)
    bw = beta * wp
    E_own = _exp_moments(bw[:, None], (1.0 - v)[None, :])          # (j, P, node)
    E_full = _exp_moments(bw, np.ones_like(bw))                    # (j, P)
    decay_panel = np.exp(-np.minimum(bw, 700.0))
    decay_from_node = np.exp(-np.minimum(bw[:, None] * (1.0 - v)[None, :], 700.0))
    ls = np.arange(_NNODE)
    Mint = (1.0 - v[:, None] ** (ls[None, :] + 1)) / (ls[None, :] + 1.0)  # node i -> weight of c_l
    first_mom0 = (1.0 - v[:, None] ** (ls[None, :] + 1.0)) / (ls[None, :] + 1.0)
    first_mom_t = (1.0 - v[:, None] ** (ls[None, :] + gamma + 1.0)) / (ls[None, :] + gamma + 1.0)

    F_main = np.ones_like(g)
    F_first = np.ones(_NNODE)
    F_tail_T = 1.0 + a_tail / beta
    F0 = 1.0

    for _ in range(max_iter):
        h = g * F_main                                             # (P, nodes)
        c = h @ Vinv.T                                             # poly coeffs per panel
        full = wp * (c @ (1.0 / (ls + 1.0)))
        # running integral of g F from each panel start out to infinity
        SA = np.empty(len(wp) + 1)
        SA[-1] = a_tail * F_tail_T
        SA[:-1] = np.cumsum(full[::-1])[::-1] + SA[-1]
        A_main = wp[:, None] * np.einsum("il,pl->pi", Mint, c) + SA[1:][:, None]

        d = np.einsum("lji,pl->pji", J, c)
        B_own = wp[:, None] * np.einsum("pji,jpi->pi", d, E_own)
        PB = wp * np.einsum("pl,lp->p", c, E_full)
        G = np.empty(len(wp) + 1)
        G[-1] = g_at_T * F_tail_T / beta
        for q in range(len(wp) - 1, -1, -1):
            G[q] = PB[q] + decay_panel[q] * G[q + 1]
        B_main = B_own + decay_from_node * G[1:][:, None]

        # first panel, in the u = t^(m-1) variable where g dt/du is smooth
        h1 = h_first_g * F_first
        c1p = Vinv @ h1
        I0 = u_max * (first_mom0 @ c1p)
        T1 = u_max ** (gamma + 1.0) * (first_mom_t @ c1p)
        A_first = I0 + SA[0]
        B_first = (1.0 + beta * t_first) * I0 - beta * T1 + np.exp(-beta * (_T_MIN - t_first)) * G[0]

        F_main_new = 1.0 + (A_main - B_main) / beta
        F_first_new = 1.0 + (A_first - B_first) / beta

        I0_0 = u_max * float(np.dot(1.0 / (ls + 1.0), c1p))
        T1_0 = u_max ** (gamma + 1.0) * float(np.dot(1.0 / (ls + gamma + 1.0), c1p))
        B_0 = I0_0 - beta * T1_0 + math.exp(-beta * _T_MIN) * G[0]
        F0_new = 1.0 + (I0_0 + SA[0] - B_0) / beta

        delta = max(
            float(np.max(np.abs(F_main_new - F_main))),
            float(np.max(np.abs(F_first_new - F_first))),
            abs(F0_new - F0),
        )
        F_main, F_first, F0 = F_main_new, F_first_new, F0_new
        if delta < 1e-13:
            return float(F0)
    raise NotContractive("Picard iteration did not reach the fixed-point tolerance")


def watson_check(mu: float, m: float) -> float:
    """Laplace transform of g against its leading Watson term."""
    a, wp, t, g, u_max, u_nodes, t_first, g_first, dtdu, a_tail, g_at_T = _picard_grid(m)
    _, wv = _gl01(_NNODE)
    main = float(np.sum(wp * ((np.exp(-mu * t) * g) @ wv)))
    first = u_max * float(np.dot(wv, np.exp(-mu * t_first) * g_first * dtdu))
    num = main + first
    den = 0.25 * m * (m - 1.0) * math.gamma(m - 1.0) * mu ** (1.0 - m)
    return num / den


# ---------------------------------------------------------------------------
# fits

@dataclass(frozen=True)
class PsiFit:
    integer_coeffs: tuple
    nonint_exponent: float
    nonint_coeff: float
    fit_residual: float


def _psi_residual(p: float, mus: np.ndarray, y: np.ndarray, n_int: int):
    cols = [mus ** (-float(j)) for j in range(1, n_int + 1)]
    cols.append(mus ** (-p))
    A = np.stack(cols, axis=1)
    coef, _, _, _ = np.linalg.lstsq(A, y, rcond=None)
    r = y - A @ coef
    return math.sqrt(float(np.mean(r**2))), coef


def psi_fit(mus: Sequence[float], values: Sequence[float], n_int: int,
            scan: tuple = (1.2, 6.0)) -> PsiFit:
    """Separate integer inverse powers from one scanned non-integer power."""
    mus = np.asarray(list(mus), dtype=float)
    y = np.asarray(list(values), dtype=float) - 1.0
    grid = np.arange(scan[0], scan[1], 0.01)
    keep = np.ones(grid.shape, dtype=bool)
    for j in range(1, n_int + 1):
        keep &= np.abs(grid - j) >= 0.1
    grid = grid[keep]
    res = np.array([_psi_residual(p, mus, y, n_int)[0] for p in grid])
    i = int(np.argmin(res))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - inv * (hi - lo)
    x2 = lo + inv * (hi - lo)
    f1 = _psi_residual(x1, mus, y, n_int)[0]
    f2 = _psi_residual(x2, mus, y, n_int)[0]
    for _ in range(50):
        if f1 < f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - inv * (hi - lo)
            f1 = _psi_residual(x1, mus, y, n_int)[0]
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + inv * (hi - lo)
            f2 = _psi_residual(x2, mus, y, n_int)[0]
    p = (lo + hi) / 2.0
    r, coef = _psi_residual(p, mus, y, n_int)
    return PsiFit(
        integer_coeffs=tuple(float(c) for c in coef[:-1]),
        nonint_exponent=float(p),
        nonint_coeff=float(coef[-1]),
        fit_residual=r,
    )


def indicator_theoretical(theta: float, p: SpectralParams) -> float:
    return compute_Km(p.m) * math.cos(p.rho * theta)


def indicator_piecewise_numerator(theta: float, p: SpectralParams) -> float:
    """Growth rate of the dominant rotated copy after branch reduction."""
    K = compute_Km(p.m)
    step = 2.0 * math.pi / (p.m + 2.0)

    def h(angle: float) -> float:
        return K * math.cos(p.rho * wrap_principal(angle))

    if p.level == 1:
        return max(h(theta + 2 * step), h(theta - 2 * step))
    return max(
        h(theta + step) + h(theta + 3 * step),
        h(theta - step) + h(theta - 3 * step),
        h(theta + 3 * step) + h(theta - 3 * step),
    )


def indicator_estimate(func: Callable[[complex], float], theta: float,
                       radii: Sequence[float], rho: float) -> float:
    """Least-squares growth rate in r^rho; func returns log-modulus."""
    radii = list(radii)
    if len(radii) < 3 or any(b <= a for a, b in zip(radii, radii[1:])):
        raise DomainError("radii must be increasing with at least 3 entries")
    r = np.asarray(radii, dtype=float)
    y = np.array([func(ri * cmath.exp(1j * theta)) for ri in r])
    A = np.stack([np.ones_like(r), np.log(r), r**rho], axis=1)
    coef, _, _, _ = np.linalg.lstsq(A, y, rcond=None)
    return float(coef[2])


def asr_roots(n: int, p: SpectralParams) -> complex:
    """Predicted n-th zero of f on the negative axis."""
    if n < 1:
        raise DomainError("n must be at least 1")
    c = make_constants(p.m)
    an = c.a * n
    return complex(-(an ** (1.0 / c.rho) + (c.b / c.rho) * an ** (1.0 / c.rho - 1.0)))
