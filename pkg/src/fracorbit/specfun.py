"""Gamma and Mittag-Leffler functions.

The Mittag-Leffler function

.. math::

    E_{\\beta,\\mu}(z) = \\sum_{\\ell=0}^\\infty \\frac{z^\\ell}{\\Gamma(\\beta\\ell+\\mu)}

is evaluated by one of three branches, picked per argument:

* Taylor series for small ``|z|`` (compensated summation),
* the asymptotic expansion plus the exponential (pole) contributions for
  large ``|z|`` whenever the truncated expansion reaches the requested
  tolerance,
* otherwise the inverse Laplace transform of ``s^(beta-mu)/(s^beta - z)``
  collapsed onto the branch cut of ``s^beta``, plus pole residues.

The solvers only ever need arguments on or near the negative real axis,
which is where the branches are validated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc

DEFAULT_TOL = 1.0e-12
Z_MAX = 1.0e8

# series is used when |z| <= SERIES_MAX_ABS and |z|^(1/beta) <= SERIES_MAX_GROWTH
SERIES_MAX_ABS = 5.0
SERIES_MAX_GROWTH = 3.5
SERIES_MAX_TERMS = 400
ASYMPTOTIC_MIN_ABS = 12.0
ASYMPTOTIC_MAX_TERMS = 60

# branch-cut quadrature: log-variable panels on [ln(CUT_LOW), ln(CUT_HIGH)]
CUT_LOW = 1.0e-3
CUT_HIGH = 45.0
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)

_LANCZOS_G = 7.0
_LANCZOS_COEF = np.array(
    [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ]
)
_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _lanczos(x):
    # Gamma(x) for x >= 0.5
    xm = x - 1.0
    a = np.full_like(xm, _LANCZOS_COEF[0])
    for i in range(1, len(_LANCZOS_COEF)):
        a = a + _LANCZOS_COEF[i] / (xm + i)
    t = xm + _LANCZOS_G + 0.5
    with np.errstate(over="ignore", under="ignore"):
        h = t ** ((xm + 0.5) / 2.0)
        return _SQRT_2PI * a * h * (np.exp(-t) * h)


def gamma(x):
    """Gamma function of real argument (Lanczos, g=7, n=9).

    Relative error is below 1e-13 for ``|x| <= 170``. Poles (non-positive
    integers) return ``inf``.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.empty_like(x)
    right = x >= 0.5
    out[right] = _lanczos(x[right])
    left = ~right
    if np.any(left):
        xl = x[left]
        with np.errstate(divide="ignore"):
            s = np.sin(np.pi * xl)
            vals = np.pi / (s * _lanczos(1.0 - xl))
        vals[xl == np.round(xl)] = np.inf
        out[left] = vals
    return out[0] if scalar else out


def rgamma(x):
    """Reciprocal Gamma function; exactly zero at the poles of Gamma."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.zeros_like(x)
    pole = (x <= 0) & (x == np.round(x))
    big = x > 171.0
    reg = ~pole & ~big
    out[reg] = 1.0 / gamma(x[reg])
    if np.any(big):
        out[big] = np.exp(-_lgamma_large(x[big]))
    return out[0] if scalar else out


def _lgamma_large(x):
    xm = x - 1.0
    a = np.full_like(xm, _LANCZOS_COEF[0])
    for i in range(1, len(_LANCZOS_COEF)):
        a = a + _LANCZOS_COEF[i] / (xm + i)
    t = xm + _LANCZOS_G + 0.5
    return math.log(_SQRT_2PI) + (xm + 0.5) * np.log(t) - t + np.log(a)


@dataclass(frozen=True)
class MLParams:
    """Parameters of a two-parameter Mittag-Leffler function."""

    beta: float
    mu: float = 1.0
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        _check_params(self.beta, self.mu)
        if not 0.0 < self.tol <= 1.0e-6:
            raise ValueError(f"tol must lie in (0, 1e-6], got {self.tol}")

    def __call__(self, z):
        return mittag_leffler(z, self.beta, self.mu, tol=self.tol)


class MittagLefflerConvergenceError(ArithmeticError):
    pass


def _check_params(beta, mu):
    if not 0.0 < beta <= 2.0:
        raise ValueError(f"beta must lie in (0, 2], got {beta}")
    if not mu > 0.0:
        raise ValueError(f"mu must be positive, got {mu}")


def mittag_leffler(z, beta, mu=1.0, *, tol=DEFAULT_TOL, method="auto"):
    """Evaluate :math:`E_{\\beta,\\mu}(z)`.

    Parameters
    ----------
    z : array_like
        Real or complex arguments. Real input gives real output.
    beta : float
        Order in (0, 2].
    mu : float
        Second parameter, > 0.
    tol : float
        Relative accuracy target used by the series and asymptotic
        branches to decide truncation.
    method : {"auto", "series", "asymptotic", "integral"}
        Force one branch; meant for cross-checking branches against each
        other.

    Returns
    -------
    ndarray or scalar
    """
    _check_params(beta, mu)
    z_in = np.asarray(z)
    is_complex = np.iscomplexobj(z_in)
    zc = np.atleast_1d(z_in).astype(complex).ravel()
    out = _ml_complex(zc, float(beta), float(mu), tol, method)
    out = out.reshape(z_in.shape)
    if not is_complex:
        out = out.real
    return out[()] if out.ndim == 0 else out


def _closed_form(z, beta, mu):
    if beta == 1.0 and mu == 1.0:
        return np.exp(z)
    if beta == 1.0 and mu == 2.0:
        out = np.ones_like(z)
        nz = z != 0
        out[nz] = np.expm1(z[nz]) / z[nz]
        return out
    if beta == 2.0 and mu == 1.0:
        return np.cosh(np.sqrt(z))
    if beta == 2.0 and mu == 2.0:
        out = np.ones_like(z)
        nz = z != 0
        r = np.sqrt(z[nz])
        out[nz] = np.sinh(r) / r
        return out
    return None


def _ml_complex(z, beta, mu, tol, method):
    if method == "auto":
        closed = _closed_form(z, beta, mu)
        if closed is not None:
            return closed
    elif method == "series":
        return _series(z, beta, mu, tol)
    elif method == "asymptotic":
        val, ok = _asymptotic(z, beta, mu, tol)
        if not np.all(ok):
            raise MittagLefflerConvergenceError(
                "asymptotic expansion does not reach tol for some arguments"
            )
        return val
    elif method == "integral":
        return _cut_integral(z, beta, mu)
    else:
        raise ValueError(f"unknown method {method!r}")

    out = np.empty_like(z)
    az = np.abs(z)
    series = (az <= SERIES_MAX_ABS) & (az ** (1.0 / beta) <= SERIES_MAX_GROWTH)
    if np.any(series):
        out[series] = _series(z[series], beta, mu, tol)
    rest = ~series
    huge = rest & (az > Z_MAX)
    if np.any(huge):
        out[huge] = _leading_asymptotic(z[huge], beta, mu)
    rest &= ~huge
    asym = rest & (az >= ASYMPTOTIC_MIN_ABS)
    if np.any(asym):
        idx = np.flatnonzero(asym)
        val, ok = _asymptotic(z[idx], beta, mu, tol)
        out[idx[ok]] = val[ok]
        rest[idx[ok]] = False
    if np.any(rest):
        out[rest] = _cut_integral(z[rest], beta, mu)
    return out


def _series(z, beta, mu, tol):
    coef = rgamma(beta * np.arange(SERIES_MAX_TERMS) + mu)
    s = np.zeros_like(z)
    comp = np.zeros_like(z)
    p = np.ones_like(z)
    az = np.abs(z)
    peak = np.max(az, initial=0.0) ** (1.0 / beta) + 2.0
    small_run = 0
    for l in range(SERIES_MAX_TERMS):
        term = p * coef[l]
        # Neumaier summation, real and imaginary parts separately
        t = s + term
        big = np.abs(s.real) >= np.abs(term.real)
        cr = np.where(big, (s.real - t.real) + term.real, (term.real - t.real) + s.real)
        big = np.abs(s.imag) >= np.abs(term.imag)
        ci = np.where(big, (s.imag - t.imag) + term.imag, (term.imag - t.imag) + s.imag)
        comp = comp + (cr + 1j * ci)
        s = t
        p = p * z
        if l > peak:
            if np.all(np.abs(term) <= 0.1 * tol * np.abs(s + comp)):
                small_run += 1
                if small_run >= 2:
                    return s + comp
            else:
                small_run = 0
    raise MittagLefflerConvergenceError(
        f"series for E_{{{beta},{mu}}} did not converge in {SERIES_MAX_TERMS} terms"
    )


def _pole_residues(z, beta, mu):
    # poles of s^(beta-mu)/(s^beta - z) on the principal sheet
    out = np.zeros_like(z)
    az = np.abs(z)
    argz = np.angle(z)
    for k in (-1, 0, 1):
        theta = argz + 2.0 * np.pi * k
        inside = (np.abs(theta) < beta * np.pi) & (az > 0)
        if not np.any(inside):
            continue
        th = theta[inside]
        rad = az[inside] ** (1.0 / beta)
        s = rad * np.exp(1j * th / beta)
        s_pow = rad ** (1.0 - mu) * np.exp(1j * (1.0 - mu) * th / beta)
        out[inside] += s_pow * np.exp(s) / beta
    return out


def _asymptotic(z, beta, mu, tol):
    l = np.arange(1, ASYMPTOTIC_MAX_TERMS + 1)
    coef = rgamma(mu - beta * l)
    zinv = 1.0 / z
    terms = -(zinv[:, None] ** l[None, :]) * coef[None, :]
    partial = np.cumsum(terms, axis=1)
    res = _pole_residues(z, beta, mu)
    # |1/Gamma(mu - beta l)| <= Gamma(1 - mu + beta l) / pi bounds every term,
    # including those that are accidentally small near the poles of Gamma
    log_env = np.array(
        [math.lgamma(beta * k + 1.0 - mu) if beta * k + 1.0 - mu > 0 else np.inf for k in l]
    ) - math.log(math.pi)
    log_env = log_env[None, :] - l[None, :] * np.log(np.abs(z))[:, None]
    cut = np.argmin(log_env, axis=1)
    rows = np.arange(len(z))
    val = np.where(cut > 0, partial[rows, np.maximum(cut - 1, 0)], 0.0) + res
    ok = log_env[rows, cut] <= np.log(tol * np.maximum(np.abs(val), 1e-300))
    return val, ok


def _leading_asymptotic(z, beta, mu):
    l = np.arange(1, 4)
    coef = rgamma(mu - beta * l)
    nz = np.flatnonzero(coef)
    lead = np.zeros_like(z)
    if len(nz):
        j = nz[0]
        lead = -coef[j] / z ** l[j]
    return lead + _pole_residues(z, beta, mu)


def _cut_panel_width(z, beta):
    # distance (in log r) of the nearest singularity of the cut integrand
    argz = np.angle(z)
    dist = np.inf
    for sgn in (1.0, -1.0):
        d = np.abs(np.angle(np.exp(1j * (argz - sgn * np.pi * beta))))
        dist = min(dist, float(np.min(d, initial=np.inf)) / beta)
    return float(np.clip(0.8 * dist, 0.005, 0.125))


def _cut_integral(z, beta, mu):
    """Branch-cut integral representation plus residues (needs mu < beta + 1)."""
    if mu >= beta + 1.0:
        # E_{b,m}(z) = (E_{b,m-b}(z) - 1/Gamma(m-b)) / z
        return (_cut_integral(z, beta, mu - beta) - rgamma(mu - beta)) / z
    if beta == 1.0 or beta == 2.0:
        if mu == round(mu):
            closed = _closed_form(z, beta, mu)
            if closed is not None:
                return closed
        if beta == 1.0:
            raise MittagLefflerConvergenceError(
                "branch-cut integral is singular for beta = 1 with non-integer mu"
            )
    out = np.empty_like(z)
    h = _cut_panel_width(z, beta)
    lo, hi = math.log(CUT_LOW), math.log(CUT_HIGH)
    n_panels = max(int(math.ceil((hi - lo) / h)), 1)
    edges = np.linspace(lo, hi, n_panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    u = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    r = np.exp(u)
    base = w * r * np.exp(-r)
    rb = r**beta
    rp = r ** (beta - mu)
    em = np.exp(-1j * np.pi * np.array([beta - mu, beta]))
    ep = np.conj(em)
    chunk = max(1, 400000 // len(u))
    for i in range(0, len(z), chunk):
        zz = z[i : i + chunk, None]
        f_minus = rp * em[0] / (rb * em[1] - zz)
        f_plus = rp * ep[0] / (rb * ep[1] - zz)
        kern = (f_minus - f_plus) / (2j * np.pi)
        out[i : i + chunk] = kern @ base
    out += _cut_low_tail(z, beta, mu)
    out += _pole_residues(z, beta, mu)
    return out


def _cut_low_tail(z, beta, mu):
    # int_0^a e^{-r} K(r) dr from the small-r expansion of the cut density
    a = CUT_LOW
    tail = np.zeros_like(z)
    for j in range(1, 80):
        p = j * beta - mu + 1.0
        coef = math.sin(math.pi * (j * beta - mu)) / math.pi
        lower = gammainc(p, a) * math.gamma(p)
        term = coef * lower / z**j
        tail += term
        if a ** (j * beta) / np.min(np.abs(z)) ** j < 1e-18:
            break
    return tail


def relaxation_kernel(alpha, lam, t):
    """Relaxation kernel ``t^(alpha-1) E_{alpha,alpha}(-lam t^alpha)``.

    This is the impulse response of ``d^alpha y + lam y``; for ``alpha = 1``
    it is ``exp(-lam t)`` and for ``alpha = 2`` it is
    ``sin(sqrt(lam) t) / sqrt(lam)``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("relaxation kernel needs t > 0")
    lam_arr = np.asarray(lam)
    if np.isrealobj(lam_arr) and np.any(lam_arr < 0):
        raise ValueError("relaxation kernel needs lam >= 0")
    if alpha == 1.0:
        return np.exp(-lam * t)
    if alpha == 2.0 and np.isrealobj(lam_arr):
        lam_b = np.broadcast_to(lam_arr, np.broadcast(lam_arr, t).shape)
        tb = np.broadcast_to(t, lam_b.shape)
        out = np.array(tb, dtype=float)
        pos = lam_b > 0
        root = np.sqrt(lam_b[pos])
        out[pos] = np.sin(root * tb[pos]) / root
        return out[()] if out.ndim == 0 else out
    return t ** (alpha - 1.0) * mittag_leffler(-lam * t**alpha, alpha, alpha)


def relaxation_antiderivatives(alpha, lam, tau):
    """First and second antiderivatives of the relaxation kernel.

    Returns ``(K1, K2)`` with ``K1(tau) = tau^alpha E_{alpha,alpha+1}(-lam tau^alpha)``
    and ``K2(tau) = tau^(alpha+1) E_{alpha,alpha+2}(-lam tau^alpha)``; both vanish at 0.
    """
    tau = np.asarray(tau, dtype=float)
    z = -lam * tau**alpha
    k1 = tau**alpha * mittag_leffler(z, alpha, alpha + 1.0)
    k2 = tau ** (alpha + 1.0) * mittag_leffler(z, alpha, alpha + 2.0)
    return k1, k2
