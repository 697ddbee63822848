import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from conftest import ml_oracle
from fracorbit.specfun import (
    MLParams,
    MittagLefflerConvergenceError,
    gamma,
    mittag_leffler,
    relaxation_antiderivatives,
    relaxation_kernel,
    rgamma,
)

BETAS = [0.3, 0.5, 0.7, 0.9, 1.1, 1.3, 1.5, 1.7, 1.95]


# -- gamma ---------------------------------------------------------------

def test_gamma_integers_and_half_integers():
    for n in range(1, 30):
        assert abs(gamma(float(n)) / math.factorial(n - 1) - 1) <= 1e-13
    for k in range(0, 20):
        x = k + 0.5
        ref = math.factorial(2 * k) * math.sqrt(math.pi) / (4**k * math.factorial(k))
        assert abs(gamma(x) / ref - 1) <= 1e-13


@given(st.floats(0.01, 150.0))
def test_gamma_matches_math(x):
    assert abs(gamma(x) / math.gamma(x) - 1) <= 1e-13


def test_rgamma_vanishes_at_poles():
    assert np.all(rgamma(np.array([0.0, -1.0, -2.0, -7.0])) == 0.0)


# -- Mittag-Leffler ------------------------------------------------------

def test_exp_reduction_example():
    assert abs(mittag_leffler(-1.0, 1.0, 1.0) - 0.3678794412) <= 1e-10


def test_cos_reduction_example():
    assert abs(mittag_leffler(-(math.pi / 2) ** 2, 2.0, 1.0)) <= 1e-12


def test_half_order_example_against_oracle():
    ref = ml_oracle(-1.0, 0.5, 1.0)
    assert abs(mittag_leffler(-1.0, 0.5, 1.0) - ref) <= 1e-12 * abs(ref)


@given(st.floats(0.05, 2.0), st.floats(0.05, 5.0))
def test_zero_argument_is_reciprocal_gamma(beta, mu):
    assert abs(mittag_leffler(0.0, beta, mu) * math.gamma(mu) - 1) <= 1e-13


@pytest.mark.parametrize("beta", BETAS)
def test_negative_axis_against_oracle(beta):
    xs = np.array([0.0, 0.3, 1.0, 3.0, 5.0, 8.0, 12.0, 20.0, 50.0, 200.0])
    xs = xs[xs ** (1 / beta) < 100]
    for mu in (1.0, 2.0, beta):
        ref = np.array([ml_oracle(-x, beta, mu) for x in xs])
        val = mittag_leffler(-xs, beta, mu)
        err = np.abs(val - ref) / np.maximum(np.abs(ref), 1e-300)
        assert np.max(err) <= 1e-10, (beta, mu, xs[np.argmax(err)], np.max(err))


def test_near_negative_axis_complex_against_oracle():
    for beta in (0.5, 0.8, 1.4):
        for z in (-2.0 + 0.5j, -6.0 - 1.0j, -15.0 + 2.0j):
            ref = ml_oracle(z, beta, 1.0)
            assert abs(mittag_leffler(z, beta, 1.0) - ref) <= 1e-10 * abs(ref)


def test_complete_monotonicity_spot_check():
    x = np.linspace(0.0, 100.0, 2001)
    for beta in (0.2, 0.5, 0.8, 1.0):
        e = mittag_leffler(-x, beta, 1.0)
        assert np.all(e > 0)
        assert np.all(np.diff(e) < 0)


@pytest.mark.parametrize("beta, z_min", [(0.4, 12.0), (0.8, 20.0), (1.3, 100.0), (1.8, 600.0)])
def test_branch_cross_consistency(beta, z_min):
    # the series and the asymptotic expansion share no annulus at double
    # precision, so each is checked against the branch-cut integral
    tol = 1e-12
    small = -np.linspace(0.1, 3.0, 15) ** beta
    s = mittag_leffler(small, beta, 1.0, method="series", tol=tol)
    i = mittag_leffler(small, beta, 1.0, method="integral", tol=tol)
    assert np.max(np.abs(s - i) / np.abs(s)) <= 10 * tol
    large = -np.logspace(np.log10(z_min), np.log10(z_min) + 1, 11)
    a = mittag_leffler(large, beta, 1.0, method="asymptotic", tol=tol)
    i = mittag_leffler(large, beta, 1.0, method="integral", tol=tol)
    assert np.max(np.abs(a - i) / np.abs(a)) <= 10 * tol


def test_huge_argument_uses_leading_term():
    z = -1e9
    for beta, mu in ((0.5, 1.0), (0.7, 0.7)):
        lead = -1.0 / (z * math.gamma(mu - beta)) if mu != beta else -1.0 / (z**2 * math.gamma(mu - 2 * beta))
        assert abs(mittag_leffler(z, beta, mu) / lead - 1) <= 1e-6


def test_parameter_validation():
    with pytest.raises(ValueError):
        mittag_leffler(1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        mittag_leffler(1.0, 2.5, 1.0)
    with pytest.raises(ValueError):
        mittag_leffler(1.0, 0.5, 0.0)
    with pytest.raises(ValueError):
        MLParams(0.5, 1.0, tol=1e-3)
    with pytest.raises(ValueError):
        mittag_leffler(1.0, 0.5, 1.0, method="nope")


def test_forced_asymptotic_branch_reports_non_convergence():
    with pytest.raises(MittagLefflerConvergenceError):
        mittag_leffler(-0.5, 0.5, 1.0, method="asymptotic")


def test_params_object_evaluates():
    p = MLParams(0.5, 1.0)
    assert p(-1.0) == mittag_leffler(-1.0, 0.5, 1.0)


# -- relaxation kernel ---------------------------------------------------

def test_kernel_alpha_one_example():
    assert abs(relaxation_kernel(1.0, 2.0, 0.5) - 0.3678794412) <= 1e-10


def test_kernel_alpha_two_example():
    assert abs(relaxation_kernel(2.0, 4.0, math.pi / 4) - 0.5) <= 1e-14


def test_kernel_half_order_example():
    ref = ml_oracle(-1.0, 0.5, 0.5)
    assert abs(relaxation_kernel(0.5, 1.0, 1.0) - ref) <= 1e-12 * abs(ref)


@given(st.floats(0.1, 1.0), st.floats(0.0, 50.0), st.floats(1e-3, 5.0))
@settings(max_examples=50)
def test_kernel_positive_for_subdiffusion(alpha, lam, t):
    assert relaxation_kernel(alpha, lam, t) > 0


def test_kernel_rejects_bad_input():
    with pytest.raises(ValueError):
        relaxation_kernel(0.5, 1.0, 0.0)
    with pytest.raises(ValueError):
        relaxation_kernel(0.5, -1.0, 1.0)


@pytest.mark.parametrize("alpha", [0.3, 0.7, 1.0, 1.5, 2.0])
def test_antiderivatives_against_oracle(alpha):
    lam = 7.0
    for tau in (0.05, 0.4, 1.0):
        k1, k2 = relaxation_antiderivatives(alpha, lam, tau)
        z = -lam * tau**alpha
        assert abs(k1 - tau**alpha * ml_oracle(z, alpha, alpha + 1)) <= 1e-13
        assert abs(k2 - tau ** (alpha + 1) * ml_oracle(z, alpha, alpha + 2)) <= 1e-13


@pytest.mark.parametrize("alpha", [1.0, 1.5, 2.0])
def test_antiderivatives_integrate_the_kernel(alpha):
    # smooth enough near 0 for adaptive quadrature when alpha >= 1
    lam = 7.0
    for tau in (0.4, 1.0):
        k1, k2 = relaxation_antiderivatives(alpha, lam, tau)
        ref1 = quad(lambda s: relaxation_kernel(alpha, lam, max(s, 1e-300)), 0, tau, epsabs=1e-14)[0]
        ref2 = quad(lambda s: relaxation_antiderivatives(alpha, lam, s)[0], 0, tau, epsabs=1e-14)[0]
        assert abs(k1 - ref1) <= 1e-11
        assert abs(k2 - ref2) <= 1e-11
