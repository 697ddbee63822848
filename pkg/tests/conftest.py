"""Shared oracles and helpers for the test suite."""

import math
import warnings

import mpmath as mp
import numpy as np
import pytest


def ml_oracle(z, beta, mu, min_digits=50, min_terms=200):
    """Mittag-Leffler series summed in high precision.

    The working precision grows with the largest term of the series (about
    ``exp(|z|^(1/beta))``) so that the cancellation for negative ``z`` is
    absorbed; at least ``min_terms`` terms are summed.
    """
    zc = complex(z)
    growth = abs(zc) ** (1.0 / beta) / math.log(10.0)
    with mp.workdps(int(min_digits + growth + 10)):
        zz = mp.mpc(zc.real, zc.imag) if zc.imag else mp.mpf(zc.real)
        b, m = mp.mpf(beta), mp.mpf(mu)
        total = mp.mpf(0)
        term_prev = mp.inf
        ell = 0
        while True:
            term = zz**ell * mp.rgamma(b * ell + m)
            total += term
            ell += 1
            small = abs(term) <= mp.mpf(10) ** (-min_digits) * max(abs(total), mp.mpf(10) ** (-300))
            if ell >= min_terms and small and abs(term) <= term_prev:
                break
            term_prev = abs(term)
        return complex(total) if zc.imag else float(total)


def observed_order(h, err):
    return float(np.polyfit(np.log(h), np.log(err), 1)[0])


@pytest.fixture(autouse=True)
def _quiet_truncation_warnings():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="modal truncation")
        yield
