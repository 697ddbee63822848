"""Built-in verification suites run by ``fracorbit verify``.

Each check returns a :class:`Check` with the measured value, the
tolerance it is held to and a pass flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfcx

from .forward import duhamel_compose, fractional_ode_stepper
from .fracops import SampledFunction, TimeGrid, rl_derivative
from .specfun import mittag_leffler, relaxation_kernel


@dataclass
class Check:
    suite: str
    name: str
    value: float
    tol: float
    passed: bool
    note: str = ""


def observed_order(steps, errors):
    """Least-squares slope of ``log(error)`` against ``log(step)``."""
    return float(np.polyfit(np.log(steps), np.log(errors), 1)[0])


def ml_special_values():
    out = []
    x = np.linspace(0.0, 50.0, 2001)
    err = np.max(np.abs(mittag_leffler(-x, 1.0, 1.0) - np.exp(-x)) / np.exp(-x))
    out.append(Check("ml", "E_{1,1}(-x) vs exp(-x), x in [0,50]", err, 1e-10, err <= 1e-10))
    c = np.cos(x)
    err = np.max(np.abs(mittag_leffler(-(x**2), 2.0, 1.0) - c) / np.abs(c))
    out.append(Check("ml", "E_{2,1}(-x^2) vs cos(x), x in [0,50]", err, 1e-10, err <= 1e-10))
    x = np.linspace(0.0, 10.0, 1001)
    ref = erfcx(x)
    err = np.max(np.abs(mittag_leffler(-x, 0.5, 1.0) - ref) / ref)
    out.append(Check("ml", "E_{1/2,1}(-x) vs erfcx(x), x in [0,10]", err, 1e-9, err <= 1e-9))
    return out


def ml_estimate_constant(alpha, mu, n_points):
    """``sup (1+x)|E_{alpha,mu}(-x)|`` over ``0`` and a log grid on ``[1e-4, 1e4]``."""
    x = np.concatenate([[0.0], np.logspace(-4, 4, n_points)])
    return float(np.max((1 + x) * np.abs(mittag_leffler(-x, alpha, mu))))


def ml_estimate(alphas=(0.3, 0.7, 1.3, 1.7), n_points=400, rel=0.05):
    out = []
    for a in alphas:
        for mu in (1.0, 2.0, a):
            c1 = ml_estimate_constant(a, mu, n_points)
            c2 = ml_estimate_constant(a, mu, 2 * n_points)
            change = abs(c2 - c1) / c1
            ok = np.isfinite(c1) and np.isfinite(c2) and change <= rel
            out.append(Check("ml-estimate", f"alpha={a}, mu={mu:.3g}: C={c2:.6g}", change, rel, ok))
    return out


def kernel_identity_errors(alpha, lam, n_steps=(256, 512, 1024, 2048), t_min=0.1):
    """Max error on ``[t_min, 1]`` of the discrete RL derivative identity."""
    ca = math.ceil(alpha)
    errs = []
    for n in n_steps:
        grid = TimeGrid(1.0, n)
        t = grid.nodes
        f = t ** (ca - 1) * mittag_leffler(-lam * t**alpha, alpha, float(ca))
        d = rl_derivative(SampledFunction(grid, f), ca - alpha).values
        m = t >= t_min - 1e-12
        errs.append(float(np.max(np.abs(d[m] - relaxation_kernel(alpha, lam, t[m])))))
    return np.array(errs)


def kernel_identity(alphas=(0.5, 1.5), lams=(1.0, 10.0), n_steps=(256, 512, 1024, 2048)):
    out = []
    h = 1.0 / np.asarray(n_steps, dtype=float)
    for a in alphas:
        for lam in lams:
            errs = kernel_identity_errors(a, lam, n_steps)
            order = observed_order(h, errs)
            ok = order >= 1.0 and errs[-1] < errs[0]
            out.append(Check("kernel-identity", f"alpha={a}, lam={lam}: order (finest error {errs[-1]:.2e})",
                             order, 1.0, ok, "value is the observed order; must be >= tol"))
    return out


def duhamel_difference(alpha, lam, n_steps=1024):
    grid = TimeGrid(1.0, n_steps)
    t = grid.nodes
    f = np.sin(np.pi * t) + t
    u = duhamel_compose([lam], f[None, :], alpha, grid)[0]
    y = fractional_ode_stepper(lam, f, alpha, grid)
    return float(np.max(np.abs(u - y)))


def duhamel(alphas=(0.3, 0.7, 1.0, 1.3, 1.7, 2.0), lams=(1.0, 30.0), n_steps=1024):
    out = []
    for a in alphas:
        err = max(duhamel_difference(a, lam, n_steps) for lam in lams)
        out.append(Check("duhamel", f"alpha={a}: kernel form vs stepper, n={n_steps}", err, 1e-4, err <= 1e-4))
    grid = TimeGrid(1.0, n_steps)
    t = grid.nodes
    one = np.ones((1, t.size))
    lam = 3.0
    err = np.max(np.abs(duhamel_compose([lam], one, 1.0, grid)[0] - (1 - np.exp(-lam * t)) / lam))
    out.append(Check("duhamel", "alpha=1 vs (1-exp(-lam t))/lam", err, 1e-8, err <= 1e-8))
    err = np.max(np.abs(duhamel_compose([lam], one, 2.0, grid)[0] - (1 - np.cos(math.sqrt(lam) * t)) / lam))
    out.append(Check("duhamel", "alpha=2 vs (1-cos(sqrt(lam) t))/lam", err, 1e-8, err <= 1e-8))
    return out


SUITES = {
    "ml": ml_special_values,
    "ml-estimate": ml_estimate,
    "kernel-identity": kernel_identity,
    "duhamel": duhamel,
}


def run_all(suites=None):
    names = list(SUITES) if suites is None else list(suites)
    checks = []
    for name in names:
        checks.extend(SUITES[name]())
    return checks
