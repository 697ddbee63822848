"""Orbit reconstruction from observation traces and the stability harness.

At an observation point ``x^j`` the equation reads

    g(x^j - gamma(t)) = d_t^alpha u(x^j, t) + (L u)(x^j, t),

and ``L u`` is a causal functional of ``gamma``: in a modal (or frequency)
basis it is the relaxation-kernel convolution of the source coefficients
``C_n phi_n(gamma(s))``. Marching in time, each step is a small nonlinear
system for ``gamma(t_m)``. The current node enters ``L u`` through the
first product-integration weight, so the step residual and its Jacobian
include that self term.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .forward import (
    TraceSet,
    basis_rates,
    duhamel_weights,
    make_basis,
    observe_and_perturb,
    solve_moving_source,
)
from .fracops import SampledFunction, TimeGrid, _power_weights, caputo_derivative, mollify
from .model import (
    LocalizedOrbitBound,
    ObservabilityError,
    Orbit,
    SourceProfile,
    check_admissible,
    observability_condition,
)
from .specfun import gamma as gamma_fn

MIN_ALPHA = 0.1


class ReconstructionError(ArithmeticError):
    """Newton failure or loss of observability during the march."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class SingularSystemError(ArithmeticError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class ReconstructionConfig:
    """Settings of the marching reconstruction.

    ``dt = None`` reconstructs on the data grid; otherwise the data grid
    must refine the grid with this step. ``mollifier`` is the moving-average
    half-width applied to traces before differentiation.
    ``subtract_stationary`` differentiates only the deviation from the
    fixed-source response (see :func:`stationary_response`).
    """

    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    dt: float = None
    mollifier: int = 0
    cond_limit: float = 1e12
    fallback: bool = True
    subtract_stationary: bool = True

    def __post_init__(self):
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be >= 1")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.mollifier < 0:
            raise ValueError("mollifier half-width must be >= 0")


# ---------------------------------------------------------------------------
# memory term


class MemoryOperator:
    """``(L u)(x^j, t_m)`` as a functional of the orbit samples.

    With ``S_n(c)`` the basis shape (``phi_n(c)`` or ``exp(-i xi.c)``) and
    ``C_n`` the profile moments,

        (L u)(x^j, t_m) = Re sum_n A_jn [sum_i W_ni S_n(gamma_{m-i}) - b_nm S_n(gamma_0)],

    where ``A_jn = obs_n(x^j) lam_n C_n`` and ``W, b`` are the Duhamel
    product-integration weights.
    """

    def __init__(self, basis, g, alpha, grid: TimeGrid, points, quadrature="gauss"):
        self.basis = basis
        self.alpha = alpha
        self.grid = grid
        self.points = np.asarray(points, dtype=float).reshape(-1, g.dim)
        self.rates = basis_rates(basis)
        self.W, self.b = duhamel_weights(alpha, self.rates, grid)
        if basis.domain.kind == "box":
            moments = basis.source_moments(g, quadrature)
        else:
            moments = basis.source_moments(g)
        self.moments = moments
        self.A = basis.evaluate(self.points) * (self.rates * moments)[None, :]
        self.shapes = np.zeros((len(self.rates), grid.n_steps + 1),
                               dtype=complex if np.iscomplexobj(self.A) or np.iscomplexobj(
                                   basis.shape(np.zeros(g.dim))) else float)

    def set_node(self, m, gamma_m):
        self.shapes[:, m] = self.basis.shape(gamma_m)[:, 0]

    def history(self, m):
        """Contribution of nodes ``0..m-1`` at ``t_m`` (mode vector)."""
        if m == 0:
            return np.zeros(len(self.rates), dtype=self.shapes.dtype)
        past = self.shapes[:, m - 1 :: -1] if m > 0 else None
        h = np.einsum("ni,ni->n", self.W[:, 1 : m + 1], past)
        return h - self.b[:, m] * self.shapes[:, 0]

    def value(self, rows, hist, gamma_m):
        """``L u`` at the selected observation rows with ``gamma(t_m) = gamma_m``."""
        cur = hist + self.W[:, 0] * self.basis.shape(gamma_m)[:, 0]
        return np.real(self.A[rows] @ cur)

    def jacobian(self, rows, gamma_m):
        grad = self.basis.shape_grad(gamma_m) * self.W[:, 0][:, None]
        return np.real(self.A[rows] @ grad)

    def evaluate(self, m, rows=None):
        rows = slice(None) if rows is None else rows
        if m == 0:
            return np.zeros(self.A[rows].shape[0])
        cur = self.history(m) + self.W[:, 0] * self.shapes[:, m]
        return np.real(self.A[rows] @ cur)


def memory_term(g, gamma_hat, alpha, domain, points, grid: TimeGrid, basis=None):
    """``(L u)(x^j, t_m)`` for the orbit samples ``gamma_hat`` on nodes ``0..m``.

    ``gamma_hat`` has shape ``(m + 1, d)``; ``grid`` is the full time grid.
    """
    gamma_hat = np.asarray(gamma_hat, dtype=float).reshape(-1, g.dim)
    m = gamma_hat.shape[0] - 1
    if m > grid.n_steps:
        raise ValueError("orbit prefix longer than the grid")
    if basis is None:
        reach = float(np.max(np.linalg.norm(gamma_hat, axis=1)))
        basis = make_basis(domain, g, alpha, grid.t_end, reach)
    if m == 0:
        return np.zeros(np.asarray(points).reshape(-1, g.dim).shape[0])
    op = MemoryOperator(basis, g, alpha, grid, points)
    for k in range(m + 1):
        op.set_node(k, gamma_hat[k])
    return op.evaluate(m)


# ---------------------------------------------------------------------------
# data preparation


def synthesize_data(g, orbit, alpha, domain, grid: TimeGrid, points, *, refine=4,
                    mode_factor=1.25, noise_level=0.0, seed=0):
    """Synthetic traces on ``grid`` from a finer forward solve.

    The forward grid is ``refine`` times finer, the profile moments use the
    trapezoid rule instead of Gauss-Legendre, and bounded domains keep
    ``mode_factor`` times more modes. This avoids the inverse crime.
    """
    if refine < 1:
        raise ValueError("refine must be >= 1")
    fine = grid.refined(refine)
    dom = domain
    if domain.kind == "box":
        counts = domain.modes_per_axis(g)
        dom = dataclasses.replace(domain, n_modes=tuple(int(math.ceil(c * mode_factor)) for c in counts))
    sol = solve_moving_source(g, orbit, alpha, dom, fine, quadrature="trapezoid")
    meta = {"alpha": alpha, "orbit": orbit.name, "refine": refine, "domain": domain.kind}
    traces = sol.traces(points, meta).subsample(grid)
    return observe_and_perturb(traces, noise_level, seed)


def fractional_data_derivative(traces: TraceSet, alpha, mollifier=0, stationary=None):
    """``d_t^alpha`` of each trace, using zero initial slope for ``alpha > 1``.

    ``stationary = (u0, du0)`` is a reference response with known exact
    derivative (see :func:`stationary_response`); only the remainder
    ``u - u0`` is differentiated numerically.
    """
    vals = traces.values
    if stationary is not None:
        vals = vals - stationary[0]
    if mollifier:
        vals = mollify(vals, mollifier)
    slope = np.zeros(vals.shape[1]) if 1.0 < alpha < 2.0 else None
    out = caputo_derivative(SampledFunction(traces.grid, vals), alpha, initial_slope=slope).values
    if stationary is not None:
        out = out + stationary[1]
    return out


def stationary_response(basis, g, alpha, grid: TimeGrid, points, quadrature="gauss"):
    """Traces of the solution with the source held at the origin, and their
    exact ``d_t^alpha``.

    Per mode ``u0_n(t) = C_n S_n(0) K1_n(t)`` with ``K1`` the kernel
    antiderivative, so ``d_t^alpha u0_n = C_n S_n(0) - lam_n u0_n``. Near
    ``t = 0`` the traces behave like ``t^alpha``, which is where the L1
    scheme is least accurate; subtracting this response leaves a remainder
    starting like ``t^(alpha+1)``.
    """
    from .specfun import relaxation_antiderivatives

    rates = basis_rates(basis)
    moments = basis.source_moments(g, quadrature) if basis.domain.kind == "box" else basis.source_moments(g)
    amp = moments * basis.shape(np.zeros(g.dim))[:, 0]
    k1, _ = relaxation_antiderivatives(alpha, rates[:, None], grid.nodes[None, :])
    obs = basis.evaluate(np.asarray(points, dtype=float).reshape(-1, g.dim))
    u0 = np.real(obs @ (amp[:, None] * k1)).T
    du0 = np.real(obs @ (amp[:, None] * (1.0 - rates[:, None] * k1))).T
    return u0, du0


# ---------------------------------------------------------------------------
# marching reconstruction


@dataclass
class ReconstructionResult:
    grid: TimeGrid
    gamma: np.ndarray
    residual: np.ndarray
    jacobian_cond: np.ndarray
    coverage: tuple
    points_used: list = field(default_factory=list)
    log: list = field(default_factory=list)
    intervals: list = field(default_factory=list)

    def orbit(self, K):
        n = int(round(self.coverage[1] / self.grid.dt))
        sub = TimeGrid(self.coverage[1], n) if n >= 2 else None
        if sub is None:
            raise ValueError("coverage too short to build an orbit")
        return Orbit.from_samples(sub, self.gamma[: n + 1], K, name="reconstructed")

    def error(self, orbit):
        n = int(round(self.coverage[1] / self.grid.dt))
        true = orbit(self.grid.nodes[: n + 1])
        return float(np.max(np.linalg.norm(self.gamma[: n + 1] - true, axis=1)))


def _newton(residual, jacobian, guess, tol, max_iter, damped=False):
    x = np.array(guess, dtype=float)
    r = residual(x)
    cond = np.nan
    for _ in range(max_iter):
        nr = np.max(np.abs(r))
        if nr <= tol:
            # conditioning at the accepted root: a root outside the source
            # support has a vanishing Jacobian and must not pass silently
            return x, nr, _cond(jacobian(x)), True
        J = jacobian(x)
        cond = np.linalg.cond(J)
        if not np.isfinite(cond) or cond > 1e14:
            return x, nr, cond, False
        step = np.linalg.solve(J, -r)
        lam = 1.0
        while True:
            xn = x + lam * step
            rn = residual(xn)
            if not damped or np.max(np.abs(rn)) < (1 - 1e-4 * lam) * nr or lam < 1e-6:
                break
            lam *= 0.5
        x, r = xn, rn
        if not np.all(np.isfinite(x)):
            return x, np.inf, cond, False
    nr = np.max(np.abs(r))
    if nr <= tol:
        cond = _cond(jacobian(x))
    return x, nr, cond, nr <= tol


def _cond(J):
    c = np.linalg.cond(J)
    return float(c) if np.isfinite(c) else np.inf


def _reconstruction_grid(data: TraceSet, config: ReconstructionConfig):
    if config.dt is None:
        return data, data.grid
    n = int(round(data.grid.t_end / config.dt))
    if not math.isclose(n * config.dt, data.grid.t_end, rel_tol=1e-9):
        raise ValueError("reconstruction dt does not divide the data horizon")
    coarse = TimeGrid(data.grid.t_end, n)
    return data.subsample(coarse), coarse


def _march(data, g, alpha, domain, config, select, basis=None, log=None):
    """Shared time march. ``select(m, gamma_prev)`` returns the row indices in use."""
    if not MIN_ALPHA <= alpha <= 2.0:
        raise ValueError(f"alpha out of range [{MIN_ALPHA}, 2]")
    data, grid = _reconstruction_grid(data, config)
    d = g.dim
    if basis is None:
        reach = float(np.max(np.linalg.norm(data.points, axis=1))) + g.delta
        basis = make_basis(domain, g, alpha, grid.t_end, reach)
    stat = stationary_response(basis, g, alpha, grid, data.points) if config.subtract_stationary else None
    dah = fractional_data_derivative(data, alpha, config.mollifier, stat)
    op = MemoryOperator(basis, g, alpha, grid, data.points)
    n = grid.n_steps
    gam = np.zeros((n + 1, d))
    res = np.zeros(n + 1)
    cond = np.full(n + 1, np.nan)
    op.set_node(0, gam[0])
    used = []
    log = [] if log is None else log
    for m in range(1, n + 1):
        rows = np.asarray(select(m, gam[m - 1]))
        used.append(tuple(int(r) for r in rows))
        x = data.points[rows]
        rhs = dah[m, rows]
        hist = op.history(m)

        def residual(c):
            return g(x - c) - rhs - op.value(rows, hist, c)

        def jacobian(c):
            return -g.gradient(x - c) - op.jacobian(rows, c)

        guess = gam[m - 1] if m < 2 else 2 * gam[m - 1] - gam[m - 2]
        sol, nr, cj, ok = _newton(residual, jacobian, guess, config.newton_tol, config.newton_max_iter)
        if not ok and config.fallback:
            log.append(f"step {m}: Newton failed (residual {nr:.3g}); damped restart")
            sol, nr, cj, ok = _newton(residual, jacobian, gam[m - 1], config.newton_tol,
                                      4 * config.newton_max_iter, damped=True)
        if not ok:
            raise ReconstructionError(
                f"Newton did not converge at step {m} (t = {grid.nodes[m]:.6g}, residual {nr:.3g})", m)
        if cj > config.cond_limit:
            raise ReconstructionError(f"Jacobian near-singular at step {m} (cond {cj:.3g})", m)
        # a root with the source off every sensor (or outside the box) is spurious:
        # the profile gradient vanishes there and the data no longer see the orbit
        if not domain.contains(sol) or np.all(np.linalg.norm(x - sol, axis=1) >= g.delta):
            raise ReconstructionError(
                f"Newton root at step {m} leaves the observed region (gamma = {np.array2string(sol, precision=4)})", m)
        gam[m], res[m], cond[m] = sol, nr, cj
        op.set_node(m, sol)
    return ReconstructionResult(grid, gam, res, cond, (0.0, grid.t_end), used, log)


def reconstruct_orbit_local(data: TraceSet, g: SourceProfile, alpha, domain,
                            config: ReconstructionConfig = ReconstructionConfig(), basis=None):
    """March ``gamma(t_m)`` from traces at exactly ``d`` points."""
    if data.points.shape[0] != g.dim:
        raise ValueError(f"local reconstruction needs exactly {g.dim} observation points")
    rows = np.arange(g.dim)
    return _march(data, g, alpha, domain, config, lambda m, prev: rows, basis)


def _best_subset(g, points, center, eps, n_samples=512, seed=0, keep=None, hysteresis=0.0):
    """d points of ``points`` within ``B_delta(center)`` minimizing the sampled bound.

    The subset ``keep`` is retained while its bound stays within a factor
    ``1 + hysteresis`` of the best one, which avoids switching between
    near-symmetric candidates.
    """
    near = np.flatnonzero(np.linalg.norm(points - center, axis=1) < g.delta)
    bounds = {}
    for combo in itertools.combinations(near, g.dim):
        try:
            bounds[tuple(int(i) for i in combo)] = observability_condition(
                g, points[list(combo)] - center, eps, n_samples, seed)
        except ObservabilityError:
            continue
    if not bounds:
        return None, np.inf
    best = min(bounds, key=bounds.get)
    if keep is not None and keep in bounds and bounds[keep] <= (1 + hysteresis) * bounds[best]:
        return keep, bounds[keep]
    return best, bounds[best]


def reconstruct_orbit_global(data: TraceSet, g: SourceProfile, alpha, domain, K, eps,
                             config: ReconstructionConfig = ReconstructionConfig(),
                             basis=None, n_samples=512, seed=0, hysteresis=0.25):
    """Interval-by-interval reconstruction on ``T_l = eps l / K``.

    At the start of each interval the ``d`` points of ``X`` within
    ``B_delta(gamma(T_{l-1}))`` with the smallest sampled observability
    bound are selected; the current subset is kept while its bound is within
    ``1 + hysteresis`` of the best. The memory term always carries the full
    history.
    Traces shorter than ``T_1`` yield a partial orbit whose coverage is
    reported.
    """
    e = eps.epsilon if isinstance(eps, LocalizedOrbitBound) else float(eps)
    if not (K > 0 and e > 0):
        raise ValueError("K and eps must be positive")
    _, grid = _reconstruction_grid(data, config)
    interval = e / K
    log = []
    intervals = []
    state = {"interval": -1, "rows": None}

    def select(m, prev):
        ell = int(math.floor((grid.nodes[m - 1] + 1e-12 * grid.dt) / interval))
        if ell != state["interval"]:
            rows, bound = _best_subset(g, data.points, prev, e, n_samples, seed,
                                       keep=state["rows"], hysteresis=hysteresis)
            if rows is None:
                raise ReconstructionError(
                    f"no admissible {g.dim}-point subset near y = {prev.tolist()}", m)
            new = tuple(int(r) for r in rows)
            change = "kept" if new == state["rows"] else f"selected {new}"
            log.append(f"interval {ell} starts at t = {grid.nodes[m - 1]:.6g}, "
                       f"y = {np.round(prev, 6).tolist()}: {change} (bound {bound:.4g})")
            intervals.append((ell, float(grid.nodes[m - 1]), new))
            state["interval"], state["rows"] = ell, tuple(int(r) for r in rows)
        return np.array(state["rows"])

    result = _march(data, g, alpha, domain, config, select, basis, log)
    result.log = log + [l for l in result.log if l not in log]
    result.intervals = intervals
    if grid.t_end < interval:
        result.log.append(f"data end before T_1 = {interval:.6g}; coverage [0, {grid.t_end:.6g}]")
    return result


def point_reselections(result: ReconstructionResult):
    """Number of times the selected point set changed."""
    return sum(1 for a, b in zip(result.points_used, result.points_used[1:]) if a != b)


# ---------------------------------------------------------------------------
# linear Volterra difference system


def singular_kernel_weights(kernel, alpha, grid: TimeGrid):
    """Weight tensor for ``int_0^t (t-s)^(alpha-1) Q(t,s) rho(s) ds``.

    ``kernel(t, s)`` returns the smooth factor with shape ``(len(s), d, d)``.
    Product integration with a linear interpolant of ``Q rho`` in ``s``.
    Returns ``(n+1, n+1, d, d)`` weights with ``int ~ sum_k w[m,k] rho_k``.
    """
    n = grid.n_steps
    c, start = _power_weights(float(alpha), n)
    scale = gamma_fn(alpha) * grid.dt**alpha / gamma_fn(alpha + 2.0)
    nodes = grid.nodes
    first = np.asarray(kernel(nodes[0], nodes[:1]))
    d = first.shape[-1]
    w = np.zeros((n + 1, n + 1, d, d))
    for m in range(1, n + 1):
        q = np.asarray(kernel(nodes[m], nodes[: m + 1]))
        coef = c[m::-1].copy()
        coef[0] = start[m]
        w[m, : m + 1] = scale * coef[:, None, None] * q
    return w


def volterra_difference_solve(P, rhs, grid: TimeGrid, *, weights=None, kernel=None,
                              alpha=None, cond_limit=1e12):
    """Solve ``P(t) rho(t) = rhs(t) + int_0^t Q(t,s) rho(s) ds`` by marching.

    The memory integral is given either by a weight tensor ``weights``
    (``(n+1, n+1, d, d)``) or by ``kernel`` and ``alpha`` for the weakly
    singular form ``(t-s)^(alpha-1) kernel(t, s)``.
    """
    P = np.asarray(P, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    n = grid.n_steps
    if rhs.ndim == 1:
        rhs = rhs[:, None]
    if P.ndim == 1:
        P = P[:, None, None]
    d = rhs.shape[1]
    if P.shape != (n + 1, d, d):
        raise ValueError(f"P must have shape {(n + 1, d, d)}")
    if weights is None:
        if kernel is None:
            weights = np.zeros((n + 1, n + 1, d, d))
        else:
            if alpha is None:
                raise ValueError("kernel form needs alpha")
            weights = singular_kernel_weights(kernel, alpha, grid)
    rho = np.zeros((n + 1, d))
    for m in range(n + 1):
        lhs = P[m] - weights[m, m]
        cnd = np.linalg.cond(P[m])
        if not np.isfinite(cnd) or cnd > cond_limit or not np.isfinite(np.linalg.cond(lhs)):
            raise SingularSystemError(f"P(t_m) singular at step {m} (cond {cnd:.3g})", m)
        b = rhs[m] + np.einsum("kij,kj->i", weights[m, :m], rho[:m])
        rho[m] = np.linalg.solve(lhs, b)
    return rho


def assemble_difference_system(g, orbit1, orbit2, alpha, domain, points, grid: TimeGrid, basis=None):
    """``P`` and the memory weight tensor for the pair ``(gamma_1, gamma_2)``.

    ``P_jk(t) = d_k g(x^j - (gamma_1 + gamma_2)/2)`` (midpoint in place of
    the mean-value point) and the memory integral is
    ``(L w)(x^j, t)`` for ``w`` driven by ``sum_k P_k(., s) rho_k(s)``,
    discretized with the Duhamel weights of the modal/frequency basis.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, g.dim)
    d = g.dim
    if pts.shape[0] != d:
        raise ValueError(f"need exactly {d} points")
    mid = 0.5 * (orbit1(grid.nodes) + orbit2(grid.nodes))
    P = np.stack([g.gradient(pts[j] - mid) for j in range(d)], axis=1)
    if basis is None:
        basis = make_basis(domain, g, alpha, grid.t_end, float(np.max(np.abs(mid))) + g.delta)
    op = MemoryOperator(basis, g, alpha, grid, pts)
    n = grid.n_steps
    obs = basis.evaluate(pts) * op.rates[None, :]
    # (G_k(., s), phi_n) = -C_n d_k S_n(gamma_bar(s))
    B = np.stack([-op.moments[:, None] * basis.shape_grad(mid[k]) for k in range(n + 1)], axis=1)
    weights = np.zeros((n + 1, n + 1, d, d))
    for m in range(1, n + 1):
        w = op.W[:, m::-1].astype(B.dtype).copy()
        w[:, 0] -= op.b[:, m]
        weights[m, : m + 1] = np.real(np.einsum("jn,nk,nkc->kjc", obs, w, B[:, : m + 1, :]))
    return P, weights


# ---------------------------------------------------------------------------
# stability harness


def random_localized_pairs(n_pairs, eps, T=1.0, dim=1, n_terms=3, seed=0):
    """Pairs of smooth orbits with ``gamma(0) = 0`` and ``max |gamma| <= eps``."""
    from .model import sum_of_sines_orbit

    rng = np.random.default_rng(seed)
    t = np.linspace(0, T, 2049)
    pairs = []
    while len(pairs) < n_pairs:
        orbs = []
        for _ in range(2):
            c = rng.standard_normal((n_terms, dim)) / np.arange(1, n_terms + 1)[:, None]
            k = np.arange(1, n_terms + 1)
            vals = np.sin(np.outer(t, k) * np.pi / T) @ c
            peak = np.max(np.linalg.norm(vals, axis=1))
            scale = eps * rng.uniform(0.3, 0.95) / peak
            orbs.append(sum_of_sines_orbit(c * scale, T))
        diff = np.max(np.linalg.norm(orbs[0](t) - orbs[1](t), axis=1))
        if diff > 1e-3:
            pairs.append(tuple(orbs))
    return pairs


def stability_experiment(orbit_pairs, g, alpha_list, domain, points, grid: TimeGrid):
    """Ratios ``|gamma_1 - gamma_2|_C / sum_j |d_t^alpha (u_1 - u_2)(x^j)|_C``.

    Norms are maxima over the grid nodes (the extrapolated first node of
    the L1 scheme is skipped). Returns ``(rows, max_ratio)``.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, g.dim)
    rows = []
    nodes = grid.nodes
    for alpha in alpha_list:
        weights = None
        for pid, (o1, o2) in enumerate(orbit_pairs):
            cdiff = float(np.max(np.linalg.norm(o1(nodes) - o2(nodes), axis=1)))
            if not cdiff > 0:
                raise ValueError(f"pair {pid}: orbits coincide on the grid")
            s1 = solve_moving_source(g, o1, alpha, domain, grid, weights=weights)
            if weights is None:
                weights = duhamel_weights(alpha, s1.rates, grid)
            s2 = solve_moving_source(g, o2, alpha, domain, grid, weights=weights)
            diff = TraceSet(grid, pts, s1.field(pts) - s2.field(pts))
            dah = fractional_data_derivative(diff, alpha)
            first = 1 if alpha < 1 else 0
            tnorm = float(np.sum(np.max(np.abs(dah[first:]), axis=0)))
            rows.append({"pair_id": pid, "alpha": float(alpha), "c_norm_diff": cdiff,
                         "trace_norm": tnorm, "ratio": cdiff / tnorm if tnorm > 0 else np.inf})
    return rows, max(r["ratio"] for r in rows)
