"""Forward solvers for ``(d_t^alpha + L) u = g(x - gamma(t))`` with zero initial data.

The inhomogeneous problem is assembled mode by mode (bounded box) or
frequency by frequency (free space) from the closed-kernel form of the
fractional Duhamel principle,

    u_n(t) = int_0^t f_n(s) (t-s)^(alpha-1) E_{alpha,alpha}(-lam_n (t-s)^alpha) ds,

where ``lam_n`` is a Dirichlet eigenvalue or the symbol ``S(xi)``. The
convolution uses product integration: the density ``f_n`` is interpolated
linearly and integrated exactly against the kernel through its first two
antiderivatives.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .fracops import SampledFunction, TimeGrid, _power_weights
from .model import BoxDomain, FreeSpace, SourceProfile, check_admissible, profile_cutoff
from .specfun import gamma, mittag_leffler, relaxation_antiderivatives


def _ceil_order(alpha):
    if not 0.0 < alpha <= 2.0:
        raise ValueError(f"alpha must lie in (0, 2], got {alpha}")
    return 1 if alpha <= 1.0 else 2


# ---------------------------------------------------------------------------
# eigen system and frequency grid


class ModalBasis:
    """Dirichlet eigenpairs of ``-sum a_i d_i^2 + c`` on a centered box.

    Modes are tensor products of ``sqrt(2/L_i) sin(n_i pi (x_i + L_i/2) / L_i)``
    sorted by eigenvalue.
    """

    def __init__(self, domain: BoxDomain, counts):
        self.domain = domain
        counts = tuple(int(c) for c in counts)
        idx = np.array(list(itertools.product(*[range(1, c + 1) for c in counts])))
        L = np.asarray(domain.lengths)
        a = np.asarray(domain.diffusion)
        k = idx * np.pi / L
        lam = np.sum(a * k**2, axis=1) + domain.reaction
        order = np.argsort(lam, kind="stable")
        self.index = idx[order]
        self.wavenumbers = k[order]
        self.eigenvalues = lam[order]

    @property
    def size(self):
        return len(self.eigenvalues)

    def evaluate(self, x):
        """Mode values at points ``x``; shape ``(n_points, n_modes)``."""
        x = np.asarray(x, dtype=float).reshape(-1, self.domain.dim)
        L = np.asarray(self.domain.lengths)
        out = np.ones((x.shape[0], self.size))
        for i in range(self.domain.dim):
            arg = np.outer(x[:, i] + L[i] / 2, self.wavenumbers[:, i])
            out *= math.sqrt(2.0 / L[i]) * np.sin(arg)
        return out

    def profile_moments(self, g: SourceProfile, quadrature="gauss", n_quad=None):
        """``C_n = int g(z) prod_i cos(k_i z_i) dz`` over ``B_delta``."""
        kmax = float(np.max(self.wavenumbers))
        if n_quad is None:
            n_quad = int(min(400, max(64, math.ceil(1.5 * kmax * g.delta + 48))))
        if quadrature == "gauss":
            z, w = np.polynomial.legendre.leggauss(n_quad)
            z, w = z * g.delta, w * g.delta
        elif quadrature == "trapezoid":
            z = np.linspace(-g.delta, g.delta, n_quad + 1)
            w = np.full(z.shape, 2.0 * g.delta / n_quad)
            w[[0, -1]] *= 0.5
        else:
            raise ValueError(f"unknown quadrature {quadrature!r}")
        d = g.dim
        mesh = np.stack(np.meshgrid(*([z] * d), indexing="ij"), axis=-1).reshape(-1, d)
        wts = np.prod(np.stack(np.meshgrid(*([w] * d), indexing="ij"), axis=-1).reshape(-1, d), axis=1)
        gw = g(mesh) * wts
        keep = gw != 0
        mesh, gw = mesh[keep], gw[keep]
        out = np.empty(self.size)
        chunk = max(1, 4_000_000 // max(len(gw), 1))
        for lo in range(0, self.size, chunk):
            k = self.wavenumbers[lo : lo + chunk]
            c = np.ones((len(k), len(gw)))
            for i in range(d):
                c *= np.cos(np.outer(k[:, i], mesh[:, i]))
            out[lo : lo + chunk] = c @ gw
        return out

    def source_coefficients(self, g, centers, quadrature="gauss", n_quad=None):
        """``f_n(s) = (g(. - gamma(s)), phi_n)`` for each row of ``centers``.

        Since ``g`` is even in every coordinate, the shift rule for sines
        reduces the inner product to ``C_n prod_i sqrt(2/L_i) sin(k_i (gamma_i + L_i/2))``.
        Returns shape ``(n_modes, n_centers)``.
        """
        moments = self.profile_moments(g, quadrature, n_quad)
        return moments[:, None] * self.evaluate(centers).T

    def source_moments(self, g, quadrature="gauss", n_quad=None):
        return self.profile_moments(g, quadrature, n_quad)

    def shape(self, centers):
        """``phi_n(c)`` per center; the source coefficient is ``C_n phi_n(c)``. Shape ``(n_modes, n_centers)``."""
        return self.evaluate(centers).T

    def shape_grad(self, center):
        """Gradient of ``phi_n`` at one center; shape ``(n_modes, dim)``."""
        c = np.asarray(center, dtype=float).reshape(self.domain.dim)
        L = np.asarray(self.domain.lengths)
        k = self.wavenumbers
        arg = k * (c + L / 2)
        norm = np.sqrt(2.0 / L)
        s, co = norm * np.sin(arg), norm * k * np.cos(arg)
        out = np.empty_like(k)
        for i in range(self.domain.dim):
            others = np.prod(np.delete(s, i, axis=1), axis=1) if self.domain.dim > 1 else 1.0
            out[:, i] = co[:, i] * others
        return out

    def orthonormality_error(self, pairs, n_quad=512):
        """Max deviation of ``(phi_a, phi_b)`` from ``delta_ab`` over ``pairs``."""
        L = np.asarray(self.domain.lengths)
        z, w = np.polynomial.legendre.leggauss(n_quad)
        err = 0.0
        for a, b in pairs:
            val = 1.0
            for i in range(self.domain.dim):
                x = z * L[i] / 2
                ka, kb = self.wavenumbers[a, i], self.wavenumbers[b, i]
                fa = math.sqrt(2 / L[i]) * np.sin(ka * (x + L[i] / 2))
                fb = math.sqrt(2 / L[i]) * np.sin(kb * (x + L[i] / 2))
                val *= np.sum(w * fa * fb) * L[i] / 2
            err = max(err, abs(val - (1.0 if a == b else 0.0)))
        return err


class SymbolGrid:
    """Symmetric uniform frequency grid on ``[-xi_max, xi_max]^d`` with the symbol ``S``.

    Nodes are ``(k - (n-1)/2) dxi``, so the grid is closed under ``xi -> -xi``
    (node ``k`` maps to node ``n-1-k`` on each axis).
    """

    def __init__(self, domain: FreeSpace, xi_max, n_freq):
        if n_freq & (n_freq - 1):
            raise ValueError("n_freq must be a power of two")
        self.domain = domain
        self.xi_max = float(xi_max)
        self.n_freq = int(n_freq)
        self.dxi = 2.0 * self.xi_max / self.n_freq
        axis = (np.arange(self.n_freq) - (self.n_freq - 1) / 2.0) * self.dxi
        self.axis = axis
        d = domain.dim
        self.nodes = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
        self.symbol = domain.symbol(self.nodes)

    @property
    def size(self):
        return self.nodes.shape[0]

    @property
    def period(self):
        return 2.0 * math.pi / self.dxi

    def mirror(self):
        """Index permutation implementing ``xi -> -xi``."""
        return np.arange(self.size)[::-1]

    def evaluate(self, x):
        """Inverse-transform weights at ``x``; shape ``(n_points, n_freq**d)``."""
        x = np.asarray(x, dtype=float).reshape(-1, self.domain.dim)
        scale = (self.dxi / math.sqrt(2 * math.pi)) ** self.domain.dim
        return scale * np.exp(1j * (x @ self.nodes.T))

    def source_coefficients(self, g, centers, points_per_support=256):
        """``G(xi, s) = g_hat(xi) exp(-i xi . gamma(s))``; shape ``(n_freq**d, n_centers)``."""
        return self.source_moments(g, points_per_support)[:, None] * self.shape(centers)

    def source_moments(self, g, points_per_support=256, n_quad=None):
        return g.fourier(self.nodes, points_per_support=max(points_per_support, self._ppsupport(g)))

    def shape(self, centers):
        centers = np.asarray(centers, dtype=float).reshape(-1, self.domain.dim)
        return np.exp(-1j * (self.nodes @ centers.T))

    def shape_grad(self, center):
        c = np.asarray(center, dtype=float).reshape(self.domain.dim)
        return -1j * self.nodes * np.exp(-1j * (self.nodes @ c))[:, None]

    def _ppsupport(self, g):
        # trapezoid rule for the transform needs h < pi / xi_max
        need = int(math.ceil(2 * g.delta * self.xi_max / math.pi * 1.5))
        return max(32, 1 << max(need - 1, 1).bit_length())


def default_symbol_grid(domain: FreeSpace, g: SourceProfile, horizon, reach, alpha=1.0):
    """Frequency box where ``|g_hat|`` drops to ``1e-10 g_hat(0)``, and a
    spacing whose alias period comfortably exceeds the region the field
    reaches by ``horizon``."""
    xi_max = domain.xi_max
    if xi_max is None:
        xi_max = profile_cutoff(g.delta)
    n_freq = domain.n_freq
    if n_freq is None:
        speed = math.sqrt(float(np.max(np.linalg.eigvalsh(domain.diffusion))))
        spread = 12.0 * speed * max(horizon, 1e-3) ** (alpha / 2.0) + horizon * float(
            np.linalg.norm(domain.drift)
        )
        period = 2.0 * (reach + g.delta + spread) + 4.0 * g.delta
        n = int(math.ceil(2 * xi_max * period / (2 * math.pi)))
        n_freq = 1 << (n - 1).bit_length()
    return SymbolGrid(domain, xi_max, n_freq)


# ---------------------------------------------------------------------------
# homogeneous problems


def solve_homogeneous_bounded(v_init, alpha, eigenvalues, t):
    """Modal coefficients of the homogeneous solution at time ``t``.

    ``v_init`` holds the coefficients of ``v_0`` (``alpha <= 1``) or
    ``v_1`` (``alpha > 1``); each is multiplied by
    ``t^(ceil(alpha)-1) E_{alpha,ceil(alpha)}(-lam t^alpha)``.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    ca = _ceil_order(alpha)
    v = np.asarray(v_init)
    lam = np.asarray(eigenvalues)
    if t == 0:
        return v * (1.0 if ca == 1 else 0.0)
    return v * (t ** (ca - 1) * _propagator(alpha, lam, t))


def _propagator(alpha, lam, t):
    if alpha == 1.0:
        return np.exp(-lam * t)
    if alpha == 2.0:
        root = np.sqrt(lam + 0j)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(root == 0, t, np.sin(root * t) / np.where(root == 0, 1, root)) / t
        return out if np.iscomplexobj(lam) else out.real
    return mittag_leffler(-lam * t**alpha, alpha, float(_ceil_order(alpha)))


def spatial_grid(domain: FreeSpace, n, length):
    """Periodic grid of ``n`` points per axis on ``[-length/2, length/2)``."""
    x = (np.arange(n) - n // 2) * (length / n)
    return x


def solve_homogeneous_free(v_init, alpha, domain: FreeSpace, t, length):
    """Homogeneous free-space solution on a periodic spatial grid.

    ``v_init`` is sampled on ``spatial_grid(domain, n, length)`` along each
    axis (shape ``(n,)*d``) and must decay to zero well inside the box.
    Transforms with the FFT, multiplies by
    ``t^(ceil(alpha)-1) E_{alpha,ceil(alpha)}(-S(xi) t^alpha)``
    (``sin(sqrt(S) t)/sqrt(S)`` at ``alpha = 2``) and transforms back.
    """
    domain.check_order(alpha)
    if t < 0:
        raise ValueError("t must be non-negative")
    v = np.asarray(v_init, dtype=float)
    d = domain.dim
    if v.ndim != d:
        raise ValueError(f"v_init must be a {d}-dimensional array")
    n = v.shape[0]
    freq = 2 * np.pi * np.fft.fftfreq(n, d=length / n)
    xi = np.stack(np.meshgrid(*([freq] * d), indexing="ij"), axis=-1)
    S = domain.symbol(xi.reshape(-1, d)).reshape(v.shape)
    if not np.any(v):
        return np.zeros_like(v)
    ca = _ceil_order(alpha)
    if t == 0:
        return v.copy() if ca == 1 else np.zeros_like(v)
    lam = S if np.any(S.imag) else S.real
    mult = t ** (ca - 1) * _propagator(alpha, lam, t)
    vhat = np.fft.fftn(v)
    return np.fft.ifftn(vhat * mult).real


# ---------------------------------------------------------------------------
# Duhamel composition


def duhamel_weights(alpha, rates, grid: TimeGrid):
    """Product-integration weights for the relaxation-kernel convolution.

    With ``tau_j = j dt`` and ``K1, K2`` the first two antiderivatives of
    the kernel, linear interpolation of the density gives

        u_m = sum_{i=0}^m W_i f_{m-i} - b_m f_0,

    ``a_j = K1(tau_{j+1}) - dK2_j/dt``, ``b_j = -K1(tau_j) + dK2_j/dt``,
    ``W_0 = b_0``, ``W_i = a_{i-1} + b_i``. Returns ``(W, b)`` each of shape
    ``(n_rates, n_steps + 1)``.
    """
    _ceil_order(alpha)
    rates = np.atleast_1d(np.asarray(rates))
    n = grid.n_steps
    h = grid.dt
    tau = np.arange(n + 2) * h
    k1, k2 = relaxation_antiderivatives(alpha, rates[:, None], tau[None, :])
    dk2 = np.diff(k2, axis=1) / h
    a = k1[:, 1:] - dk2
    b = -k1[:, :-1] + dk2
    W = np.empty_like(b[:, : n + 1])
    W[:, 0] = b[:, 0]
    W[:, 1:] = a[:, :n] + b[:, 1 : n + 1]
    return W, b[:, : n + 1]


def duhamel_compose(rates, forcing, alpha, grid: TimeGrid, weights=None):
    """Closed-kernel Duhamel composition for each rate (eigenvalue or symbol value).

    ``forcing`` has shape ``(n_rates, n_steps + 1)``: the source
    coefficient history ``f_n(t_m)``. Returns the coefficient history
    ``u_n(t_m)`` with the same shape; ``u_n(0) = 0`` exactly.
    """
    forcing = np.asarray(forcing)
    rates = np.atleast_1d(np.asarray(rates))
    if forcing.shape != (len(rates), grid.n_steps + 1):
        raise ValueError(
            f"forcing must have shape {(len(rates), grid.n_steps + 1)}, got {forcing.shape}"
        )
    W, b = duhamel_weights(alpha, rates, grid) if weights is None else weights
    n1 = grid.n_steps + 1
    if n1 > 64:
        conv = fftconvolve(W, forcing, axes=1)[:, :n1]
    else:
        conv = np.stack([np.convolve(W[i], forcing[i])[:n1] for i in range(len(rates))])
    out = conv - b * forcing[:, :1]
    out[:, 0] = 0.0
    return out


def fractional_ode_stepper(lam, forcing, alpha, grid: TimeGrid):
    """Independent reference: solve ``d_t^alpha y + lam y = f`` with zero data.

    Writes the problem as ``y = J^alpha (f - lam y)`` and marches the
    product-trapezoid rule implicitly. Works for any ``alpha`` in (0, 2].
    """
    _ceil_order(alpha)
    f = np.asarray(forcing, dtype=float)
    n = grid.n_steps
    c, start = _power_weights(float(alpha), n)
    s = grid.dt**alpha / gamma(alpha + 2.0)
    F = np.empty(n + 1)
    y = np.zeros(n + 1)
    F[0] = f[0]
    for m in range(1, n + 1):
        hist = np.dot(c[1:m + 1], F[m - 1 :: -1][:m]) + (start[m] - c[m]) * F[0]
        y[m] = s * (hist + f[m]) / (1.0 + s * lam)
        F[m] = f[m] - lam * y[m]
    return y


# ---------------------------------------------------------------------------
# moving source


@dataclass
class TraceSet:
    """Time traces ``u(x^j, t_m)``; ``values`` has shape ``(n_steps + 1, n_points)``."""

    grid: TimeGrid
    points: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim == 1:
            self.points = self.points[:, None]
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_steps + 1, self.points.shape[0]):
            raise ValueError("trace values do not match grid and points")

    def sampled(self, j) -> SampledFunction:
        return SampledFunction(self.grid, self.values[:, j])

    def subset(self, idx):
        idx = np.atleast_1d(idx)
        return TraceSet(self.grid, self.points[idx], self.values[:, idx], dict(self.meta))

    def subsample(self, coarse: TimeGrid):
        ratio = self.grid.ratio_to(coarse)
        return TraceSet(coarse, self.points, self.values[::ratio], dict(self.meta))


@dataclass
class ForwardSolution:
    """Coefficient history of the moving-source solution in a modal or frequency basis."""

    alpha: float
    grid: TimeGrid
    basis: object
    rates: np.ndarray
    coefficients: np.ndarray
    forcing: np.ndarray

    def field(self, x):
        """``u(x, t_m)`` for each point; shape ``(n_steps + 1, n_points)``."""
        return self._apply(x, self.coefficients)

    def operator_field(self, x):
        """``(L u)(x, t_m)`` from the same representation."""
        return self._apply(x, self.rates[:, None] * self.coefficients)

    def _apply(self, x, coef):
        phi = self.basis.evaluate(x)
        out = (phi @ coef).T
        return out.real if np.iscomplexobj(out) else out

    def traces(self, points, meta=None) -> TraceSet:
        pts = np.asarray(points, dtype=float).reshape(-1, self.basis.domain.dim)
        return TraceSet(self.grid, pts, self.field(pts), dict(meta or {}))

    def tail_coefficient(self):
        """Largest magnitude of the last retained mode (truncation indicator)."""
        return float(np.max(np.abs(self.coefficients[-1])))


def make_basis(domain, g, alpha, horizon, reach, symbol_grid=None):
    """Modal basis for a box, frequency grid for free space."""
    if domain.kind == "box":
        return ModalBasis(domain, domain.modes_per_axis(g))
    domain.check_order(alpha)
    if symbol_grid is not None:
        return symbol_grid
    return default_symbol_grid(domain, g, horizon, reach, alpha)


def basis_rates(basis):
    """Eigenvalues, or symbol values (real when the drift vanishes)."""
    if isinstance(basis, ModalBasis):
        return basis.eigenvalues
    return basis.symbol if np.any(basis.symbol.imag) else basis.symbol.real


def solve_moving_source(g: SourceProfile, orbit, alpha, domain, grid: TimeGrid, *,
                        quadrature="gauss", n_quad=None, symbol_grid=None, check=True,
                        weights=None):
    """Solve the moving-source problem on ``grid``.

    Bounded boxes use the Dirichlet eigenbasis with the mode count of
    ``domain.modes_per_axis``; free space uses ``symbol_grid`` (or the
    default from :func:`default_symbol_grid`). ``weights`` may carry
    precomputed :func:`duhamel_weights` for the same rates and grid.
    """
    _ceil_order(alpha)
    if g.dim != domain.dim or orbit.dim != domain.dim:
        raise ValueError("profile, orbit and domain dimensions differ")
    if check:
        report = check_admissible(orbit, domain, g, n_samples=max(64, grid.n_steps + 1))
        if domain.kind == "box" and not report.ok:
            raise ValueError(f"orbit not admissible: {report.first_violation}")
    centers = orbit(grid.nodes)
    reach = float(np.max(np.linalg.norm(centers, axis=1)))
    basis = make_basis(domain, g, alpha, grid.t_end, reach, symbol_grid)
    rates = basis_rates(basis)
    if domain.kind == "box":
        forcing = basis.source_coefficients(g, centers, quadrature, n_quad)
    else:
        forcing = basis.source_coefficients(g, centers)
    coef = duhamel_compose(rates, forcing, alpha, grid, weights=weights)
    sol = ForwardSolution(alpha, grid, basis, np.asarray(rates), coef, forcing)
    if domain.kind == "box" and np.max(np.abs(forcing)) > 0:
        rel = np.max(np.abs(forcing[-1])) / np.max(np.abs(forcing))
        if rel > 1e-6:
            warnings.warn(f"modal truncation may be too coarse (last-mode forcing {rel:.2e})",
                          RuntimeWarning, stacklevel=2)
    return sol


def observe_and_perturb(traces: TraceSet, noise_level=0.0, seed=0) -> TraceSet:
    """Add white Gaussian noise with standard deviation ``noise_level * max|u|``."""
    if noise_level < 0:
        raise ValueError("noise_level must be non-negative")
    meta = dict(traces.meta, noise_level=float(noise_level), noise_seed=int(seed))
    if noise_level == 0:
        return TraceSet(traces.grid, traces.points, traces.values.copy(), meta)
    rng = np.random.default_rng(seed)
    sigma = noise_level * float(np.max(np.abs(traces.values)))
    noisy = traces.values + sigma * rng.standard_normal(traces.values.shape)
    return TraceSet(traces.grid, traces.points, noisy, meta)
