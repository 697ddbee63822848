"""Problem data: source profile, orbits, domains and observation geometry."""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.stats import qmc

from .fracops import TimeGrid


def _as_points(x, dim):
    x = np.asarray(x, dtype=float)
    if dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != dim:
        raise ValueError(f"expected points with {dim} components, got shape {x.shape}")
    return x


@dataclass(frozen=True)
class SourceProfile:
    """Bell-shaped bump ``C exp(1/(|x|^2 - delta^2))`` supported in ``B_delta``."""

    delta: float
    amplitude: float = 1.0
    dim: int = 1

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.amplitude < 0:
            raise ValueError(f"amplitude must be non-negative, got {self.amplitude}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")

    def _parts(self, x):
        x = _as_points(x, self.dim)
        r2 = np.sum(x * x, axis=-1)
        inside = r2 < self.delta**2
        q = np.where(inside, r2 - self.delta**2, -1.0)
        with np.errstate(under="ignore"):
            g = np.where(inside, self.amplitude * np.exp(1.0 / q), 0.0)
        return x, r2, q, g

    def __call__(self, x):
        return self._parts(x)[3]

    def gradient(self, x):
        """Analytic gradient, shape ``(..., dim)``."""
        x, _, q, g = self._parts(x)
        return (g * (-2.0 / q**2))[..., None] * x

    def laplacian(self, x):
        x, r2, q, g = self._parts(x)
        return g * (4.0 * r2 / q**4 - 2.0 * self.dim / q**2 + 8.0 * r2 / q**3)

    def fourier(self, freqs, points_per_support=256):
        """Fourier transform ``(2 pi)^(-d/2) int g(x) exp(-i x.xi) dx``.

        ``freqs`` has shape ``(..., dim)`` (or ``(...)`` for ``dim = 1``).
        The integral is a tensor trapezoid sum over the support, which is
        spectrally accurate for ``|xi| < pi / h``; ``points_per_support``
        sets ``h = 2 delta / points_per_support``.
        """
        if points_per_support < 32:
            raise ValueError("need at least 32 points across the support")
        freqs = _as_points(freqs, self.dim)
        h = 2.0 * self.delta / points_per_support
        if np.max(np.abs(freqs), initial=0.0) >= math.pi / h:
            raise ValueError(
                "spatial resolution too coarse for the requested frequencies; "
                "raise points_per_support"
            )
        x1 = -self.delta + h * np.arange(points_per_support + 1)
        axes = np.meshgrid(*([x1] * self.dim), indexing="ij")
        xs = np.stack([a.ravel() for a in axes], axis=-1)
        gv = self(xs)
        keep = gv > 0
        xs, gv = xs[keep], gv[keep]
        flat = freqs.reshape(-1, self.dim)
        out = np.empty(flat.shape[0], dtype=complex)
        scale = h**self.dim / (2.0 * math.pi) ** (self.dim / 2.0)
        chunk = max(1, 2_000_000 // max(len(gv), 1))
        for i in range(0, flat.shape[0], chunk):
            phase = flat[i : i + chunk] @ xs.T
            out[i : i + chunk] = scale * (np.exp(-1j * phase) @ gv)
        return out.reshape(freqs.shape[:-1])

    def mass(self):
        """Integral of ``g`` by the same trapezoid rule used in :meth:`fourier`."""
        return float(self.fourier(np.zeros(self.dim)).real) * (2 * math.pi) ** (self.dim / 2)


@dataclass
class Orbit:
    """Source trajectory ``gamma: [0, T] -> R^d``.

    Either ``func`` (vectorized, ``t -> (len(t), dim)``) or samples on a
    grid are given; samples are interpolated with a cubic spline.
    """

    dim: int
    T: float
    K: float
    func: Optional[Callable] = None
    grid: Optional[TimeGrid] = None
    samples: Optional[np.ndarray] = None
    name: str = "orbit"
    _spline: Optional[CubicSpline] = field(default=None, repr=False)

    def __post_init__(self):
        if self.func is None and self.samples is None:
            raise ValueError("orbit needs either func or samples")
        if self.samples is not None:
            self.samples = np.asarray(self.samples, dtype=float).reshape(-1, self.dim)
            if self.grid is None:
                raise ValueError("sampled orbit needs its grid")
            self._spline = CubicSpline(self.grid.nodes, self.samples, axis=0)

    @classmethod
    def from_samples(cls, grid, values, K, name="sampled"):
        values = np.asarray(values, dtype=float)
        dim = 1 if values.ndim == 1 else values.shape[1]
        return cls(dim=dim, T=grid.t_end, K=K, grid=grid, samples=values, name=name)

    def __call__(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.func is not None:
            out = np.asarray(self.func(t), dtype=float)
        else:
            out = self._spline(t)
        return out.reshape(len(t), self.dim)

    def velocity(self, t, h=None):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self._spline is not None and self.func is None:
            return self._spline(t, 1).reshape(len(t), self.dim)
        h = h or 1e-6 * max(self.T, 1.0)
        return (self(t + h) - self(t - h)) / (2 * h)


def zero_orbit(dim=1, T=1.0, K=1.0):
    return Orbit(dim, T, K, func=lambda t: np.zeros((len(t), dim)), name="zero")


def linear_orbit(velocity, T=1.0, K=None):
    v = np.atleast_1d(np.asarray(velocity, dtype=float))
    K = float(np.linalg.norm(v)) if K is None else K
    return Orbit(len(v), T, K, func=lambda t: np.outer(t, v), name="linear")


def sine_orbit(amplitude, frequency, T=1.0, K=None):
    """``gamma_k(t) = a_k sin(2 pi f_k t)`` per component."""
    a = np.atleast_1d(np.asarray(amplitude, dtype=float))
    f = np.broadcast_to(np.atleast_1d(np.asarray(frequency, dtype=float)), a.shape).copy()
    if K is None:
        K = float(np.linalg.norm(2 * np.pi * a * f))

    def func(t):
        return a[None, :] * np.sin(2 * np.pi * np.outer(t, f))

    return Orbit(len(a), T, K, func=func, name="sine")


def sum_of_sines_orbit(coefficients, T=1.0, K=None):
    """``gamma(t) = sum_k c_k sin(k pi t / T)``; ``coefficients`` has shape ``(n, dim)``."""
    c = np.asarray(coefficients, dtype=float)
    if c.ndim == 1:
        c = c[:, None]
    k = np.arange(1, c.shape[0] + 1)

    def func(t):
        return np.sin(np.outer(t, k) * np.pi / T) @ c

    if K is None:
        K = float(np.sum(np.linalg.norm(c, axis=1) * k * np.pi / T))
    return Orbit(c.shape[1], T, K, func=func, name="sum_of_sines")


@dataclass(frozen=True)
class LocalizedOrbitBound:
    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


@dataclass(frozen=True)
class BoxDomain:
    """Hyperrectangle ``prod (-L_i/2, L_i/2)`` with the Dirichlet operator
    ``-sum_i a_i d_i^2 + c``.

    ``n_modes`` is the number of sine modes per axis; ``None`` picks the
    count from the decay of the profile transform (see :meth:`modes_per_axis`).
    """

    lengths: tuple
    diffusion: tuple = None
    reaction: float = 0.0
    n_modes: Optional[tuple] = None

    def __post_init__(self):
        lengths = tuple(float(v) for v in np.atleast_1d(self.lengths))
        object.__setattr__(self, "lengths", lengths)
        if any(v <= 0 for v in lengths):
            raise ValueError("box lengths must be positive")
        diff = self.diffusion
        diff = (1.0,) * len(lengths) if diff is None else tuple(float(v) for v in np.atleast_1d(diff))
        if len(diff) != len(lengths) or any(v <= 0 for v in diff):
            raise ValueError("diffusion must be positive, one value per axis")
        object.__setattr__(self, "diffusion", diff)
        if self.reaction < 0:
            raise ValueError("reaction must be non-negative")
        if self.n_modes is not None:
            nm = tuple(int(v) for v in np.atleast_1d(self.n_modes))
            if len(nm) == 1 and len(lengths) > 1:
                nm = nm * len(lengths)
            object.__setattr__(self, "n_modes", nm)

    kind = "box"

    @property
    def dim(self):
        return len(self.lengths)

    def contains(self, x, margin=0.0):
        x = _as_points(x, self.dim)
        half = np.asarray(self.lengths) / 2 - margin
        return np.all(np.abs(x) < half, axis=-1)

    def modes_per_axis(self, g: SourceProfile, rel_tol=1e-10, cap=4096):
        """Sine-mode count per axis.

        The count reaches the wavenumber where the profile transform drops
        below ``rel_tol`` of its peak (at least the ``(pi / (delta/4))^2``
        eigenvalue rule), with the total product capped at ``cap``.
        """
        if self.n_modes is not None:
            return self.n_modes
        kmax = max(profile_cutoff(g.delta, rel_tol), 4.0 * math.pi / g.delta)
        counts = [max(1, int(math.ceil(kmax * L / math.pi))) for L in self.lengths]
        total = int(np.prod(counts))
        if total > cap:
            scale = (cap / total) ** (1.0 / len(counts))
            counts = [max(1, int(c * scale)) for c in counts]
        return tuple(counts)


@lru_cache(maxsize=32)
def profile_cutoff(delta, rel_tol=1e-10):
    """Smallest ``|xi|`` with ``|g_hat(xi)| <= rel_tol * g_hat(0)`` (1D radial profile)."""
    probe = np.linspace(0.0, 600.0 / delta, 2401)
    vals = np.abs(SourceProfile(delta).fourier(probe, points_per_support=2048))
    small = np.flatnonzero(vals <= rel_tol * vals[0])
    return float(probe[small[0]]) if len(small) else float(probe[-1])


@dataclass(frozen=True)
class FreeSpace:
    """Whole space with ``L = -div(A grad) + b.grad + c`` (constant coefficients).

    ``xi_max`` is the half-width of the frequency box and ``n_freq`` the
    number of frequency nodes per axis (a power of two).
    """

    diffusion: np.ndarray
    drift: np.ndarray = None
    reaction: float = 0.0
    xi_max: float = None
    n_freq: int = None

    kind = "free"

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.diffusion, dtype=float))
        if A.shape[0] != A.shape[1] or not np.allclose(A, A.T):
            raise ValueError("diffusion matrix must be square and symmetric")
        if np.min(np.linalg.eigvalsh(A)) <= 0:
            raise ValueError("diffusion matrix must be positive definite")
        object.__setattr__(self, "diffusion", A)
        b = np.zeros(A.shape[0]) if self.drift is None else np.atleast_1d(np.asarray(self.drift, dtype=float))
        if b.shape != (A.shape[0],):
            raise ValueError("drift must have one component per axis")
        object.__setattr__(self, "drift", b)
        if self.n_freq is not None and (self.n_freq & (self.n_freq - 1)):
            raise ValueError("n_freq must be a power of two")

    @property
    def dim(self):
        return self.diffusion.shape[0]

    def contains(self, x, margin=0.0):
        x = _as_points(x, self.dim)
        return np.ones(x.shape[:-1], dtype=bool)

    def symbol(self, xi):
        """``S(xi) = A xi.xi + i b.xi + c``."""
        xi = _as_points(xi, self.dim)
        quad = np.einsum("...i,ij,...j->...", xi, self.diffusion, xi)
        return quad + 1j * (xi @ self.drift) + self.reaction

    def check_order(self, alpha):
        if alpha == 2.0 and (np.any(self.drift != 0) or self.reaction < 0):
            raise ValueError("alpha = 2 in free space requires zero drift and reaction >= 0")


@dataclass(frozen=True)
class ObservationSet:
    points: np.ndarray
    grid: TimeGrid

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        object.__setattr__(self, "points", pts)

    @property
    def dim(self):
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]


@dataclass
class AdmissibilityReport:
    ok: bool
    violations: list

    @property
    def first_violation(self):
        return self.violations[0] if self.violations else None


def check_admissible(orbit, domain, g, eps=None, n_samples=256, tol_v=1e-2):
    """Check the admissible-set clauses on a sampling grid.

    Clauses, in order: ``gamma(0) = 0``, velocity bound ``K``, support of
    the translated profile inside the domain, and (optionally) the
    localization ``max |gamma| <= eps``.
    """
    if n_samples < 64:
        raise ValueError("need at least 64 orbit samples")
    t = np.linspace(0.0, orbit.T, n_samples)
    gam = orbit(t)
    violations = []
    if np.max(np.abs(gam[0])) > 1e-12:
        violations.append(f"gamma(0) = {gam[0].tolist()} is not zero")
    vel = np.linalg.norm(np.gradient(gam, t, axis=0, edge_order=2), axis=1)
    if np.max(vel) > orbit.K * (1 + tol_v):
        i = int(np.argmax(vel))
        violations.append(f"speed {vel[i]:.6g} exceeds K = {orbit.K:.6g} at t = {t[i]:.6g}")
    if domain.kind == "box":
        half = np.asarray(domain.lengths) / 2
        reach = np.abs(gam) + g.delta
        bad = np.any(reach >= half, axis=1)
        if np.any(bad):
            i = int(np.argmax(bad))
            violations.append(f"support of g leaves the domain at t = {t[i]:.6g}")
    if eps is not None:
        e = eps.epsilon if isinstance(eps, LocalizedOrbitBound) else float(eps)
        r = np.linalg.norm(gam, axis=1)
        if np.max(r) > e * (1 + 1e-12):
            i = int(np.argmax(r))
            violations.append(f"|gamma| = {r[i]:.6g} exceeds epsilon = {e:.6g} at t = {t[i]:.6g}")
    return AdmissibilityReport(not violations, violations)


class ObservabilityError(ArithmeticError):
    def __init__(self, message, sample=None):
        super().__init__(message)
        self.sample = sample


def unit_ball_samples(dim, n_samples, seed=0):
    """Quasi-random points of the closed unit ball (Sobol, scrambled with ``seed``).

    The center and a few boundary points are always included.
    """
    if dim == 1:
        u = qmc.Sobol(1, scramble=True, seed=seed).random(n_samples)[:, 0]
        return np.concatenate([[0.0, -1.0, 1.0], 2 * u - 1])[:, None]
    sob = qmc.Sobol(dim + 1, scramble=True, seed=seed).random(n_samples)
    direction = qmc_normal(sob[:, :dim])
    radius = sob[:, dim] ** (1.0 / dim)
    pts = direction * radius[:, None]
    return np.concatenate([np.zeros((1, dim)), direction[: min(2 * dim, n_samples)], pts])


def qmc_normal(u):
    from scipy.special import ndtri

    z = ndtri(np.clip(u, 1e-12, 1 - 1e-12))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def observability_condition(g, points, eps, n_samples=512, seed=0, unit_samples=None,
                            cond_limit=1e12):
    """Sampled bound on ``|(grad g(y^1) ... grad g(y^d))^{-1}|`` over ``y^j`` in
    the closed balls ``B_eps(x^j)``.

    Tuples ``(y^1, ..., y^d)`` are drawn by pairing the per-ball sample
    sets under independent random permutations (seeded); for ``d = 1`` the
    sample set is used as is. Raises :class:`ObservabilityError` if a
    sampled matrix is singular or has condition number above
    ``cond_limit``.
    """
    d = g.dim
    pts = np.asarray(points, dtype=float).reshape(-1, d)
    if pts.shape[0] != d:
        raise ValueError(f"need exactly {d} observation points, got {pts.shape[0]}")
    if not eps > 0:
        raise ValueError("eps must be positive")
    unit = unit_ball_samples(d, n_samples, seed) if unit_samples is None else _as_points(unit_samples, d)
    rng = np.random.default_rng(seed)
    m = unit.shape[0]
    cols = []
    for j in range(d):
        order = np.arange(m) if j == 0 else rng.permutation(m)
        y = pts[j][None, :] + eps * unit[order]
        cols.append(g.gradient(y))
    mats = np.stack(cols, axis=-1)
    sv = np.linalg.svd(mats, compute_uv=False)
    smin = sv[:, -1]
    smax = sv[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(smin > 0, smax / smin, np.inf)
    # 1x1 matrices are always well conditioned, so also compare against the
    # largest gradient seen anywhere in the sampled balls
    scale = np.max(smax)
    bad = (cond > cond_limit) | (smin <= scale / cond_limit)
    if np.any(bad):
        i = int(np.argmax(bad))
        sample = pts[0] + eps * unit[i] if d == 1 else None
        raise ObservabilityError(
            f"gradient matrix singular at sample {i} (condition {cond[i]:.3g})", sample
        )
    return float(np.max(1.0 / smin))


def select_observation_points(g, K, T, allow_heuristic=False):
    """Observation set for interval-by-interval reconstruction.

    For ``d = 1``: ``eps = delta/9``, ``x^j = (-1)^j floor(j/2) delta/4``
    and ``N = ceil(4 (K T + delta) / delta)``. For ``d > 1`` the same 1D
    construction is laid out along each coordinate axis (duplicates of
    the origin removed); this is only a heuristic and has to be requested
    with ``allow_heuristic``.
    """
    delta = g.delta
    eps = delta / 9.0
    n = int(math.ceil(4.0 * (K * T + delta) / delta - 1e-12))
    j = np.arange(1, n + 1)
    line = ((-1.0) ** j) * np.floor(j / 2) * delta / 4.0
    if g.dim == 1:
        return eps, line[:, None] + 0.0, n
    if not allow_heuristic:
        raise ValueError("observation-point construction for d > 1 is heuristic-only")
    pts = [np.zeros(g.dim)]
    for axis in range(g.dim):
        for v in line[line != 0]:
            p = np.zeros(g.dim)
            p[axis] = v
            pts.append(p)
    pts = np.array(pts)
    return eps, pts, len(pts)
