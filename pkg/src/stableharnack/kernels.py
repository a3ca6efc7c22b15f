"""Heat kernels, Green functions and exit-time functionals.

Pointwise heat kernel.  In polar frequency coordinates

    p(1, x) = (2 pi)^-2 int_0^{2 pi} psi(phi)^(-2/alpha) g(x.e(phi) psi(phi)^(-1/alpha)) dphi,
    g(w)    = int_0^inf r exp(-r^alpha) cos(r w) dr,

so one tabulated 1-D profile ``g`` (per alpha) serves every spectral measure.
The angular integral uses Gauss-Legendre panels graded towards the peak at
``x.e(phi) = 0``.  ``p(t, x) = t^(-2/alpha) p(1, t^(-1/alpha) x)``.

Plane grid.  :class:`KernelGrid` holds ``p(1, .)`` on the periodic cell of a
tensor trapezoid inversion (FFT), for consumers that want grid values.

Green function.  Integrating ``exp(-t Phi)`` in time under the Fourier
integral gives ``G(0, x) = |x|^(alpha-2) gG(arg x)`` with

    gG(theta) = K [ 2 int_0^{pi/2} sin(eta)^(alpha-2) (h(phi0+eta) + h(phi0-eta) - 2 h(phi0)) deta
                    + h(phi0) F ],

``h = 1/psi``, ``phi0 = theta + pi/2``, ``K = -Gamma(2-alpha) cos(pi alpha/2) / (4 pi^2)`` and
``F`` the finite part of ``int_0^{2 pi} |cos|^(alpha-2)``.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import integrate, interpolate, special

from .simulate import simulate_exits
from .spectral import StableModel, angular_exponent, levy_density, nondegeneracy_constant

__all__ = [
    "RadialProfile",
    "HeatKernel",
    "KernelGrid",
    "GreenFunction",
    "MCEstimate",
    "radial_profile",
    "heat_kernel_evaluator",
    "heat_kernel",
    "heat_kernel_direct",
    "build_kernel_grid",
    "green_function",
    "green_evaluator",
    "green_time_integral",
    "riesz_constant",
    "green_ball",
    "green_ball_many",
    "expected_exit_time",
    "occupation_integral",
    "delta1_witness",
]


# --------------------------------------------------------------------------- radial profile g


def _g_direct(w: float, alpha: float, rho_max: float) -> float:
    # the integrand is below exp(-50) of its peak past rho_max
    f = lambda r: r * math.exp(-(r ** alpha))  # noqa: E731
    if w == 0.0:
        return special.gamma(2.0 / alpha) / alpha
    with warnings.catch_warnings():
        # roundoff notices at the 1e-16 floor; accuracy checked against high-precision references
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(f, 0.0, rho_max, weight="cos", wvar=w, limit=2000, epsabs=1e-16, epsrel=1e-13)
    return val


def _series_coefficients(alpha: float, terms: int) -> np.ndarray:
    k = np.arange(terms)
    # int_0^inf r^(1+k alpha) cos(r w) dr = -Gamma(2+k alpha) cos(pi k alpha/2) w^(-2-k alpha)
    return (-1.0) ** (k + 1) * special.gamma(2.0 + k * alpha) * np.cos(0.5 * np.pi * k * alpha) / special.factorial(k)


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Tabulated ``g(w)`` for one alpha; series beyond ``w_switch``."""

    alpha: float
    scale: float
    w_switch: float
    spline: interpolate.CubicSpline
    coeffs: np.ndarray
    g0: float

    def __call__(self, w) -> np.ndarray:
        w = np.abs(np.asarray(w, dtype=float))
        out = np.empty_like(w)
        near = w <= self.w_switch
        if np.any(near):
            out[near] = self.spline(np.arcsinh(w[near] / self.scale))
        far = ~near
        if np.any(far):
            out[far] = self.series(w[far])
        return out

    def series(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        k = np.arange(len(self.coeffs))
        return (self.coeffs * w[..., None] ** (-2.0 - k * self.alpha)).sum(axis=-1)


@lru_cache(maxsize=16)
def radial_profile(alpha: float, nodes: int = 2400, terms: int = 60) -> RadialProfile:
    if not 0 < alpha < 2:
        raise ValueError("alpha must lie in (0, 2)")
    # typical frequency of r exp(-r^alpha) sets the feature width of g
    rho_typ = special.gamma(3.0 / alpha) / special.gamma(2.0 / alpha)
    scale = 1.0 / rho_typ
    rho_max = (50.0 + 3.0 * math.log(1.0 + rho_typ)) ** (1.0 / alpha)
    coeffs = _series_coefficients(alpha, terms)
    # switch to the series once it reproduces quadrature to ~1e-12 of g(0)
    g0 = special.gamma(2.0 / alpha) / alpha
    w_switch = 20.0 * scale
    while True:
        ref = _g_direct(w_switch, alpha, rho_max)
        k = np.arange(terms)
        ser = float((coeffs * w_switch ** (-2.0 - k * alpha)).sum())
        last = abs(coeffs[-1] * w_switch ** (-2.0 - (terms - 1) * alpha))
        if abs(ser - ref) < 1e-12 * g0 and last < 1e-16 * g0:
            break
        w_switch *= 1.5
        if w_switch > 1e8 * scale:
            raise RuntimeError("radial profile series failed to converge")
    v = np.linspace(0.0, math.asinh(w_switch / scale), nodes)
    vals = np.array([_g_direct(scale * math.sinh(t), alpha, rho_max) for t in v])
    spline = interpolate.CubicSpline(v, vals, bc_type=((1, 0.0), "not-a-knot"))
    return RadialProfile(alpha, scale, w_switch, spline, coeffs, g0)


# --------------------------------------------------------------------------- angular exponent table


def _psi_table(model: StableModel, nodes: int):
    """Callable ``psi(phi)``; exact constant when isotropic, periodic spline otherwise."""
    if model.measure.is_isotropic:
        c = float(angular_exponent(model, np.array([0.0]))[0])
        return (lambda phi: np.full(np.shape(phi), c)), c, c
    phi = np.linspace(0.0, math.pi, nodes + 1)
    vals = angular_exponent(model, phi[:-1])
    vals = np.append(vals, vals[0])
    spl = interpolate.CubicSpline(phi, vals, bc_type="periodic")
    return (lambda p: spl(np.mod(p, math.pi))), float(vals.min()), float(vals.max())


_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def _panel_nodes(edges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a, b = edges[:-1, None], edges[1:, None]
    x = 0.5 * (a + b) + 0.5 * (b - a) * _GL_X
    w = 0.5 * (b - a) * _GL_W
    return x.ravel(), w.ravel()


def _graded_edges(eta_w: float, max_panel: float = math.pi / 32) -> np.ndarray:
    eta_w = min(max(eta_w, 1e-14), math.pi / 2)
    pos = [eta_w]
    while pos[-1] * 2 < math.pi / 2:
        pos.append(pos[-1] * 2)
    pos.append(math.pi / 2)
    pos = np.array(pos)
    fine = [0.0]
    for a, b in zip(np.concatenate([[0.0], pos[:-1]]), pos):
        k = max(1, int(math.ceil((b - a) / max_panel)))
        fine.extend(np.linspace(a, b, k + 1)[1:])
    fine = np.array(fine)
    return np.concatenate([-fine[:0:-1], fine])


@dataclass(frozen=True, eq=False)
class HeatKernel:
    """Pointwise evaluator of ``p(t, x)`` for one model."""

    model: StableModel
    profile: RadialProfile
    psi: object
    psi_min: float
    psi_max: float
    p0: float = field(init=False)

    def __post_init__(self):
        a = self.model.alpha
        if self.model.measure.is_isotropic:
            integral = 2 * math.pi * self.psi_min ** (-2.0 / a)
        else:
            x, w = _panel_nodes(np.linspace(0.0, 2 * math.pi, 257))
            integral = float(np.sum(w * self.psi(x) ** (-2.0 / a)))
        object.__setattr__(self, "p0", self.profile.g0 * integral / (4 * math.pi ** 2))

    def p1(self, x) -> np.ndarray | float:
        """``p(1, x)`` for points of shape ``(..., 2)``."""
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, 2)
        out = np.empty(len(flat))
        a = self.model.alpha
        big_scale = self.psi_min ** (-1.0 / a)
        for i, (x1, x2) in enumerate(flat):
            s = math.hypot(x1, x2)
            if s == 0.0:
                out[i] = self.p0
                continue
            theta = math.atan2(x2, x1)
            eta, w = _panel_nodes(_graded_edges(self.profile.scale / (s * big_scale)))
            phi = theta + 0.5 * math.pi + eta
            ps = self.psi(phi)
            vals = ps ** (-2.0 / a) * self.profile(s * np.sin(eta) * ps ** (-1.0 / a))
            out[i] = 2.0 * float(np.dot(w, vals)) / (4 * math.pi ** 2)
        out = out.reshape(x.shape[:-1])
        return float(out) if out.ndim == 0 else out

    def p(self, t: float, x) -> np.ndarray | float:
        if not t > 0:
            raise ValueError("t must be positive")
        a = self.model.alpha
        y = self.p1(np.asarray(x, dtype=float) * t ** (-1.0 / a))
        return y * t ** (-2.0 / a)


@lru_cache(maxsize=32)
def heat_kernel_evaluator(model: StableModel, psi_nodes: int = 16384) -> HeatKernel:
    psi, lo, hi = _psi_table(model, psi_nodes)
    return HeatKernel(model, radial_profile(float(model.alpha)), psi, lo, hi)


def heat_kernel(model: StableModel, t: float, x) -> np.ndarray | float:
    """``p(t, x) = t^(-2/alpha) p(1, t^(-1/alpha) x)``."""
    return heat_kernel_evaluator(model).p(t, x)


def heat_kernel_direct(model: StableModel, t: float, x, angles: int = 256) -> float:
    """Independent inversion of ``exp(-t Phi)`` at a single point.

    Radial Fourier integrals by adaptive quadrature for each of ``angles``
    uniformly spaced directions (trapezoid rule in angle); no scaling and no
    tabulated profile are used.  Intended as a slow reference.
    """
    x = np.asarray(x, dtype=float).reshape(2)
    a = model.alpha
    phi = np.linspace(0.0, 2 * math.pi, angles, endpoint=False)
    psi = angular_exponent(model, phi) * t
    s = x[0] * np.cos(phi) + x[1] * np.sin(phi)
    total = 0.0
    cache: dict[tuple[float, float], float] = {}
    for ps, sv in zip(psi, np.abs(s)):
        key = (round(float(ps), 14), round(float(sv), 14))
        if key not in cache:
            rmax = (60.0 / ps) ** (1.0 / a) * 2.0
            f = lambda r: r * math.exp(-ps * r ** a)  # noqa: E731
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                if sv == 0:
                    v, _ = integrate.quad(f, 0.0, rmax, limit=500, epsabs=1e-16, epsrel=1e-12)
                else:
                    v, _ = integrate.quad(f, 0.0, rmax, weight="cos", wvar=sv, limit=2000, epsabs=1e-16,
                                          epsrel=1e-12)
            cache[key] = v
        total += cache[key]
    return total * (2 * math.pi / angles) / (4 * math.pi ** 2)


# --------------------------------------------------------------------------- plane grid


@dataclass(frozen=True, eq=False)
class KernelGrid:
    """``p(1, .)`` on the periodic cell of an N x N trapezoid inversion."""

    alpha: float
    n: int
    cutoff: float
    du: float
    dx: float
    x: np.ndarray
    values: np.ndarray
    tail_bound: float
    nondegeneracy: float
    model_label: str

    @property
    def period(self) -> float:
        return self.n * self.dx

    def normalization(self) -> float:
        return float(self.values.sum() * self.dx ** 2)

    def min_relative(self) -> float:
        return float(self.values.min() / self.values.max())

    def scaled(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates and values of ``p(t, .)`` on the rescaled grid."""
        a = self.alpha
        return self.x * t ** (1.0 / a), self.values * t ** (-2.0 / a)

    def metadata(self) -> dict:
        return {"alpha": self.alpha, "n": self.n, "cutoff": self.cutoff, "du": self.du, "dx": self.dx,
                "period": self.period, "tail_bound": self.tail_bound, "nondegeneracy": self.nondegeneracy,
                "normalization": self.normalization(), "model": self.model_label}

    def save(self, stem: str | Path, header: dict | None = None) -> tuple[Path, Path]:
        stem = Path(stem)
        meta = dict(header or {})
        meta["grid"] = self.metadata()
        jpath = stem.with_suffix(".json")
        cpath = stem.with_suffix(".csv")
        jpath.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        np.savetxt(cpath, self.values, delimiter=",", fmt="%.17g")
        return jpath, cpath

    @classmethod
    def load(cls, stem: str | Path) -> "KernelGrid":
        stem = Path(stem)
        meta = json.loads(stem.with_suffix(".json").read_text())["grid"]
        vals = np.loadtxt(stem.with_suffix(".csv"), delimiter=",")
        n = int(meta["n"])
        x = (np.arange(n) - n // 2) * meta["dx"]
        return cls(meta["alpha"], n, meta["cutoff"], meta["du"], meta["dx"], x, vals,
                   meta["tail_bound"], meta["nondegeneracy"], meta["model"])


def frequency_cutoff(alpha: float, c: float, tol: float = 1e-8) -> tuple[float, float]:
    """Smallest ``U`` with ``int_{|u|>U} exp(-c |u|^alpha) du <= tol``; returns ``(U, bound)``."""
    a2 = 2.0 / alpha
    pref = (2 * math.pi / alpha) * c ** (-a2) * special.gamma(a2)

    def tail(U):
        return pref * special.gammaincc(a2, c * U ** alpha)

    lo, hi = 0.0, 1.0
    while tail(hi) > tol:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if tail(mid) > tol else (lo, mid)
    return hi, float(tail(hi))


def build_kernel_grid(model: StableModel, n: int = 1024, tol: float = 1e-8) -> KernelGrid:
    """Tensor trapezoid inversion of ``exp(-Phi)`` on an ``n x n`` frequency grid."""
    if n < 16 or n % 2:
        raise ValueError("n must be an even integer >= 16")
    nd = nondegeneracy_constant(model)
    if not nd.c > 0:
        raise ValueError("degenerate measure: no frequency cutoff controls the tail")
    U, bound = frequency_cutoff(model.alpha, nd.c, tol)
    du = 2.0 * U / n
    u = (np.arange(n) - n // 2) * du
    ev = heat_kernel_evaluator(model)
    uu1, uu2 = np.meshgrid(u, u, indexing="ij")
    rad = np.hypot(uu1, uu2)
    weights = np.exp(-(rad ** model.alpha) * ev.psi(np.arctan2(uu2, uu1)))
    # p(x_k) = du^2/(2 pi)^2 sum_u w(u) exp(i u.x_k) with x_k = k * 2 pi / (n du)
    spec = np.fft.ifftshift(weights)
    vals = np.fft.fftshift(np.real(np.fft.ifft2(spec))) * n * n * du * du / (4 * math.pi ** 2)
    dx = 2 * math.pi / (n * du)
    x = (np.arange(n) - n // 2) * dx
    return KernelGrid(float(model.alpha), n, U, du, dx, x, vals, bound / (4 * math.pi ** 2),
                      nd.c, model.measure.label)


# --------------------------------------------------------------------------- Green function


def riesz_constant(alpha: float, iso_value: float = 1.0) -> float:
    """``A`` in ``G(x, y) = A |x - y|^(alpha - 2)`` for the isotropic model with density ``iso_value``."""
    c_iso = iso_value * 2.0 * special.beta(0.5, 0.5 * (alpha + 1.0))
    return special.gamma(1 - alpha / 2) / (c_iso * 2 ** alpha * math.pi * special.gamma(alpha / 2))


def _finite_part_constants(alpha: float) -> tuple[float, float]:
    """``(K, K F)`` with ``K F`` in a form that stays finite at alpha = 1."""
    K = -special.gamma(2 - alpha) * math.cos(0.5 * math.pi * alpha) / (4 * math.pi ** 2)
    KF = special.gamma(2 - alpha) / (2 * math.sqrt(math.pi) * special.gamma(1.5 - 0.5 * alpha)
                                     * special.gamma(0.5 * alpha))
    return K, KF


@dataclass(frozen=True, eq=False)
class GreenFunction:
    model: StableModel
    theta: np.ndarray
    profile: np.ndarray
    spline: object

    def angular(self, theta) -> np.ndarray:
        return self.spline(np.mod(np.asarray(theta, dtype=float), math.pi))

    def __call__(self, x, y) -> np.ndarray | float:
        z = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
        r = np.hypot(z[..., 0], z[..., 1])
        if np.any(r == 0):
            raise ValueError("Green function has a pole at x = y")
        out = r ** (self.model.alpha - 2.0) * self.angular(np.arctan2(z[..., 1], z[..., 0]))
        return float(out) if np.ndim(out) == 0 else out


def _geometric_nodes(top: float, levels: int = 48) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes on ``(0, top]`` with panels halving towards 0."""
    edges = top * 2.0 ** -np.arange(levels, -1, -1, dtype=float)
    edges = np.concatenate([[0.0], edges])
    fine = np.concatenate([np.linspace(a, b, 33)[:-1] if b - a > top / 64 else [a]
                           for a, b in zip(edges[:-1], edges[1:])] + [[top]])
    return _panel_nodes(fine)


def _green_angular_values(h, alpha: float, theta: np.ndarray) -> np.ndarray:
    K, KF = _finite_part_constants(alpha)
    phi0 = np.asarray(theta, dtype=float) + 0.5 * math.pi
    h0 = h(phi0)
    if K == 0.0:
        return h0 * KF
    eta, w = _geometric_nodes(0.5 * math.pi)
    # second difference ~ eta^2 (eta^(1+alpha) at kinks) tames sin(eta)^(alpha-2)
    d2 = h(phi0[:, None] + eta) + h(phi0[:, None] - eta) - 2.0 * h0[:, None]
    val = (d2 * (np.sin(eta) ** (alpha - 2.0) * w)).sum(axis=1)
    return K * 2.0 * val + h0 * KF


@lru_cache(maxsize=32)
def green_evaluator(model: StableModel, nodes: int = 2048) -> GreenFunction:
    a = model.alpha
    if not 0 < a < 2:
        raise ValueError("Green function needs alpha < 2")
    ev = heat_kernel_evaluator(model)
    h = lambda phi: 1.0 / ev.psi(phi)  # noqa: E731
    if model.measure.is_isotropic:
        val = float(_green_angular_values(h, a, np.array([0.0]))[0])
        theta = np.array([0.0, math.pi])
        prof = np.array([val, val])
        return GreenFunction(model, theta, prof, lambda t: np.full(np.shape(t), val))
    theta = np.linspace(0.0, math.pi, nodes + 1)
    prof = _green_angular_values(h, a, theta[:-1])
    prof = np.append(prof, prof[0])
    spl = interpolate.CubicSpline(theta, prof, bc_type="periodic")
    return GreenFunction(model, theta, prof, spl)


def green_function(model: StableModel, x, y) -> np.ndarray | float:
    """``G(x, y) = |x - y|^(alpha-2) G(0, e)``, ``e`` the unit vector from x to y."""
    return green_evaluator(model)(x, y)


def green_time_integral(model: StableModel, x, t_min: float = 1e-4, t_max: float = 1e6) -> float:
    """``int_0^inf p(t, x) dt`` by quadrature in ``log t``.

    ``[0, t_min]`` uses ``p(t, x) ~ t f_nu(x)``; ``[t_max, inf)`` uses
    ``p(t, x) ~ t^(-2/alpha) p(1, 0)``.  A cross-check for :func:`green_function`.
    """
    x = np.asarray(x, dtype=float).reshape(2)
    ev = heat_kernel_evaluator(model)
    a = model.alpha
    r = float(np.hypot(*x))
    if r == 0:
        raise ValueError("x must be non-zero")
    split = math.log(r ** a)
    f = lambda s: math.exp(s) * float(ev.p(math.exp(s), x))  # noqa: E731
    lo, hi = math.log(t_min), math.log(t_max)
    # split at t = |x|^alpha, where the kernel turns from the jump regime to the diffusive one
    pts = [p for p in (split,) if lo < p < hi]
    mid = 0.0
    edges = [lo] + pts + [hi]
    for a_, b_ in zip(edges[:-1], edges[1:]):
        v, _ = integrate.quad(f, a_, b_, limit=200, epsabs=1e-14, epsrel=1e-8)
        mid += v
    head = 0.5 * t_min ** 2 * float(levy_density(model, x))
    tail = ev.p0 * t_max ** (1 - 2.0 / a) / (2.0 / a - 1)
    return head + mid + tail


# --------------------------------------------------------------------------- Monte Carlo functionals


@dataclass(frozen=True)
class MCEstimate:
    value: float
    stderr: float
    samples: int
    flagged: bool = False
    note: str = ""

    @property
    def ci(self) -> tuple[float, float]:
        return self.value - 2 * self.stderr, self.value + 2 * self.stderr

    def to_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "samples": self.samples,
                "flagged": self.flagged, "note": self.note}


def _mean_se(v: np.ndarray) -> tuple[float, float]:
    n = len(v)
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf


def _in_ball(p, center, radius) -> bool:
    return float(np.hypot(*(np.asarray(p, dtype=float) - center))) < radius


def green_ball_many(model: StableModel, x, ys, center=(0.0, 0.0), radius: float = 1.0,
                    samples: int = 10_000, seed: int = 0, stream: int = 0, eps: float | None = None,
                    workers: int = 1, rel_threshold: float = 0.1) -> list[MCEstimate]:
    """``G_D(x, y)`` for several ``y`` from one set of exit paths started at ``x``."""
    center = np.asarray(center, dtype=float)
    x = np.asarray(x, dtype=float)
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    if not _in_ball(x, center, radius) or not all(_in_ball(y, center, radius) for y in ys):
        raise ValueError("x and y must lie in the ball")
    gf = green_evaluator(model)
    batch = simulate_exits(model, x - center, radius, samples, eps, seed=seed, stream=stream, workers=workers)
    exits = batch.positions + center
    out = []
    for y in ys:
        if np.allclose(x, y):
            raise ValueError("x and y must differ")
        sub = gf(exits, y)
        m, se = _mean_se(sub)
        g = float(gf(x, y))
        val = g - m
        flagged = batch.n_incomplete > 0 or (val > 0 and se / val > rel_threshold)
        out.append(MCEstimate(val, se, samples, flagged, "stderr above threshold" if flagged else ""))
    return out


def green_ball(model: StableModel, x, y, center=(0.0, 0.0), radius: float = 1.0, samples: int = 10_000,
               seed: int = 0, stream: int = 0, eps: float | None = None, workers: int = 1) -> MCEstimate:
    """``G_D(x, y) = G(x, y) - E^x G(X_tau, y)`` for the ball ``D = B(center, radius)``."""
    return green_ball_many(model, x, [y], center, radius, samples, seed, stream, eps, workers)[0]


def expected_exit_time(model: StableModel, y, radius: float = 1.0, samples: int = 10_000, seed: int = 0,
                       stream: int = 0, eps: float | None = None, workers: int = 1) -> MCEstimate:
    """``s(y) = E^y tau_{B(0, radius)}``."""
    batch = simulate_exits(model, y, radius, samples, eps, seed=seed, stream=stream, workers=workers)
    m, se = _mean_se(batch.tau)
    return MCEstimate(m, se, samples, batch.n_incomplete > 0)


def occupation_integral(model: StableModel, w, inner: float = 0.5, radius: float = 0.75,
                        samples: int = 10_000, seed: int = 0, stream: int = 0, eps: float | None = None,
                        workers: int = 1) -> MCEstimate:
    """``int_{B_inner} G_{B_radius}(x, w) dx``, the expected time spent in ``B_inner`` before exit."""
    batch = simulate_exits(model, w, radius, samples, eps, seed=seed, stream=stream, workers=workers,
                           occupation_radius=inner)
    m, se = _mean_se(batch.occupation)
    return MCEstimate(m, se, samples, batch.n_incomplete > 0)


@dataclass(frozen=True)
class Delta1Witness:
    delta1: float | None
    xbar: tuple[float, float]
    rows: tuple[dict, ...]


def delta1_witness(model: StableModel, xbar=(0.0, 0.0), radius: float = 0.75, k_max: int = 8,
                   points: int = 16, samples: int = 20_000, seed: int = 0, eps: float | None = None,
                   workers: int = 1) -> Delta1Witness:
    """Largest ``delta = 2^-k`` for which ``G_D(xbar, .)`` on ``B(xbar, delta)`` stays above
    twice the mean subtracted term.

    All targets share one batch of exit paths from ``xbar``.  The lower bound
    over the ball is the minimum over circle points at radius ``delta`` of
    ``estimate - 2 stderr``.
    """
    xbar = np.asarray(xbar, dtype=float)
    gf = green_evaluator(model)
    batch = simulate_exits(model, xbar, radius, samples, eps, seed=seed, stream=0, workers=workers)
    exits = batch.positions
    ang = 2 * math.pi * (np.arange(points) + 0.5) / points
    rows = []
    best = None
    for k in range(1, k_max + 1):
        d = 2.0 ** (-k)
        if float(np.hypot(*xbar)) + d >= radius:
            continue
        ws = xbar + d * np.stack([np.cos(ang), np.sin(ang)], axis=1)
        lows, subs = [], []
        for w in ws:
            sub = gf(exits, w)
            m, se = _mean_se(sub)
            lows.append(float(gf(xbar, w)) - m - 2 * se)
            subs.append(m)
        low = min(lows)
        ok = low > 2 * max(subs)
        rows.append({"k": k, "delta": d, "lower_bound": low, "mean_subtracted": float(np.mean(subs)),
                     "max_subtracted": max(subs), "holds": ok})
        if ok and best is None:
            best = d
    return Delta1Witness(best, (float(xbar[0]), float(xbar[1])), tuple(rows))
