"""Spectral measures on the circle, the characteristic exponent and the Levy density.

Conventions.  A measure is a density ``f(theta)`` against arc length on the
unit circle, symmetric under ``theta -> theta + pi``.  The exponent is

    Phi(u) = int_0^{2 pi} |u . e(theta)|^alpha f(theta) dtheta,

and the Levy density is ``kappa f(z/|z|) |z|^(-alpha-2)`` with
``1/kappa = int_0^inf (1 - cos r) r^(-1-alpha) dr`` so that
``int (1 - cos u.y) nu(dy) = Phi(u)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate, optimize, special

from .sequences import SequencePair

__all__ = [
    "SpectralMeasure",
    "StableModel",
    "QuadratureError",
    "NondegeneracyResult",
    "counterexample_measure",
    "char_exponent",
    "angular_exponent",
    "levy_density",
    "levy_integral_constant",
    "nondegeneracy_constant",
    "abs_cos_power_integral",
    "sample_directions",
    "sample_jump",
]

TWO_PI = 2.0 * math.pi


class QuadratureError(ArithmeticError):
    def __init__(self, message: str, achieved: float):
        super().__init__(message)
        self.achieved = achieved


# --------------------------------------------------------------------------- |cos|^alpha


def _cos_power_quarter(x: np.ndarray, alpha: float) -> np.ndarray:
    """``int_0^x cos(t)^alpha dt`` for ``x`` in [0, pi/2]."""
    a, b = 0.5, 0.5 * (alpha + 1.0)
    return 0.5 * special.beta(a, b) * special.betainc(a, b, np.sin(x) ** 2)


def abs_cos_power_integral(x, alpha: float) -> np.ndarray:
    """Antiderivative ``F(x) = int_0^x |cos t|^alpha dt`` (odd, ``F(x+pi) = F(x) + F(pi)``)."""
    x = np.asarray(x, dtype=float)
    period = special.beta(0.5, 0.5 * (alpha + 1.0))
    m = np.floor(x / np.pi + 0.5)
    r = x - m * np.pi  # in [-pi/2, pi/2)
    return m * period + np.sign(r) * _cos_power_quarter(np.abs(r), alpha)


def circle_cos_power(alpha: float) -> float:
    """``int_0^{2 pi} |cos t|^alpha dt``."""
    return 2.0 * special.beta(0.5, 0.5 * (alpha + 1.0))


# --------------------------------------------------------------------------- measures


@dataclass(frozen=True, eq=False)
class SpectralMeasure:
    """Symmetric density on the unit circle.

    Either a list of arcs (``lo``, ``width``, ``value``), already closed under
    the antipodal map, or a vectorized callback with a declared bound.
    Build with :meth:`from_arcs`, :meth:`isotropic` or :meth:`from_density`.
    """

    arc_lo: np.ndarray | None = None
    arc_width: np.ndarray | None = None
    arc_value: np.ndarray | None = None
    callback: Callable[[np.ndarray], np.ndarray] | None = None
    bound: float = 1.0
    label: str = "custom"
    total_mass: float = field(init=False)

    def __post_init__(self):
        if (self.callback is None) == (self.arc_lo is None):
            raise ValueError("give either arcs or a density callback")
        if self.callback is None:
            for name in ("arc_lo", "arc_width", "arc_value"):
                a = np.array(getattr(self, name), dtype=float)
                a.setflags(write=False)
                object.__setattr__(self, name, a)
            if np.any(self.arc_value < 0) or np.any(self.arc_width <= 0):
                raise ValueError("arcs need positive width and non-negative value")
            mass = float(np.sum(self.arc_width * self.arc_value))
            object.__setattr__(self, "bound", float(self.arc_value.max()) if len(self.arc_value) else 0.0)
        else:
            grid = np.linspace(0.0, math.pi, 721)
            f0 = np.asarray(self.callback(grid), dtype=float)
            f1 = np.asarray(self.callback(grid + math.pi), dtype=float)
            if np.any(f0 < 0) or np.any(f0 > self.bound * (1 + 1e-12)):
                raise ValueError("density must lie in [0, bound]")
            if not np.allclose(f0, f1, rtol=1e-10, atol=1e-12):
                raise ValueError("density is not symmetric under theta -> theta + pi")
            mass, _ = integrate.quad(lambda t: float(self.callback(np.array([t]))[0]), 0.0, TWO_PI, limit=400)
        if not mass > 0:
            raise ValueError("measure has zero mass")
        object.__setattr__(self, "total_mass", mass)

    # constructors ---------------------------------------------------------

    @classmethod
    def from_arcs(cls, centers, half_widths, values=None, label: str = "arcs") -> "SpectralMeasure":
        """Arcs given by centre and half-width; antipodal copies are added."""
        c = np.atleast_1d(np.asarray(centers, dtype=float)) % TWO_PI
        h = np.atleast_1d(np.asarray(half_widths, dtype=float))
        v = np.ones_like(c) if values is None else np.atleast_1d(np.asarray(values, dtype=float))
        if not (c.shape == h.shape == v.shape):
            raise ValueError("centers, half_widths and values must have equal length")
        if np.any(h <= 0) or np.any(h > math.pi / 2):
            raise ValueError("half-widths must lie in (0, pi/2]")
        lo = np.concatenate([c - h, c - h + math.pi]) % TWO_PI
        w = np.concatenate([2 * h, 2 * h])
        val = np.concatenate([v, v])
        _check_overlap(lo, w)
        return cls(arc_lo=lo, arc_width=w, arc_value=val, label=label)

    @classmethod
    def isotropic(cls, value: float = 1.0) -> "SpectralMeasure":
        return cls(arc_lo=[0.0, math.pi], arc_width=[math.pi, math.pi], arc_value=[value, value],
                   label="isotropic")

    @classmethod
    def from_density(cls, f: Callable[[np.ndarray], np.ndarray], bound: float,
                     label: str = "density") -> "SpectralMeasure":
        return cls(callback=f, bound=float(bound), label=label)

    # queries ---------------------------------------------------------------

    @property
    def is_arcs(self) -> bool:
        return self.callback is None

    @property
    def is_isotropic(self) -> bool:
        if not self.is_arcs:
            return False
        return bool(np.isclose(self.arc_width.sum(), TWO_PI, rtol=1e-14) and np.ptp(self.arc_value) == 0)

    def density(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if not self.is_arcs:
            return np.asarray(self.callback(theta % TWO_PI), dtype=float)
        t = theta[..., None] % TWO_PI
        inside = ((t - self.arc_lo) % TWO_PI) < self.arc_width
        # a single full-circle pair covers everything; max avoids double counting at joins
        return np.max(np.where(inside, self.arc_value, 0.0), axis=-1)

    def arc_masses(self) -> np.ndarray:
        if not self.is_arcs:
            raise TypeError("arc masses exist only for arc measures")
        return self.arc_width * self.arc_value

    def to_dict(self) -> dict:
        if not self.is_arcs:
            raise TypeError("callback densities are not serializable")
        k = len(self.arc_lo) // 2
        half = 0.5 * self.arc_width[:k]
        centers = self.arc_lo[:k] + half
        return {"kind": "SpectralMeasure", "label": self.label,
                "arcs": [{"center": float(a), "half_width": float(b), "value": float(v)}
                         for a, b, v in zip(centers, half, self.arc_value[:k])],
                "mirrored": True, "total_mass": self.total_mass}

    @classmethod
    def from_dict(cls, d: dict) -> "SpectralMeasure":
        if d.get("kind") != "SpectralMeasure":
            raise ValueError("not a SpectralMeasure document")
        arcs = d["arcs"]
        if d.get("label") == "isotropic":
            return cls.isotropic(arcs[0]["value"])
        return cls.from_arcs([a["center"] for a in arcs], [a["half_width"] for a in arcs],
                             [a["value"] for a in arcs], label=d.get("label", "arcs"))


def _check_overlap(lo: np.ndarray, width: np.ndarray) -> None:
    order = np.argsort(lo % TWO_PI, kind="stable")
    s = (lo % TWO_PI)[order]
    e = s + width[order]
    if np.any(e[:-1] > s[1:] + 1e-15) or (len(s) > 1 and e[-1] > s[0] + TWO_PI + 1e-15):
        raise ValueError("arcs overlap")


def counterexample_measure(seq: SequencePair, n_max: int | None = None) -> SpectralMeasure:
    """Unit density on the arcs ``B(xi_n, 2 sin(alpha_n/4))`` and their mirrors.

    The chord radius ``2 sin(alpha_n/4)`` subtends an angular radius of
    ``alpha_n/2``, so arc ``n`` fills the band ``(A_{n-1}+B_n, A_n+B_n)``.
    """
    n_max = seq.n_max if n_max is None else n_max
    if not 1 <= n_max <= seq.n_max + 1:
        raise ValueError(f"n_max must lie in 1..{seq.n_max + 1}")
    centers, halves = [], []
    for n in range(1, n_max + 1):
        lo, hi = seq.band(n)
        # band() is only accurate to the float resolution near pi/2; the
        # width itself is the stored alpha_n
        a_n = float(seq.alpha[n - 1])
        centers.append(lo + 0.5 * a_n)
        halves.append(0.5 * a_n)
    # bands separated by less than float resolution near pi/2 are accepted by
    # the overlap check's 1e-15 slack; their mass is below that level anyway
    return SpectralMeasure.from_arcs(centers, halves, label=f"counterexample(n_max={n_max})")


# --------------------------------------------------------------------------- model


@lru_cache(maxsize=64)
def levy_integral_constant(alpha: float) -> float:
    """``int_0^inf (1 - cos r) r^(-1-alpha) dr``, evaluated numerically."""
    if not 0 < alpha < 2:
        raise ValueError("alpha must lie in (0, 2)")
    # (1 - cos r) r^(-1-alpha) = g(r) r^(1-alpha) with g(r) = 2 sin^2(r/2) / r^2 smooth
    g = lambda r: 0.5 if r == 0 else 2.0 * math.sin(0.5 * r) ** 2 / (r * r)  # noqa: E731
    head, _ = integrate.quad(g, 0.0, 1.0, weight="alg", wvar=(1.0 - alpha, 0.0), epsabs=1e-14, epsrel=1e-12)
    # the remaining tail is 1/alpha minus a Fourier-weighted integral
    with warnings.catch_warnings():
        # QAWF reports slow cycle convergence for small alpha; its error estimate is checked below
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        osc, err = integrate.quad(lambda r: r ** (-1.0 - alpha), 1.0, np.inf, weight="cos", wvar=1.0,
                                  epsabs=1e-14, limit=400)
    if err > 1e-9:
        raise QuadratureError(f"Levy constant quadrature error {err:.2e}", err)
    return head + 1.0 / alpha - osc


@dataclass(frozen=True, eq=False)
class StableModel:
    alpha: float
    measure: SpectralMeasure
    compensate: bool = False
    kappa: float = field(init=False)

    def __post_init__(self):
        if not 0 < self.alpha < 2:
            raise ValueError("alpha must lie in (0, 2)")
        object.__setattr__(self, "kappa", 1.0 / levy_integral_constant(float(self.alpha)))

    @classmethod
    def isotropic(cls, alpha: float, compensate: bool | None = None) -> "StableModel":
        return cls(alpha, SpectralMeasure.isotropic(),
                   compensate=(alpha >= 1) if compensate is None else compensate)

    def jump_rate(self, eps: float) -> float:
        """Rate of jumps with ``|z| > eps``."""
        return self.kappa * self.measure.total_mass * eps ** (-self.alpha) / self.alpha

    def small_jump_drift_bound(self, eps: float) -> float:
        """Expected absolute displacement per unit time from jumps below ``eps`` (alpha < 1)."""
        if self.alpha >= 1:
            return math.inf
        return self.kappa * self.measure.total_mass * eps ** (1 - self.alpha) / (1 - self.alpha)

    def small_jump_covariance(self, eps: float) -> np.ndarray:
        """Covariance per unit time of jumps with ``|z| <= eps``."""
        m = _second_moment_matrix(self.measure)
        return self.kappa * m * eps ** (2 - self.alpha) / (2 - self.alpha)

    def to_dict(self) -> dict:
        d = {"alpha": self.alpha, "compensate": self.compensate, "kappa": self.kappa}
        if self.measure.is_arcs:
            d["measure"] = self.measure.to_dict()
        else:
            d["measure"] = {"kind": "callback", "label": self.measure.label}
        return d


def _second_moment_matrix(measure: SpectralMeasure) -> np.ndarray:
    """``int e e^T f(theta) dtheta``."""
    if measure.is_arcs:
        lo, w, v = measure.arc_lo, measure.arc_width, measure.arc_value
        hi = lo + w
        cc = np.sum(v * (0.5 * w + 0.25 * (np.sin(2 * hi) - np.sin(2 * lo))))
        ss = np.sum(v * (0.5 * w - 0.25 * (np.sin(2 * hi) - np.sin(2 * lo))))
        cs = np.sum(v * (-0.25) * (np.cos(2 * hi) - np.cos(2 * lo)))
    else:
        f = lambda t, g: float(measure.callback(np.array([t]))[0]) * g(t)  # noqa: E731
        cc = integrate.quad(f, 0, TWO_PI, args=(lambda t: math.cos(t) ** 2,), limit=400)[0]
        ss = integrate.quad(f, 0, TWO_PI, args=(lambda t: math.sin(t) ** 2,), limit=400)[0]
        cs = integrate.quad(f, 0, TWO_PI, args=(lambda t: math.sin(t) * math.cos(t),), limit=400)[0]
    return np.array([[cc, cs], [cs, ss]])


# --------------------------------------------------------------------------- exponent


def angular_exponent(model: StableModel, phi, tol: float = 1e-10, chunk: int = 1 << 16) -> np.ndarray:
    """``psi(phi) = Phi(e(phi))`` so that ``Phi(u) = |u|^alpha psi(arg u)``."""
    phi = np.asarray(phi, dtype=float)
    alpha = model.alpha
    meas = model.measure
    if meas.is_isotropic:
        return np.full(phi.shape, meas.arc_value[0] * circle_cos_power(alpha))
    flat = phi.ravel()
    out = np.empty_like(flat)
    if meas.is_arcs:
        # arcs narrower than ~1e-6 rad: midpoint rule, error O(w^3)
        wide = meas.arc_width > 1e-6
        lo, w, v = meas.arc_lo[wide], meas.arc_width[wide], meas.arc_value[wide]
        mid = meas.arc_lo[~wide] + 0.5 * meas.arc_width[~wide]
        mw = meas.arc_width[~wide] * meas.arc_value[~wide]
        step = max(1, chunk // max(1, len(meas.arc_lo)))
        for s in range(0, flat.size, step):
            p = flat[s:s + step, None]
            acc = (v * (abs_cos_power_integral(lo + w - p, alpha)
                        - abs_cos_power_integral(lo - p, alpha))).sum(axis=1)
            if len(mid):
                acc += (mw * np.abs(np.cos(mid - p)) ** alpha).sum(axis=1)
            out[s:s + step] = acc
        return out.reshape(phi.shape)
    f = meas.callback
    for i, p in enumerate(flat):
        pts = sorted(((p + 0.5 * math.pi) % math.pi, (p + 0.5 * math.pi) % math.pi + math.pi))
        val, err = integrate.quad(lambda t: abs(math.cos(t - p)) ** alpha * float(f(np.array([t]))[0]),
                                  0.0, TWO_PI, points=pts, limit=400, epsabs=tol * 1e-3, epsrel=tol)
        if err > max(tol * abs(val), 1e-13) * 100:
            raise QuadratureError(f"exponent quadrature error {err:.2e} exceeds tolerance", err)
        out[i] = val
    return out.reshape(phi.shape)


def char_exponent(model: StableModel, u, tol: float = 1e-10) -> np.ndarray | float:
    """``Phi(u)`` for ``u`` of shape ``(..., 2)``.

    Arc measures use the closed-form antiderivative of ``|cos|^alpha``;
    callback densities use adaptive quadrature split at the zeros of
    ``cos``.
    """
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != 2:
        raise ValueError("u must have trailing dimension 2")
    norm = np.hypot(u[..., 0], u[..., 1])
    psi = angular_exponent(model, np.arctan2(u[..., 1], u[..., 0]), tol=tol)
    out = np.where(norm > 0, norm ** model.alpha * psi, 0.0)
    return float(out) if out.ndim == 0 else out


def levy_density(model: StableModel, z) -> np.ndarray | float:
    z = np.asarray(z, dtype=float)
    r = np.hypot(z[..., 0], z[..., 1])
    if np.any(r == 0):
        raise ValueError("Levy density is singular at z = 0")
    f = model.measure.density(np.arctan2(z[..., 1], z[..., 0]))
    out = model.kappa * f * r ** (-model.alpha - 2.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class NondegeneracyResult:
    c: float
    angle: float

    @property
    def direction(self) -> tuple[float, float]:
        return math.cos(self.angle), math.sin(self.angle)


def nondegeneracy_constant(model: StableModel, grid: int = 720) -> NondegeneracyResult:
    """``min_{|u|=1} Phi(u)`` by a grid scan over half the circle refined locally."""
    if grid < 64:
        raise ValueError("grid must be at least 64")
    phi = np.linspace(0.0, math.pi, grid, endpoint=False)
    psi = angular_exponent(model, phi)
    k = int(np.argmin(psi))
    h = math.pi / grid
    res = optimize.minimize_scalar(lambda p: float(angular_exponent(model, np.array([p]))[0]),
                                   bounds=(phi[k] - h, phi[k] + h), method="bounded",
                                   options={"xatol": 1e-12})
    if res.fun < psi[k]:
        return NondegeneracyResult(float(res.fun), float(res.x % math.pi))
    return NondegeneracyResult(float(psi[k]), float(phi[k]))


# --------------------------------------------------------------------------- sampling


def sample_directions(measure: SpectralMeasure, size: int, rng: np.random.Generator) -> np.ndarray:
    """Angles distributed as ``f(theta) dtheta / total_mass``."""
    if measure.is_arcs:
        w = measure.arc_masses()
        cdf = np.cumsum(w)
        cdf /= cdf[-1]
        k = np.minimum(np.searchsorted(cdf, rng.random(size), side="right"), len(w) - 1)
        return measure.arc_lo[k] + measure.arc_width[k] * rng.random(size)
    out = np.empty(size)
    filled = 0
    accept_rate = measure.total_mass / (TWO_PI * measure.bound)
    while filled < size:
        m = int((size - filled) / accept_rate * 1.1) + 16
        t = TWO_PI * rng.random(m)
        keep = t[rng.random(m) * measure.bound < measure.density(t)]
        take = min(len(keep), size - filled)
        out[filled:filled + take] = keep[:take]
        filled += take
    return out


def sample_radii(alpha: float, eps: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Pareto radii with ``P(R > r) = (eps / r)^alpha``."""
    return eps * (1.0 - rng.random(size)) ** (-1.0 / alpha)


def sample_jump(model: StableModel, eps: float, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Jumps of the Levy measure restricted to ``|z| > eps``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    n = 1 if size is None else size
    theta = sample_directions(model.measure, n, rng)
    r = sample_radii(model.alpha, eps, n, rng)
    z = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)
    return z[0] if size is None else z

