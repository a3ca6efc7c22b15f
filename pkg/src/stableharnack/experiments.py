"""Experiments: Harnack-ratio blow-up, bound factors, weak Harnack and Green surveys."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from .geometry import GeometryError, GeometryRecord, geometry_record, harnack_terms
from .kernels import MCEstimate, expected_exit_time, green_ball, green_evaluator
from .sequences import FillRule, SequencePair, construct_sequences
from .simulate import ExitBatch, simulate_exits
from .spectral import StableModel, counterexample_measure

__all__ = [
    "BallTarget",
    "SectorTarget",
    "Complement",
    "HarnackExperimentRow",
    "AnalyticBounds",
    "WeakHarnackResult",
    "GreenSurveyRow",
    "GreenSurvey",
    "MODEST",
    "modest_sequence",
    "exit_probability_from_batch",
    "estimate_exit_probability",
    "analytic_bounds",
    "harnack_ratio_experiment",
    "random_indicator_data",
    "inf_grid",
    "weak_harnack_experiment",
    "weak_harnack_survey",
    "green_estimate_survey",
]

W0 = (0.5, 0.0)


# --------------------------------------------------------------------------- target sets


@dataclass(frozen=True)
class BallTarget:
    center: tuple[float, float]
    radius: float

    def __call__(self, p: np.ndarray) -> np.ndarray:
        return np.hypot(p[:, 0] - self.center[0], p[:, 1] - self.center[1]) < self.radius


@dataclass(frozen=True)
class SectorTarget:
    """``{r_lo <= |y| < r_hi, theta in [theta_lo, theta_lo + width)}``, angles mod 2 pi."""

    r_lo: float
    r_hi: float = math.inf
    theta_lo: float = 0.0
    width: float = 2 * math.pi

    def __call__(self, p: np.ndarray) -> np.ndarray:
        r = np.hypot(p[:, 0], p[:, 1])
        ok = (r >= self.r_lo) & (r < self.r_hi)
        if self.width < 2 * math.pi:
            d = np.mod(np.arctan2(p[:, 1], p[:, 0]) - self.theta_lo, 2 * math.pi)
            ok &= d < self.width
        return ok


@dataclass(frozen=True)
class Complement:
    """The whole complement of the domain: every exit position."""

    def __call__(self, p: np.ndarray) -> np.ndarray:
        return np.ones(len(p), dtype=bool)


def exit_probability_from_batch(batch: ExitBatch, target: Callable[[np.ndarray], np.ndarray],
                                offset=(0.0, 0.0)) -> MCEstimate:
    """Binomial estimate of ``P(X_tau in target)``; zero hits give the one-sided 3/n bound."""
    pts = batch.positions + np.asarray(offset, dtype=float)
    hits = np.asarray(target(pts), dtype=bool)
    n = len(hits)
    k = int(hits.sum())
    flagged = batch.n_incomplete > 0
    if k == 0:
        return MCEstimate(0.0, 0.0, n, True, f"zero hits; one-sided 95% upper bound {3.0 / n:.3g}")
    p = k / n
    return MCEstimate(p, math.sqrt(p * (1 - p) / n), n, flagged,
                      f"{batch.n_incomplete} incomplete paths" if flagged else "")


def estimate_exit_probability(model: StableModel, x0, target, domain=((0.0, 0.0), 1.0), samples: int = 10_000,
                              seed: int = 0, stream: int = 0, eps: float | None = None,
                              workers: int = 1) -> MCEstimate:
    """``P^{x0}(X_{tau_D} in target)`` for the ball ``D = B(center, radius)``."""
    center, radius = np.asarray(domain[0], dtype=float), float(domain[1])
    batch = simulate_exits(model, np.asarray(x0, dtype=float) - center, radius, samples, eps,
                           seed=seed, stream=stream, workers=workers)
    return exit_probability_from_batch(batch, target, center)


# --------------------------------------------------------------------------- bound factors


@dataclass(frozen=True)
class AnalyticBounds:
    n: int
    upper: float
    lower: float
    a_n: float
    b_n: float
    product: float
    residual: float

    def to_dict(self) -> dict:
        return asdict(self)


def analytic_bounds(rec: GeometryRecord, alpha: float) -> AnalyticBounds:
    """Upper factor for ``u_n(w0)``, lower factor for ``u_n(0)`` and ``a_n b_n``.

    Both factors include ``|B_n| = pi r_n^2``; their ratio equals ``a_n b_n``.
    """
    t = harnack_terms(rec, alpha)
    area = math.pi * rec.r ** 2
    upper, lower = t.upper_factor * area, t.lower_factor * area
    prod = t.a_n * t.b_n
    return AnalyticBounds(rec.n, upper, lower, t.a_n, t.b_n, prod, abs(upper / lower / prod - 1.0))


# --------------------------------------------------------------------------- Harnack ratio experiment


# a short sequence whose first target balls are large enough to be hit at 1e6 paths
MODEST = {"c": 20.0, "ratio_floor": 2.0, "alpha_fraction": 0.25, "alpha1": 0.3, "beta1": 0.2, "alpha": 0.3}


def modest_sequence(n_max: int = 8) -> SequencePair:
    return construct_sequences(MODEST["c"], n_max, FillRule(MODEST["ratio_floor"], MODEST["alpha_fraction"]),
                               alpha1=MODEST["alpha1"], beta1=MODEST["beta1"])


@dataclass(frozen=True)
class HarnackExperimentRow:
    n: int
    mode: str
    x_S: float
    y_S: float
    r_n: float
    area: float
    strip_x: float
    strip_delta: float
    u0: float
    u0_se: float
    uw: float
    uw_se: float
    hits0: int
    hitsw: int
    separation: float
    ratio: float
    a_n: float
    b_n: float
    product: float
    upper_factor: float
    lower_factor: float
    predicted_hit: float
    flagged: bool
    note: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _nan_row(n: int, note: str) -> HarnackExperimentRow:
    nan = math.nan
    return HarnackExperimentRow(n, "invalid", nan, nan, nan, nan, nan, nan, nan, nan, nan, nan, 0, 0, nan, nan,
                                nan, nan, nan, nan, nan, nan, True, note)


def harnack_ratio_experiment(seq: SequencePair, alpha: float, n_range: Sequence[int] | None = None,
                             samples: int = 1_000_000, seed: int = 0, eps: float | None = None,
                             workers: int = 1, w0=W0, mc_threshold: float = 10.0,
                             measure_n_max: int | None = None) -> list[HarnackExperimentRow]:
    """Rows for ``u_n(x) = P^x(X_{tau_{B_1}} in B_n)`` at ``x = 0`` and ``x = w0``.

    Monte Carlo runs only for ``n`` with ``lower_factor > mc_threshold / samples``;
    later rows carry the analytic factors alone.  Paths from each start point
    are shared across all ``n``.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    n_range = list(range(1, seq.n_max + 1)) if n_range is None else [int(n) for n in n_range]
    if any(n < 1 or n > seq.n_max for n in n_range):
        raise ValueError(f"n_range must lie in [1, {seq.n_max}]")
    model = StableModel(alpha, counterexample_measure(seq, measure_n_max))
    prepared = []
    for n in n_range:
        rec = geometry_record(seq, n)
        try:
            prepared.append((n, rec, analytic_bounds(rec, alpha)))
        except GeometryError as e:
            prepared.append((n, rec, e))
    need_mc = any(not isinstance(b, Exception) and b.lower > mc_threshold / samples for _, _, b in prepared)
    batches = None
    if need_mc:
        batches = (simulate_exits(model, (0.0, 0.0), 1.0, samples, eps, seed=seed, stream=0, workers=workers),
                   simulate_exits(model, w0, 1.0, samples, eps, seed=seed, stream=1, workers=workers))
    rows = []
    for n, rec, b in prepared:
        if isinstance(b, Exception):
            rows.append(_nan_row(n, str(b)))
            continue
        area = math.pi * rec.r ** 2
        common = dict(n=n, x_S=rec.x_S, y_S=rec.y_S, r_n=rec.r, area=area, strip_x=rec.x, strip_delta=rec.delta,
                      a_n=b.a_n, b_n=b.b_n, product=b.product, upper_factor=b.upper, lower_factor=b.lower,
                      predicted_hit=b.lower)
        if batches is None or b.lower <= mc_threshold / samples:
            nan = math.nan
            rows.append(HarnackExperimentRow(mode="analytic", u0=nan, u0_se=nan, uw=nan, uw_se=nan, hits0=0,
                                             hitsw=0, separation=nan, ratio=nan, flagged=False,
                                             note="predicted hit probability below MC threshold", **common))
            continue
        target = BallTarget((rec.x_S, rec.y_S), rec.r)
        e0 = exit_probability_from_batch(batches[0], target)
        ew = exit_probability_from_batch(batches[1], target)
        h0, hw = round(e0.value * samples), round(ew.value * samples)
        joint = math.hypot(e0.stderr, ew.stderr)
        sep = (e0.value - ew.value) / joint if joint > 0 else math.nan
        ratio = e0.value / ew.value if h0 > 0 and hw > 0 else math.nan
        note = "; ".join(s for s in (e0.note, ew.note) if s)
        rows.append(HarnackExperimentRow(mode="mc", u0=e0.value, u0_se=e0.stderr, uw=ew.value, uw_se=ew.stderr,
                                         hits0=h0, hitsw=hw, separation=sep, ratio=ratio,
                                         flagged=e0.flagged or ew.flagged, note=note, **common))
    return rows


# --------------------------------------------------------------------------- weak Harnack


@dataclass(frozen=True)
class WeakHarnackResult:
    l1: float
    l1_se: float
    inf: float
    inf_se: float
    inf_point: tuple[float, float]
    inf_lower: float
    ratio: float
    ratio_se: float
    point_values: tuple[float, ...]
    point_se: tuple[float, ...]
    flagged: bool
    note: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def inf_grid() -> np.ndarray:
    """25 points covering ``B_{1/4}``: the centre and three rings of eight."""
    pts = [(0.0, 0.0)]
    for i, r in enumerate((1 / 12, 1 / 6, 1 / 4)):
        for k in range(8):
            a = 2 * math.pi * k / 8 + (math.pi / 8 if i % 2 else 0.0)
            pts.append((r * math.cos(a), r * math.sin(a)))
    return np.array(pts)


def _disk_points(n: int, radius: float, seed: int) -> np.ndarray:
    # area-preserving map of scrambled Sobol points onto the disk
    m = max(1, math.ceil(math.log2(n)))
    u = qmc.Sobol(2, scramble=True, seed=seed).random_base2(m)[:n]
    r = radius * np.sqrt(u[:, 0])
    t = 2 * math.pi * u[:, 1]
    return np.stack([r * np.cos(t), r * np.sin(t)], axis=1)


def random_indicator_data(count: int, seed: int) -> list[SectorTarget]:
    """Indicators of random annular sectors outside ``B_{3/4}``."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        r_lo = float(rng.uniform(0.75, 1.5))
        out.append(SectorTarget(r_lo, r_lo + float(rng.uniform(0.5, 3.0)), float(rng.uniform(0, 2 * math.pi)),
                                float(rng.uniform(math.pi / 3, math.pi))))
    return out


def _values(g, pts: np.ndarray) -> np.ndarray:
    v = np.asarray(g(pts), dtype=float)
    if np.any(v < 0) or not np.all(np.isfinite(v)):
        raise ValueError("boundary data must be finite and non-negative")
    return v


def weak_harnack_survey(model: StableModel, data: Sequence[Callable], samples: int = 100_000,
                        l1_points: int | None = None, seed: int = 0, eps: float | None = None,
                        workers: int = 1, radius: float = 0.75) -> list[WeakHarnackResult]:
    """L1 norm over ``B_{1/2}``, inf over ``B_{1/4}`` and their ratio for each boundary datum.

    ``u(x) = E^x g(X_tau)`` with ``tau`` the exit time of ``B_radius``.  The L1
    norm uses one path per scrambled Sobol point; each inf-grid point gets
    ``samples`` paths.  All data share the same paths.
    """
    l1_points = samples if l1_points is None else int(l1_points)
    area = math.pi * 0.25
    starts = _disk_points(l1_points, 0.5, seed)
    l1_batch = simulate_exits(model, starts, radius, eps=eps, seed=seed, stream=0, workers=workers)
    grid = inf_grid()
    grid_batches = [simulate_exits(model, p, radius, samples, eps, seed=seed, stream=1 + i, workers=workers)
                    for i, p in enumerate(grid)]
    incomplete = l1_batch.n_incomplete + sum(b.n_incomplete for b in grid_batches)
    out = []
    for g in data:
        v = _values(g, l1_batch.positions)
        l1 = area * float(v.mean())
        l1_se = area * float(v.std(ddof=1)) / math.sqrt(len(v)) if len(v) > 1 else math.inf
        means, ses = [], []
        for b in grid_batches:
            w = _values(g, b.positions)
            means.append(float(w.mean()))
            ses.append(float(w.std(ddof=1)) / math.sqrt(len(w)))
        means, ses = np.array(means), np.array(ses)
        lows = means - 2 * ses
        i = int(np.argmin(lows))  # ties resolved by index
        inf_lower = float(lows[i])
        flagged = incomplete > 0
        note = ""
        if inf_lower <= 0:
            ratio, rse, flagged = math.inf, math.inf, True
            note = "inf estimate indistinguishable from 0"
        else:
            ratio = l1 / inf_lower
            rse = ratio * math.hypot(l1_se / l1 if l1 > 0 else 0.0, ses[i] / inf_lower)
        out.append(WeakHarnackResult(l1, l1_se, float(means[i]), float(ses[i]), (float(grid[i, 0]),
                                     float(grid[i, 1])), inf_lower, ratio, rse, tuple(means.tolist()),
                                     tuple(ses.tolist()), flagged, note))
    return out


def weak_harnack_experiment(model: StableModel, g: Callable, samples: int = 100_000,
                            l1_points: int | None = None, seed: int = 0, eps: float | None = None,
                            workers: int = 1) -> WeakHarnackResult:
    return weak_harnack_survey(model, [g], samples, l1_points, seed, eps, workers)[0]


# --------------------------------------------------------------------------- Green estimate survey


@dataclass(frozen=True)
class GreenSurveyRow:
    x: tuple[float, float]
    y: tuple[float, float]
    green_ball: float
    green_ball_se: float
    green: float
    exit_time: float
    exit_time_se: float
    ratio: float
    ok: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d["x"], d["y"] = list(self.x), list(self.y)
        return d


@dataclass(frozen=True)
class GreenSurvey:
    rows: tuple[GreenSurveyRow, ...]
    dropped: int
    ratio_min: float
    ratio_max: float
    ratio_median: float
    c_hat: float
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"rows": [r.to_dict() for r in self.rows], "dropped": self.dropped, "ratio_min": self.ratio_min,
                "ratio_max": self.ratio_max, "ratio_median": self.ratio_median, "c_hat": self.c_hat,
                "meta": self.meta}


def _sample_pairs(count: int, rng: np.random.Generator, min_sep: float = 1e-2):
    pairs = []
    while len(pairs) < count:
        rx, ry = 0.5 * math.sqrt(rng.random()), math.sqrt(rng.random())
        tx, ty = rng.uniform(0, 2 * math.pi, 2)
        x = (rx * math.cos(tx), rx * math.sin(tx))
        y = (ry * math.cos(ty), ry * math.sin(ty))
        if ry < 0.999 and math.hypot(x[0] - y[0], x[1] - y[1]) > min_sep:
            pairs.append((x, y))
    return pairs


def green_estimate_survey(model: StableModel, pairs: int | Sequence = 50, samples: int = 10_000, seed: int = 0,
                          eps: float | None = None, workers: int = 1) -> GreenSurvey:
    """Ratios ``G_{B_1}(x, y) / (s(y) |x - y|^(alpha-2))`` over pairs ``|x| < 1/2``, ``|y| < 1``.

    Pairs whose estimate is non-positive or flagged are dropped and counted.
    """
    if isinstance(pairs, int):
        pairs = _sample_pairs(pairs, np.random.default_rng(seed))
    a = model.alpha
    gf = green_evaluator(model)
    rows, dropped = [], 0
    for i, (x, y) in enumerate(pairs):
        gd = green_ball(model, x, y, samples=samples, seed=seed, stream=2 * i, eps=eps, workers=workers)
        s = expected_exit_time(model, y, samples=samples, seed=seed, stream=2 * i + 1, eps=eps, workers=workers)
        d = math.hypot(x[0] - y[0], x[1] - y[1])
        ok = gd.value > 0 and s.value > 0 and not gd.flagged and not s.flagged
        ratio = gd.value / (s.value * d ** (a - 2)) if ok else math.nan
        dropped += not ok
        rows.append(GreenSurveyRow(tuple(map(float, x)), tuple(map(float, y)), gd.value, gd.stderr,
                                   float(gf(x, y)), s.value, s.stderr, ratio, ok))
    r = np.array([row.ratio for row in rows if row.ok])
    if len(r) == 0:
        return GreenSurvey(tuple(rows), dropped, math.nan, math.nan, math.nan, math.nan)
    lo, hi = float(r.min()), float(r.max())
    return GreenSurvey(tuple(rows), dropped, lo, hi, float(np.median(r)), max(hi, 1.0 / lo))
