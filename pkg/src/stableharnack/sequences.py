"""Angle sequences whose partial sums approach pi/2 with exploding tangent ratios.

Angles ``A_n + B_n`` cluster at pi/2 so fast that their float64 values carry no
information after a handful of steps.  Everything here is therefore kept in
tangent coordinates ``T = tan(theta)`` (and ``log T``), computed from the
co-angle ``pi/2 - theta``, which stays representable down to ~1e-300.

Index conventions for a :class:`SequencePair` with ``n_max = N``:

* ``alpha[k-1], beta[k-1]`` hold ``alpha_k, beta_k`` for ``k = 1..N+1``;
* ``t0[n-1] = tan(A_n + B_n)`` for ``n = 1..N+1``;
* ``t1[n] = tan(A_n + B_{n+1})`` for ``n = 0..N`` (``t1[0] = tan(beta_1)``).

so that every ``n = 1..N`` has the full triple ``(T0, T1, T2)`` with
``T2_n = T0_{n+1}``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import mpmath
import numpy as np
from scipy import special

__all__ = [
    "SequencePair",
    "SequenceEntry",
    "FillRule",
    "ConditionReport",
    "CandidateFamily",
    "CandidateVerdict",
    "EmptyIntervalError",
    "PrecisionCeilingWarning",
    "construct_sequences",
    "verify_lemma_conditions",
    "candidate_ratio",
    "candidate_sequence",
    "reject_candidate",
    "tail_bounds",
    "gaussian_integral_upper_estimate",
]

LOG_TANGENT_CEILING = 700.0
HALF_PI = 0.5 * math.pi


class EmptyIntervalError(ArithmeticError):
    """The fill rule could not place a value inside its admissible interval.

    ``last_valid_n`` is the largest index whose triple was completed.
    """

    def __init__(self, message: str, last_valid_n: int):
        super().__init__(message)
        self.last_valid_n = last_valid_n


class PrecisionCeilingWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class FillRule:
    """Where to place ``beta_{n+1}`` and ``alpha_{n+1}`` in their open intervals.

    ``ratio_floor`` is the minimum tangent ratio ``T1/T0`` (``None`` means
    ``2K``); the ratio actually used at step ``n`` is ``max(n+1, floor)``.
    ``alpha_fraction`` is the relative angular position of ``A_{n+1}+B_{n+1}``
    between ``arctan(K T1)`` and pi/2; 0.5 is the angular midpoint, which gives
    ``T2 = K T1 + sqrt(1 + (K T1)^2)``.
    """

    ratio_floor: float | None = None
    alpha_fraction: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.alpha_fraction < 1.0:
            raise ValueError("alpha_fraction must lie in (0, 1)")
        if self.ratio_floor is not None and self.ratio_floor <= 1.0:
            raise ValueError("ratio_floor must exceed 1")


@dataclass(frozen=True)
class SequenceEntry:
    n: int
    alpha: float
    beta: float
    t0: float
    t1: float
    t2: float
    log_t0: float
    log_t1: float
    log_t2: float


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SequencePair:
    c: float
    alpha: np.ndarray
    beta: np.ndarray
    t0: np.ndarray
    t1: np.ndarray
    log_t0: np.ndarray
    log_t1: np.ndarray
    label: str = "constructed"
    K: float = field(init=False)

    def __post_init__(self):
        if not self.c > 1:
            raise ValueError("c must exceed 1")
        object.__setattr__(self, "K", (self.c + 2.0) / (self.c - 1.0))
        for name in ("alpha", "beta", "t0", "t1", "log_t0", "log_t1"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        n1 = len(self.alpha)
        if not (len(self.beta) == len(self.t0) == len(self.t1) == n1 >= 2):
            raise ValueError("inconsistent sequence array lengths")
        if np.any(self.alpha <= 0) or np.any(self.beta <= 0):
            raise ValueError("angles must be positive")

    @property
    def n_max(self) -> int:
        return len(self.alpha) - 1

    def _check(self, n: int) -> None:
        if not 1 <= n <= self.n_max:
            raise IndexError(f"index {n} outside 1..{self.n_max}")

    def tangents(self, n: int) -> tuple[float, float, float]:
        """``(tan(A_n+B_n), tan(A_n+B_{n+1}), tan(A_{n+1}+B_{n+1}))``."""
        self._check(n)
        return float(self.t0[n - 1]), float(self.t1[n]), float(self.t0[n])

    def log_tangents(self, n: int) -> tuple[float, float, float]:
        self._check(n)
        return float(self.log_t0[n - 1]), float(self.log_t1[n]), float(self.log_t0[n])

    def tan_prev(self, n: int) -> float:
        """``tan(A_{n-1} + B_n)``; lower edge of the n-th angular band."""
        self._check(n)
        return float(self.t1[n - 1])

    def entry(self, n: int) -> SequenceEntry:
        t = self.tangents(n)
        lt = self.log_tangents(n)
        return SequenceEntry(n, float(self.alpha[n - 1]), float(self.beta[n - 1]), *t, *lt)

    def band(self, n: int) -> tuple[float, float]:
        """Angular band ``(A_{n-1}+B_n, A_n+B_n)`` of width ``alpha_n``."""
        if not 1 <= n <= self.n_max + 1:
            raise IndexError(n)
        hi = math.atan2(1.0, float(self.t0[n - 1])) if self.log_t0[n - 1] < 700 else 0.0
        lo = math.atan2(1.0, float(self.t1[n - 1]))
        return HALF_PI - lo, HALF_PI - hi

    def to_dict(self) -> dict:
        entries = []
        for k in range(1, self.n_max + 2):
            rec = {"n": k, "alpha": float(self.alpha[k - 1]), "beta": float(self.beta[k - 1]),
                   "t0": float(self.t0[k - 1]), "log_t0": float(self.log_t0[k - 1]),
                   "t1_prev": float(self.t1[k - 1]), "log_t1_prev": float(self.log_t1[k - 1])}
            entries.append(rec)
        return {"kind": "SequencePair", "label": self.label, "c": self.c, "K": self.K,
                "n_max": self.n_max, "entries": entries}

    @classmethod
    def from_dict(cls, d: dict) -> "SequencePair":
        if d.get("kind") != "SequencePair":
            raise ValueError("not a SequencePair document")
        ent = sorted(d["entries"], key=lambda e: e["n"])
        return cls(
            c=float(d["c"]),
            alpha=[e["alpha"] for e in ent],
            beta=[e["beta"] for e in ent],
            t0=[e["t0"] for e in ent],
            t1=[e["t1_prev"] for e in ent],
            log_t0=[e["log_t0"] for e in ent],
            log_t1=[e["log_t1_prev"] for e in ent],
            label=d.get("label", "constructed"),
        )


# --------------------------------------------------------------------------- construction


def construct_sequences(
    c: float,
    n_max: int,
    fill_rule: FillRule | None = None,
    alpha1: float = math.pi / 8,
    beta1: float = math.pi / 8,
    log_ceiling: float = LOG_TANGENT_CEILING,
) -> SequencePair:
    """Build ``alpha_1..alpha_{N+1}``, ``beta_1..beta_{N+1}`` inductively.

    At step ``n`` the rule picks ``beta_{n+1}`` so that
    ``tan(A_n + B_{n+1}) = max(n+1, floor) * tan(A_n + B_n)`` and then
    ``alpha_{n+1}`` inside ``(arctan(K tan(A_n+B_{n+1})) - (A_n+B_{n+1}),
    pi/2 - (A_n+B_{n+1}))``.

    Angles are rounded to float64 and the remaining co-angle is tracked
    exactly (high precision) for the rounded values, so the emitted angles
    reproduce the stored tangents.  After rounding, ``beta`` is nudged up by
    ulps until the ratio requirement holds on the stored float tangents too.

    If ``log T2`` of some index exceeds ``log_ceiling`` the pair is truncated
    before that index with a :class:`PrecisionCeilingWarning`.
    """
    if not c > 1:
        raise ValueError("c must exceed 1")
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    if not (alpha1 > 0 and beta1 > 0 and alpha1 + beta1 < HALF_PI):
        raise ValueError("need alpha1, beta1 > 0 with alpha1 + beta1 < pi/2")
    rule = fill_rule or FillRule()
    K = (c + 2.0) / (c - 1.0)
    floor = rule.ratio_floor if rule.ratio_floor is not None else 2.0 * K

    ctx = mpmath.MPContext()
    ctx.dps = int(log_ceiling / math.log(10)) + 60
    half_pi = ctx.pi / 2
    mpK = ctx.mpf(K)

    def cot(g):
        return 1 / ctx.tan(g)

    def as_float(x) -> tuple[float, float]:
        return float(x), float(ctx.log(x))

    alphas = [float(alpha1)]
    betas = [float(beta1)]
    gap_t = half_pi - ctx.mpf(betas[0])  # co-angle of A_0 + B_1
    gap_s = gap_t - ctx.mpf(alphas[0])  # co-angle of A_1 + B_1
    T1p = cot(gap_t)
    t1s = [as_float(T1p)]
    T0 = cot(gap_s)
    t0s = [as_float(T0)]

    for n in range(1, n_max + 1):
        r = max(n + 1.0, floor)
        # beta_{n+1}: shrink the co-angle so that T1 = r * T0
        target = ctx.atan(1 / (r * T0))
        beta = float(gap_s - target)
        t0f = t0s[-1][0]
        for _ in range(256):
            if not 0 < beta < gap_s:
                raise EmptyIntervalError(f"no admissible beta_{n + 1}", n - 1)
            g = gap_s - ctx.mpf(beta)
            T1 = cot(g)
            t1f = float(T1)
            if T1 >= r * T0 and t1f / t0f >= n + 1 and t1f / t0f >= r * (1 - 1e-15):
                break
            beta = float(np.nextafter(beta, math.inf))
        else:
            raise EmptyIntervalError(f"ratio requirement unreachable at n={n}", n - 1)
        gap_t = g
        # alpha_{n+1}: co-angle placed between 0 and that of arctan(K T1)
        lo_gap = ctx.atan(1 / (mpK * T1))
        alpha = float(gap_t - (1 - rule.alpha_fraction) * lo_gap)
        if not 0 < alpha < gap_t:
            raise EmptyIntervalError(f"no admissible alpha_{n + 1}", n - 1)
        new_gap = gap_t - ctx.mpf(alpha)
        T2 = cot(new_gap)
        if not (T2 > mpK * T1 and new_gap > 0):
            raise EmptyIntervalError(f"alpha_{n + 1} fell outside its interval", n - 1)
        log_t2 = float(ctx.log(T2))
        if log_t2 > log_ceiling:
            if n == 1:
                raise EmptyIntervalError("precision ceiling reached at n=1", 0)
            warnings.warn(
                f"log tan(A_n+B_n) exceeds {log_ceiling} at n={n + 1}; truncated to n_max={n - 1}",
                PrecisionCeilingWarning, stacklevel=2)
            # drop the half-built step n so arrays stay aligned
            break
        betas.append(beta)
        alphas.append(alpha)
        t1s.append(as_float(T1))
        t0s.append((float(T2), log_t2))
        gap_s, T0 = new_gap, T2

    return SequencePair(
        c=float(c),
        alpha=alphas,
        beta=betas,
        t0=[v for v, _ in t0s],
        t1=[v for v, _ in t1s],
        log_t0=[v for _, v in t0s],
        log_t1=[v for _, v in t1s],
    )


# --------------------------------------------------------------------------- verification


@dataclass(frozen=True)
class ConditionReport:
    """Finite-n check of the four sequence conditions.

    Margins are ratios: ``sum_margin < 1``, ``gap_margin < 1``,
    ``ratio_margin >= 1`` and ``tan_margin >= 1`` mean the condition holds.
    """

    n: int
    bounded_sums: bool
    converging: bool
    ratio_condition: bool
    tan_condition: bool
    sum_margin: float
    gap_margin: float
    ratio_margin: float
    tan_margin: float
    tangent_ratio: float

    @property
    def all_hold(self) -> bool:
        return self.bounded_sums and self.converging and self.ratio_condition and self.tan_condition


def _q(a: float, b: float, log_a: float, log_b: float) -> float:
    """``a / b`` for positive tangents, via logs when the floats overflowed."""
    if math.isfinite(a) and math.isfinite(b) and b > 0:
        return a / b
    return math.exp(log_a - log_b)


def _coangle(t: float, log_t: float) -> float:
    return math.atan(1.0 / t) if log_t < 700 else math.exp(-log_t)


def verify_lemma_conditions(seq: SequencePair, n: int) -> ConditionReport:
    t0, t1, t2 = seq.tangents(n)
    l0, l1, l2 = seq.log_tangents(n)
    g0, g2 = _coangle(t0, l0), _coangle(t2, l2)
    a_n = float(np.sum(seq.alpha[:n]))
    b_n = float(np.sum(seq.beta[:n]))
    sum_margin = max(a_n, b_n, HALF_PI - g0) / HALF_PI
    bounded = t0 > 0 and g0 > 0 and a_n < HALF_PI and b_n < HALF_PI
    gap_margin = g2 / g0
    ratio = _q(t1, t0, l1, l0)
    ratio_ok = ratio >= n + 1
    lhs, rhs = (seq.c + 2.0) * t1, (seq.c - 1.0) * t2
    if math.isfinite(lhs) and math.isfinite(rhs):
        tan_ok = lhs <= rhs
        tan_margin = rhs / lhs
    else:
        tan_margin = math.exp(math.log(seq.c - 1.0) + l2 - math.log(seq.c + 2.0) - l1)
        tan_ok = tan_margin >= 1.0
    return ConditionReport(
        n=n,
        bounded_sums=bool(bounded),
        converging=bool(0 < gap_margin < 1),
        ratio_condition=bool(ratio_ok),
        tan_condition=bool(tan_ok),
        sum_margin=sum_margin,
        gap_margin=gap_margin,
        ratio_margin=ratio / (n + 1),
        tan_margin=tan_margin,
        tangent_ratio=ratio,
    )


# --------------------------------------------------------------------------- candidate families

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class CandidateFamily:
    """Closed-form sequence pairs that do not satisfy the ratio blow-up.

    ``kind`` is one of ``power2_harmonic`` (``2^-k``, ``1/(k(k+1))``),
    ``geometric`` (``a^-k``, ``b^-k``, ``1 < b <= a``), ``harmonic_polylog``
    (``1/(k(k+1))``, ``k^(-1-delta)``) and ``gaussian_exp``
    (``a^(-k^3)``, ``b^(-k^2)``).
    """

    kind: str
    a: float = 2.0
    b: float = 2.0
    delta: float = 1.0

    def __post_init__(self):
        if self.kind not in _FAMILIES:
            raise ValueError(f"unknown family {self.kind!r}")
        if self.kind == "geometric" and not 1.0 < self.b <= self.a:
            raise ValueError("geometric family needs 1 < b <= a")
        if self.kind == "gaussian_exp" and not (self.a > 1.0 and self.b > 1.0):
            raise ValueError("gaussian_exp family needs a, b > 1")
        if self.kind == "harmonic_polylog" and not self.delta > 0:
            raise ValueError("harmonic_polylog family needs delta > 0")

    @classmethod
    def power2_harmonic(cls) -> "CandidateFamily":
        return cls("power2_harmonic")

    @classmethod
    def geometric(cls, a: float, b: float) -> "CandidateFamily":
        return cls("geometric", a=a, b=b)

    @classmethod
    def harmonic_polylog(cls, delta: float) -> "CandidateFamily":
        return cls("harmonic_polylog", delta=delta)

    @classmethod
    def gaussian_exp(cls, a: float = 2.0, b: float = 2.0) -> "CandidateFamily":
        return cls("gaussian_exp", a=a, b=b)

    def _spec(self, which: str) -> "_Series":
        return _FAMILIES[self.kind](self)[0 if which == "alpha" else 1]

    def term(self, which: str, k: int) -> float:
        return self._spec(which).term(k)

    def log_tail(self, which: str, n: int) -> float:
        """``log(sum_{k > n} term_k)``."""
        return self._spec(which).log_tail(n)

    def integral(self, which: str, x0: float) -> float:
        """``int_{x0}^inf term(x) dx``."""
        return self._spec(which).integral(x0)

    @property
    def total(self) -> float:
        return math.exp(self.log_tail("alpha", 0)) + math.exp(self.log_tail("beta", 0))


@dataclass(frozen=True)
class _Series:
    term: Callable[[int], float]
    log_tail: Callable[[int], float]
    integral: Callable[[float], float]


def _geometric_series(base: float) -> _Series:
    lb = math.log(base)
    return _Series(
        term=lambda k: base ** (-k),
        log_tail=lambda n: -n * lb - math.log(base - 1.0),
        integral=lambda x: math.exp(-x * lb) / lb,
    )


def _telescoping_series() -> _Series:
    return _Series(
        term=lambda k: 1.0 / (k * (k + 1.0)),
        log_tail=lambda n: -math.log(n + 1.0),
        integral=lambda x: math.log1p(1.0 / x),
    )


def _power_series(delta: float) -> _Series:
    return _Series(
        term=lambda k: k ** (-1.0 - delta),
        log_tail=lambda n: math.log(special.zeta(1.0 + delta, n + 1.0)),
        integral=lambda x: x ** (-delta) / delta,
    )


def _summed_log_tail(log_term: Callable[[int], float], n: int) -> float:
    logs = []
    k = n + 1
    while True:
        lt = log_term(k)
        logs.append(lt)
        if lt < logs[0] - 50.0 or len(logs) > 10_000:
            break
        k += 1
    return float(special.logsumexp(logs))


def _square_exp_series(base: float) -> _Series:
    lb = math.log(base)
    return _Series(
        term=lambda k: math.exp(-(k * k) * lb),
        log_tail=lambda n: _summed_log_tail(lambda k: -(k * k) * lb, n),
        integral=lambda x: 0.5 * math.sqrt(math.pi / lb) * special.erfc(x * math.sqrt(lb)),
    )


def _cube_exp_series(base: float) -> _Series:
    lb = math.log(base)
    return _Series(
        term=lambda k: math.exp(-(k ** 3) * lb),
        log_tail=lambda n: _summed_log_tail(lambda k: -(k ** 3) * lb, n),
        integral=lambda x: (special.gamma(1 / 3) * special.gammaincc(1 / 3, x ** 3 * lb)
                            / (3.0 * lb ** (1 / 3))),
    )


_FAMILIES: dict[str, Callable[[CandidateFamily], tuple[_Series, _Series]]] = {
    "power2_harmonic": lambda f: (_geometric_series(2.0), _telescoping_series()),
    "geometric": lambda f: (_geometric_series(f.a), _geometric_series(f.b)),
    "harmonic_polylog": lambda f: (_telescoping_series(), _power_series(f.delta)),
    "gaussian_exp": lambda f: (_cube_exp_series(f.a), _square_exp_series(f.b)),
}


def _log_coangles(family: CandidateFamily, n: int) -> tuple[float, float, float]:
    """Log co-angles of ``A_n+B_n``, ``A_n+B_{n+1}``, ``A_{n+1}+B_{n+1}``.

    The family is rescaled by ``pi / (2 (A + B))`` so its partial sums converge
    to pi/2; co-angles are then scaled tails.
    """
    ls = math.log(HALF_PI / family.total)
    la_n, la_n1 = family.log_tail("alpha", n), family.log_tail("alpha", n + 1)
    lb_n, lb_n1 = family.log_tail("beta", n), family.log_tail("beta", n + 1)
    g0 = ls + np.logaddexp(la_n, lb_n)
    g1 = ls + np.logaddexp(la_n, lb_n1)
    g2 = ls + np.logaddexp(la_n1, lb_n1)
    return float(g0), float(g1), float(g2)


def _sin_from_log(lg: float) -> float:
    return math.sin(math.exp(lg)) if lg > -8 else 0.0


def candidate_ratio(family: CandidateFamily, n: int) -> float:
    """``cos(A_n + B_{n+1}) / cos(A_n + B_n)`` for the normalized family."""
    if n < 1:
        raise ValueError("n must be at least 1")
    g0, g1, _ = _log_coangles(family, n)
    if max(g0, g1) > -8:
        return _sin_from_log(g1) / _sin_from_log(g0)
    # sin(x) = x (1 - x^2/6 + ...) with x < 3.4e-4
    x0, x1 = math.exp(g0), math.exp(g1)
    return math.exp(g1 - g0) * (1 - x1 * x1 / 6) / (1 - x0 * x0 / 6)


def _log_cot_from_log_coangle(lg: float) -> float:
    if lg > -8:
        return -math.log(math.tan(math.exp(lg)))
    return -lg - math.log1p(-math.exp(2 * lg) / 3)


def candidate_sequence(family: CandidateFamily, n_max: int, c: float = 2.0,
                       log_ceiling: float = LOG_TANGENT_CEILING) -> SequencePair:
    """Embed a normalized candidate family as a :class:`SequencePair`.

    Stops early (silently) once ``log T2`` would exceed ``log_ceiling``.
    """
    scale = HALF_PI / family.total
    alphas, betas, lt0, lt1 = [], [], [], []
    lb1 = math.log(scale) + math.log(family.term("beta", 1))
    lt1.append(-math.log(math.tan(HALF_PI - math.exp(lb1))) if lb1 < math.log(HALF_PI) else 0.0)
    for k in range(1, n_max + 2):
        g0, g1, _ = _log_coangles(family, k) if k >= 1 else (0, 0, 0)
        l0 = _log_cot_from_log_coangle(g0)
        if l0 > log_ceiling:
            break
        alphas.append(scale * family.term("alpha", k))
        betas.append(scale * family.term("beta", k))
        lt0.append(l0)
        if k <= n_max:
            lt1.append(_log_cot_from_log_coangle(g1))
    m = len(lt0)
    if m < 2:
        raise EmptyIntervalError("family exhausts precision at n=1", 0)
    lt1 = lt1[:m]
    # recompute t0/t1 for k = 1: co-angle of A_0 + B_1 is pi/2 - beta_1
    lt1[0] = math.log(math.tan(betas[0]))
    return SequencePair(
        c=c,
        alpha=alphas,
        beta=betas,
        t0=np.exp(lt0),
        t1=np.exp(lt1),
        log_t0=lt0,
        log_t1=lt1,
        label=f"candidate:{family.kind}",
    )


@dataclass(frozen=True)
class CandidateVerdict:
    family: CandidateFamily
    n: np.ndarray
    ratios: np.ndarray
    trailing_min: float
    fails_ratio_condition: bool


def reject_candidate(family: CandidateFamily, n_end: int = 200, window: int = 20,
                     floor: float = 0.1) -> CandidateVerdict:
    """Decide at finite n whether the family misses the ratio blow-up.

    The cosine ratio must tend to 0 when the tangent ratio diverges; the
    family is declared to fail when the minimum ratio over the last
    ``window`` indices stays above ``floor``.
    """
    ns = np.arange(1, n_end + 1)
    ratios = np.array([candidate_ratio(family, int(k)) for k in ns])
    tmin = float(ratios[-window:].min())
    return CandidateVerdict(family, ns, ratios, tmin, bool(tmin > floor))


def tail_bounds(family: CandidateFamily, n: int, which: str = "beta") -> tuple[float, float]:
    """Integral-test bracket for ``sum_{k > n} term_k``.

    Returns ``(int_{n+1}^inf term, term_{n+1} + int_{n+1}^inf term)``.
    """
    if which not in ("alpha", "beta"):
        raise ValueError("which must be 'alpha' or 'beta'")
    terms = [family.term(which, k) for k in range(n + 1, n + 66)]
    if any(t < 0 for t in terms) or any(b > a for a, b in zip(terms, terms[1:])):
        raise ValueError(f"{family.kind} {which} terms are not monotone decreasing beyond n={n}")
    lower = family.integral(which, n + 1.0)
    return lower, terms[0] + lower


def gaussian_integral_upper_estimate(base: float, n: int) -> float:
    """Loose upper estimate ``sqrt(pi/ln b)/2 * b^(-(n+1)^2/2)`` of
    ``int_{n+1}^inf b^(-x^2) dx``.

    Not an equality: the exact value is ``sqrt(pi/ln b)/2 * erfc((n+1) sqrt(ln b))``.
    """
    lb = math.log(base)
    return 0.5 * math.sqrt(math.pi / lb) * math.exp(-0.5 * (n + 1) ** 2 * lb)
