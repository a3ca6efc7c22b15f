"""Per-index boxes, balls and bound factors of the counterexample construction.

All quantities derive from the tangent triple ``(T0, T1, T2)`` alone.  They
are evaluated in ratio form (``u = T1/T2``) so that nothing overflows while
``T2`` stays below ~1e307; the two products that do grow like ``T1 T2``
(``H`` and ``J``) are kept as logarithms.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .sequences import SequencePair

__all__ = [
    "GeometryRecord",
    "GeometryError",
    "IdentityCheck",
    "GeometryReport",
    "ConeInterval",
    "HarnackTerms",
    "geometry_record",
    "records_from_triple",
    "verify_geometry",
    "cone_interval",
    "disjointness_index",
    "harnack_terms",
    "LOG_SPACE_THRESHOLD",
]

LOG_SPACE_THRESHOLD = 30.0


class GeometryError(ArithmeticError):
    def __init__(self, message: str, n: int):
        super().__init__(message)
        self.n = n


@dataclass(frozen=True)
class GeometryRecord:
    n: int
    T0: float
    T1: float
    T2: float
    log_T0: float
    log_T1: float
    log_T2: float
    I: float
    P: float
    P_prime: float
    log_H: float
    log_J: float
    delta: float
    delta_prime: float
    x: float
    y: float
    c: float
    d: float
    x_S: float
    y_S: float
    r: float

    @property
    def M(self) -> float:
        return self.delta + self.x

    @property
    def U(self) -> tuple[tuple[float, float], tuple[float, float]]:
        """Square ``(-y, y)^2`` around the origin."""
        return (-self.y, self.y), (-self.y, self.y)

    @property
    def V(self) -> tuple[float, tuple[float, float]]:
        """Vertical segment ``{delta} x (c, d)``."""
        return self.delta, (self.c, self.d)

    @property
    def Q(self) -> tuple[tuple[float, float], tuple[float, float]]:
        """Square ``(delta', delta) x (c, c + delta - delta')`` holding the ball."""
        return (self.delta_prime, self.delta), (self.c, self.c + self.delta - self.delta_prime)

    def to_dict(self) -> dict:
        return asdict(self)


def records_from_triple(T0: float, T1: float, T2: float, n: int = 0,
                        logs: tuple[float, float, float] | None = None) -> GeometryRecord:
    """Evaluate every quantity for a single tangent triple."""
    if not (0 < T0 < T1 < T2):
        raise GeometryError("tangents must satisfy 0 < T0 < T1 < T2", n)
    l0, l1, l2 = logs if logs is not None else (math.log(T0), math.log(T1), math.log(T2))
    u = T1 / T2
    v = T0 / T1
    e1, e2 = 1.0 / T1, 1.0 / T2
    P = T2 - T1
    Pp = T1 - T0
    I = 2.0 + T1 + T2
    i_hat = 1.0 + u + 2.0 * e2  # I / T2
    # H / (T2^2 T1)
    h = (1.0 - u) ** 2 * (1.0 + e1) + (1.0 - v) * i_hat * (1.0 + e2)
    log_H = 2.0 * l2 + l1 + math.log(h)
    log_J = math.log(2.0) + l1 + l2 + math.log1p((T1 + T2) / (2.0 * T1 * T2))
    # common factor (1 + T0) / (T1 h)
    g = (1.0 + T0) / (T1 * h)
    delta = g * i_hat * (1.0 + e2)
    y = g * (1.0 - u) ** 2
    x = 2.0 * delta * (1.0 + e1) * ((1.0 - u) / i_hat) + e1
    c = (delta + y) * T1 + y
    # delta - y, expanded to avoid cancellation
    dmy = g * (3.0 * u - u * u + 3.0 * e2 + u * e2 + 2.0 * e2 * e2)
    d = dmy * T2 - y
    delta_p = (delta * (1.0 + T1) + y * I) / (1.0 + T2)
    x_S = 0.5 * (delta + y) * I / (1.0 + T2)
    j_hat = 2.0 * T1 / (1.0 + e2) + (T1 + T2) / (1.0 + T2)  # J / (1 + T2)
    y_S = 0.5 * (delta + y) * j_hat
    # delta P - y I = g T2 (1-u) i_hat (u + 1/T2)
    r = 0.5 * g * T2 * (1.0 - u) * i_hat * (u + e2) / (1.0 + T2)
    if not r > 0:
        raise GeometryError(f"ball radius r_n = {r} is not positive", n)
    return GeometryRecord(
        n=n, T0=T0, T1=T1, T2=T2, log_T0=l0, log_T1=l1, log_T2=l2,
        I=I, P=P, P_prime=Pp, log_H=log_H, log_J=log_J,
        delta=delta, delta_prime=delta_p, x=x, y=y, c=c, d=d,
        x_S=x_S, y_S=y_S, r=r,
    )


def geometry_record(seq: SequencePair, n: int) -> GeometryRecord:
    return records_from_triple(*seq.tangents(n), n=n, logs=seq.log_tangents(n))


# --------------------------------------------------------------------------- verification


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    lhs: float
    rhs: float
    abs_residual: float
    rel_residual: float
    log_residual: float
    passed: bool


@dataclass(frozen=True)
class GeometryReport:
    n: int
    log_space: bool
    checks: tuple[IdentityCheck, ...]
    epsilon_samples: np.ndarray
    admissible_epsilons: np.ndarray
    positivity: bool

    @property
    def passed(self) -> bool:
        return self.positivity and all(ch.passed for ch in self.checks) and len(self.admissible_epsilons) > 0

    def residual(self, name: str) -> IdentityCheck:
        for ch in self.checks:
            if ch.name == name:
                return ch
        raise KeyError(name)


def _equality(name: str, lhs: float, rhs: float, log_space: bool, rtol: float, ltol: float) -> IdentityCheck:
    a = abs(lhs - rhs)
    scale = max(abs(lhs), abs(rhs))
    rel = a / scale if scale > 0 else 0.0
    if lhs > 0 and rhs > 0:
        lres = abs(math.log(lhs) - math.log(rhs))
    else:
        lres = math.inf if a > 0 else 0.0
    ok = lres <= ltol if log_space else rel <= rtol
    return IdentityCheck(name, lhs, rhs, a, rel, lres, bool(ok))


def _inequality(name: str, lhs: float, rhs: float, rtol: float) -> IdentityCheck:
    """``lhs <= rhs`` up to a relative slack (equality cases are legitimate)."""
    scale = max(abs(lhs), abs(rhs))
    excess = lhs - rhs
    rel = excess / scale if scale > 0 else 0.0
    ok = excess <= rtol * scale
    return IdentityCheck(name, lhs, rhs, excess, rel, 0.0, bool(ok))


def epsilon_samples(rec: GeometryRecord, interior: int = 8) -> np.ndarray:
    dp, dl = rec.delta_prime, rec.delta
    grid = dp + (dl - dp) * np.arange(1, interior + 1) / (interior + 1)
    return np.unique(np.concatenate([[dp, 0.5 * (dp + dl), dl * (1 - 1e-12)], grid]))


def verify_geometry(rec: GeometryRecord, rtol: float = 1e-9, ltol: float = 1e-6) -> GeometryReport:
    """Recheck the identities and containments from the stored fields."""
    log_space = rec.log_T2 >= LOG_SPACE_THRESHOLD
    T0, T1, T2 = rec.T0, rec.T1, rec.T2
    dl, dp, x, y, c, d = rec.delta, rec.delta_prime, rec.x, rec.y, rec.c, rec.d
    eq = lambda name, a, b: _equality(name, a, b, log_space, rtol, ltol)  # noqa: E731
    checks = [
        eq("d_identity", d, (dl + x) * T1 - 1.0),
        eq("d_definition", d, (dl - y) * T2 - y),
        eq("c_identity", c, (dl + 1.0) * T0 + 1.0),
        eq("c_definition", c, (dl + y) * T1 + y),
        eq("ball_left", rec.x_S - rec.r, dp),
        eq("ball_right", rec.x_S + rec.r, dl),
        eq("ball_bottom", rec.y_S - rec.r, c),
        eq("ball_top", rec.y_S + rec.r, c + dl - dp),
        eq("delta_over_y", dl / y, (rec.I / rec.P) * ((1.0 + T2) / rec.P)),
        _inequality("c_below_d", c, d, 0.0),
        _inequality("delta_prime_below_delta", dp, dl, 0.0),
    ]
    eps = epsilon_samples(rec)
    slack = max(rtol, 1e-12)
    ok_eps = []
    for k, e in enumerate(eps):
        low = _inequality(f"delta_low[{k}]", (e + 1.0) * T0 + 1.0, c, slack)
        high = _inequality(f"delta_high[{k}]", c + dl - dp, (e + x) * T1 - 1.0, slack)
        if low.passed and high.passed:
            ok_eps.append(e)
        checks.append(_inequality(f"yP1[{k}]", (e + y) * T1 + y, c, slack))
        checks.append(_inequality(f"yP2[{k}]", c + dl - dp, (e - y) * T2 - y, slack))
    positive = all(v > 0 for v in (rec.I, rec.P, rec.P_prime, dl, dp, x, y, c, d, rec.r))
    return GeometryReport(rec.n, log_space, tuple(checks), eps, np.array(ok_eps), bool(positive))


# --------------------------------------------------------------------------- cone intervals


@dataclass(frozen=True)
class ConeInterval:
    delta: float
    low: float
    high: float

    @property
    def empty(self) -> bool:
        return not self.low < self.high

    def contains(self, v: float) -> bool:
        return self.low < v < self.high

    def disjoint_from(self, other: "ConeInterval") -> bool:
        return self.empty or other.empty or self.high <= other.low or other.high <= self.low


def cone_interval(w: tuple[float, float], delta: float, n: int, seq: SequencePair) -> ConeInterval:
    """Ordinates at abscissa ``delta`` of points ``w + z`` with ``z`` in the n-th band."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    w1, w2 = float(w[0]), float(w[1])
    t_prev = seq.tan_prev(n)
    t_n = float(seq.t0[n - 1])
    return ConeInterval(delta, (w1 + delta) * t_prev + w2, (1.0 + delta) * t_n + w2)


def disjointness_index(seq: SequencePair, delta: float, x: float) -> int:
    """Smallest n0 such that consecutive intervals are disjoint for all stored n >= n0.

    Raises ``LookupError`` when even the last stored pair overlaps.
    """
    if not (0 < delta < 1 and 0 < x < 1):
        raise ValueError("delta and x must lie in (0, 1)")
    ok = []
    for n in range(1, seq.n_max + 1):
        t0, t1, _ = seq.tangents(n)
        l0, l1, _ = seq.log_tangents(n)
        if math.isfinite((1 + delta) * t0) and math.isfinite((x + delta) * t1):
            ok.append((1 + delta) * t0 <= (x + delta) * t1)
        else:
            ok.append(math.log1p(delta) + l0 <= math.log(x + delta) + l1)
    if not ok[-1]:
        raise LookupError(f"no disjointness index within n <= {seq.n_max}")
    n0 = seq.n_max
    while n0 > 1 and ok[n0 - 2]:
        n0 -= 1
    return n0


# --------------------------------------------------------------------------- bound factors


@dataclass(frozen=True)
class HarnackTerms:
    n: int
    alpha: float
    a_n: float
    b_n: float
    x_over_y: tuple[float, float, float]
    M_over_y: float
    upper_factor: float
    lower_factor: float
    valid: bool = field(default=True)

    @property
    def product(self) -> float:
        return self.a_n * self.b_n


def harnack_terms(rec: GeometryRecord, alpha: float, band_width: float | None = None) -> HarnackTerms:
    """Bound factors for the ratio of the harmonic functions at the two points.

    ``band_width`` (the measure of the angular band, ``alpha_n``) only scales
    the two raw factors; ``a_n`` and ``b_n`` do not depend on it.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if rec.y >= 0.5:
        raise GeometryError(f"y_n = {rec.y} >= 1/2 at n={rec.n}", rec.n)
    T0, T1, T2 = rec.T0, rec.T1, rec.T2
    dl, dp, y, x = rec.delta, rec.delta_prime, rec.y, rec.x
    num = 2.0 * dl - dp + 2.0 * y + 1.0
    base = (dl + 1.0) * T0
    a_n = (num / base + 1.0) ** (alpha + 2.0)
    b_n = (dl + x) / (y ** alpha * (1.0 - 2.0 * y) ** alpha)
    R1 = 2.0 * ((1.0 + T1) / T1) * ((1.0 + T2) / rec.P)
    R2 = (1.0 + T1) / ((1.0 + T0) * T1)
    R3 = (rec.I / rec.P) * ((1.0 + T2) / rec.P) * (rec.P_prime / T1) / (1.0 + T0)
    w = 1.0 if band_width is None else band_width
    upper = (dl + x) * w * base ** (-alpha - 2.0)
    lower = w * (num + base) ** (-alpha - 2.0) * ((1.0 - 2.0 * y) * y) ** alpha
    return HarnackTerms(rec.n, alpha, a_n, b_n, (R1, R2, R3), (dl + x) / y, upper, lower)
