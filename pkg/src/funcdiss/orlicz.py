"""Young function pairs and Orlicz norms on quadrature sampled fields.

Two norms generate the same space: the Luxemburg gauge

    |||f||| = inf { lambda > 0 : int M(|f|/lambda) dx <= 1 }

and the duality norm, computed here through the Amemiya representation

    ||f|| = inf_{k>0} (1 + int M(k|f|) dx) / k,

which equals the duality definition by standard Orlicz theory.  They
satisfy the sandwich |||f||| <= ||f|| <= 2 |||f|||, and the Holder
inequality int |uv| <= 2 |||u|||_M |||v|||_N holds for a complementary
pair (M, N).

The inventory: power functions t^p (plain and /p normalized), the
exponential M0(t) = e^{at} - 1 with closed form conjugate, the
exponential power e^{a t^q} - 1 with q = p/(p-2), the log type
Ntilde(t) = t (log(t+e))^{(p-2)/p}, and a numeric Legendre conjugate for
everything else.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NotIntegrable, OrliczNormFailure
from .phi import _invert_monotone

__all__ = [
    "SampledField",
    "YoungFunction",
    "HolderReport",
    "validate_young",
    "power_young",
    "exp_young",
    "exp_power_young",
    "log_young",
    "exp_conjugate",
    "legendre_conjugate",
    "conjugate_ratio",
    "luxemburg_norm",
    "orlicz_norm",
    "holder_orlicz",
]

MOSER_SCALE = 4.0 * math.pi


@dataclass(frozen=True)
class SampledField:
    """Scalar samples with quadrature weights; sum(weights) is the measure."""

    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if v.shape != w.shape:
            raise ValueError("values and weights must align")
        if v.size == 0:
            raise ValueError("empty field")
        if np.any(w <= 0.0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be positive and finite")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, values, measure: float = 1.0) -> "SampledField":
        v = np.asarray(values, dtype=float).ravel()
        w = np.full(v.shape, measure / v.size)
        return cls(values=v, weights=w)

    @property
    def measure(self) -> float:
        return float(np.sum(self.weights))

    def scaled(self, alpha: float) -> "SampledField":
        return SampledField(values=alpha * self.values, weights=self.weights)


@dataclass
class YoungFunction:
    """Convex M with M(0) = 0, nondecreasing on [0, inf)."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    dfn: Callable[[np.ndarray], np.ndarray] | None = None
    params: dict = field(default_factory=dict)
    degenerate_tail: bool = False   # True when M(t)/t does not diverge

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(over="ignore"):
            out = np.asarray(self.fn(t), dtype=float)
        return out

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        if self.dfn is not None:
            with np.errstate(over="ignore"):
                return np.asarray(self.dfn(t), dtype=float)
        h = np.maximum(1e-7, 1e-7 * np.abs(t))
        return (self(t + h) - self(np.maximum(t - h, 0.0))) / (
            h + np.minimum(t, h))

    def inverse(self, y):
        """Solve M(s) = y for s > 0 by bracketed bisection."""
        return _invert_monotone(self.__call__, y, f"inverse of {self.name}")


def validate_young(M: YoungFunction, lo: float = 1e-6, hi: float = 1e5,
                   nodes: int = 400) -> None:
    """Raise OrliczNormFailure unless M looks like a Young function:
    M(0) = 0, nondecreasing, midpoint convex, and superlinear at the tail
    (the last check is skipped for degenerate tags)."""
    if abs(float(M(0.0))) > 1e-14:
        raise OrliczNormFailure(f"{M.name}: M(0) must vanish")
    grid = np.geomspace(lo, hi, nodes)
    vals = M(grid)
    if np.any(~np.isfinite(vals)):
        fin = np.isfinite(vals)
        grid, vals = grid[fin], vals[fin]
    if np.any(np.diff(vals) < -1e-12 * np.max(np.abs(vals))):
        raise OrliczNormFailure(f"{M.name}: not nondecreasing")
    mid = M(0.5 * (grid[:-1] + grid[1:]))
    chord = 0.5 * (vals[:-1] + vals[1:])
    tol = 1e-10 * np.maximum(np.abs(chord), 1.0)
    if np.any(mid > chord + tol):
        worst = float(np.max(mid - chord))
        raise OrliczNormFailure(f"{M.name}: midpoint convexity fails "
                                f"by {worst:.3g}")
    if not M.degenerate_tail:
        t_hi = grid[-1]
        if not float(M(t_hi)) / t_hi > float(M(t_hi / 10.0)) / (t_hi / 10.0):
            raise OrliczNormFailure(f"{M.name}: tail is not superlinear")


# ---------------------------------------------------------------------------
# Inventory


def power_young(p: float, normalized: bool = False) -> YoungFunction:
    """M(t) = t^p, or t^p/p when normalized.  Luxemburg norm of the plain
    version is the Lebesgue p-norm."""
    if p <= 1.0:
        raise ValueError(f"power Young function needs p > 1, got {p}")
    c = 1.0 / p if normalized else 1.0
    return YoungFunction(
        name=f"power(p={p:g}{', normalized' if normalized else ''})",
        fn=lambda t: c * np.asarray(t, dtype=float) ** p,
        dfn=lambda t: c * p * np.asarray(t, dtype=float) ** (p - 1.0),
        params={"p": p, "normalized": normalized},
    )


def exp_young(scale: float = MOSER_SCALE) -> YoungFunction:
    """M0(t) = e^{scale*t} - 1; its conjugate has the closed form in
    exp_conjugate."""
    return YoungFunction(
        name=f"exp(scale={scale:g})",
        fn=lambda t: np.expm1(scale * np.asarray(t, dtype=float)),
        dfn=lambda t: scale * np.exp(scale * np.asarray(t, dtype=float)),
        params={"scale": scale},
    )


def exp_conjugate(scale: float = MOSER_SCALE) -> YoungFunction:
    """Legendre conjugate of e^{scale*t} - 1:
    N0(t) = (t/scale)(log(t/scale) - 1) + 1 for t >= scale, else 0."""
    def fn(t):
        t = np.asarray(t, dtype=float)
        u = np.maximum(t / scale, 1.0)
        return u * np.log(u) - u + 1.0

    def dfn(t):
        t = np.asarray(t, dtype=float)
        u = np.maximum(t / scale, 1.0)
        return np.log(u) / scale

    return YoungFunction(name=f"exp_conjugate(scale={scale:g})",
                         fn=fn, dfn=dfn, params={"scale": scale})


def exp_power_young(p: float, scale: float = MOSER_SCALE) -> YoungFunction:
    """M(t) = e^{scale * t^q} - 1 with q = p/(p-2), p > 2."""
    if p <= 2.0:
        raise ValueError(f"exp power Young function needs p > 2, got {p}")
    q = p / (p - 2.0)

    def fn(t):
        t = np.asarray(t, dtype=float)
        return np.expm1(scale * t ** q)

    def dfn(t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            return scale * q * t ** (q - 1.0) * np.exp(scale * t ** q)

    return YoungFunction(name=f"exp_power(p={p:g}, scale={scale:g})",
                         fn=fn, dfn=dfn, params={"p": p, "q": q,
                                                 "scale": scale})


def log_young(p: float):
    """The log type Young function Ntilde(t) = t (log(t+e))^{(p-2)/p} and
    the matching hypothesis functional F -> int |F|^2 (log(|F|+e))^{(p-2)/p}.

    Ntilde is convex for p > 2: both factors are positive, increasing and
    log-concave corrections stay dominated, which validate_young confirms
    numerically on construction.  The tail is degenerate by design,
    Ntilde(t)/t grows only logarithmically.
    """
    if p <= 2.0:
        raise ValueError(f"log type Young function needs p > 2, got {p}")
    a = (p - 2.0) / p

    def fn(t):
        t = np.asarray(t, dtype=float)
        return t * np.log(t + math.e) ** a

    def dfn(t):
        t = np.asarray(t, dtype=float)
        L = np.log(t + math.e)
        return L ** a + t * a * L ** (a - 1.0) / (t + math.e)

    n_tilde = YoungFunction(name=f"log_type(p={p:g})", fn=fn, dfn=dfn,
                            params={"p": p, "exponent": a},
                            degenerate_tail=True)
    validate_young(n_tilde)

    def hypothesis(f: SampledField) -> float:
        v = np.abs(f.values)
        return float(np.sum(f.weights * v * v * np.log(v + math.e) ** a))

    return n_tilde, hypothesis


def legendre_conjugate(M: YoungFunction) -> YoungFunction:
    """Numeric conjugate N(t) = sup_s (st - M(s)).

    The supremum is attained where M'(s) = t, found by bracketed monotone
    inversion of the derivative; below M'(0+) the conjugate vanishes.
    """
    def fn(t):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros_like(t_arr)
        floor = float(M.derivative(1e-12))
        live = t_arr > floor * (1.0 + 1e-9)
        if np.any(live):
            s = _invert_monotone(M.derivative, t_arr[live],
                                 f"inverse of d({M.name})")
            out[live] = s * t_arr[live] - M(s)
        return out.reshape(np.shape(t))

    return YoungFunction(name=f"conjugate({M.name})", fn=fn,
                         params=dict(M.params))


def conjugate_ratio(p: float, t, scale: float = MOSER_SCALE):
    """Ratio of the numeric conjugate of e^{scale*s^q} - 1 against the
    leading asymptotic t (log(t+e)/scale)^{(p-2)/p}; tends to 1 from below
    as t grows, with logarithmic speed."""
    N = legendre_conjugate(exp_power_young(p, scale))
    t = np.asarray(t, dtype=float)
    lead = t * (np.log(t + math.e) / scale) ** ((p - 2.0) / p)
    return N(t) / lead


# ---------------------------------------------------------------------------
# Norms


def _integral_of(M: YoungFunction, f: SampledField, scale_inv: float) -> float:
    """sum w * M(|f| / lambda) with lambda = 1/scale_inv, overflow -> inf."""
    with np.errstate(over="ignore", invalid="ignore"):
        vals = M(np.abs(f.values) * scale_inv)
    vals = np.where(np.isnan(vals), np.inf, vals)
    return float(np.sum(f.weights * vals))


def luxemburg_norm(f: SampledField, M: YoungFunction, *,
                   rel_tol: float = 1e-9) -> float:
    """Luxemburg gauge by geometric bisection of lambda -> int M(|f|/lambda).

    The map is nonincreasing in lambda; the bracket is grown geometrically
    from max|f| and then halved in log space until the relative width drops
    below rel_tol.
    """
    if not np.all(np.isfinite(f.values)):
        raise NotIntegrable("field contains non-finite samples")
    amax = float(np.max(np.abs(f.values)))
    if amax == 0.0:
        return 0.0

    lam = amax
    g = _integral_of(M, f, 1.0 / lam)
    if g > 1.0:
        lo = lam
        hi = 2.0 * lam
        for _ in range(200):
            if _integral_of(M, f, 1.0 / hi) <= 1.0:
                break
            lo = hi
            hi *= 2.0
        else:
            raise NotIntegrable(
                f"int M(|f|/lambda) stays above 1 out to lambda = {hi:.3g}")
    else:
        hi = lam
        lo = lam
        for _ in range(200):
            lo *= 0.5
            if _integral_of(M, f, 1.0 / lo) > 1.0:
                break
        else:
            # Even tiny lambda keeps the integral at or below 1; the gauge
            # is the infimum of an interval reaching 0.
            return 0.0

    for _ in range(200):
        if hi / lo <= 1.0 + rel_tol:
            break
        mid = math.sqrt(lo * hi)
        if _integral_of(M, f, 1.0 / mid) > 1.0:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def orlicz_norm(f: SampledField, pair) -> float:
    """Duality norm via Amemiya: inf_k (1 + int M(k|f|))/k, golden section
    on log k.  pair is the complementary (M, N); only M enters the
    minimization, N documents which dual ball the supremum runs over."""
    M = pair[0] if isinstance(pair, (tuple, list)) else pair
    lux = luxemburg_norm(f, M)
    if lux == 0.0:
        return 0.0

    def amemiya(logk: float) -> float:
        k = math.exp(logk)
        return (1.0 + _integral_of(M, f, k)) / k

    lo = math.log(1e-6 / lux)
    hi = math.log(1e6 / lux)
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = amemiya(x1), amemiya(x2)
    for _ in range(120):
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = amemiya(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = amemiya(x2)
    out = min(f1, f2)
    if not math.isfinite(out):
        raise NotIntegrable("Amemiya functional is infinite on the whole "
                            "search range")
    return out


@dataclass(frozen=True)
class HolderReport:
    lhs: float
    rhs: float
    slack: float


def holder_orlicz(u: SampledField, v: SampledField, pair) -> HolderReport:
    """int |uv| against 2 |||u|||_M |||v|||_N; slack must be nonnegative
    up to 1e-8 relative."""
    M, N = pair[0], pair[1]
    if u.values.shape != v.values.shape or not np.allclose(
            u.weights, v.weights, rtol=1e-12, atol=0.0):
        raise ValueError("fields must share one quadrature grid")
    lhs = float(np.sum(u.weights * np.abs(u.values * v.values)))
    rhs = 2.0 * luxemburg_norm(u, M) * luxemburg_norm(v, N)
    slack = rhs - lhs
    if slack < -1e-8 * max(rhs, 1e-300):
        raise OrliczNormFailure(
            f"Holder violated: lhs {lhs:.9g} > rhs {rhs:.9g}")
    return HolderReport(lhs=lhs, rhs=rhs, slack=slack)
