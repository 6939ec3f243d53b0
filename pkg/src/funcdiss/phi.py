"""Weight functions phi and the derived limit-ratio calculus.

A weight phi: (0, inf) -> (0, inf) generalizes the classical power weight
phi(t) = t^(p-2).  The admissibility conditions checked here are

  (i)    phi is C^1 on (0, inf), positive and finite,
  (ii)   (s*phi(s))' > 0, so s*phi(s) is strictly increasing,
  (iii)  the range of s*phi(s) is all of (0, inf),
  (iv)   C1*s^r <= (s*phi(s))' <= C2*s^r near 0 for some r > -1, and when
         r = 0 additionally phi(0+) is finite positive and s*phi'(s) -> 0,
  (v)    phi' has constant sign far to the right,
  (vi)   |s*phi'(s)/phi(s)| is nondecreasing (only needed for necessity
         results; sufficiency survives with the sup of the ratio instead).

The derived calculus: zeta(t) inverts s*sqrt(phi(s)), Theta(t) = zeta(t)/t,
and the limit ratio

    Lambda(t) = t * Theta'(t) / Theta(t)
              = - s*phi'(s) / (s*phi'(s) + 2*phi(s))   at s = zeta(t),

whose limit Lambda_inf (and sup of Lambda^2) drives every dissipativity
criterion downstream.  The dual weight psi is defined by inverting
s*phi(s): t*psi(t) is the inverse function, and sqrt(psi(|w|))*w equals
sqrt(phi(|u|))*u for w = phi(|u|)*u, with Lambda_dual = -Lambda.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .errors import (
    BadTruncation,
    BracketFailure,
    NonConvergent,
    NonPositivePhi,
    NotIncreasing,
    QuadratureFailure,
)

__all__ = [
    "PhiSpec",
    "PhiValidation",
    "ConditionCheck",
    "LambdaProfile",
    "LambdaLimit",
    "YoungPair",
    "power_phi",
    "exp_square_phi",
    "truncated_power",
    "custom_phi",
    "validate_phi",
    "inverse_s_phi",
    "dual_phi",
    "young_pair",
]

POWER = "power"
EXP_SQUARE = "exp_square"
TRUNCATED_POWER = "truncated_power"
CUSTOM = "custom"

# Search range for monotone inversion, in decades.
_BRACKET_LO = 1e-12
_BRACKET_HI = 1e12
_BISECT_ITERS = 60


@dataclass(frozen=True)
class PhiSpec:
    """A weight function with the metadata the admissibility checks need.

    r, s0, c1, c2 describe the near-zero growth (condition (iv)); s1 marks
    where phi' is expected to keep one sign.  Family constructors fill these
    with exact values where known and conservative ones otherwise.
    """

    family: str
    p: float | None = None
    k: float | None = None
    r: float = 0.0
    s0: float = 1.0
    s1: float = 2.0
    c1: float = 0.5
    c2: float = 2.0
    phi_fn: Callable[[np.ndarray], np.ndarray] | None = None
    dphi_fn: Callable[[np.ndarray], np.ndarray] | None = None
    vi_exempt: bool = False
    label: str = ""

    def phi(self, s):
        """Evaluate phi(s) elementwise; accepts scalars or arrays."""
        s = np.asarray(s, dtype=float)
        if self.family == POWER:
            return s ** (self.p - 2.0)
        if self.family == EXP_SQUARE:
            with np.errstate(over="ignore"):
                return np.exp(s * s)
        if self.family == TRUNCATED_POWER:
            return _trunc_phi(s, self.p, self.k)
        return np.asarray(self.phi_fn(s), dtype=float)

    def dphi(self, s):
        """Evaluate phi'(s) elementwise; central differences for custom specs
        that do not supply a derivative."""
        s = np.asarray(s, dtype=float)
        if self.family == POWER:
            return (self.p - 2.0) * s ** (self.p - 3.0)
        if self.family == EXP_SQUARE:
            with np.errstate(over="ignore"):
                return 2.0 * s * np.exp(s * s)
        if self.family == TRUNCATED_POWER:
            return _trunc_dphi(s, self.p, self.k)
        if self.dphi_fn is not None:
            return np.asarray(self.dphi_fn(s), dtype=float)
        return _central_dphi(self.phi_fn, s)

    def s_phi(self, s):
        s = np.asarray(s, dtype=float)
        return s * self.phi(s)

    def ds_phi(self, s):
        """(s*phi(s))' = phi(s) + s*phi'(s)."""
        s = np.asarray(s, dtype=float)
        return self.phi(s) + s * self.dphi(s)

    def s_sqrt_phi(self, s):
        s = np.asarray(s, dtype=float)
        return s * np.sqrt(self.phi(s))


def _trunc_rho(t, k):
    return -0.5 * (t - k + 1.0) ** 2 + t


def _trunc_phi(t, p, k):
    arr = np.atleast_1d(np.asarray(t, dtype=float))
    low = arr < k - 1.0
    high = arr > k
    mid = ~(low | high)
    out = np.empty_like(arr)
    out[low] = arr[low] ** (p - 2.0)
    out[mid] = _trunc_rho(arr[mid], k) ** (p - 2.0)
    out[high] = (k - 0.5) ** (p - 2.0)
    return out.reshape(np.shape(t))


def _trunc_dphi(t, p, k):
    arr = np.atleast_1d(np.asarray(t, dtype=float))
    low = arr < k - 1.0
    high = arr > k
    mid = ~(low | high)
    out = np.zeros_like(arr)
    out[low] = (p - 2.0) * arr[low] ** (p - 3.0)
    rho = _trunc_rho(arr[mid], k)
    out[mid] = (p - 2.0) * rho ** (p - 3.0) * (k - arr[mid])
    return out.reshape(np.shape(t))


def _central_dphi(fn, s, rel=1e-6):
    # 4th order central stencil; step scales with s but never below 1e-6.
    s = np.asarray(s, dtype=float)
    h = np.maximum(1e-6, rel * np.abs(s))
    f1 = np.asarray(fn(s + h), dtype=float)
    f_1 = np.asarray(fn(s - h), dtype=float)
    f2 = np.asarray(fn(s + 2 * h), dtype=float)
    f_2 = np.asarray(fn(s - 2 * h), dtype=float)
    return (8.0 * (f1 - f_1) - (f2 - f_2)) / (12.0 * h)


def power_phi(p: float) -> PhiSpec:
    """phi(t) = t^(p-2) for p > 1.  Lambda is the constant -(p-2)/p."""
    if p <= 1.0:
        raise ValueError(f"power weight needs p > 1, got {p}")
    return PhiSpec(
        family=POWER, p=float(p), r=p - 2.0, s0=1.0, s1=2.0,
        c1=p - 1.0, c2=p - 1.0, label=f"power(p={p:g})",
    )


def exp_square_phi() -> PhiSpec:
    """phi(t) = exp(t^2).  Lambda(t) tends to -1, so sup Lambda^2 = 1."""
    s0 = 0.5
    c2 = 2.0 * math.exp(s0 * s0) * (1.0 + 2.0 * s0 * s0)
    return PhiSpec(
        family=EXP_SQUARE, r=0.0, s0=s0, s1=1.0, c1=0.9, c2=c2,
        label="exp_square",
    )


def truncated_power(p: float, k: float) -> PhiSpec:
    """Power weight flattened above level k.

    phi_k(t) = t^(p-2) below k-1, rho_k(t)^(p-2) on [k-1, k] with
    rho_k(t) = -(t-k+1)^2/2 + t, and the constant (k-1/2)^(p-2) above k.
    The junctions are C^1: rho_k(k-1) = k-1, rho_k(k) = k-1/2,
    rho_k'(k-1) = 1, rho_k'(k) = 0.  The ratio t*phi'/phi decreases from
    p-2 to 0, so condition (vi) fails by design while sup Lambda^2 is still
    (1-2/p)^2, attained near t -> 0.
    """
    if p < 2.0:
        raise BadTruncation(f"truncated power needs p >= 2, got p={p}")
    if k <= 1.0:
        raise BadTruncation(f"truncation level must exceed 1, got k={k}")
    s0 = min(1.0, 0.9 * (k - 1.0))
    return PhiSpec(
        family=TRUNCATED_POWER, p=float(p), k=float(k), r=p - 2.0,
        s0=s0, s1=float(k), c1=p - 1.0, c2=p - 1.0, vi_exempt=True,
        label=f"truncated_power(p={p:g}, k={k:g})",
    )


def custom_phi(phi_fn, dphi_fn=None, *, r=0.0, s0=1.0, s1=2.0,
               c1=0.5, c2=2.0, label="custom") -> PhiSpec:
    """Wrap user callables as a weight spec; metadata is the caller's claim
    and is checked, not trusted, by validate_phi."""
    return PhiSpec(
        family=CUSTOM, r=r, s0=s0, s1=s1, c1=c1, c2=c2,
        phi_fn=phi_fn, dphi_fn=dphi_fn, label=label,
    )


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class ConditionCheck:
    name: str
    status: str          # "holds" | "fails" | "not-required"
    margin: float
    note: str = ""


@dataclass(frozen=True)
class PhiValidation:
    spec: PhiSpec
    checks: tuple[ConditionCheck, ...]
    grid: np.ndarray = field(repr=False, default=None)

    @property
    def ok(self) -> bool:
        return all(c.status in ("holds", "not-required") for c in self.checks)

    def check(self, name: str) -> ConditionCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _log_grid(lo: float, hi: float, n: int) -> np.ndarray:
    return np.geomspace(lo, hi, n)


def validate_phi(spec: PhiSpec, nodes: int = 1200) -> PhiValidation:
    """Check conditions (i) through (vi) on a log grid [s0/10, 10*s1].

    Hard failures raise: NonPositivePhi when phi <= 0 somewhere,
    NotIncreasing when (s*phi)' <= 0 somewhere.  Everything else is
    reported with a numeric margin.  Condition (vi) is three valued:
    weights tagged vi_exempt (the truncated powers) report "not-required"
    because the results that need them rely on sup Lambda^2, which stays
    bounded, rather than on monotonicity of the ratio.
    """
    nodes = max(int(nodes), 1000)
    grid = _log_grid(spec.s0 / 10.0, 10.0 * spec.s1, nodes)
    phi = spec.phi(grid)
    dphi = spec.dphi(grid)

    if not np.all(np.isfinite(phi)) or np.any(phi <= 0.0):
        raise NonPositivePhi(
            f"{spec.label or spec.family}: phi must be positive and finite "
            f"on [{grid[0]:.3g}, {grid[-1]:.3g}]")

    ds_phi = phi + grid * dphi
    if np.any(ds_phi <= 0.0):
        raise NotIncreasing(
            f"{spec.label or spec.family}: (s*phi(s))' <= 0 at some node")

    checks: list[ConditionCheck] = []
    checks.append(ConditionCheck("i:smooth-positive", "holds",
                                 float(np.min(phi))))
    checks.append(ConditionCheck("ii:increasing", "holds",
                                 float(np.min(ds_phi))))

    # (iii) full range: log-log slope of s*phi at both grid ends stays
    # positive, so s*phi keeps falling toward 0 and climbing to infinity.
    sphi = grid * phi
    with np.errstate(over="ignore"):
        logv = np.log(sphi)
    logs = np.log(grid)
    slope_lo = (logv[1] - logv[0]) / (logs[1] - logs[0])
    hi_fin = np.isfinite(logv)
    ih = np.nonzero(hi_fin)[0][-1]
    slope_hi = (logv[ih] - logv[ih - 1]) / (logs[ih] - logs[ih - 1])
    m3 = float(min(slope_lo, slope_hi))
    checks.append(ConditionCheck(
        "iii:full-range", "holds" if m3 > 0.0 else "fails", m3,
        note=f"end slopes {slope_lo:.3g}, {slope_hi:.3g}"))

    # (iv) growth envelope on (0, s0).
    near = grid[grid < spec.s0]
    if near.size >= 8:
        ratio = (spec.phi(near) + near * spec.dphi(near)) / near ** spec.r
        lo_m = float(np.min(ratio) - spec.c1)
        hi_m = float(spec.c2 - np.max(ratio))
        tol = 1e-9 * max(abs(spec.c1), abs(spec.c2), 1.0)
        ok4 = lo_m >= -tol and hi_m >= -tol
        note = f"ratio in [{np.min(ratio):.6g}, {np.max(ratio):.6g}]"
        if spec.r == 0.0:
            # r = 0 endpoint checks: finite positive phi(0+), s*phi'(s) -> 0.
            phi0 = float(spec.phi(near[0]))
            tail = float(near[0] * spec.dphi(near[0]))
            ok4 = ok4 and phi0 > 0.0 and np.isfinite(phi0) and abs(tail) < 0.1
            note += f"; phi(0+)~{phi0:.6g}, s*phi'(s)~{tail:.3g} at left end"
        checks.append(ConditionCheck(
            "iv:growth-envelope", "holds" if ok4 else "fails",
            min(lo_m, hi_m), note=note))
    else:
        checks.append(ConditionCheck("iv:growth-envelope", "fails",
                                     -math.inf, note="grid misses (0, s0)"))

    # (v) constant sign of phi' on [s1, inf).
    far = grid[grid >= spec.s1]
    dfar = spec.dphi(far)
    scale = float(np.max(np.abs(dfar))) if dfar.size else 0.0
    tol5 = 1e-12 * max(scale, 1.0)
    if np.all(dfar >= -tol5) or np.all(dfar <= tol5):
        m5 = float(np.min(np.abs(dfar))) if scale > 0 else 0.0
        checks.append(ConditionCheck("v:eventual-sign", "holds", m5))
    else:
        checks.append(ConditionCheck("v:eventual-sign", "fails",
                                     -float(np.min(np.abs(dfar)))))

    # (vi) |s*phi'/phi| nondecreasing.
    ratio6 = np.abs(grid * dphi / phi)
    diffs = np.diff(ratio6)
    tol6 = 1e-10 * max(float(np.max(ratio6)), 1.0)
    m6 = float(np.min(diffs)) if diffs.size else 0.0
    if m6 >= -tol6:
        checks.append(ConditionCheck("vi:ratio-monotone", "holds", m6))
    elif spec.vi_exempt:
        checks.append(ConditionCheck(
            "vi:ratio-monotone", "not-required", m6,
            note="ratio decreases by design; sup Lambda^2 bounded instead"))
    else:
        checks.append(ConditionCheck("vi:ratio-monotone", "fails", m6))

    return PhiValidation(spec=spec, checks=tuple(checks), grid=grid)


# ---------------------------------------------------------------------------
# Monotone inversion


def _invert_monotone(g: Callable[[np.ndarray], np.ndarray], t,
                     what: str) -> np.ndarray:
    """Solve g(s) = t for increasing g by bracketed bisection.

    The bracket is grown over decades [1e-12, 1e12]; bisection is geometric
    (uniform in log s) and only ever compares g(mid) against t, so overflow
    to inf on the high side is harmless.
    """
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t <= 0.0):
        raise BracketFailure(f"{what}: target must be finite positive")

    decades = np.geomspace(_BRACKET_LO, _BRACKET_HI, 25)
    with np.errstate(over="ignore", invalid="ignore"):
        gd = np.asarray(g(decades), dtype=float)
    gd = np.where(np.isnan(gd), np.inf, gd)
    # Targets tying the left edge (to 1e-9 relative) are taken as solved at
    # the edge; composed inversions probe exactly there.
    edge = gd[0] * (1.0 - 1e-9) if gd[0] > 0 else gd[0]
    bad = (t < edge) | (t > np.max(gd))
    if np.any(bad):
        raise BracketFailure(
            f"{what}: target {t[bad].flat[0]:.6g} outside the searchable range")

    tt = np.maximum(t, gd[0])
    idx = np.clip(np.searchsorted(gd, tt, side="right"), 1, len(decades) - 1)
    lo = decades[idx - 1]
    hi = decades[idx]
    for _ in range(_BISECT_ITERS):
        mid = np.sqrt(lo * hi)
        with np.errstate(over="ignore", invalid="ignore"):
            gm = np.asarray(g(mid), dtype=float)
        gm = np.where(np.isnan(gm), np.inf, gm)
        take_hi = gm >= t
        hi = np.where(take_hi, mid, hi)
        lo = np.where(take_hi, lo, mid)
    return np.sqrt(lo * hi)


def inverse_s_phi(spec: PhiSpec, t):
    """Invert s*phi(s) = t.  Returns a scalar for scalar input."""
    t_arr = np.asarray(t, dtype=float)
    out = _invert_monotone(spec.s_phi, t_arr, "inverse of s*phi")
    return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out


# ---------------------------------------------------------------------------
# Limit ratio profile


@dataclass(frozen=True)
class LambdaLimit:
    """Tail summary of Lambda^2.

    lambda_inf is the extrapolated limit of Lambda(t); sup_lambda_sq is the
    grid supremum of Lambda^2 (a lower bound for the true sup, exact for
    monotone profiles once converged).  sup_bounded certifies
    sup Lambda^2 < 1; it is never claimed for an unconverged tail.
    """

    lambda_inf: float
    lambda_inf_sq: float
    sup_lambda_sq: float
    sup_bounded: bool
    converged: bool
    tail_variation: float
    horizon: float
    note: str = ""


class LambdaProfile:
    """Derived calculus for one weight: zeta, Theta, Lambda, and the tail.

    zeta(t) inverts s*sqrt(phi(s)), which is strictly increasing whenever
    condition (ii) holds, because (s^2*phi)' = s*(s*phi)' + s*phi > 0.
    """

    def __init__(self, spec: PhiSpec):
        self.spec = spec

    def zeta(self, t):
        t_arr = np.asarray(t, dtype=float)
        out = _invert_monotone(self.spec.s_sqrt_phi, t_arr,
                               "inverse of s*sqrt(phi)")
        return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out

    def theta(self, t):
        t_arr = np.asarray(t, dtype=float)
        z = _invert_monotone(self.spec.s_sqrt_phi, t_arr,
                             "inverse of s*sqrt(phi)")
        out = z / t_arr
        return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out

    def lambda_of(self, t):
        """Lambda(t) = -s*phi'(s) / (s*phi'(s) + 2*phi(s)) at s = zeta(t)."""
        t_arr = np.asarray(t, dtype=float)
        s = _invert_monotone(self.spec.s_sqrt_phi, t_arr,
                             "inverse of s*sqrt(phi)")
        num = s * self.spec.dphi(s)
        out = -num / (num + 2.0 * self.spec.phi(s))
        return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out

    def lambda_sq_of(self, t):
        lam = self.lambda_of(t)
        return lam * lam

    def lambda_infinity(self, *, t_min: float = 1e-6, t_max: float = 1e8,
                        per_decade: int = 10, tol: float = 1e-6,
                        require_convergence: bool = False) -> LambdaLimit:
        """Estimate Lambda_inf on a geometric t grid up to t_max.

        The tail is extrapolated linearly in 1/log(t) (Richardson style, one
        elimination), which removes the leading logarithmic drift of slowly
        saturating profiles.  Convergence is declared when the last three
        raw nodes vary by less than tol relative to scale; an unconverged
        tail is reported as such and never certifies sup Lambda^2 < 1.
        """
        n = max(2, int(round(per_decade * math.log10(t_max / t_min))))
        grid = np.geomspace(t_min, t_max, n)
        lam = self.lambda_of(grid)
        lam_sq = lam * lam

        scale = max(float(np.max(np.abs(lam))), 1e-30)
        tail = lam[-3:]
        tail_var = float((np.max(tail) - np.min(tail)) / scale)
        converged = tail_var < tol

        x = 1.0 / np.log(grid[-2:])
        dx = x[0] - x[1]
        if abs(dx) > 0.0:
            lam_inf = float(lam[-1] + (lam[-1] - lam[-2]) * x[1] / dx)
        else:
            lam_inf = float(lam[-1])
        if converged:
            lam_inf = float(lam[-1])
        # The extrapolation must not overshoot the admissible range.
        lam_inf = float(np.clip(lam_inf, -1.0, 1.0))

        # sup over the raw grid only: every node is a genuine Lambda(t)^2,
        # so this is a certified lower bound for sup over all t and never
        # borrows from the extrapolation.
        sup_sq = float(np.max(lam_sq))
        note = ""
        if converged:
            sup_bounded = sup_sq < 1.0 - 10.0 * tol
        else:
            sup_bounded = False
            note = (f"tail still moving (variation {tail_var:.3g}); "
                    f"extrapolated Lambda_inf {lam_inf:.6g}")
            if require_convergence:
                raise NonConvergent(
                    f"Lambda tail variation {tail_var:.3g} exceeds {tol:.3g} "
                    f"at horizon {t_max:.3g}")

        return LambdaLimit(
            lambda_inf=lam_inf, lambda_inf_sq=lam_inf * lam_inf,
            sup_lambda_sq=sup_sq, sup_bounded=sup_bounded,
            converged=converged, tail_variation=tail_var,
            horizon=t_max, note=note)


# ---------------------------------------------------------------------------
# Dual weight and Young pair


def dual_phi(spec: PhiSpec) -> PhiSpec:
    """The dual weight psi with t*psi(t) the inverse function of s*phi(s).

    psi(t) = S(t)/t where S inverts s*phi(s); the derivative follows from
    implicit differentiation, S'(t) = 1/(phi(S) + S*phi'(S)), so no finite
    differences are needed.  Near-zero exponent maps to r_dual = -r/(r+1)
    and the envelope constants are measured on the dual validation window.
    """
    def psi(t):
        t = np.asarray(t, dtype=float)
        s = _invert_monotone(spec.s_phi, t, "inverse of s*phi")
        return s / t

    def dpsi(t):
        t = np.asarray(t, dtype=float)
        s = _invert_monotone(spec.s_phi, t, "inverse of s*phi")
        ds = 1.0 / (spec.phi(s) + s * spec.dphi(s))
        return (ds * t - s) / (t * t)

    r_dual = -spec.r / (spec.r + 1.0)
    s0_dual = float(spec.s_phi(spec.s0))
    s1_dual = float(spec.s_phi(spec.s1))
    probe = _log_grid(s0_dual / 10.0, 10.0 * s1_dual, 64)
    ratio = (psi(probe) + probe * dpsi(probe)) / probe ** r_dual
    c1_dual = 0.5 * float(np.min(ratio))
    c2_dual = 2.0 * float(np.max(ratio))
    return PhiSpec(
        family=CUSTOM, r=r_dual, s0=s0_dual, s1=s1_dual,
        c1=c1_dual, c2=c2_dual, phi_fn=psi, dphi_fn=dpsi,
        label=f"dual({spec.label or spec.family})",
    )


@dataclass(frozen=True)
class YoungPair:
    """Conjugate Young functions built from a weight and its dual.

    Phi(s) integrates sigma*phi(sigma) from 0; Psi integrates sigma*psi.
    Young's inequality s*t <= Phi(s) + Psi(t) holds with equality at
    t = s*phi(s).
    """

    phi_spec: PhiSpec
    psi_spec: PhiSpec

    def Phi(self, s: float) -> float:
        return _young_integral(self.phi_spec, float(s))

    def Psi(self, t: float) -> float:
        return _young_integral(self.psi_spec, float(t))


def _young_integral(spec: PhiSpec, upper: float) -> float:
    if upper == 0.0:
        return 0.0
    if upper < 0.0:
        raise ValueError("Young functions are defined for nonnegative arguments")
    # sigma*phi(sigma) -> 0 as sigma -> 0 under (iv), so the integrand is
    # bounded; adaptive quadrature with an absolute floor handles the rest.
    val, err = quad(lambda s: float(spec.s_phi(s)), 0.0, upper,
                    epsabs=1e-12, epsrel=1e-10, limit=200)
    if not math.isfinite(val) or err > 1e-6 * max(abs(val), 1.0) + 1e-10:
        raise QuadratureFailure(
            f"Young integral unreliable on [0, {upper:.3g}]: "
            f"value {val:.6g}, error estimate {err:.3g}")
    return float(val)


def young_pair(spec: PhiSpec) -> YoungPair:
    return YoungPair(phi_spec=spec, psi_spec=dual_phi(spec))
