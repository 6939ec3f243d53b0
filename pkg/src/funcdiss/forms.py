"""Quadrature evaluation of the functional dissipativity forms.

The core object is the sesquilinear integrand

    Re ( <A^{hk} d_k v, d_h v>
         + Lambda(|v|) |v|^-2 <(A^{hk} - (A^{kh})*) v, d_h v> Re<v, d_k v>
         - Lambda^2(|v|) |v|^-4 <A^{hk} v, v> Re<v, d_k v> Re<v, d_h v> )

summed over h, k and extended by zero on the set where v vanishes.  The
operator is dissipative in the weighted sense iff the integral is >= 0 for
every compactly supported v, and strictly so iff it dominates
kappa * ||grad v||_2^2.  For the planar Lame system the integrand collapses
to scalar coefficient combinations of

    |grad v|^2, (div v)^2, sum_kj d_k v_j d_j v_k, |grad |v||^2,
    and |v|^-2 (v_h d_h |v|)^2,

which this module evaluates both directly and through the X/Y frame
decomposition; the two routes share quadrature nodes, so their agreement
checks the algebra rather than the mesh.

Everything here is deterministic: test fields are generated from explicit
seeds, quadrature is tensor Gauss-Legendre with a resolution rule tied to
the field's wavelength, and probe searches use fixed grids plus a
derivative-free polish.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .coefficients import CoefficientField, GeneralSystem, lame_system
from .errors import QuadratureFailure
from .phi import POWER, LambdaProfile, PhiSpec

__all__ = [
    "TestField",
    "bump_field",
    "rotation_field",
    "gradient_field",
    "oscillatory_field",
    "standard_ensemble",
    "xy_decompose",
    "dissipativity_form",
    "gradient_energy",
    "strict_margin",
    "FieldResidual",
    "MarginReport",
    "FormBreakdown",
    "elasticity_breakdown",
    "commutator_ibp",
    "laplacian_shift",
    "weighted_map_gradients",
    "CounterexampleReport",
    "oscillatory_counterexample",
]

ZERO_SET_REL = 1e-14


# ---------------------------------------------------------------------------
# test fields


@dataclass(frozen=True, eq=False)
class TestField:
    """Analytic planar vector field with exact point values and Jacobian.

    value(pts) maps (n, 2) points to (n, 2) components; jacobian(pts)
    returns (n, 2, 2) with jac[n, i, h] = d_h v_i.  support is the box
    (x0, x1, y0, y1) outside of which the field vanishes identically, and
    wavelength, when set, is the shortest oscillation length the
    quadrature rule must resolve.  scale is an amplitude hint used by the
    zero set convention |v| <= 1e-14 * scale.
    """

    label: str
    family: str
    value: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    support: tuple[float, float, float, float]
    wavelength: float | None = None
    scale: float = 1.0
    is_real: bool = True


def _bump(r, r0, r1):
    # plateau for r <= r0, cubic smoothstep falloff, zero past r1
    s = np.clip((r - r0) / (r1 - r0), 0.0, 1.0)
    return 1.0 - s * s * (3.0 - 2.0 * s)


def _bump_deriv(r, r0, r1):
    s = np.clip((r - r0) / (r1 - r0), 0.0, 1.0)
    return -6.0 * s * (1.0 - s) / (r1 - r0)


def _radial_parts(pts, center, r0, r1):
    dx = pts - np.asarray(center, dtype=float)
    r = np.hypot(dx[:, 0], dx[:, 1])
    safe = np.where(r > 0.0, r, 1.0)
    unit = dx / safe[:, None]
    unit[r == 0.0] = 0.0
    return dx, _bump(r, r0, r1), _bump_deriv(r, r0, r1), unit


def _support_box(center, r1):
    cx, cy = center
    return (cx - r1, cx + r1, cy - r1, cy + r1)


def bump_field(center, r0: float, r1: float, offset, matrix,
               label: str = "bump") -> TestField:
    """v(x) = b(|x - c|) (a + M (x - c)) with a C^1 plateau bump b."""
    a = np.asarray(offset, dtype=float)
    m = np.asarray(matrix, dtype=float)
    if a.shape != (2,) or m.shape != (2, 2):
        raise ValueError("offset must be length 2, matrix 2 x 2")
    if not (0.0 <= r0 < r1):
        raise ValueError("need 0 <= r0 < r1")
    c = (float(center[0]), float(center[1]))

    def value(pts):
        dx, b, _, _ = _radial_parts(pts, c, r0, r1)
        poly = a[None, :] + dx @ m.T
        return b[:, None] * poly

    def jacobian(pts):
        dx, b, db, unit = _radial_parts(pts, c, r0, r1)
        poly = a[None, :] + dx @ m.T
        jac = np.einsum("n,ni,nh->nih", db, poly, unit)
        jac += b[:, None, None] * m[None, :, :]
        return jac

    scale = float(np.abs(a).max(initial=0.0) + np.abs(m).sum() * r1)
    return TestField(label=label, family="bump", value=value,
                     jacobian=jacobian, support=_support_box(c, r1),
                     scale=max(scale, 1e-30))


def rotation_field(center, r0: float, r1: float, amp: float = 1.0,
                   label: str = "rotation") -> TestField:
    """Divergence free core b(r) * amp * (-(y - cy), x - cx)."""
    m = amp * np.array([[0.0, -1.0], [1.0, 0.0]])
    f = bump_field(center, r0, r1, (0.0, 0.0), m, label=label)
    return TestField(label=label, family="rotation", value=f.value,
                     jacobian=f.jacobian, support=f.support, scale=f.scale)


def gradient_field(center, r0: float, r1: float, amp: float = 1.0,
                   label: str = "gradient") -> TestField:
    """Curl free core b(r) * amp * (x - c), the gradient of a radial potential
    up to the bump factor."""
    f = bump_field(center, r0, r1, (0.0, 0.0), amp * np.eye(2), label=label)
    return TestField(label=label, family="gradient", value=f.value,
                     jacobian=f.jacobian, support=f.support, scale=f.scale)


def oscillatory_field(center, xi, rho: float, eta, *,
                      chi_r0: float, chi_r1: float,
                      complex_phase: bool = False,
                      background=None,
                      label: str = "oscillatory") -> TestField:
    """Short wave probe eta chi(|x - c|) cos(rho <xi, x - c>).

    With complex_phase the cosine becomes exp(i rho <xi, x - c>), which keeps
    |v| smooth.  background = (omega, amp, g_r0, g_r1) adds the slowly varying
    carrier amp * omega * g(|x - c|) used by the counterexample construction.
    """
    xi = np.asarray(xi, dtype=float)
    xi = xi / np.linalg.norm(xi)
    eta = np.asarray(eta, dtype=complex if complex_phase or
                     np.iscomplexobj(eta) else float)
    c = (float(center[0]), float(center[1]))
    rho = float(rho)
    r1 = chi_r1
    bg = None
    if background is not None:
        omega, amp, g_r0, g_r1 = background
        bg = (np.asarray(omega, dtype=float), float(amp),
              float(g_r0), float(g_r1))
        r1 = max(r1, g_r1)

    def value(pts):
        dx, chi, _, _ = _radial_parts(pts, c, chi_r0, chi_r1)
        theta = rho * (dx @ xi)
        mod = np.exp(1j * theta) if complex_phase else np.cos(theta)
        out = np.multiply.outer(chi * mod, eta)
        if bg is not None:
            omega, amp, g0, g1 = bg
            _, g, _, _ = _radial_parts(pts, c, g0, g1)
            out = out + np.multiply.outer(amp * g, omega)
        return out

    def jacobian(pts):
        dx, chi, dchi, unit = _radial_parts(pts, c, chi_r0, chi_r1)
        theta = rho * (dx @ xi)
        if complex_phase:
            mod = np.exp(1j * theta)
            dmod = 1j * mod
        else:
            mod = np.cos(theta)
            dmod = -np.sin(theta)
        # d_h v_i = eta_i (chi' u_h mod + chi mod' rho xi_h)
        radial = np.einsum("n,nh->nh", dchi * mod, unit)
        wave = np.einsum("n,h->nh", chi * dmod * rho, xi)
        jac = np.einsum("i,nh->nih", eta, radial + wave)
        if bg is not None:
            omega, amp, g0, g1 = bg
            _, _, dg, gunit = _radial_parts(pts, c, g0, g1)
            jac = jac + np.einsum("i,n,nh->nih", amp * omega, dg, gunit)
        return jac

    is_real = not (complex_phase or np.iscomplexobj(eta))
    scale = float(np.abs(eta).max() + (bg[1] if bg is not None else 0.0))
    return TestField(label=label, family="oscillatory", value=value,
                     jacobian=jacobian, support=_support_box(c, r1),
                     wavelength=2.0 * np.pi / rho, scale=max(scale, 1e-30),
                     is_real=is_real)


def standard_ensemble(seed: int = 2026, *, n_bump: int = 20, n_rot: int = 20,
                      n_osc: int = 20) -> tuple[TestField, ...]:
    """Deterministic probe family: polynomial bumps, rotation and gradient
    cores, and modulated waves at dyadic frequencies."""
    rng = np.random.default_rng(seed)
    fields: list[TestField] = []
    for i in range(n_bump):
        center = rng.uniform(-0.35, 0.35, size=2)
        r1 = rng.uniform(0.35, 0.6)
        r0 = r1 * rng.uniform(0.2, 0.55)
        offset = rng.normal(size=2)
        matrix = rng.normal(size=(2, 2))
        fields.append(bump_field(center, r0, r1, offset, matrix,
                                 label=f"bump-{i:02d}"))
    for i in range(n_rot):
        center = rng.uniform(-0.3, 0.3, size=2)
        r1 = rng.uniform(0.35, 0.6)
        r0 = r1 * rng.uniform(0.2, 0.55)
        amp = rng.normal()
        if i % 2 == 0:
            fields.append(rotation_field(center, r0, r1, amp,
                                         label=f"rotation-{i:02d}"))
        else:
            fields.append(gradient_field(center, r0, r1, amp,
                                         label=f"gradient-{i:02d}"))
    for i in range(n_osc):
        center = rng.uniform(-0.25, 0.25, size=2)
        r1 = rng.uniform(0.3, 0.5)
        angle = rng.uniform(0.0, np.pi)
        xi = (np.cos(angle), np.sin(angle))
        rho = float(2 ** rng.integers(0, 5))
        if i % 2 == 0:
            eta = rng.normal(size=2) + 1j * rng.normal(size=2)
            eta = eta / np.linalg.norm(eta)
            f = oscillatory_field(center, xi, rho, eta, chi_r0=-0.3 * r1,
                                  chi_r1=r1, complex_phase=True,
                                  label=f"wave-{i:02d}")
        else:
            eta = rng.normal(size=2)
            eta = eta / np.linalg.norm(eta)
            f = oscillatory_field(center, xi, rho, eta, chi_r0=-0.3 * r1,
                                  chi_r1=r1, label=f"wave-{i:02d}")
        fields.append(f)
    return tuple(fields)


# ---------------------------------------------------------------------------
# tensor Gauss quadrature with slab chunking


@lru_cache(maxsize=8)
def _leg_rule(order: int):
    return np.polynomial.legendre.leggauss(order)


def _axis_rule(a: float, b: float, n_cells: int, order: int):
    g, w = _leg_rule(order)
    h = (b - a) / n_cells
    starts = a + h * np.arange(n_cells)
    nodes = (starts[:, None] + 0.5 * h * (g[None, :] + 1.0)).ravel()
    weights = np.tile(0.5 * h * w, n_cells)
    return nodes, weights


def _axis_cells(extent: float, wavelength: float | None,
                cells_per_wavelength: float, min_cells: int) -> int:
    n = min_cells
    if wavelength is not None:
        n = max(n, int(np.ceil(cells_per_wavelength * extent / wavelength)))
    return n


def _integrate(fn, support, wavelength, *, order: int = 8,
               cells_per_wavelength: float = 10.0, min_cells: int = 12,
               max_axis_points: int = 60000,
               max_chunk: int = 4_000_000) -> np.ndarray:
    """Integrate fn(pts) -> (n,) or (n, q) over the support box.

    The evaluation is chunked along x so oscillatory probes with millions of
    nodes never materialize at once.  Returns a length q vector (q = 1 for
    scalar integrands).
    """
    x0, x1, y0, y1 = support
    nx = _axis_cells(x1 - x0, wavelength, cells_per_wavelength, min_cells)
    ny = _axis_cells(y1 - y0, wavelength, cells_per_wavelength, min_cells)
    if max(nx, ny) * order > max_axis_points:
        raise QuadratureFailure(
            f"resolution rule asks for {max(nx, ny) * order} nodes per axis "
            f"(cap {max_axis_points}); the probe oscillates too fast")
    xs, wx = _axis_rule(x0, x1, nx, order)
    ys, wy = _axis_rule(y0, y1, ny, order)
    rows = max(1, max_chunk // len(ys))
    total: np.ndarray | None = None
    for i0 in range(0, len(xs), rows):
        xv = xs[i0:i0 + rows]
        wv = wx[i0:i0 + rows]
        px, py = np.meshgrid(xv, ys, indexing="ij")
        pts = np.column_stack([px.ravel(), py.ravel()])
        w = np.multiply.outer(wv, wy).ravel()
        vals = np.asarray(fn(pts))
        if vals.ndim == 1:
            vals = vals[:, None]
        part = w @ vals
        total = part if total is None else total + part
    assert total is not None
    if not np.all(np.isfinite(total)):
        raise QuadratureFailure("integrand produced non finite values")
    return total


def _lambda_values(phi_spec: PhiSpec, t: np.ndarray) -> np.ndarray:
    """Lambda(t) on the quadrature slab; the power family is a constant."""
    if phi_spec.family == POWER:
        p = phi_spec.p
        return np.full_like(t, -(p - 2.0) / p)
    profile = LambdaProfile(phi_spec)
    out = np.zeros_like(t)
    pos = t > 0.0
    if np.any(pos):
        out[pos] = profile.lambda_of(t[pos])
    return out


# ---------------------------------------------------------------------------
# the dissipativity form


def _field_data(v: TestField, pts):
    vals = v.value(pts)
    jac = v.jacobian(pts)
    nv = np.linalg.norm(vals, axis=1)
    tiny = ZERO_SET_REL * v.scale
    mask = nv > tiny
    safe = np.where(mask, nv, 1.0)
    unit = vals / safe[:, None]
    # d_k = Re <v, d_k v> / |v| = d_k |v| on the support of v
    d = np.einsum("ni,nik->nk", np.conj(vals), jac).real / safe[:, None]
    return vals, jac, nv, mask, unit, d


def _generic_integrand(system: GeneralSystem, phi_spec: PhiSpec,
                       v: TestField):
    tensor = system.tensor
    gap = system.adjoint_gap()
    has_gap = bool(np.max(np.abs(gap)) > 1e-14)

    def fn(pts):
        vals, jac, nv, mask, unit, d = _field_data(v, pts)
        lam = _lambda_values(phi_spec, np.where(mask, nv, 1.0))
        t1 = np.einsum("hkij,njk,nih->n", tensor, jac, np.conj(jac))
        weighted = np.zeros(len(pts), dtype=complex)
        if has_gap:
            weighted += lam * np.einsum("hkij,nj,nih,nk->n", gap, unit,
                                        np.conj(jac), d)
        weighted -= (lam * lam) * np.einsum("hkij,nj,ni,nh,nk->n", tensor,
                                            unit, np.conj(unit), d, d)
        form = t1.real + np.where(mask, weighted.real, 0.0)
        grad2 = np.einsum("nih,nih->n", jac, np.conj(jac)).real
        return np.column_stack([form, grad2])

    return fn


def _lame_integrand(lam_at, mu_at, phi_spec: PhiSpec, v: TestField,
                    kappa: float = 0.0):
    """Scalar coefficient route for the Lame tensor.

    Valid for complex fields: the first order term vanishes because the
    tensor is formally self adjoint, and the weighted term reduces to
    (lam + mu) |sum_k v_k d_k|v||^2 / |v|^2 + mu |grad |v||^2.
    """

    def fn(pts):
        lam = lam_at(pts)
        mu = mu_at(pts)
        vals, jac, nv, mask, unit, d = _field_data(v, pts)
        lv = _lambda_values(phi_spec, np.where(mask, nv, 1.0))
        grad2 = np.einsum("nih,nih->n", jac, np.conj(jac)).real
        div = jac[:, 0, 0] + jac[:, 1, 1]
        divsq = (div * np.conj(div)).real
        swap = np.einsum("njk,nkj->n", jac, np.conj(jac)).real
        base = (mu - kappa) * grad2 + lam * divsq + mu * swap
        q = np.einsum("nk,nk->n", unit, d)
        corr = (lv * lv) * ((lam + mu) * np.abs(q) ** 2
                            + (mu - kappa) * np.einsum("nk,nk->n", d, d))
        form = base - np.where(mask, corr, 0.0)
        return np.column_stack([form, grad2])

    return fn


def _coeff_samplers(target):
    if isinstance(target, CoefficientField):
        return (lambda pts: target.lam_at(pts[:, 0], pts[:, 1]),
                lambda pts: target.mu_at(pts[:, 0], pts[:, 1]))
    lam, mu = target
    return (lambda pts, v=float(lam): v, lambda pts, v=float(mu): v)


def _form_and_energy(target, phi_spec: PhiSpec, v: TestField,
                     **quad) -> tuple[float, float]:
    if isinstance(target, GeneralSystem):
        fn = _generic_integrand(target, phi_spec, v)
    elif isinstance(target, (CoefficientField, tuple)):
        lam_at, mu_at = _coeff_samplers(target)
        fn = _lame_integrand(lam_at, mu_at, phi_spec, v)
    else:
        raise TypeError("target must be a GeneralSystem, a CoefficientField "
                        "or a (lambda, mu) pair")
    out = _integrate(fn, v.support, v.wavelength, **quad)
    return float(out[0]), float(out[1])


def dissipativity_form(target, phi_spec: PhiSpec, v: TestField,
                       **quad) -> float:
    """Value of the dissipativity integrand for one test field.

    target is a constant GeneralSystem (any component count, the full
    sesquilinear route) or a planar Lame CoefficientField / (lambda, mu)
    pair (the scalar coefficient route).  Non negative values over a rich
    family of fields are evidence for, never proof of, dissipativity;
    a single negative value is a certificate against it.
    """
    return _form_and_energy(target, phi_spec, v, **quad)[0]


def gradient_energy(v: TestField, **quad) -> float:
    def fn(pts):
        jac = v.jacobian(pts)
        return np.einsum("nih,nih->n", jac, np.conj(jac)).real

    return float(_integrate(fn, v.support, v.wavelength, **quad)[0])


@dataclass(frozen=True)
class FieldResidual:
    label: str
    family: str
    form_value: float
    gradient_sq: float
    residual: float


@dataclass(frozen=True)
class MarginReport:
    min_residual: float
    worst_label: str
    kappa: float
    rows: tuple[FieldResidual, ...]


def strict_margin(target, phi_spec: PhiSpec, ensemble, kappa: float,
                  **quad) -> MarginReport:
    """Worst value of form - kappa ||grad v||^2 over the probe ensemble."""
    rows = []
    for v in ensemble:
        form, grad2 = _form_and_energy(target, phi_spec, v, **quad)
        rows.append(FieldResidual(label=v.label, family=v.family,
                                  form_value=form, gradient_sq=grad2,
                                  residual=form - kappa * grad2))
    worst = min(rows, key=lambda r: r.residual)
    return MarginReport(min_residual=worst.residual, worst_label=worst.label,
                        kappa=float(kappa), rows=tuple(rows))


# ---------------------------------------------------------------------------
# X/Y frame decomposition and the elasticity breakdown


def xy_decompose(v: TestField, pts):
    """Frame components (X1, X2, Y1, Y2) of a real planar field.

    X1 + i X2 collects the radial derivative of |v| seen from the moving
    frame (v1, v2), (v2, -v1); Y1 = div v - X1 and Y2 = curl v - X2 are the
    frame derivatives of the direction field.  All four vanish by convention
    on the zero set of v.
    """
    pts = np.asarray(pts, dtype=float)
    vals = v.value(pts)
    jac = v.jacobian(pts)
    if np.iscomplexobj(vals) and np.max(np.abs(vals.imag)) > 0.0:
        raise ValueError("frame decomposition needs a real valued field")
    vals = vals.real
    jac = jac.real
    nv = np.hypot(vals[:, 0], vals[:, 1])
    mask = nv > ZERO_SET_REL * v.scale
    safe = np.where(mask, nv, 1.0)
    # d_k|v| = (v1 d_k v1 + v2 d_k v2)/|v|
    d1 = (vals[:, 0] * jac[:, 0, 0] + vals[:, 1] * jac[:, 1, 0]) / safe
    d2 = (vals[:, 0] * jac[:, 0, 1] + vals[:, 1] * jac[:, 1, 1]) / safe
    x1 = (vals[:, 0] * d1 + vals[:, 1] * d2) / safe
    x2 = (vals[:, 1] * d1 - vals[:, 0] * d2) / safe
    div = jac[:, 0, 0] + jac[:, 1, 1]
    curl = jac[:, 1, 0] - jac[:, 0, 1]
    y1 = div - x1
    y2 = curl - x2
    zero = ~mask
    for arr in (x1, x2, y1, y2):
        arr[zero] = 0.0
    return x1, x2, y1, y2


@dataclass(frozen=True)
class FormBreakdown:
    """Term by term split of the strict Lame form.

    total is the direct quadrature of the kappa shifted form; the seven
    parts re-express it in the X/Y frame with the cross weights moved to
    gamma = mu (lambda + mu)/(lambda + 3 mu), the choice that balances the
    two discriminants.  commutator_term collects what that shift displaces,
    2 (gamma - mu)(X1 Y1 + X2 Y2), an integrand equal pointwise to
    mu^2/(lambda + 3 mu) times the null Lagrangian defect
    sum d_k v_j d_j v_k - (div v)^2 scaled by 2.
    """

    total: float
    x1_sq: float
    x2_sq: float
    y1_sq: float
    y2_sq: float
    cross_x1y1: float
    cross_x2y2: float
    commutator_term: float
    kappa: float
    lambda_sup_sq: float
    disgamma_ok: bool
    disgamma2_ok: bool

    @property
    def parts_sum(self) -> float:
        return (self.x1_sq + self.x2_sq + self.y1_sq + self.y2_sq
                + self.cross_x1y1 + self.cross_x2y2 + self.commutator_term)


def _sup_lambda_sq(phi_spec: PhiSpec) -> float:
    if phi_spec.family == POWER:
        lam = (phi_spec.p - 2.0) / phi_spec.p
        return lam * lam
    limit = LambdaProfile(phi_spec).lambda_infinity()
    return max(limit.sup_lambda_sq, limit.lambda_inf_sq)


def elasticity_breakdown(field, phi_spec: PhiSpec, v: TestField,
                         kappa: float = 0.0, **quad) -> FormBreakdown:
    """Evaluate the kappa shifted Lame form and its frame split.

    field is a CoefficientField or a constant (lambda, mu) pair; v must be
    real valued.  The discriminant flags certify, node-wise over the
    coefficient grid, that

        gamma^2 < (mu - kappa)^2 (1 - sup Lambda^2)
        (lambda + mu - gamma)^2 < (lambda + 2 mu - kappa)^2 (1 - sup Lambda^2)

    which is exactly what makes the two quadratic forms in (X1, Y1) and
    (X2, Y2) jointly positive regardless of the probe.
    """
    if not v.is_real:
        raise ValueError("the frame breakdown needs a real valued field")
    lam_at, mu_at = _coeff_samplers(field)
    lam_sup_sq = _sup_lambda_sq(phi_spec)

    def fn(pts):
        lam = np.broadcast_to(np.asarray(lam_at(pts), dtype=float),
                              (len(pts),))
        mu = np.broadcast_to(np.asarray(mu_at(pts), dtype=float),
                             (len(pts),))
        gam = mu * (lam + mu) / (lam + 3.0 * mu)
        vals = v.value(pts).real
        nv = np.hypot(vals[:, 0], vals[:, 1])
        mask = nv > ZERO_SET_REL * v.scale
        lv = _lambda_values(phi_spec, np.where(mask, nv, 1.0))
        lam2 = np.where(mask, lv * lv, 0.0)
        x1, x2, y1, y2 = xy_decompose(v, pts)
        jac = v.jacobian(pts).real
        grad2 = np.einsum("nih,nih->n", jac, jac)
        div = jac[:, 0, 0] + jac[:, 1, 1]
        swap = np.einsum("njk,nkj->n", jac, jac)
        dsq = np.where(mask, x1 * x1 + x2 * x2, 0.0)  # |grad |v||^2
        total = ((mu - kappa) * grad2 + lam * div * div + mu * swap
                 - lam2 * ((mu - kappa) * dsq + (lam + mu) * x1 * x1))
        cols = [
            total,
            (lam + 2.0 * mu - kappa) * (1.0 - lam2) * x1 * x1,
            (mu - kappa) * (1.0 - lam2) * x2 * x2,
            (lam + 2.0 * mu - kappa) * y1 * y1,
            (mu - kappa) * y2 * y2,
            2.0 * (lam + mu - gam) * x1 * y1,
            -2.0 * gam * x2 * y2,
            2.0 * (gam - mu) * (x1 * y1 + x2 * y2),
        ]
        return np.column_stack(cols)

    out = _integrate(fn, v.support, v.wavelength, **quad)

    if isinstance(field, CoefficientField):
        lam_n = field.lam_total.ravel()
        mu_n = field.mu_total.ravel()
    else:
        lam_n = np.array([float(field[0])])
        mu_n = np.array([float(field[1])])
    gam_n = mu_n * (lam_n + mu_n) / (lam_n + 3.0 * mu_n)
    slack = 1.0 - lam_sup_sq
    dis1 = bool(np.all(mu_n - kappa > 0.0)
                and np.all(gam_n ** 2 < (mu_n - kappa) ** 2 * slack))
    dis2 = bool(np.all(lam_n + 2.0 * mu_n - kappa > 0.0)
                and np.all((lam_n + mu_n - gam_n) ** 2
                           < (lam_n + 2.0 * mu_n - kappa) ** 2 * slack))

    return FormBreakdown(total=float(out[0]), x1_sq=float(out[1]),
                         x2_sq=float(out[2]), y1_sq=float(out[3]),
                         y2_sq=float(out[4]), cross_x1y1=float(out[5]),
                         cross_x2y2=float(out[6]),
                         commutator_term=float(out[7]), kappa=float(kappa),
                         lambda_sup_sq=lam_sup_sq, disgamma_ok=dis1,
                         disgamma2_ok=dis2)


def commutator_ibp(v: TestField, grad_f: Callable[[np.ndarray], np.ndarray],
                   **quad) -> float:
    """Integrated by parts value of int f (sum d_k v_j d_j v_k - (div v)^2).

    grad_f(pts) returns (n, 2) with the exact gradient of the scalar factor
    f = 2 mu^2/(lambda + 3 mu).  For compactly supported v the identity is

        int f (sum d_k v_j d_j v_k - (div v)^2)
            = sum_k int d_k f (v_k div v - v_j d_j v_k).
    """

    def fn(pts):
        g = np.asarray(grad_f(pts), dtype=float)
        vals = v.value(pts).real
        jac = v.jacobian(pts).real
        div = jac[:, 0, 0] + jac[:, 1, 1]
        # v_k div v - v_j d_j v_k  (index k)
        carried = vals * div[:, None] - np.einsum("nj,nkj->nk", vals, jac)
        return np.einsum("nk,nk->n", g, carried)

    return float(_integrate(fn, v.support, v.wavelength, **quad)[0])


def laplacian_shift(system: GeneralSystem, kappa: float) -> GeneralSystem:
    """A - kappa Delta as a tensor: subtract kappa d_hk d_ij."""
    n = system.dim
    m = system.components
    shift = np.einsum("hk,ij->hkij", np.eye(n), np.eye(m))
    return GeneralSystem(tensor=system.tensor - kappa * shift,
                         label=f"{system.label}-{kappa:g}*laplacian")


# ---------------------------------------------------------------------------
# the substitution v = sqrt(phi(|u|)) u, pointwise


def weighted_map_gradients(phi_spec: PhiSpec, u_vals, u_jacs):
    """Pointwise |grad v|^2 for v = sqrt(phi(|u|)) u, plus the comparison
    quantities phi(|u|) |grad u|^2 and |u|.

    Off the zero set,
        d_h v = sqrt(phi) d_h u + phi'/(2 sqrt(phi)) d_h|u| u.
    Entries where u vanishes are returned as zero; the lower bound
    |grad v|^2 >= phi(|u|) |grad u|^2 / 4 and the growth-capped upper bound
    are checked against these arrays by the test-suite.
    """
    u_vals = np.asarray(u_vals)
    u_jacs = np.asarray(u_jacs)
    nu = np.linalg.norm(u_vals, axis=1)
    mask = nu > 0.0
    safe = np.where(mask, nu, 1.0)
    dnu = np.einsum("ni,nih->nh", np.conj(u_vals), u_jacs).real / safe[:, None]
    phi = phi_spec.phi(safe)
    dphi = phi_spec.dphi(safe)
    root = np.sqrt(phi)
    jac_v = (root[:, None, None] * u_jacs
             + (dphi / (2.0 * root))[:, None, None]
             * np.einsum("nh,ni->nih", dnu, u_vals))
    grad_v_sq = np.einsum("nih,nih->n", jac_v, np.conj(jac_v)).real
    grad_u_sq = np.einsum("nih,nih->n", u_jacs, np.conj(u_jacs)).real
    grad_v_sq = np.where(mask, grad_v_sq, 0.0)
    weighted_u = np.where(mask, phi * grad_u_sq, 0.0)
    return grad_v_sq, weighted_u, np.where(mask, nu, 0.0)


# ---------------------------------------------------------------------------
# oscillatory counterexample


@dataclass(frozen=True)
class CounterexampleReport:
    algebraic_min: float
    flip_rho: float | None
    xi: tuple[float, float]
    omega: tuple[float, float]
    eta: tuple[float, float]
    rows: tuple[tuple[float, float, float], ...]  # (rho, form, grad_sq)


def _real_probe_search(lam: float, mu: float, lam_sup_sq: float,
                       grid: int = 48):
    """Minimize the symbol form over real unit (xi, omega, eta).

    For the self adjoint Lame tensor the quadratic in eta is
    eta^T [Q - L^2 (w^T Q w) w w^T] eta with Q = mu I + (lambda + mu) xi xi^T,
    so a 2-d angular grid plus eigen decomposition finds the exact minimum
    up to the polish tolerance.
    """
    sys2 = lame_system(lam, mu)

    def min_eig(angles):
        a, w = angles
        xi = np.array([np.cos(a), np.sin(a)])
        om = np.array([np.cos(w), np.sin(w)])
        q = sys2.contract_xi(xi).real
        m = q - lam_sup_sq * (om @ q @ om) * np.outer(om, om)
        vals = np.linalg.eigvalsh(m)
        return vals[0]

    best = (np.inf, (0.0, 0.0))
    for a in np.linspace(0.0, np.pi, grid, endpoint=False):
        for w in np.linspace(0.0, np.pi, grid, endpoint=False):
            val = min_eig((a, w))
            if val < best[0]:
                best = (val, (a, w))
    res = minimize(min_eig, best[1], method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 400})
    a, w = res.x
    xi = np.array([np.cos(a), np.sin(a)])
    om = np.array([np.cos(w), np.sin(w)])
    q = lame_system(lam, mu).contract_xi(xi).real
    m = q - lam_sup_sq * (om @ q @ om) * np.outer(om, om)
    vals, vecs = np.linalg.eigh(m)
    return float(vals[0]), xi, om, vecs[:, 0]


def oscillatory_counterexample(lam: float, mu: float, phi_spec: PhiSpec, *,
                               octaves: int = 10, background_amp: float = 2.0,
                               stop_at_flip: bool = True,
                               **quad) -> CounterexampleReport:
    """Drive the form negative with a modulated plane wave when the symbol
    minimum is negative.

    The probe is v = background_amp * omega * g(x) + eta * chi(x)
    cos(rho <xi, x>) where (xi, omega, eta) realize the algebraic minimum
    and g, chi are nested plateau bumps; as rho grows the form scales like
    the symbol minimum times rho^2, so a negative minimum must surface
    within a few octaves.  Returns the first dyadic rho with a negative
    form value (flip_rho is None when the sweep stays non negative, which
    is the expected outcome below the threshold).
    """
    lam_sup_sq = _sup_lambda_sq(phi_spec)
    alg_min, xi, omega, eta = _real_probe_search(lam, mu, lam_sup_sq)
    rows = []
    flip: float | None = None
    for j in range(octaves + 1):
        rho = float(2 ** j)
        v = oscillatory_field((0.0, 0.0), xi, rho, eta,
                              chi_r0=-0.10, chi_r1=0.30,
                              background=(omega, background_amp, 0.35, 0.75),
                              label=f"counterexample-2^{j}")
        form, grad2 = _form_and_energy((lam, mu), phi_spec, v, **quad)
        rows.append((rho, form, grad2))
        if form < 0.0 and flip is None:
            flip = rho
            if stop_at_flip:
                break
    return CounterexampleReport(algebraic_min=alg_min, flip_rho=flip,
                                xi=(float(xi[0]), float(xi[1])),
                                omega=(float(omega[0]), float(omega[1])),
                                eta=(float(eta[0]), float(eta[1])),
                                rows=tuple(rows))
