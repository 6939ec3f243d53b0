"""Dissipativity verdicts for the planar Lame operator and relatives.

Three ingredients combine into a verdict:

  necessity   If the operator is dissipative for the weight phi then
              Lambda_inf^2 <= 1 - ess sup ((lambda+mu)/(lambda+3mu))^2,
              so a limit ratio above that right hand side refutes
              dissipativity.

  sufficiency The strict inequality, together with smallness of the BMO
              seminorm of mu^2/(lambda+3mu) against a margin kappa chosen
              from the spectral gap, certifies strict dissipativity.
              Sufficiency only needs sup_t Lambda^2, so weights whose ratio
              is not monotone (truncated powers) are still covered.

  algebra     The pointwise necessary condition in the plane: for all unit
              xi in R^2 and eta, omega in C^m,

                Re( <Q eta, eta> - L^2 <Q omega, omega> Re<eta, omega>^2
                    + L (<Q omega, eta> - <Q eta, omega>) Re<eta, omega> ) >= 0

              with Q = sum A^{hk} xi_h xi_k and L = Lambda_inf.  For fixed
              xi and omega this is a quadratic form in eta over R^{2m}, so
              the inner minimum is an exact eigenvalue computation and only
              the (xi, omega) sphere needs searching.

The kappa policy follows the spectral gap: delta is half the gap
rhs - Lambda_inf^2 and kappa sits at 90 percent of
delta / (2 (1 - Lambda_inf^2)) * min(ess inf mu, ess inf (lambda + 2 mu)).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .coefficients import CoefficientField, GeneralSystem, bmo_seminorm, ess_bounds
from .errors import BudgetExhausted, EllipticityViolation, NotStrict
from .phi import LambdaLimit, LambdaProfile, PhiSpec

__all__ = [
    "STRICT_DISSIPATIVE",
    "DISSIPATIVE_BOUNDARY",
    "NOT_DISSIPATIVE",
    "INCONCLUSIVE",
    "Verdict",
    "AlgebraicProbe",
    "MarginResult",
    "algebraic_margin",
    "algebraic_form",
    "lame2d_verdict",
    "lameNd_sufficient",
    "perturbation_budget",
    "comparison_constant",
    "kappa_policy",
    "constant_threshold",
    "poisson_threshold",
]

STRICT_DISSIPATIVE = "StrictDissipative"
DISSIPATIVE_BOUNDARY = "DissipativeBoundary"
NOT_DISSIPATIVE = "NotDissipative"
INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class Verdict:
    status: str
    lambda_inf_sq: float
    rhs: float
    margin: float
    kappa: float | None = None
    bmo_value: float | None = None
    bmo_threshold: float | None = None
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        if self.status not in (STRICT_DISSIPATIVE, DISSIPATIVE_BOUNDARY,
                               NOT_DISSIPATIVE, INCONCLUSIVE):
            raise ValueError(f"unknown verdict status {self.status!r}")


@dataclass(frozen=True)
class AlgebraicProbe:
    """A minimizing direction triple (xi, eta, omega), omega normalized."""

    xi: np.ndarray
    eta: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float)
        eta = np.asarray(self.eta, dtype=complex)
        omega = np.asarray(self.omega, dtype=complex)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "omega", omega)
        if abs(np.linalg.norm(omega) - 1.0) > 1e-12:
            raise ValueError("omega must be a unit vector")


@dataclass(frozen=True)
class MarginResult:
    min_value: float
    argmin: AlgebraicProbe


def _real_embedding(Q: np.ndarray):
    """Symmetric matrix of Re(eta^* H eta) in coordinates [Re eta; Im eta]."""
    H = 0.5 * (Q + Q.conj().T)
    Hr, Hi = H.real, H.imag
    return np.block([[Hr, -Hi], [Hi, Hr]])


def _probe_matrix(Q: np.ndarray, omega: np.ndarray, lam_inf: float):
    """Real symmetric matrix whose min eigenvalue is the eta-minimum of the
    algebraic form at fixed (xi, omega)."""
    m = Q.shape[0]
    S = _real_embedding(Q)
    a = np.concatenate([omega.real, omega.imag])
    qoo = float(np.real(omega.conj() @ (Q @ omega)))
    b = np.concatenate([(Q @ omega).real, (Q @ omega).imag])
    c = np.concatenate([(Q.conj().T @ omega).real, (Q.conj().T @ omega).imag])
    d = lam_inf * (b - c)
    M = S - (lam_inf ** 2) * qoo * np.outer(a, a)
    M += 0.5 * (np.outer(d, a) + np.outer(a, d))
    return M


def algebraic_form(system: GeneralSystem, lam_inf: float, xi, eta, omega) -> float:
    """Direct evaluation of the algebraic form at one probe triple."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=complex)
    omega = np.asarray(omega, dtype=complex)
    Q = system.contract_xi(xi)
    t1 = np.real(eta.conj() @ (Q @ eta))
    reo = float(np.real(eta @ omega.conj()))
    t2 = -(lam_inf ** 2) * float(np.real(omega.conj() @ (Q @ omega))) * reo * reo
    t3 = lam_inf * float(np.real(eta.conj() @ (Q @ omega)
                                 - omega.conj() @ (Q @ eta))) * reo
    return float(t1 + t2 + t3)


def algebraic_margin(system: GeneralSystem, lam_inf: float, *,
                     grid: int = 32, polish: bool = True,
                     stabilize_tol: float = 1e-8) -> MarginResult:
    """Minimize the algebraic form over |xi| = |eta| = |omega| = 1.

    Coarse search on a grid x grid x grid lattice of (xi angle, omega polar
    angle, omega relative phase), with eta handled exactly by the eigenvalue
    reduction; then simplex polish from the best lattice point.  Raises
    BudgetExhausted when two successive polish rounds still move the value
    by more than stabilize_tol relative to the coefficient scale.
    """
    if system.dim != 2 or system.components != 2:
        raise ValueError("probe search implemented for N = 2, m = 2 systems")

    scale = float(np.max(np.abs(system.tensor))) or 1.0
    a_grid = np.linspace(0.0, np.pi, grid, endpoint=False)
    e_grid = np.linspace(0.0, np.pi / 2.0, grid)
    f_grid = np.linspace(0.0, 2.0 * np.pi, grid, endpoint=False)
    ee, ff = np.meshgrid(e_grid, f_grid, indexing="ij")
    omegas = np.stack([np.cos(ee).ravel() + 0j,
                       np.sin(ee).ravel() * np.exp(1j * ff.ravel())], axis=1)

    best = (np.inf, None, None)
    for a in a_grid:
        xi = np.array([np.cos(a), np.sin(a)])
        Q = system.contract_xi(xi)
        S = _real_embedding(Q)
        Qw = omegas @ Q.T
        QHw = omegas @ Q.conj()
        a_vecs = np.concatenate([omegas.real, omegas.imag], axis=1)
        b_vecs = np.concatenate([Qw.real, Qw.imag], axis=1)
        c_vecs = np.concatenate([QHw.real, QHw.imag], axis=1)
        qoo = np.real(np.einsum("gi,gi->g", omegas.conj(), Qw))
        d_vecs = lam_inf * (b_vecs - c_vecs)
        M = (S[None, :, :]
             - (lam_inf ** 2) * qoo[:, None, None]
             * np.einsum("gi,gj->gij", a_vecs, a_vecs)
             + 0.5 * (np.einsum("gi,gj->gij", d_vecs, a_vecs)
                      + np.einsum("gi,gj->gij", a_vecs, d_vecs)))
        eigs = np.linalg.eigvalsh(M)[:, 0]
        g = int(np.argmin(eigs))
        if eigs[g] < best[0]:
            best = (float(eigs[g]), float(a), omegas[g].copy())

    min_val, a_star, _ = best

    def objective(params):
        aa, e, f = params
        xi = np.array([np.cos(aa), np.sin(aa)])
        om = np.array([np.cos(e) + 0j, np.sin(e) * np.exp(1j * f)])
        Q = system.contract_xi(xi)
        M = _probe_matrix(Q, om, lam_inf)
        return float(np.linalg.eigvalsh(M)[0])

    e_star = float(np.arccos(np.clip(best[2][0].real, -1.0, 1.0)))
    f_star = float(np.angle(best[2][1])) if abs(best[2][1]) > 0 else 0.0
    params = np.array([a_star, e_star, f_star])
    if polish:
        prev = min_val
        for _ in range(2):
            res = minimize(objective, params, method="Nelder-Mead",
                           options={"xatol": 1e-10, "fatol": 1e-12 * scale,
                                    "maxiter": 2000})
            params = res.x
            improvement = prev - float(res.fun)
            prev = float(res.fun)
        if abs(improvement) > stabilize_tol * scale:
            raise BudgetExhausted(
                f"probe polish still moving by {improvement:.3g} "
                f"after the refinement budget")
        min_val = prev

    aa, e, f = params
    xi = np.array([np.cos(aa), np.sin(aa)])
    om = np.array([np.cos(e) + 0j, np.sin(e) * np.exp(1j * f)])
    om = om / np.linalg.norm(om)
    Q = system.contract_xi(xi)
    M = _probe_matrix(Q, om, lam_inf)
    w, V = np.linalg.eigh(M)
    x = V[:, 0]
    eta = x[:2] + 1j * x[2:]
    eta = eta / np.linalg.norm(eta)
    return MarginResult(min_value=float(min_val),
                        argmin=AlgebraicProbe(xi=xi, eta=eta, omega=om))


# ---------------------------------------------------------------------------
# Verdicts


def kappa_policy(gap: float, lambda_inf_sq: float, mu_min: float,
                 lam_plus_2mu_min: float) -> float:
    """Pick kappa from the gap: delta = gap/2, kappa at 90 percent of
    delta / (2 (1 - Lambda_inf^2)) * min(ess inf mu, ess inf (lambda+2mu))."""
    if gap <= 0.0:
        raise NotStrict("no spectral gap, cannot choose kappa")
    delta = 0.5 * gap
    sup_kappa = delta / (2.0 * (1.0 - lambda_inf_sq)) * min(mu_min,
                                                            lam_plus_2mu_min)
    return 0.9 * sup_kappa


def lame2d_verdict(phi_spec: PhiSpec | None, coeffs: CoefficientField,
                   c0: float = 1.0, kappa_hint: float | None = None,
                   *, boundary_tol: float = 1e-10,
                   limit: LambdaLimit | None = None,
                   vi_holds: bool | None = None) -> Verdict:
    """Decide functional dissipativity for the planar variable Lame operator.

    The necessity direction compares the limit ratio against
    rhs = 1 - ess sup ((lambda+mu)/(lambda+3mu))^2; the sufficiency
    direction additionally needs the BMO seminorm of mu^2/(lambda+3mu)
    below kappa (1 - Lambda_inf^2) / (2 c0).  Weights with a monotone
    squared ratio may certify NotDissipative from the grid tail even when
    the tail has not converged; an unconverged tail never certifies the
    strict side.

    kappa_hint overrides the automatic margin choice; it must sit strictly
    inside (0, delta/(2(1-L^2)) * min(ess inf mu, ess inf(lambda+2mu))).
    """
    if limit is None:
        if phi_spec is None:
            raise ValueError("need a weight spec or a precomputed limit")
        limit = LambdaProfile(phi_spec).lambda_infinity()
    if vi_holds is None:
        vi_holds = not (phi_spec is not None and phi_spec.vi_exempt)

    eb = ess_bounds(coeffs)
    rhs = 1.0 - eb.sup_ratio_sq
    lam2 = limit.lambda_inf_sq
    margin = rhs - lam2
    notes: list[str] = []

    # Lower bound for the limit: grid sup when the ratio is monotone.
    lam2_lower = lam2 if limit.converged else (
        limit.sup_lambda_sq if vi_holds else lam2)
    # Upper bound for sup_t Lambda^2, the quantity sufficiency needs.
    lam2_suff = limit.sup_lambda_sq if limit.converged else None

    tol = boundary_tol * max(1.0, abs(rhs))
    if limit.converged and abs(lam2 - rhs) <= tol:
        notes.append("limit ratio sits on the necessary bound")
        return Verdict(DISSIPATIVE_BOUNDARY, lam2, rhs, margin, notes=tuple(notes))

    if lam2_lower > rhs + tol:
        notes.append(
            "necessary bound violated: Lambda_inf^2 exceeds "
            "1 - ess sup ((lambda+mu)/(lambda+3mu))^2")
        if not limit.converged:
            notes.append("refutation used the certified grid lower bound "
                         f"{lam2_lower:.6g} of an unconverged tail")
        return Verdict(NOT_DISSIPATIVE, lam2, rhs, margin, notes=tuple(notes))

    if lam2_suff is None:
        notes.append("limit ratio tail unconverged; strict side not certified")
        return Verdict(INCONCLUSIVE, lam2, rhs, margin, notes=tuple(notes))

    if lam2_suff >= rhs - tol:
        if lam2_suff > lam2 + tol:
            notes.append(
                f"sup Lambda^2 = {lam2_suff:.6g} blocks the quadratic form "
                "argument although the limit ratio is below the bound")
            return Verdict(INCONCLUSIVE, lam2, rhs, margin, notes=tuple(notes))
        notes.append("limit ratio sits on the necessary bound")
        return Verdict(DISSIPATIVE_BOUNDARY, lam2, rhs, margin, notes=tuple(notes))

    gap = rhs - lam2_suff
    kappa = kappa_policy(gap, lam2_suff, eb.mu_min, eb.lam_plus_2mu_min)
    if kappa_hint is not None:
        cap = kappa / 0.9
        if not 0.0 < kappa_hint < cap:
            raise NotStrict(
                f"kappa_hint {kappa_hint:.6g} outside the admissible "
                f"interval (0, {cap:.6g})")
        kappa = kappa_hint
        notes.append(f"margin kappa taken from caller: {kappa:.6g}")
    lam = coeffs.lam_total
    mu = coeffs.mu_total
    bmo_value = bmo_seminorm(mu * mu / (lam + 3.0 * mu))
    bmo_threshold = kappa * (1.0 - lam2_suff) / (2.0 * c0)
    if bmo_value <= bmo_threshold:
        notes.append("strict bound and oscillation smallness both certified")
        return Verdict(STRICT_DISSIPATIVE, lam2, rhs, margin, kappa=kappa,
                       bmo_value=bmo_value, bmo_threshold=bmo_threshold,
                       notes=tuple(notes))
    notes.append(
        f"coefficient oscillation {bmo_value:.6g} above the certified "
        f"smallness level {bmo_threshold:.6g}")
    return Verdict(INCONCLUSIVE, lam2, rhs, margin, kappa=kappa,
                   bmo_value=bmo_value, bmo_threshold=bmo_threshold,
                   notes=tuple(notes))


def constant_threshold(lam: float, mu: float) -> float:
    """Sufficient bound for constant coefficients in any dimension:
    mu/(lam+2mu) when lam+mu > 0, (lam+2mu)/mu when lam+mu < 0, 1 at balance."""
    if mu <= 0.0 or lam + 2.0 * mu <= 0.0:
        raise EllipticityViolation(
            f"constant pair not elliptic: mu={mu:g}, lambda+2mu={lam + 2 * mu:g}")
    if lam + mu > 0.0:
        return mu / (lam + 2.0 * mu)
    if lam + mu < 0.0:
        return (lam + 2.0 * mu) / mu
    return 1.0


def poisson_threshold(nu: float) -> float:
    """The same bound through the Poisson ratio nu = lambda/(2(lambda+mu)):
    (1-2nu)/(2(1-nu)) for nu < 1/2 and 2(1-nu)/(1-2nu) for nu > 1."""
    if nu < 0.5:
        return (1.0 - 2.0 * nu) / (2.0 * (1.0 - nu))
    if nu > 1.0:
        return 2.0 * (1.0 - nu) / (1.0 - 2.0 * nu)
    raise ValueError("Poisson ratio must satisfy nu < 1/2 or nu > 1 "
                     "for an elliptic constant pair")


def lameNd_sufficient(phi_spec: PhiSpec | None, lam: float, mu: float,
                      *, limit: LambdaLimit | None = None,
                      boundary_tol: float = 1e-10) -> Verdict:
    """Sufficient criterion for the constant coefficient operator in any
    dimension.  Returns StrictDissipative below the threshold and
    Inconclusive otherwise (this direction proves nothing beyond it)."""
    if limit is None:
        if phi_spec is None:
            raise ValueError("need a weight spec or a precomputed limit")
        limit = LambdaProfile(phi_spec).lambda_infinity()
    threshold = constant_threshold(lam, mu)
    lam2 = limit.lambda_inf_sq
    margin = threshold - lam2
    if not limit.converged:
        return Verdict(INCONCLUSIVE, lam2, threshold, margin,
                       notes=("limit ratio tail unconverged",))
    lam2_suff = limit.sup_lambda_sq
    tol = boundary_tol * max(1.0, threshold)
    if lam2_suff < threshold - tol:
        return Verdict(STRICT_DISSIPATIVE, lam2, threshold, margin,
                       notes=("constant coefficient sufficient bound met",))
    return Verdict(INCONCLUSIVE, lam2, threshold, margin,
                   notes=("sufficient bound not met; no conclusion",))


def comparison_constant(limit: LambdaLimit, dim: int = 2) -> float:
    """Coefficient-wise bound C on the perturbation form: the terms
    sigma |grad v|^2, eps (div v)^2, sigma sum d_k v_j d_j v_k and the
    Lambda^2 weighted gradient terms give
    C = max(2 + 2 sup Lambda^2, dim + sup Lambda^2)."""
    lam2 = limit.sup_lambda_sq
    return max(2.0 + 2.0 * lam2, dim + lam2)


def perturbation_budget(phi_spec: PhiSpec | None, lam0: float, mu0: float,
                        kappa0: float, *, limit: LambdaLimit | None = None,
                        dim: int = 2) -> float:
    """Sup norm budget for coefficient perturbations that keeps half the
    strict margin.

    For the constant pair (lam0, mu0) strictly dissipative with margin
    kappa0, any perturbation (eps, sigma) with |||eps| + |sigma|||_inf at
    most kappa0/(2C) leaves the operator strictly dissipative with margin
    kappa0/2.  The budget is linear in kappa0; a zero margin buys nothing.
    """
    if kappa0 < 0.0:
        raise NotStrict(f"kappa0 must be nonnegative, got {kappa0:.6g}")
    if kappa0 == 0.0:
        return 0.0
    if limit is None:
        if phi_spec is None:
            raise ValueError("need a weight spec or a precomputed limit")
        limit = LambdaProfile(phi_spec).lambda_infinity()
    # The base pair must actually be elliptic for the bound to mean anything.
    constant_threshold(lam0, mu0)
    return kappa0 / (2.0 * comparison_constant(limit, dim))
