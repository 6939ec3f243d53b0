"""Solver correctness, weighted energies, regularity ratios, exponent splits."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from funcdiss import NotStrict, lame2d_verdict, perturbation_budget, power_phi
from funcdiss.coefficients import CoefficientField, ramp_field
from funcdiss.errors import EllipticityViolation
from funcdiss.fem import (
    FemProblem,
    assemble_and_solve,
    fiber_problem,
    fiber_reference,
    holder_split_check,
    manufactured_problem,
    manufactured_reference,
    regularity_ratio,
    weighted_energy,
)

INF = float("inf")


def smooth_problem(cells, dim=2, amp=1.0, p=4.0, coeffs=(1.0, 1.0)):
    nodes = cells + 1
    xs = np.linspace(0.0, 1.0, nodes)
    grids = np.meshgrid(*([xs] * dim), indexing="ij")
    s = np.ones_like(grids[0])
    for g in grids:
        s = s * np.sin(np.pi * g)
    coef = np.arange(1.0, 1.0 + dim * dim).reshape(dim, dim) / (dim * dim)
    coef[0, 1] = -coef[0, 1]
    f = np.einsum("ij,...->...ij", coef, amp * s)
    domain = (0.0, 1.0) * dim
    return FemProblem(domain=domain, cells=(cells,) * dim, coeffs=coeffs,
                      rhs=f, p=p)


# ---------------------------------------------------------------------------
# solver


def test_manufactured_convergence_order():
    errs = []
    for cells in (8, 16, 32):
        prob = manufactured_problem(cells, 1.0, 1.0)
        sol = assemble_and_solve(prob)
        ref = manufactured_reference(prob)
        errs.append(float(np.sqrt(np.mean((sol.u - ref) ** 2))))
    for lo, hi in zip(errs[1:], errs[:-1]):
        order = np.log2(hi / lo)
        assert 1.8 <= order <= 2.2


def test_zero_load_gives_zero_solution():
    prob = FemProblem(domain=(0.0, 1.0, 0.0, 1.0), cells=(8, 8),
                      coeffs=(1.0, 1.0), rhs=np.zeros((9, 9, 2, 2)))
    sol = assemble_and_solve(prob)
    assert np.all(sol.u == 0.0)
    assert sol.energy == 0.0
    assert sol.weighted_energies[INF] == 0.0


def test_discrete_energy_identity():
    # Galerkin orthogonality: B(u, u) equals the load work int F_ij d_i u_j
    sol = assemble_and_solve(smooth_problem(16))
    assert sol.rhs_work == pytest.approx(2.0 * sol.energy, rel=1e-9)


def test_fiber_matches_two_point_solution():
    prob = fiber_problem(32)
    sol = assemble_and_solve(prob)
    ref = fiber_reference(prob)
    mid = sol.u[:, prob.cells[1] // 2, 0]
    assert np.max(np.abs(mid - ref)) < 1e-6
    peak = (0.25 - prob.spacings[0] / 4.0) / 3.0  # (lam + 2 mu) = 3
    assert mid.max() == pytest.approx(peak, rel=1e-8)


def test_constant_field_path_matches_constant_pair():
    # the non reduced variable assembly differs by a null Lagrangian only
    grid = CoefficientField(domain=(0.0, 1.0, 0.0, 1.0),
                            lam=np.full((5, 5), 1.0), mu=np.full((5, 5), 1.0))
    a = assemble_and_solve(smooth_problem(16, coeffs=(1.0, 1.0)))
    b = assemble_and_solve(smooth_problem(16, coeffs=grid))
    assert np.max(np.abs(a.u - b.u)) < 1e-12


def test_variable_coefficients_solve():
    grid = ramp_field(1.0, 1.0, 0.25)
    sol = assemble_and_solve(smooth_problem(16, coeffs=grid))
    assert sol.energy > 0.0
    assert sol.rhs_work == pytest.approx(2.0 * sol.energy, rel=1e-9)


def test_solver_is_deterministic():
    a = assemble_and_solve(smooth_problem(16))
    b = assemble_and_solve(smooth_problem(16))
    assert np.array_equal(a.u, b.u)
    assert a.weighted_energies == b.weighted_energies


def test_inadmissible_exponent_rejected():
    with pytest.raises(NotStrict):
        assemble_and_solve(smooth_problem(8, p=16.0))
    with pytest.raises(NotStrict):
        assemble_and_solve(smooth_problem(8, dim=3, p=6.0))


def test_bad_coefficients_rejected():
    with pytest.raises(EllipticityViolation):
        assemble_and_solve(smooth_problem(8, coeffs=(1.0, -0.5)))


def test_problem_validation():
    rhs = np.zeros((9, 9, 2, 2))
    with pytest.raises(ValueError):
        FemProblem(domain=(0, 1, 0, 1), cells=(4, 4), coeffs=(1, 1),
                   rhs=np.zeros((5, 5, 2, 2)))
    with pytest.raises(ValueError):
        FemProblem(domain=(0, 1, 0, 1), cells=(8, 8), coeffs=(1, 1),
                   rhs=np.zeros((9, 9, 3, 3)))
    with pytest.raises(ValueError):
        FemProblem(domain=(0, 1, 1, 0), cells=(8, 8), coeffs=(1, 1), rhs=rhs)
    with pytest.raises(ValueError):
        FemProblem(domain=(0, 1, 0, 1), cells=(8, 8), coeffs=(1, 1),
                   rhs=rhs, p=1.5)
    grid = ramp_field(1.0, 1.0, 0.1)
    with pytest.raises(ValueError):
        FemProblem(domain=(0, 1, 0, 1, 0, 1), cells=(8, 8, 8), coeffs=grid,
                   rhs=np.zeros((9, 9, 9, 3, 3)))


# ---------------------------------------------------------------------------
# weighted energies


def test_weighted_energy_p2_is_plain_dirichlet():
    sol = assemble_and_solve(smooth_problem(12, p=2.0))
    out = weighted_energy(sol, 2.0, [2.0, 4.0, 16.0])
    for k, val in out.items():
        assert val == pytest.approx(out[INF], rel=1e-12)
    assert out[INF] > 0.0


def test_weighted_energy_monotone_and_saturating():
    sol = assemble_and_solve(smooth_problem(12, p=4.0))
    umax = float(np.max(np.linalg.norm(sol.u.reshape(-1, 2), axis=1)))
    ks = [1.5, 2.0, 4.0, 8.0, 2.0 * umax + 1.0]
    out = weighted_energy(sol, 4.0, ks)
    vals = [out[float(k)] for k in ks]
    assert all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))
    # k beyond the solution range reproduces the untruncated weight exactly
    assert vals[-1] == out[INF]


def test_default_weight_levels_attached():
    sol = assemble_and_solve(smooth_problem(12, p=4.0))
    assert INF in sol.weighted_energies
    finite = sorted(k for k in sol.weighted_energies if k != INF)
    assert finite
    vals = [sol.weighted_energies[k] for k in finite]
    assert all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))


# ---------------------------------------------------------------------------
# regularity ratio


def test_ratio_zero_for_zero_load():
    prob = FemProblem(domain=(0.0, 1.0, 0.0, 1.0), cells=(8, 8),
                      coeffs=(1.0, 1.0), rhs=np.zeros((9, 9, 2, 2)), p=4.0)
    assert regularity_ratio(assemble_and_solve(prob)) == 0.0


def test_ratio_scale_invariant_2d():
    base = regularity_ratio(assemble_and_solve(smooth_problem(16, amp=1.0)))
    for c in (0.5, 2.0, 4.0):
        r = regularity_ratio(assemble_and_solve(smooth_problem(16, amp=c)))
        assert r == pytest.approx(base, rel=1e-6)


def test_ratio_scale_invariant_3d():
    ref = assemble_and_solve(smooth_problem(8, dim=3, amp=1.0))
    base = regularity_ratio(ref)
    for c in (0.5, 2.0):
        sol = assemble_and_solve(smooth_problem(8, dim=3, amp=c))
        assert regularity_ratio(sol) == pytest.approx(base, rel=1e-6)
        assert sol.weighted_energies[INF] == pytest.approx(
            (c ** 4.0) * ref.weighted_energies[INF], rel=1e-6)


def test_lhs_scales_like_c_to_the_p():
    sols = {c: assemble_and_solve(smooth_problem(12, amp=c))
            for c in (1.0, 2.0)}
    lhs1 = sols[1.0].weighted_energies[INF]
    lhs2 = sols[2.0].weighted_energies[INF]
    assert lhs2 == pytest.approx((2.0 ** 4.0) * lhs1, rel=1e-9)


def test_ratio_bounded_across_refinements():
    ratios = [regularity_ratio(assemble_and_solve(smooth_problem(c)))
              for c in (8, 16, 32)]
    assert max(ratios) <= 2.0 * min(ratios)
    ratios3 = [regularity_ratio(
        assemble_and_solve(smooth_problem(c, dim=3)))
        for c in (8, 16)]
    assert max(ratios3) <= 2.0 * min(ratios3)


def test_perturbation_within_budget_is_stable():
    # engineering sanity: small admissible coefficient noise moves the
    # weighted energy by far less than the factor 2 envelope
    spec = power_phi(4.0)
    grid = CoefficientField(domain=(0.0, 1.0, 0.0, 1.0),
                            lam=np.full((3, 3), 1.0), mu=np.full((3, 3), 1.0))
    kappa = lame2d_verdict(spec, grid).kappa
    budget = perturbation_budget(spec, 1.0, 1.0, kappa)
    assert budget > 0.0
    pert = CoefficientField(
        domain=(0.0, 1.0, 0.0, 1.0), lam=np.full((5, 5), 1.0),
        mu=np.full((5, 5), 1.0), eps=np.full((5, 5), 0.9 * budget),
        sigma=np.full((5, 5), -0.9 * budget))
    base = assemble_and_solve(smooth_problem(16)).weighted_energies[INF]
    moved = assemble_and_solve(
        smooth_problem(16, coeffs=pert)).weighted_energies[INF]
    assert 0.5 <= moved / base <= 2.0


# ---------------------------------------------------------------------------
# the Holder exponent split


def test_holder_split_report():
    sol = assemble_and_solve(smooth_problem(8, dim=3))
    rep = holder_split_check(sol, k=3.0)
    assert rep.alpha == Fraction(6)
    assert rep.alpha_prime == Fraction(6, 5)
    assert rep.conjugate_ok
    assert rep.chain_worst_slack >= -1e-12
    assert rep.split_slack >= -1e-12 * max(rep.split_rhs, 1.0)


def test_holder_split_p2_endpoint():
    sol = assemble_and_solve(smooth_problem(8, dim=3, p=2.0))
    rep = holder_split_check(sol, k=3.0)
    assert rep.alpha is None
    assert rep.alpha_prime == 1
    assert rep.conjugate_ok
    # phi_k == 1 == |v_k|^0: the truncation chain collapses to equality
    assert rep.chain_worst_slack == 0.0
    assert rep.split_slack == pytest.approx(0.0, abs=1e-12)


def test_holder_split_planar_rejected():
    sol = assemble_and_solve(smooth_problem(8, dim=2))
    with pytest.raises(ValueError):
        holder_split_check(sol)


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 6),
       st.fractions(min_value=Fraction(21, 10), max_value=50))
def test_exponent_conjugacy_symbolic(n, p):
    alpha = (n * p) / ((n - 2) * (p - 2))
    alpha_prime = (n * p) / (2 * (n + p) - 4)
    assert 1 / alpha + 1 / alpha_prime == 1
