"""Form evaluation: frame identities, quadrature routes, breakdown, probes."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from funcdiss import (
    QuadratureFailure,
    algebraic_margin,
    exp_square_phi,
    lame_system,
    power_phi,
    truncated_power,
)
from funcdiss.coefficients import constant_field, ramp_field
from funcdiss.forms import (
    bump_field,
    commutator_ibp,
    dissipativity_form,
    elasticity_breakdown,
    gradient_energy,
    gradient_field,
    laplacian_shift,
    oscillatory_counterexample,
    oscillatory_field,
    rotation_field,
    standard_ensemble,
    strict_margin,
    weighted_map_gradients,
    xy_decompose,
)


def five_real_fields():
    return [
        bump_field((0.0, 0.0), 0.1, 0.5, (0.3, -0.2),
                   [[1.0, 0.4], [-0.7, 0.2]], label="generic"),
        bump_field((0.1, -0.05), 0.15, 0.45, (1.0, 0.5),
                   [[0.2, -1.1], [0.8, 0.3]], label="tilted"),
        rotation_field((0.0, 0.0), 0.1, 0.5, 1.3),
        gradient_field((-0.1, 0.1), 0.12, 0.4, -0.8),
        oscillatory_field((0.0, 0.0), (1.0, 0.4), 4.0, (0.6, -0.8),
                          chi_r0=-0.1, chi_r1=0.35),
    ]


def sample_points(field, n, seed):
    x0, x1, y0, y1 = field.support
    rng = np.random.default_rng(seed)
    pts = np.column_stack([rng.uniform(x0, x1, n), rng.uniform(y0, y1, n)])
    vals = field.value(pts)
    nv = np.linalg.norm(np.atleast_2d(vals), axis=1)
    return pts[nv > 1e-8 * field.scale]


# ---------------------------------------------------------------------------
# frame identities


def frame_residuals(field, pts):
    x1, x2, y1, y2 = xy_decompose(field, pts)
    jac = field.jacobian(pts).real
    grad2 = np.einsum("nih,nih->n", jac, jac)
    div = jac[:, 0, 0] + jac[:, 1, 1]
    swap = np.einsum("njk,nkj->n", jac, jac)
    scale = np.maximum(grad2, 1.0)
    r_grad = np.abs(x1 ** 2 + x2 ** 2 + y1 ** 2 + y2 ** 2 - grad2) / scale
    r_div = np.abs((x1 + y1) ** 2 - div ** 2) / scale
    r_swap = np.abs((x1 + y1) ** 2 - 2.0 * (x1 * y1 + x2 * y2) - swap) / scale
    return max(r_grad.max(), r_div.max(), r_swap.max())


def test_frame_identities_five_fields():
    for i, field in enumerate(five_real_fields()):
        pts = sample_points(field, 10_000, seed=100 + i)
        assert len(pts) > 5000
        assert frame_residuals(field, pts) < 1e-10


def test_frame_example_identity_map():
    ident = bump_field((0.0, 0.0), 2.0, 3.0, (0.0, 0.0), np.eye(2))
    x1, x2, y1, y2 = xy_decompose(ident, np.array([[1.0, 1.0]]))
    np.testing.assert_allclose([x1[0], x2[0], y1[0], y2[0]],
                               [1.0, 0.0, 1.0, 0.0], atol=1e-12)


def test_frame_example_rotation():
    rot = rotation_field((0.0, 0.0), 2.0, 3.0, 1.0)
    x1, x2, y1, y2 = xy_decompose(rot, np.array([[1.0, 0.0]]))
    np.testing.assert_allclose([x1[0], x2[0], y1[0], y2[0]],
                               [0.0, 1.0, 0.0, 1.0], atol=1e-12)


def test_frame_zero_convention():
    field = five_real_fields()[0]
    far = np.array([[5.0, 5.0], [0.49, 0.49]])  # outside the bump support
    for arr in xy_decompose(field, far):
        np.testing.assert_array_equal(arr, 0.0)


def test_frame_rejects_complex_fields():
    wave = oscillatory_field((0.0, 0.0), (1.0, 0.0), 4.0, (1.0, 1.0),
                             chi_r0=-0.1, chi_r1=0.35, complex_phase=True)
    with pytest.raises(ValueError):
        xy_decompose(wave, np.array([[0.05, 0.0]]))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_frame_identities_random_bumps(seed):
    rng = np.random.default_rng(seed)
    field = bump_field(rng.uniform(-0.2, 0.2, 2), 0.1,
                       rng.uniform(0.3, 0.6), rng.normal(size=2),
                       rng.normal(size=(2, 2)))
    pts = sample_points(field, 400, seed=seed + 1)
    if len(pts):
        assert frame_residuals(field, pts) < 1e-10


# ---------------------------------------------------------------------------
# the dissipativity form


def test_two_quadrature_routes_agree():
    spec = power_phi(4.0)
    sys2 = lame_system(1.2, 0.8)
    grid = constant_field(1.2, 0.8)
    for field in five_real_fields():
        a = dissipativity_form(sys2, spec, field)
        b = dissipativity_form(grid, spec, field)
        c = dissipativity_form((1.2, 0.8), spec, field)
        assert abs(a - b) <= 1e-8 * max(abs(a), 1.0)
        assert abs(a - c) <= 1e-8 * max(abs(a), 1.0)


def test_routes_agree_on_complex_wave():
    spec = power_phi(3.0)
    wave = oscillatory_field((0.0, 0.0), (0.3, 1.0), 8.0,
                             (0.6 + 0.2j, -0.5 + 0.4j),
                             chi_r0=-0.12, chi_r1=0.4, complex_phase=True)
    a = dissipativity_form(lame_system(2.0, 0.7), spec, wave)
    b = dissipativity_form((2.0, 0.7), spec, wave)
    assert abs(a - b) <= 1e-8 * max(abs(a), 1.0)


def test_form_scales_quadratically_for_power_weights():
    # Lambda is constant for t^{p-2}, so v -> c v multiplies the form by c^2
    spec = power_phi(6.0)
    base = bump_field((0.0, 0.0), 0.1, 0.5, (0.3, -0.2),
                      [[1.0, 0.4], [-0.7, 0.2]])
    scaled = bump_field((0.0, 0.0), 0.1, 0.5, (0.9, -0.6),
                        [[3.0, 1.2], [-2.1, 0.6]])
    f0 = dissipativity_form((1.0, 1.0), spec, base)
    f3 = dissipativity_form((1.0, 1.0), spec, scaled)
    assert f3 == pytest.approx(9.0 * f0, rel=1e-9)


def test_form_positive_at_p2_for_elliptic_pair():
    # p = 2 strips the weight entirely; the classical Lame energy remains
    spec = power_phi(2.0)
    for field in five_real_fields():
        form = dissipativity_form((1.0, 1.0), spec, field)
        grad2 = gradient_energy(field)
        assert form >= 1.0 * grad2 - 1e-9 * grad2  # min(mu, lam+2mu) = 1


def test_strict_margin_report():
    spec = power_phi(2.0)
    ensemble = five_real_fields()
    kappa = 0.5
    report = strict_margin((1.0, 1.0), spec, ensemble, kappa)
    assert report.kappa == kappa
    assert len(report.rows) == len(ensemble)
    for row in report.rows:
        assert row.residual == pytest.approx(
            row.form_value - kappa * row.gradient_sq, rel=1e-12)
        assert row.residual >= 0.0
    assert report.min_residual == min(r.residual for r in report.rows)
    assert report.worst_label in {r.label for r in report.rows}


def test_unknown_target_rejected():
    with pytest.raises(TypeError):
        dissipativity_form("lame", power_phi(3.0), five_real_fields()[0])


def test_resolution_cap_raises():
    wave = oscillatory_field((0.0, 0.0), (1.0, 0.0), 2.0 ** 20, (1.0, 0.0),
                             chi_r0=-0.1, chi_r1=0.3)
    with pytest.raises(QuadratureFailure):
        dissipativity_form((1.0, 1.0), power_phi(4.0), wave)


# ---------------------------------------------------------------------------
# breakdown of the strict Lame form


def test_breakdown_total_matches_parts():
    spec = power_phi(4.0)
    for field in five_real_fields():
        bd = elasticity_breakdown((1.2, 0.8), spec, field, kappa=0.1)
        assert bd.total == pytest.approx(bd.parts_sum, rel=1e-10, abs=1e-12)


def test_breakdown_rotation_kills_first_block():
    # X1 = Y1 = 0 for a divergence free rotation core
    spec = power_phi(4.0)
    bd = elasticity_breakdown((1.0, 1.0), spec,
                              rotation_field((0.0, 0.0), 0.1, 0.5, 1.0))
    assert abs(bd.x1_sq) < 1e-20
    assert abs(bd.y1_sq) < 1e-20
    assert abs(bd.cross_x1y1) < 1e-20
    assert bd.x2_sq > 0.0 and bd.y2_sq > 0.0


def test_breakdown_discriminants_flip_with_power():
    field = five_real_fields()[0]
    ok = elasticity_breakdown((1.0, 1.0), power_phi(4.0), field)
    assert ok.disgamma_ok and ok.disgamma2_ok
    # (1 - 2/p)^2 crosses 1 - (gamma/mu)^2 ... = 3/4 near p = 14.93
    bad = elasticity_breakdown((1.0, 1.0), power_phi(16.0), field)
    assert not bad.disgamma_ok
    assert not bad.disgamma2_ok


def test_breakdown_needs_real_field():
    wave = oscillatory_field((0.0, 0.0), (1.0, 0.0), 4.0, (1.0, 1.0),
                             chi_r0=-0.1, chi_r1=0.35, complex_phase=True)
    with pytest.raises(ValueError):
        elasticity_breakdown((1.0, 1.0), power_phi(4.0), wave)


def test_commutator_vanishes_for_constant_coefficients():
    spec = power_phi(4.0)
    field = five_real_fields()[0]
    bd = elasticity_breakdown((1.2, 0.8), spec, field, min_cells=24)
    # int (sum d_k v_j d_j v_k - div^2) is a null Lagrangian on compact support
    assert abs(bd.commutator_term) < 5e-6
    assert commutator_ibp(field, lambda pts: np.zeros_like(pts)) == 0.0


def test_commutator_matches_integration_by_parts_on_ramp():
    lam0, mu0, slope = 1.0, 1.0, 0.3
    grid = ramp_field(lam0, mu0, slope, shape=(65, 65),
                      domain=(-1.0, 1.0, -1.0, 1.0))
    field = five_real_fields()[0]
    bd = elasticity_breakdown(grid, power_phi(4.0), field, min_cells=24)

    def grad_f(pts):
        mu = mu0 + slope * (pts[:, 0] + 1.0)
        g = np.zeros_like(pts)
        g[:, 0] = 2.0 * slope * mu * (2.0 * lam0 + 3.0 * mu) \
            / (lam0 + 3.0 * mu) ** 2
        return g

    ibp = commutator_ibp(field, grad_f, min_cells=24)
    assert bd.commutator_term == pytest.approx(ibp, abs=5e-6)


# ---------------------------------------------------------------------------
# shifting by a Laplacian


def test_laplacian_shift_equivalence_per_field():
    # strict margin kappa transfers to plain positivity of A - kappa Delta
    # and back with kappa (1 - sup Lambda^2)
    spec = power_phi(4.0)
    sup_sq = 0.25
    sys2 = lame_system(1.0, 1.0)
    kappa = 0.3
    shifted = laplacian_shift(sys2, kappa)
    for field in five_real_fields():
        form = dissipativity_form(sys2, spec, field)
        grad2 = gradient_energy(field)
        residual = form - kappa * grad2
        shifted_form = dissipativity_form(shifted, spec, field)
        assert shifted_form >= residual - 1e-10 * max(abs(residual), 1.0)
        back = form - kappa * (1.0 - sup_sq) * grad2
        assert back >= shifted_form - 1e-10 * max(abs(shifted_form), 1.0)


# ---------------------------------------------------------------------------
# the substitution v = sqrt(phi(|u|)) u


@pytest.mark.parametrize("spec", [power_phi(3.0), exp_square_phi(),
                                  truncated_power(4.0, 2.0)],
                         ids=["power", "exp_square", "truncated"])
def test_weighted_gradient_lower_bound(spec):
    field = five_real_fields()[0]
    pts = sample_points(field, 4000, seed=11)
    grad_v_sq, weighted_u, _ = weighted_map_gradients(
        spec, field.value(pts), field.jacobian(pts))
    assert np.all(grad_v_sq >= 0.25 * weighted_u
                  - 1e-12 * np.maximum(weighted_u, 1.0))


@pytest.mark.parametrize("spec", [power_phi(3.0), exp_square_phi(),
                                  truncated_power(4.0, 2.0)],
                         ids=["power", "exp_square", "truncated"])
def test_weighted_gradient_growth_cap(spec):
    # |t phi'/phi| <= K bounds the distortion by K^2/4 + K + 1
    field = five_real_fields()[0]
    pts = sample_points(field, 4000, seed=12)
    grad_v_sq, weighted_u, nu = weighted_map_gradients(
        spec, field.value(pts), field.jacobian(pts))
    pos = nu > 0.0
    k = np.max(np.abs(nu[pos] * spec.dphi(nu[pos]) / spec.phi(nu[pos])))
    cap = (0.25 * k * k + k + 1.0) * weighted_u
    assert np.all(grad_v_sq <= cap + 1e-9 * np.maximum(cap, 1.0))


# ---------------------------------------------------------------------------
# probe ensemble and counterexample


def test_ensemble_is_deterministic_and_complete():
    a = standard_ensemble(seed=2026)
    b = standard_ensemble(seed=2026)
    assert len(a) == 60
    assert [f.label for f in a] == [f.label for f in b]
    pts = np.array([[0.05, -0.02], [0.2, 0.1]])
    for fa, fb in zip(a, b):
        np.testing.assert_array_equal(fa.value(pts), fb.value(pts))
    families = {f.family for f in a}
    assert families == {"bump", "rotation", "gradient", "oscillatory"}


def test_counterexample_fires_beyond_threshold():
    report = oscillatory_counterexample(1.0, 1.0, power_phi(32.0))
    assert report.algebraic_min < 0.0
    assert report.flip_rho is not None
    assert report.flip_rho <= 2.0 ** 7
    assert report.rows[-1][1] < 0.0


def test_counterexample_quiet_below_threshold():
    report = oscillatory_counterexample(1.0, 1.0, power_phi(4.0), octaves=4)
    assert report.algebraic_min > 0.0
    assert report.flip_rho is None
    assert all(row[1] > 0.0 for row in report.rows)


def test_probe_search_matches_complex_margin():
    # the real angular search and the full complexified search see the same
    # minimum for the self adjoint Lame tensor
    spec = power_phi(32.0)
    report = oscillatory_counterexample(1.0, 1.0, spec, octaves=0)
    lam_sq = (30.0 / 32.0) ** 2
    full = algebraic_margin(lame_system(1.0, 1.0), -np.sqrt(lam_sq))
    assert report.algebraic_min == pytest.approx(full.min_value, rel=1e-8,
                                                 abs=1e-10)
