"""First-integral evaluators against the simulator's analytic truth."""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from debris_linker.errors import NegativeEtaSquared
from debris_linker.radar_sim import (
    analytic_attributable,
    analytic_observation,
    interpolate_track,
    simulate_track,
)
from debris_linker.twobody_integrals import (
    DeltaCorrections,
    UnknownsX,
    angular_momentum,
    energy,
    energy_gradient_x,
    epoch_geometry,
    lenz_difference_projection,
    lenz_projection_gradient_x,
    los_acceleration_residual,
    los_residual_gradient_x,
    radial_momentum,
    speed_squared,
    velocity,
)

from conftest import T_BAR_1, T_BAR_2, T_CULMINATION


@pytest.fixture
def truth_pair(leo_elements, radar_site):
    """Exact attributables and truth observations at the two windows."""
    att1 = analytic_attributable(leo_elements, radar_site, T_BAR_1)
    att2 = analytic_attributable(leo_elements, radar_site, T_BAR_2)
    tr1 = analytic_observation(leo_elements, radar_site, T_BAR_1)
    tr2 = analytic_observation(leo_elements, radar_site, T_BAR_2)
    return att1, att2, tr1, tr2


def test_implied_rate_matches_true_proper_motion(truth_pair):
    att1, _, tr1, _ = truth_pair
    g = epoch_geometry(att1)
    true_rate_sq = (tr1.alpha_dot * math.cos(tr1.direction.delta)) ** 2 \
        + tr1.delta_dot ** 2
    assert abs(g.proper_motion_sq - true_rate_sq) < 1e-6 * true_rate_sq
    # and the transverse speed identity xi^2 + zeta^2 = rho^2 * rate^2
    assert abs(tr1.xi**2 + tr1.zeta**2 - g.rho**2 * g.proper_motion_sq) \
        < 1e-6 * (tr1.xi**2 + tr1.zeta**2)


def test_los_residual_vanishes_at_truth(truth_pair):
    att1, _, tr1, _ = truth_pair
    g = epoch_geometry(att1)
    assert abs(los_acceleration_residual(g, tr1.xi, tr1.zeta)) < 1e-12
    # zero xi/zeta leaves the full radial acceleration imbalance
    expected = g.rho * g.proper_motion_sq
    assert los_acceleration_residual(g, 0.0, 0.0) == pytest.approx(expected)


def test_los_residual_floor_with_fitted_range_model(leo_elements, precision_site):
    # with a fitted rho_ddot the residual at truth equals the fit truncation
    att = interpolate_track(
        simulate_track(leo_elements, precision_site, T_CULMINATION))
    tr = analytic_observation(leo_elements, precision_site, att.t_bar)
    g = epoch_geometry(att)
    assert abs(los_acceleration_residual(g, tr.xi, tr.zeta)) < 1e-5


def test_angular_momentum_matches_cross_product(truth_pair):
    att1, att2, tr1, tr2 = truth_pair
    for att, tr in ((att1, tr1), (att2, tr2)):
        g = epoch_geometry(att)
        c = angular_momentum(g, tr.xi, tr.zeta)
        c_true = np.cross(tr.r, tr.v)
        assert np.max(np.abs(c - c_true)) < 1e-9 * np.linalg.norm(c_true)
        # affine structure
        assert np.allclose(
            angular_momentum(g, tr.xi + 1.0, tr.zeta) - c, g.am_xi,
            rtol=0.0, atol=1e-7)
        assert np.array_equal(angular_momentum(g, 0.0, 0.0), g.am_const)
        # cross-product orthogonality of the coefficient vectors
        assert abs(float(g.am_xi @ g.frame.e_alpha)) < 1e-13 * g.r_norm
        assert abs(float(g.am_zeta @ g.frame.e_delta)) < 1e-13 * g.r_norm


def test_velocity_energy_and_radial_momentum(truth_pair):
    att1, _, tr1, _ = truth_pair
    g = epoch_geometry(att1)
    v = velocity(g, tr1.xi, tr1.zeta)
    assert np.max(np.abs(v - tr1.v)) < 1e-10 * np.linalg.norm(tr1.v)
    v_sq = float(tr1.v @ tr1.v)
    assert abs(speed_squared(g, tr1.xi, tr1.zeta) - v_sq) < 1e-12 * v_sq
    e_true = 0.5 * v_sq - g.mu / np.linalg.norm(tr1.r)
    assert abs(energy(g, tr1.xi, tr1.zeta) - e_true) < 1e-10 * abs(e_true)
    rm_true = float(tr1.r @ tr1.v)
    assert abs(radial_momentum(g, tr1.xi, tr1.zeta) - rm_true) \
        < 1e-10 * max(1.0, abs(rm_true))


def test_first_integrals_conserved_across_epochs(truth_pair):
    att1, att2, tr1, tr2 = truth_pair
    g1 = epoch_geometry(att1)
    g2 = epoch_geometry(att2)
    c1 = angular_momentum(g1, tr1.xi, tr1.zeta)
    c2 = angular_momentum(g2, tr2.xi, tr2.zeta)
    assert np.max(np.abs(c1 - c2)) < 1e-9 * np.linalg.norm(c1)
    e1 = energy(g1, tr1.xi, tr1.zeta)
    e2 = energy(g2, tr2.xi, tr2.zeta)
    assert abs(e1 - e2) < 1e-9 * abs(e1)


def test_lenz_projection_vanishes_on_shared_orbit(truth_pair):
    att1, att2, tr1, tr2 = truth_pair
    g1 = epoch_geometry(att1)
    g2 = epoch_geometry(att2)
    x = UnknownsX(tr1.xi, tr1.zeta, tr2.xi, tr2.zeta)
    # projection direction is orthogonal to r2 by the triple-product identity
    assert abs(float(g2.r @ g2.los_cross_q)) \
        < 1e-12 * g2.r_norm * np.linalg.norm(g2.los_cross_q)
    scale = g1.mu * np.linalg.norm(g2.los_cross_q)
    assert abs(lenz_difference_projection(g1, g2, x)) < 1e-9 * scale


def test_lenz_projection_separates_orbits(leo_elements, radar_site):
    # NB: varying only a would keep the Lenz vector identical (it is
    # e times the perigee direction); shift e and the perigee instead
    att1 = analytic_attributable(leo_elements, radar_site, T_BAR_1)
    other = replace(leo_elements, e=0.1, argp=leo_elements.argp - 0.4,
                    epoch=T_BAR_2)
    att2 = analytic_attributable(other, radar_site, T_BAR_2)
    tr1 = analytic_observation(leo_elements, radar_site, T_BAR_1)
    tr2 = analytic_observation(other, radar_site, T_BAR_2)
    g1 = epoch_geometry(att1)
    g2 = epoch_geometry(att2)
    x = UnknownsX(tr1.xi, tr1.zeta, tr2.xi, tr2.zeta)
    scale = g1.mu * np.linalg.norm(g2.los_cross_q)
    assert abs(lenz_difference_projection(g1, g2, x)) > 1e-6 * scale


def test_energy_affine_on_constraint_sphere(truth_pair):
    # 2E + rho*K == 2(qdot_a xi + qdot_d zeta) + 2*energy_offset for ANY
    # (xi, zeta): the identity behind the linear elimination
    att1, _, tr1, _ = truth_pair
    rng = np.random.default_rng(11)
    for _ in range(200):
        da, dd = rng.uniform(-0.05, 0.05, size=2)
        g = epoch_geometry(att1, da, dd)
        xi, zeta = rng.uniform(-10.0, 10.0, size=2)
        lhs = 2.0 * energy(g, xi, zeta) + g.rho * los_acceleration_residual(g, xi, zeta)
        rhs = 2.0 * (g.qdot_proj_alpha * xi + g.qdot_proj_delta * zeta
                     + g.energy_offset)
        assert abs(lhs - rhs) < 1e-9 * max(abs(lhs), g.mu / g.r_norm)
        # the two energy-offset forms agree
        assert abs(2.0 * g.energy_offset - g.rho**2 * g.proper_motion_sq
                   - g.double_radial_energy) < 1e-9 * abs(g.double_radial_energy)


def test_gradients_match_finite_differences(truth_pair):
    att1, att2, tr1, tr2 = truth_pair
    g1 = epoch_geometry(att1)
    g2 = epoch_geometry(att2)
    x = UnknownsX(tr1.xi, tr1.zeta, tr2.xi, tr2.zeta)
    h = 1e-3  # energy and the Lenz projection are quadratic per component,
    # so the central difference has no truncation term
    grad_e = energy_gradient_x(g1, x.xi1, x.zeta1)
    fd_e = np.array([
        (energy(g1, x.xi1 + h, x.zeta1) - energy(g1, x.xi1 - h, x.zeta1)) / (2 * h),
        (energy(g1, x.xi1, x.zeta1 + h) - energy(g1, x.xi1, x.zeta1 - h)) / (2 * h),
    ])
    assert np.max(np.abs(grad_e - fd_e)) < 1e-6 * np.max(np.abs(grad_e))

    grad_k = los_residual_gradient_x(g1, x.xi1, x.zeta1)
    fd_k = np.array([
        (los_acceleration_residual(g1, x.xi1 + h, x.zeta1)
         - los_acceleration_residual(g1, x.xi1 - h, x.zeta1)) / (2 * h),
        (los_acceleration_residual(g1, x.xi1, x.zeta1 + h)
         - los_acceleration_residual(g1, x.xi1, x.zeta1 - h)) / (2 * h),
    ])
    assert np.max(np.abs(grad_k - fd_k)) < 1e-6 * np.max(np.abs(grad_k))

    grad_l = lenz_projection_gradient_x(g1, g2, x)
    vals = x.as_array()
    fd_l = np.empty(4)
    for i in range(4):
        up = vals.copy()
        dn = vals.copy()
        up[i] += h
        dn[i] -= h
        fd_l[i] = (lenz_difference_projection(g1, g2, UnknownsX(*up))
                   - lenz_difference_projection(g1, g2, UnknownsX(*dn))) / (2 * h)
    assert np.max(np.abs(grad_l - fd_l)) < 1e-6 * np.max(np.abs(grad_l))


def test_negative_implied_rate_raises(truth_pair):
    att1, _, _, _ = truth_pair
    broken = replace(att1, rho_ddot_km_s2=-1.0)
    with pytest.raises(NegativeEtaSquared):
        epoch_geometry(broken)


def test_correction_guard_band():
    DeltaCorrections(0.0999, -0.0999, 0.05, 0.0)
    with pytest.raises(ValueError):
        DeltaCorrections(d_alpha1=0.2)
    with pytest.raises(ValueError):
        DeltaCorrections(d_delta2=float("nan"))
