"""Preliminary orbits from two radar tracks with angle corrections.

The conserved-quantity matching conditions at the two track epochs are
split in two groups. Angular momentum equality plus one energy relation
are linear (or quadratic, if the energies are matched directly) in the
transverse velocity components X = (xi1, zeta1, xi2, zeta2), so X is
eliminated in closed form as a function of the four mean-angle
corrections Delta. The remaining four conditions

    G = (accel balance 1, accel balance 2, Lenz projection, transfer time)

are driven to zero by a damped Newton iteration on Delta with an
analytic Jacobian, assembled by the chain rule through the elimination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import MU_EARTH_KM3_S2
from .core import CartesianState, KeplerianElements, angle_difference, \
    cartesian_to_elements
from .errors import (
    DegenerateQuadratic,
    DegenerateTimes,
    HyperbolicOrbit,
    JacobianSingular,
    LinkageError,
    NoConvergence,
    NoRealRoot,
    SingularGeometry,
)
from .lambert import (
    LambertBranch,
    LambertGeometry,
    arc_eccentric_anomalies,
    branch_signs,
    classify_branch,
    count_revolutions,
    eccentricity_vector,
    gammas_from_energy,
    lambert_residual,
)
from .radar_sim import Attributable
from .twobody_integrals import (
    DeltaCorrections,
    EpochGeometry,
    UnknownsX,
    angular_momentum,
    energy,
    energy_gradient_x,
    epoch_geometry,
    lenz_difference_projection,
    lenz_projection_gradient_x,
    los_acceleration_residual,
    los_residual_gradient_x,
    velocity,
)

# a determinant is "zero" when smaller than this fraction of the largest
# entry raised to the matrix order
DET_RATIO_FLOOR = 1e-12

# linkage of near-simultaneous tracks is ill-posed; a same-pass pair
# should go to the three-position velocity estimate instead
MIN_EPOCH_GAP_S = 60.0

METHODS = ("linear", "quadratic")


def det3(m: np.ndarray) -> float:
    """Cofactor expansion of a 3x3 determinant."""
    return float(
        m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
        - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
        + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0]))


def det4(m: np.ndarray) -> float:
    """4x4 determinant expanded along the first row.

    The 2x2 minors of the last two rows are shared between the four
    cofactors, which keeps the expansion cheap enough for the many
    determinant-derivative evaluations in the Jacobian.
    """
    p01 = m[2, 0] * m[3, 1] - m[2, 1] * m[3, 0]
    p02 = m[2, 0] * m[3, 2] - m[2, 2] * m[3, 0]
    p03 = m[2, 0] * m[3, 3] - m[2, 3] * m[3, 0]
    p12 = m[2, 1] * m[3, 2] - m[2, 2] * m[3, 1]
    p13 = m[2, 1] * m[3, 3] - m[2, 3] * m[3, 1]
    p23 = m[2, 2] * m[3, 3] - m[2, 3] * m[3, 2]
    c0 = m[1, 1] * p23 - m[1, 2] * p13 + m[1, 3] * p12
    c1 = m[1, 0] * p23 - m[1, 2] * p03 + m[1, 3] * p02
    c2 = m[1, 0] * p13 - m[1, 1] * p03 + m[1, 3] * p01
    c3 = m[1, 0] * p12 - m[1, 1] * p02 + m[1, 2] * p01
    return float(m[0, 0] * c0 - m[0, 1] * c1 + m[0, 2] * c2 - m[0, 3] * c3)


def _with_column(m: np.ndarray, col: int, values: np.ndarray) -> np.ndarray:
    out = m.copy()
    out[:, col] = values
    return out


def _det_scale(m: np.ndarray) -> float:
    """Reference magnitude for a determinant-singularity test.

    The product of row maxima tracks how large the determinant could be,
    so the ratio test stays meaningful when rows carry different units
    (the global-max power does not: one big row would swamp it).
    """
    row_caps = np.maximum(np.max(np.abs(m), axis=1), 1e-300)
    return float(np.prod(row_caps))


@dataclass(frozen=True)
class LinearSystem:
    """matrix @ X = rhs: angular momentum match plus the energy row.

    Rows 1-3 equate the angular momentum vectors; row 4 is the energy
    difference with each epoch's acceleration-balance residual traded in,
    which removes the quadratic speed terms and leaves an affine row.
    """

    matrix: np.ndarray
    rhs: np.ndarray


@dataclass(frozen=True)
class QuadraticSystem:
    """Energy-matched elimination: 3 angular momentum rows plus a quadratic.

    matrix @ (xi1, zeta1, xi2) = zeta2 * w_lin + w_const, with zeta2 a
    root of f2*zeta2^2 + f1*zeta2 + f0 = 0, which is twice the energy
    difference after the Cramer substitution.
    """

    matrix: np.ndarray
    w_lin: np.ndarray
    w_const: np.ndarray
    det: float
    minors_lin: np.ndarray    # det of matrix with column k <- w_lin
    minors_const: np.ndarray  # det of matrix with column k <- w_const
    f2: float
    f1: float
    f0: float


def linear_system(g1: EpochGeometry, g2: EpochGeometry) -> LinearSystem:
    m = np.empty((4, 4))
    m[:3, 0] = g1.am_xi
    m[:3, 1] = g1.am_zeta
    m[:3, 2] = -g2.am_xi
    m[:3, 3] = -g2.am_zeta
    m[3] = (g1.qdot_proj_alpha, g1.qdot_proj_delta,
            -g2.qdot_proj_alpha, -g2.qdot_proj_delta)
    v = np.empty(4)
    v[:3] = g2.am_const - g1.am_const
    v[3] = g2.energy_offset - g1.energy_offset
    return LinearSystem(m, v)


def solve_transverse_linear(system: LinearSystem) -> UnknownsX:
    """Cramer solution of the 4x4 elimination."""
    det_m = det4(system.matrix)
    if abs(det_m) <= DET_RATIO_FLOOR * _det_scale(system.matrix):
        raise SingularGeometry(
            f"elimination determinant {det_m:.3e} below {DET_RATIO_FLOOR:.0e}"
            " of the entry scale: track geometries are degenerate")
    parts = [det4(_with_column(system.matrix, k, system.rhs)) / det_m
             for k in range(4)]
    return UnknownsX(*parts)


def quadratic_system(g1: EpochGeometry, g2: EpochGeometry) -> QuadraticSystem:
    n = np.column_stack((g1.am_xi, g1.am_zeta, -g2.am_xi))
    det_n = det3(n)
    if abs(det_n) <= DET_RATIO_FLOOR * _det_scale(n):
        raise SingularGeometry(
            f"elimination determinant {det_n:.3e} below {DET_RATIO_FLOOR:.0e}"
            " of the entry scale: track geometries are degenerate")
    w_lin = g2.am_zeta.copy()
    w_const = g2.am_const - g1.am_const
    ml = np.array([det3(_with_column(n, k, w_lin)) for k in range(3)])
    mc = np.array([det3(_with_column(n, k, w_const)) for k in range(3)])
    s11 = ml[0]**2 + ml[1]**2 - ml[2]**2
    s10 = ml[0] * mc[0] + ml[1] * mc[1] - ml[2] * mc[2]
    s00 = mc[0]**2 + mc[1]**2 - mc[2]**2
    t1 = (g1.qdot_proj_alpha * ml[0] + g1.qdot_proj_delta * ml[1]
          - g2.qdot_proj_alpha * ml[2] - g2.qdot_proj_delta * det_n)
    t0 = (g1.qdot_proj_alpha * mc[0] + g1.qdot_proj_delta * mc[1]
          - g2.qdot_proj_alpha * mc[2])
    f2 = s11 / det_n**2 - 1.0
    f1 = 2.0 * s10 / det_n**2 + 2.0 * t1 / det_n
    f0 = (s00 / det_n**2 + 2.0 * t0 / det_n
          + g1.double_radial_energy - g2.double_radial_energy)
    return QuadraticSystem(n, w_lin, w_const, det_n, ml, mc, f2, f1, f0)


def _x_from_zeta2(system: QuadraticSystem, zeta2: float) -> UnknownsX:
    y = (zeta2 * system.minors_lin + system.minors_const) / system.det
    return UnknownsX(y[0], y[1], y[2], zeta2)


def solve_transverse_quadratic(system: QuadraticSystem) -> list[UnknownsX]:
    """All real-root candidates, ordered by |zeta2| ascending."""
    f2, f1, f0 = system.f2, system.f1, system.f0
    if abs(f2) < 1e-14:
        if abs(f1) < 1e-14:
            raise DegenerateQuadratic(
                "energy-difference polynomial is constant: no zeta2 leverage")
        roots = [-f0 / f1]
    else:
        disc = f1 * f1 - 4.0 * f2 * f0
        if disc < 0.0:
            raise NoRealRoot(
                f"energy-difference discriminant {disc:.3e} < 0")
        sq = math.sqrt(disc)
        # the larger-magnitude root first, then the cofactor form, so
        # neither suffers cancellation
        lead = -0.5 * (f1 + math.copysign(sq, f1))
        roots = [lead / f2]
        if lead != 0.0:
            other = f0 / lead
            if other != roots[0]:
                roots.append(other)
    roots.sort(key=abs)
    return [_x_from_zeta2(system, z) for z in roots]


# --- derivatives of the epoch-level coefficients ---

@dataclass(frozen=True)
class _EpochVariations:
    """Rates of one epoch's coefficients per unit angle correction.

    Each tuple holds the (d/d alpha, d/d delta) pair. The frame variation
    vectors come first; everything else is a coefficient of the linear or
    quadratic elimination differentiated along them.
    """

    de_rho: tuple
    de_alpha: tuple
    de_delta: tuple
    d_am_xi: tuple
    d_am_zeta: tuple
    d_am_const: tuple
    d_qdot_alpha: tuple
    d_qdot_delta: tuple
    d_energy_offset: tuple
    d_double_radial: tuple
    d_accel_balance: tuple


def _epoch_variations(g: EpochGeometry) -> _EpochVariations:
    f = g.frame
    q = g.observer.q
    qd = g.observer.q_dot
    cd, sd = math.cos(g.delta), math.sin(g.delta)
    zero = np.zeros(3)
    de_rho = (cd * f.e_alpha, f.e_delta)
    de_alpha = (f.e_perp, zero)
    de_delta = (-sd * f.e_alpha, -f.e_rho)
    d_am_xi = (np.cross(g.r, f.e_perp), -g.rho * f.e_rho)
    d_am_zeta = (g.rho * cd * f.e_rho - sd * g.am_xi, np.cross(f.e_rho, q))
    d_am_const = (
        cd * (g.rho * np.cross(f.e_alpha, qd)
              + g.rho_dot * np.cross(q, f.e_alpha)),
        g.rho * np.cross(f.e_delta, qd) + g.rho_dot * np.cross(q, f.e_delta),
    )
    d_qdot_alpha = (float(qd @ f.e_perp), 0.0)
    d_qdot_delta = (-sd * float(qd @ f.e_alpha), -float(qd @ f.e_rho))
    # sensitivity of the line-of-sight acceleration balance to the
    # direction; the q-form is equivalent to the r-form because the
    # variation vectors are orthogonal to e_rho
    gravity = g.mu * q / g.r_norm**3
    balance_dir = (g.observer.q_ddot
                   + gravity * (1.0 - 3.0 * g.rho
                                * float(g.r @ f.e_rho) / g.r_norm**2))
    d_accel = (float(balance_dir @ de_rho[0]), float(balance_dir @ de_rho[1]))
    offset_dir = 0.5 * g.rho * balance_dir + g.rho_dot * qd + g.rho * gravity
    d_energy_offset = (float(offset_dir @ de_rho[0]),
                       float(offset_dir @ de_rho[1]))
    radial_dir = 2.0 * (g.rho_dot * qd + g.rho * gravity)
    d_double_radial = (float(radial_dir @ de_rho[0]),
                       float(radial_dir @ de_rho[1]))
    return _EpochVariations(de_rho, de_alpha, de_delta, d_am_xi, d_am_zeta,
                            d_am_const, d_qdot_alpha, d_qdot_delta,
                            d_energy_offset, d_double_radial, d_accel)


def _linear_x_derivatives(system: LinearSystem, ev1: _EpochVariations,
                          ev2: _EpochVariations) -> np.ndarray:
    """dX/dDelta for the Cramer solution, via determinant derivatives.

    A determinant's derivative is the sum over columns of the determinant
    with that one column replaced by its derivative; only the columns of
    the varied epoch (plus the right-hand side) contribute.
    """
    m, v = system.matrix, system.rhs
    det_m = det4(m)
    det_sub = [det4(_with_column(m, k, v)) for k in range(4)]
    dcols: list[dict[int, np.ndarray]] = [{} for _ in range(4)]
    dv = [np.zeros(4) for _ in range(4)]
    for which, (corr_a, corr_d), sign, ev in (
            ((0, 1), (0, 1), 1.0, ev1), ((2, 3), (2, 3), -1.0, ev2)):
        for corr, var in zip((corr_a, corr_d), (0, 1)):
            dcols[corr][which[0]] = sign * np.append(
                ev.d_am_xi[var], ev.d_qdot_alpha[var])
            dcols[corr][which[1]] = sign * np.append(
                ev.d_am_zeta[var], ev.d_qdot_delta[var])
            dv[corr] = -sign * np.append(
                ev.d_am_const[var], ev.d_energy_offset[var])
    dx = np.empty((4, 4))
    for corr in range(4):
        d_det_m = sum(det4(_with_column(m, j, dc))
                      for j, dc in dcols[corr].items())
        for k in range(4):
            base = _with_column(m, k, v)
            d_det_k = det4(_with_column(base, k, dv[corr]))
            for j, dc in dcols[corr].items():
                if j != k:
                    d_det_k += det4(_with_column(base, j, dc))
            dx[k, corr] = (d_det_k * det_m - det_sub[k] * d_det_m) / det_m**2
    return dx


def _quadratic_x_derivatives(system: QuadraticSystem, g1: EpochGeometry,
                             g2: EpochGeometry, ev1: _EpochVariations,
                             ev2: _EpochVariations,
                             x: UnknownsX) -> np.ndarray:
    """dX/dDelta along one root of the energy-difference quadratic.

    zeta2 follows the root by the implicit function theorem; the other
    three components ride on the Cramer substitution.
    """
    n, det_n = system.matrix, system.det
    ml, mc = system.minors_lin, system.minors_const
    z = x.zeta2
    slope = 2.0 * system.f2 * z + system.f1
    guard = max(abs(system.f2 * z), abs(system.f1), 1e-300)
    if abs(slope) <= 1e-12 * guard:
        raise JacobianSingular(
            "double root of the energy-difference quadratic: the root "
            "position is not differentiable")
    s11 = ml[0]**2 + ml[1]**2 - ml[2]**2
    s10 = ml[0] * mc[0] + ml[1] * mc[1] - ml[2] * mc[2]
    s00 = mc[0]**2 + mc[1]**2 - mc[2]**2
    t1 = (g1.qdot_proj_alpha * ml[0] + g1.qdot_proj_delta * ml[1]
          - g2.qdot_proj_alpha * ml[2] - g2.qdot_proj_delta * det_n)
    t0 = (g1.qdot_proj_alpha * mc[0] + g1.qdot_proj_delta * mc[1]
          - g2.qdot_proj_alpha * mc[2])
    base_lin = [_with_column(n, k, system.w_lin) for k in range(3)]
    base_const = [_with_column(n, k, system.w_const) for k in range(3)]
    dx = np.empty((4, 4))
    for corr in range(4):
        var = corr % 2
        if corr < 2:
            ev = ev1
            dn_cols = {0: ev.d_am_xi[var], 1: ev.d_am_zeta[var]}
            dw_lin = None
            dw_const = -ev.d_am_const[var]
            dq1a, dq1d = ev.d_qdot_alpha[var], ev.d_qdot_delta[var]
            dq2a = dq2d = 0.0
            d_radial = ev.d_double_radial[var]
        else:
            ev = ev2
            dn_cols = {2: -ev.d_am_xi[var]}
            dw_lin = ev.d_am_zeta[var]
            dw_const = ev.d_am_const[var]
            dq1a = dq1d = 0.0
            dq2a, dq2d = ev.d_qdot_alpha[var], ev.d_qdot_delta[var]
            d_radial = -ev.d_double_radial[var]
        d_det_n = sum(det3(_with_column(n, j, dc))
                      for j, dc in dn_cols.items())
        dml = np.empty(3)
        dmc = np.empty(3)
        for k in range(3):
            acc = 0.0 if dw_lin is None else det3(
                _with_column(base_lin[k], k, dw_lin))
            accc = det3(_with_column(base_const[k], k, dw_const))
            for j, dc in dn_cols.items():
                if j != k:
                    acc += det3(_with_column(base_lin[k], j, dc))
                    accc += det3(_with_column(base_const[k], j, dc))
            dml[k] = acc
            dmc[k] = accc
        ds11 = 2.0 * (ml[0] * dml[0] + ml[1] * dml[1] - ml[2] * dml[2])
        ds10 = (ml[0] * dmc[0] + dml[0] * mc[0] + ml[1] * dmc[1]
                + dml[1] * mc[1] - ml[2] * dmc[2] - dml[2] * mc[2])
        ds00 = 2.0 * (mc[0] * dmc[0] + mc[1] * dmc[1] - mc[2] * dmc[2])
        dt1 = (dq1a * ml[0] + g1.qdot_proj_alpha * dml[0]
               + dq1d * ml[1] + g1.qdot_proj_delta * dml[1]
               - dq2a * ml[2] - g2.qdot_proj_alpha * dml[2]
               - dq2d * det_n - g2.qdot_proj_delta * d_det_n)
        dt0 = (dq1a * mc[0] + g1.qdot_proj_alpha * dmc[0]
               + dq1d * mc[1] + g1.qdot_proj_delta * dmc[1]
               - dq2a * mc[2] - g2.qdot_proj_alpha * dmc[2])
        df2 = ds11 / det_n**2 - 2.0 * s11 * d_det_n / det_n**3
        df1 = (2.0 * ds10 / det_n**2 - 4.0 * s10 * d_det_n / det_n**3
               + 2.0 * dt1 / det_n - 2.0 * t1 * d_det_n / det_n**2)
        df0 = (ds00 / det_n**2 - 2.0 * s00 * d_det_n / det_n**3
               + 2.0 * dt0 / det_n - 2.0 * t0 * d_det_n / det_n**2
               + d_radial)
        dz = -(z * z * df2 + z * df1 + df0) / slope
        for k in range(3):
            numer = ((ml[k] * dz + z * dml[k] + dmc[k]) * det_n
                     - (z * ml[k] + mc[k]) * d_det_n)
            dx[k, corr] = numer / det_n**2
        dx[3, corr] = dz
    return dx


# --- the reduced residual and its Jacobian ---

@dataclass(frozen=True)
class ReducedResidual:
    """G(Delta) with the transverse velocities already eliminated.

    residual = (balance 1 km/s^2, balance 2 km/s^2,
                Lenz projection km^4/s^2, transfer phase rad)
    jacobian rows follow the residual; columns follow
    (d alpha 1, d delta 1, d alpha 2, d delta 2).
    """

    residual: np.ndarray
    jacobian: np.ndarray
    x: UnknownsX
    clamped: bool
    g1: EpochGeometry = field(repr=False)
    g2: EpochGeometry = field(repr=False)


def _nearest_root(candidates: list[UnknownsX],
                  previous_zeta2: float | None) -> UnknownsX:
    if previous_zeta2 is None:
        return candidates[0]
    return min(candidates, key=lambda c: abs(c.zeta2 - previous_zeta2))


def reduced_residual(att1: Attributable, att2: Attributable,
                     delta: DeltaCorrections, method: str,
                     branch: LambertBranch,
                     previous_zeta2: float | None = None,
                     mu: float = MU_EARTH_KM3_S2) -> ReducedResidual:
    """Evaluate the four linkage conditions and their Jacobian at Delta.

    For the quadratic elimination the root whose zeta2 lies nearest
    previous_zeta2 is followed, which keeps Newton on one root lineage
    across iterations.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    g1 = epoch_geometry(att1, delta.d_alpha1, delta.d_delta1, mu)
    g2 = epoch_geometry(att2, delta.d_alpha2, delta.d_delta2, mu)
    ev1 = _epoch_variations(g1)
    ev2 = _epoch_variations(g2)
    if method == "linear":
        system = linear_system(g1, g2)
        x = solve_transverse_linear(system)
        dx = _linear_x_derivatives(system, ev1, ev2)
    else:
        system = quadratic_system(g1, g2)
        x = _nearest_root(solve_transverse_quadratic(system), previous_zeta2)
        dx = _quadratic_x_derivatives(system, g1, g2, ev1, ev2, x)

    en1 = energy(g1, x.xi1, x.zeta1)
    if en1 >= 0.0:
        raise HyperbolicOrbit(
            f"epoch-1 energy {en1:.6g} km^2/s^2 not elliptic at this Delta")
    chord = g2.r - g1.r
    d = float(np.linalg.norm(chord))
    r_sum = g1.r_norm + g2.r_norm
    gp, gm, clamped = gammas_from_energy(en1, r_sum, d, mu)
    a = -mu / (2.0 * en1)
    geom = LambertGeometry(g1.r_norm, g2.r_norm, d, a,
                           2.0 * math.asin(math.sqrt(gp)),
                           2.0 * math.asin(math.sqrt(gm)))
    dt = att1.t_bar.seconds_until(att2.t_bar)
    residual = np.array([
        los_acceleration_residual(g1, x.xi1, x.zeta1),
        los_acceleration_residual(g2, x.xi2, x.zeta2),
        lenz_difference_projection(g1, g2, x),
        lambert_residual(geom, branch, dt, mu),
    ])

    s_beta, s_gamma = branch_signs(branch.case)
    angle_rate_plus = s_beta * 2.0 * math.sqrt(gp / (1.0 - gp))
    angle_rate_minus = s_gamma * 2.0 * math.sqrt(gm / (1.0 - gm))
    dn_den1 = -3.0 * math.sqrt(-2.0 * en1) / mu

    # derivative of the transfer-time row in X: only through the energy
    den1_dx = np.zeros(4)
    den1_dx[:2] = energy_gradient_x(g1, x.xi1, x.zeta1)
    lam_factor = (-dt * dn_den1
                  + angle_rate_plus * (-(r_sum + d) / (2.0 * mu))
                  - angle_rate_minus * (-(r_sum - d) / (2.0 * mu)))
    dg_dx = np.vstack((
        np.concatenate((los_residual_gradient_x(g1, x.xi1, x.zeta1),
                        (0.0, 0.0))),
        np.concatenate(((0.0, 0.0),
                        los_residual_gradient_x(g2, x.xi2, x.zeta2))),
        lenz_projection_gradient_x(g1, g2, x),
        lam_factor * den1_dx,
    ))

    dg_ddelta = np.vstack((
        (ev1.d_accel_balance[0], ev1.d_accel_balance[1], 0.0, 0.0),
        (0.0, 0.0, ev2.d_accel_balance[0], ev2.d_accel_balance[1]),
        _lenz_row_delta(g1, g2, x, ev1, ev2, mu),
        _lambert_row_delta(g1, g2, x, ev1, ev2, gp, gm, en1, d, dt,
                           angle_rate_plus, angle_rate_minus, dn_den1, mu),
    ))
    return ReducedResidual(residual, dg_dx @ dx + dg_ddelta, x,
                           bool(clamped), g1, g2)


def _lenz_row_delta(g1: EpochGeometry, g2: EpochGeometry, x: UnknownsX,
                    ev1: _EpochVariations, ev2: _EpochVariations,
                    mu: float) -> np.ndarray:
    """Direction sensitivity of the Lenz-difference projection at fixed X.

    The per-vector blocks below are meaningful only as a set: several of
    them move terms between each other through the station-vector forms,
    and only the full contraction with the frame variations is the true
    derivative.
    """
    v1 = velocity(g1, x.xi1, x.zeta1)
    v2 = velocity(g2, x.xi2, x.zeta2)
    v_axis = g2.los_cross_q
    q1, qd1 = g1.observer.q, g1.observer.q_dot
    q2, qd2 = g2.observer.q, g2.observer.q_dot
    lead1 = float(v1 @ v1) - mu / g1.r_norm
    r1v = float(g1.r @ v_axis)
    rd1v = float(v1 @ v_axis)
    rd1r1 = float(v1 @ g1.r)
    rd2v = float(v2 @ v_axis)
    rd2r2 = float(v2 @ g2.r)
    lenz1 = lead1 * g1.r - rd1r1 * v1
    blk_rho1 = (r1v * (2.0 * g1.rho_dot * qd1 + mu * g1.rho * q1 / g1.r_norm**3)
                + lead1 * g1.rho * v_axis
                - rd1v * (g1.rho_dot * q1 + g1.rho * qd1)
                - rd1r1 * g1.rho_dot * v_axis)
    bracket = 2.0 * r1v * qd1 - rd1v * q1 - rd1r1 * v_axis
    blk_alpha1 = x.xi1 * bracket
    blk_delta1 = x.zeta1 * bracket
    blk_rho2 = (-np.cross(lenz1, q2)
                + (g2.rho_dot * q2 + g2.rho * qd2) * rd2v
                + rd2r2 * np.cross(q2, qd2))
    blk_alpha2 = (x.xi2 * rd2v + x.zeta2 * rd2r2) * q2
    blk_delta2 = (x.zeta2 * rd2v - x.xi2 * rd2r2) * q2
    row = np.empty(4)
    for var in (0, 1):
        row[var] = (float(blk_rho1 @ ev1.de_rho[var])
                    + float(blk_alpha1 @ ev1.de_alpha[var])
                    + float(blk_delta1 @ ev1.de_delta[var]))
        row[2 + var] = (float(blk_rho2 @ ev2.de_rho[var])
                        + float(blk_alpha2 @ ev2.de_alpha[var])
                        + float(blk_delta2 @ ev2.de_delta[var]))
    return row


def _lambert_row_delta(g1: EpochGeometry, g2: EpochGeometry, x: UnknownsX,
                       ev1: _EpochVariations, ev2: _EpochVariations,
                       gp: float, gm: float, en1: float, d: float, dt: float,
                       angle_rate_plus: float, angle_rate_minus: float,
                       dn_den1: float, mu: float) -> np.ndarray:
    """Direction sensitivity of the transfer-phase row at fixed X."""
    q1, qd1 = g1.observer.q, g1.observer.q_dot
    q2 = g2.observer.q
    grav1 = 2.0 * (g1.rho_dot * qd1 + mu * g1.rho * q1 / g1.r_norm**3)
    row = np.empty(4)
    for var in (0, 1):
        v_r = ev1.de_rho[var]
        d2en1 = (float(grav1 @ v_r)
                 + 2.0 * x.xi1 * float(qd1 @ ev1.de_alpha[var])
                 + 2.0 * x.zeta1 * float(qd1 @ ev1.de_delta[var]))
        den1 = 0.5 * d2en1
        dr1 = g1.rho * float(q1 @ v_r) / g1.r_norm
        dd = g1.rho * float((q1 - g2.r) @ v_r) / d
        dgp = -en1 / (2.0 * mu) * (dr1 + dd) + gp / en1 * den1
        dgm = -en1 / (2.0 * mu) * (dr1 - dd) + gm / en1 * den1
        row[var] = (-dt * dn_den1 * den1
                    + angle_rate_plus * dgp - angle_rate_minus * dgm)
        v_r2 = ev2.de_rho[var]
        dr2 = g2.rho * float(q2 @ v_r2) / g2.r_norm
        dd2 = g2.rho * float((q2 - g1.r) @ v_r2) / d
        dgp2 = -en1 / (2.0 * mu) * (dr2 + dd2)
        dgm2 = -en1 / (2.0 * mu) * (dr2 - dd2)
        row[2 + var] = angle_rate_plus * dgp2 - angle_rate_minus * dgm2
    return row


# --- branch seeding and the Newton driver ---

def candidate_branches(g1: EpochGeometry, g2: EpochGeometry, x: UnknownsX,
                       epochs: tuple[int, ...] = (1, 2),
                       mu: float = MU_EARTH_KM3_S2) -> list[LambertBranch]:
    """Transfer branches implied by the uncorrected candidate orbits.

    Each requested epoch contributes the orbit through its own state;
    with the linear elimination the two epochs can disagree on both the
    revolution count and the containment case, so both are offered.
    """
    dt = g1.t_bar.seconds_until(g2.t_bar)
    found: list[LambertBranch] = []
    for epoch in epochs:
        g = g1 if epoch == 1 else g2
        xi, zeta = (x.xi1, x.zeta1) if epoch == 1 else (x.xi2, x.zeta2)
        en = energy(g, xi, zeta)
        if en >= 0.0:
            continue
        a = -mu / (2.0 * en)
        c = angular_momentum(g, xi, zeta)
        e_vec = eccentricity_vector(g.r, velocity(g, xi, zeta), mu)
        try:
            _, _, de = arc_eccentric_anomalies(g1.r, g2.r, c, a, e_vec)
            k = count_revolutions(math.sqrt(mu / a**3), dt, de)
            branch = classify_branch(g1.r, g2.r, c, a, e_vec, k)
        except LinkageError:
            continue
        if branch not in found:
            found.append(branch)
    return found


@dataclass(frozen=True)
class NewtonOptions:
    """Stopping and damping policy for the reduced-system iteration."""

    max_iterations: int = 25
    step_tol_rad: float = 1e-10
    residual_tol: float = 1e-9
    max_halvings: int = 4
    growth_limit: float = 10.0


@dataclass(frozen=True)
class BranchFailure:
    """Why one (method, branch) attempt produced no orbit."""

    method: str
    branch: LambertBranch | None
    reason: str
    iterations: int


@dataclass(frozen=True)
class LinkageSolution:
    """One converged preliminary orbit with its audit trail."""

    delta: DeltaCorrections
    x: UnknownsX
    state1: CartesianState
    state2: CartesianState
    elements1: KeplerianElements
    elements2: KeplerianElements
    # None when no transfer arc was classified (Keplerian-integrals entry)
    branch: LambertBranch | None
    iterations: int
    residual_norm: float
    method: str
    consistency: dict
    clamp_events: int
    # per iterate: (index, scaled residual norm, delta tuple, zeta2)
    trace: tuple


def _residual_scales(g1: EpochGeometry, g2: EpochGeometry,
                     mu: float) -> np.ndarray:
    """Characteristic size of each residual component.

    The rows mix km/s^2, a Lenz-projection product and radians; each is
    reduced to order one before norm tests so a single tolerance works.
    """
    rho_bar = 0.5 * (g1.rho + g2.rho)
    r_bar = 0.5 * (g1.r_norm + g2.r_norm)
    v_bar = math.sqrt(mu / r_bar)
    accel = mu / rho_bar**2
    return np.array([accel, accel, mu * rho_bar * v_bar, 2.0 * math.pi])


def _newton_step(res: ReducedResidual, scales: np.ndarray) -> np.ndarray:
    jac_n = res.jacobian / scales[:, None]
    rhs = -res.residual / scales
    det_j = det4(jac_n)
    if not np.isfinite(det_j) or abs(det_j) <= DET_RATIO_FLOOR * _det_scale(jac_n):
        raise JacobianSingular(
            f"normalized Jacobian determinant {det_j:.3e} below guard")
    return np.array([det4(_with_column(jac_n, k, rhs)) / det_j
                     for k in range(4)])


def orbit_pair_from_x(g1: EpochGeometry, g2: EpochGeometry, x: UnknownsX,
                      mu: float = MU_EARTH_KM3_S2):
    """States, elements and two-orbit consistency gaps for one X.

    Returns (state1, state2, elements1, elements2, consistency) where the
    consistency dict holds the relative angular-momentum and energy
    mismatch between the two epoch orbits plus element-by-element gaps.
    """
    state1 = CartesianState(g1.r.copy(), velocity(g1, x.xi1, x.zeta1),
                            g1.t_bar)
    state2 = CartesianState(g2.r.copy(), velocity(g2, x.xi2, x.zeta2),
                            g2.t_bar)
    el1 = cartesian_to_elements(state1, mu)
    el2 = cartesian_to_elements(state2, mu)
    c1 = angular_momentum(g1, x.xi1, x.zeta1)
    c2 = angular_momentum(g2, x.xi2, x.zeta2)
    en1 = energy(g1, x.xi1, x.zeta1)
    en2 = energy(g2, x.xi2, x.zeta2)
    consistency = {
        "c_rel": float(np.linalg.norm(c1 - c2) / np.linalg.norm(c1)),
        "energy_rel": abs(en1 - en2) / abs(en1),
        "a_km": abs(el1.a - el2.a),
        "e": abs(el1.e - el2.e),
        "inc_rad": abs(el1.inc - el2.inc),
        "raan_rad": abs(angle_difference(el1.raan, el2.raan)),
        "argp_rad": abs(angle_difference(el1.argp, el2.argp)),
    }
    return state1, state2, el1, el2, consistency


def _package(delta: DeltaCorrections, res: ReducedResidual, iterations: int,
             norm_g: float, method: str, branch: LambertBranch,
             clamp_events: int, trace: list, mu: float) -> LinkageSolution:
    state1, state2, el1, el2, consistency = orbit_pair_from_x(
        res.g1, res.g2, res.x, mu)
    return LinkageSolution(delta, x=res.x, state1=state1, state2=state2,
                           elements1=el1, elements2=el2, branch=branch,
                           iterations=iterations, residual_norm=norm_g,
                           method=method, consistency=consistency,
                           clamp_events=clamp_events, trace=tuple(trace))


def _newton_one(att1: Attributable, att2: Attributable, method: str,
                label: str, branch: LambertBranch,
                seed_zeta2: float | None, scales: np.ndarray,
                opts: NewtonOptions, mu: float) -> LinkageSolution:
    delta = DeltaCorrections(0.0, 0.0, 0.0, 0.0)
    previous = seed_zeta2
    res = reduced_residual(att1, att2, delta, method, branch, previous, mu)
    clamp_events = 1 if res.clamped else 0
    trace: list[tuple] = []
    norm_g = float(np.max(np.abs(res.residual / scales)))
    for iteration in range(opts.max_iterations):
        trace.append((iteration, norm_g, tuple(delta.as_array()),
                      res.x.zeta2))
        if norm_g < opts.residual_tol:
            return _package(delta, res, iteration, norm_g, label, branch,
                            clamp_events, trace, mu)
        step = _newton_step(res, scales)
        accepted = None
        best_try = None
        last_error: Exception | None = None
        factor = 1.0
        for _ in range(opts.max_halvings + 1):
            try:
                trial_delta = DeltaCorrections(
                    *(delta.as_array() + factor * step))
                trial = reduced_residual(att1, att2, trial_delta, method,
                                         branch, previous, mu)
            except (LinkageError, ValueError) as err:
                last_error = err
                factor *= 0.5
                continue
            trial_norm = float(np.max(np.abs(trial.residual / scales)))
            if best_try is None or trial_norm < best_try[2]:
                best_try = (trial_delta, trial, trial_norm)
            if trial_norm <= opts.growth_limit * norm_g:
                accepted = (trial_delta, trial, trial_norm)
                break
            factor *= 0.5
        if accepted is None:
            if best_try is None:
                raise NoConvergence(
                    f"every damped step failed at iteration {iteration + 1}"
                    f" ({type(last_error).__name__}: {last_error})", trace)
            accepted = best_try
        step_inf = float(np.max(np.abs(accepted[0].as_array()
                                       - delta.as_array())))
        delta, res, norm_g = accepted
        clamp_events += 1 if res.clamped else 0
        if method == "quadratic":
            previous = res.x.zeta2
        if step_inf < opts.step_tol_rad or norm_g < opts.residual_tol:
            trace.append((iteration + 1, norm_g, tuple(delta.as_array()),
                          res.x.zeta2))
            return _package(delta, res, iteration + 1, norm_g, label, branch,
                            clamp_events, trace, mu)
    raise NoConvergence(
        f"no convergence in {opts.max_iterations} iterations "
        f"(scaled residual {norm_g:.3e})", trace)


def newton_solve(att1: Attributable, att2: Attributable,
                 method: str = "quadratic",
                 options: NewtonOptions | None = None,
                 mu: float = MU_EARTH_KM3_S2,
                 failures: list | None = None) -> list[LinkageSolution]:
    """All preliminary orbits linking the two attributables.

    Branch candidates (containment case and revolution count) are frozen
    from the uncorrected geometry; each is iterated independently, and
    for the quadratic elimination each root lineage is iterated
    separately. Solutions are ordered by scaled residual, then by the
    size of the angle corrections; none are filtered out. Per-branch
    failures are appended to `failures` when a list is supplied.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    opts = options or NewtonOptions()
    fail_log = failures if failures is not None else []
    dt = att1.t_bar.seconds_until(att2.t_bar)
    if dt < MIN_EPOCH_GAP_S:
        raise DegenerateTimes(
            f"track epochs are {dt:.1f} s apart; linkage needs at least "
            f"{MIN_EPOCH_GAP_S:.0f} s (same-pass tracks belong to the "
            "three-position velocity estimate)")
    try:
        g1 = epoch_geometry(att1, mu=mu)
        g2 = epoch_geometry(att2, mu=mu)
        if method == "linear":
            x0 = solve_transverse_linear(linear_system(g1, g2))
            jobs = [("linear", branch, None) for branch in
                    candidate_branches(g1, g2, x0, (1, 2), mu)]
        else:
            roots = solve_transverse_quadratic(quadratic_system(g1, g2))
            jobs = []
            for index, x0 in enumerate(roots):
                label = f"quadratic-root-{index + 1}"
                for branch in candidate_branches(g1, g2, x0, (1,), mu):
                    jobs.append((label, branch, x0.zeta2))
    except LinkageError as err:
        fail_log.append(BranchFailure(
            method, None, f"{type(err).__name__}: {err}", 0))
        return []
    if not jobs:
        fail_log.append(BranchFailure(
            method, None, "NoBranchCandidates: no transfer arc at zero "
            "correction (all uncorrected orbits unusable)", 0))
        return []
    scales = _residual_scales(g1, g2, mu)
    solutions = []
    for label, branch, seed in jobs:
        try:
            solutions.append(_newton_one(att1, att2, method, label, branch,
                                         seed, scales, opts, mu))
        except LinkageError as err:
            iterations = len(getattr(err, "trace", None) or ())
            fail_log.append(BranchFailure(
                label, branch, f"{type(err).__name__}: {err}", iterations))
    # residuals below the convergence tolerance are all "zero"; rounding
    # noise there must not outrank a much smaller correction
    solutions.sort(key=lambda s: (
        0.0 if s.residual_norm < opts.residual_tol else s.residual_norm,
        float(np.max(np.abs(s.delta.as_array())))))
    return solutions
