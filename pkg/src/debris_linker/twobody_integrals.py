"""Keplerian first integrals as functions of attributable-based unknowns.

A radar attributable pins the topocentric range model (rho, rho_dot,
rho_ddot) and the line of sight, leaving four scalars per track pair
undetermined: the transverse velocity components at each epoch and small
corrections to the two mean directions. Everything the linkage solver
needs -- angular momentum, energy, the Laplace-Lenz projection, and the
line-of-sight acceleration balance -- is affine or quadratic in those
unknowns once the geometry of one epoch is frozen. This module builds
that frozen geometry and evaluates the integrals on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import MU_EARTH_KM3_S2
from .core import DirectionFrame, Epoch, SphericalDirection, direction_frame
from .errors import NegativeEtaSquared
from .observer import ObserverState
from .radar_sim import Attributable

# Corrections beyond this are no longer "small deviations from the mean
# values" and the linearized geometry loses meaning.
MAX_CORRECTION_RAD = 0.1


@dataclass(frozen=True)
class DeltaCorrections:
    """Angle corrections (rad) applied to the two mean directions."""

    d_alpha1: float = 0.0
    d_delta1: float = 0.0
    d_alpha2: float = 0.0
    d_delta2: float = 0.0

    def __post_init__(self):
        for name, value in self.as_dict().items():
            if not math.isfinite(value) or abs(value) >= MAX_CORRECTION_RAD:
                raise ValueError(
                    f"{name}={value!r} outside the +-{MAX_CORRECTION_RAD} rad "
                    "correction guard band")

    def as_dict(self) -> dict[str, float]:
        return {
            "d_alpha1": self.d_alpha1,
            "d_delta1": self.d_delta1,
            "d_alpha2": self.d_alpha2,
            "d_delta2": self.d_delta2,
        }

    def as_array(self) -> np.ndarray:
        return np.array([self.d_alpha1, self.d_delta1,
                         self.d_alpha2, self.d_delta2])


@dataclass(frozen=True)
class UnknownsX:
    """Transverse velocity components (km/s) at the two epochs.

    xi = rho * alpha_dot * cos(delta) and zeta = rho * delta_dot are the
    plane-of-sky velocity components along e_alpha and e_delta.
    """

    xi1: float
    zeta1: float
    xi2: float
    zeta2: float

    def as_array(self) -> np.ndarray:
        return np.array([self.xi1, self.zeta1, self.xi2, self.zeta2])


@dataclass(frozen=True)
class EpochGeometry:
    """Everything about one epoch that the unknowns do not change.

    Once the corrected direction is fixed, the orbit position r, the
    station state, and all integral coefficients are constants; the
    integrals below are then cheap polynomials in (xi, zeta).
    """

    t_bar: Epoch
    alpha: float
    delta: float
    frame: DirectionFrame
    rho: float
    rho_dot: float
    rho_ddot: float
    observer: ObserverState
    r: np.ndarray
    r_norm: float
    # velocity part carried by range rate and station motion:
    # rdot = xi e_alpha + zeta e_delta + v_base
    v_base: np.ndarray
    v_base_sq: float
    # square of the plane-of-sky angular rate implied by the range
    # acceleration balance (alpha_dot^2 cos^2 delta + delta_dot^2 at a
    # consistent solution)
    proper_motion_sq: float
    # angular momentum c = am_xi*xi + am_zeta*zeta + am_const
    am_xi: np.ndarray
    am_zeta: np.ndarray
    am_const: np.ndarray
    # station position/velocity projected on the tangent frame
    q_proj_alpha: float
    q_proj_delta: float
    qdot_proj_alpha: float
    qdot_proj_delta: float
    # constant term of the energy restricted to the implied-rate sphere:
    # E = energy_offset + qdot_proj_alpha*xi + qdot_proj_delta*zeta
    # whenever xi^2 + zeta^2 = rho^2 * proper_motion_sq
    energy_offset: float
    # 2*energy_offset - rho^2*proper_motion_sq = |v_base|^2 - 2 mu/|r|
    double_radial_energy: float
    # line of sight crossed with the station position; the Laplace-Lenz
    # comparison is projected on this direction (orthogonal to r)
    los_cross_q: np.ndarray
    mu: float


def epoch_geometry(att: Attributable, d_alpha: float = 0.0,
                   d_delta: float = 0.0,
                   mu: float = MU_EARTH_KM3_S2) -> EpochGeometry:
    """Freeze the geometry of one epoch at corrected angles.

    Raises NegativeEtaSquared when the range acceleration balance implies
    a negative squared angular rate: no Kepler orbit at this range can
    produce the observed rho_ddot.
    """
    direction = SphericalDirection(att.alpha + d_alpha, att.delta + d_delta)
    frame = direction_frame(direction)
    obs = att.observer
    rho = att.rho_km
    r = obs.q + rho * frame.e_rho
    r_norm = float(np.linalg.norm(r))
    v_base = att.rho_dot_km_s * frame.e_rho + obs.q_dot

    radial_accel = (att.rho_ddot_km_s2 + float(obs.q_ddot @ frame.e_rho)
                    + mu * float(r @ frame.e_rho) / r_norm**3)
    proper_motion_sq = radial_accel / rho
    if proper_motion_sq < 0.0:
        raise NegativeEtaSquared(
            f"implied angular rate squared {proper_motion_sq:.3e} 1/s^2 < 0 "
            f"at rho={rho:.1f} km")

    am_xi = np.cross(r, frame.e_alpha)
    am_zeta = np.cross(r, frame.e_delta)
    am_const = np.cross(r, obs.q_dot) + att.rho_dot_km_s * np.cross(obs.q, frame.e_rho)

    v_base_sq = float(v_base @ v_base)
    energy_offset = 0.5 * (rho**2 * proper_motion_sq + v_base_sq) - mu / r_norm

    return EpochGeometry(
        t_bar=att.t_bar,
        alpha=direction.alpha,
        delta=direction.delta,
        frame=frame,
        rho=rho,
        rho_dot=att.rho_dot_km_s,
        rho_ddot=att.rho_ddot_km_s2,
        observer=obs,
        r=r,
        r_norm=r_norm,
        v_base=v_base,
        v_base_sq=v_base_sq,
        proper_motion_sq=proper_motion_sq,
        am_xi=am_xi,
        am_zeta=am_zeta,
        am_const=am_const,
        q_proj_alpha=float(obs.q @ frame.e_alpha),
        q_proj_delta=float(obs.q @ frame.e_delta),
        qdot_proj_alpha=float(obs.q_dot @ frame.e_alpha),
        qdot_proj_delta=float(obs.q_dot @ frame.e_delta),
        energy_offset=energy_offset,
        double_radial_energy=v_base_sq - 2.0 * mu / r_norm,
        los_cross_q=np.cross(frame.e_rho, obs.q),
        mu=mu,
    )


def velocity(g: EpochGeometry, xi: float, zeta: float) -> np.ndarray:
    """Inertial velocity for given transverse components."""
    return xi * g.frame.e_alpha + zeta * g.frame.e_delta + g.v_base


def speed_squared(g: EpochGeometry, xi: float, zeta: float) -> float:
    """|rdot|^2 expanded in the tangent frame (e_rho . e_alpha = 0 etc.)."""
    return (xi * xi + zeta * zeta
            + 2.0 * g.qdot_proj_alpha * xi + 2.0 * g.qdot_proj_delta * zeta
            + g.v_base_sq)


def angular_momentum(g: EpochGeometry, xi: float, zeta: float) -> np.ndarray:
    """c = r x rdot, affine in the transverse components."""
    return xi * g.am_xi + zeta * g.am_zeta + g.am_const


def energy(g: EpochGeometry, xi: float, zeta: float) -> float:
    """Specific orbital energy, quadratic in the transverse components."""
    return 0.5 * speed_squared(g, xi, zeta) - g.mu / g.r_norm


def radial_momentum(g: EpochGeometry, xi: float, zeta: float) -> float:
    """rdot . r, affine in the transverse components (e_alpha, e_delta _|_ e_rho)."""
    return (g.q_proj_alpha * xi + g.q_proj_delta * zeta
            + float(g.v_base @ g.r))


def los_acceleration_residual(g: EpochGeometry, xi: float, zeta: float) -> float:
    """Imbalance of the line-of-sight acceleration equation, km/s^2.

    Zero exactly when xi^2 + zeta^2 equals the geometry's implied
    rho^2 * proper_motion_sq.
    """
    return g.rho * g.proper_motion_sq - (xi * xi + zeta * zeta) / g.rho


def energy_gradient_x(g: EpochGeometry, xi: float, zeta: float) -> np.ndarray:
    """(dE/dxi, dE/dzeta) for this epoch."""
    return np.array([xi + g.qdot_proj_alpha, zeta + g.qdot_proj_delta])


def los_residual_gradient_x(g: EpochGeometry, xi: float, zeta: float) -> np.ndarray:
    """Gradient of the line-of-sight acceleration imbalance."""
    return np.array([-2.0 * xi / g.rho, -2.0 * zeta / g.rho])


def lenz_projection_gradient_x(g1: EpochGeometry, g2: EpochGeometry,
                               x: UnknownsX) -> np.ndarray:
    """Gradient of lenz_difference_projection in (xi1, zeta1, xi2, zeta2)."""
    v_axis = g2.los_cross_q
    v1 = velocity(g1, x.xi1, x.zeta1)
    v2 = velocity(g2, x.xi2, x.zeta2)
    r1_proj = float(g1.r @ v_axis)
    v1_proj = float(v1 @ v_axis)
    v1_r1 = float(v1 @ g1.r)
    v2_proj = float(v2 @ v_axis)
    v2_r2 = float(v2 @ g2.r)
    ea1_proj = float(g1.frame.e_alpha @ v_axis)
    ed1_proj = float(g1.frame.e_delta @ v_axis)
    ea2_proj = float(g2.frame.e_alpha @ v_axis)
    ed2_proj = float(g2.frame.e_delta @ v_axis)
    return np.array([
        2.0 * (x.xi1 + g1.qdot_proj_alpha) * r1_proj
        - (g1.q_proj_alpha * v1_proj + v1_r1 * ea1_proj),
        2.0 * (x.zeta1 + g1.qdot_proj_delta) * r1_proj
        - (g1.q_proj_delta * v1_proj + v1_r1 * ed1_proj),
        g2.q_proj_alpha * v2_proj + v2_r2 * ea2_proj,
        g2.q_proj_delta * v2_proj + v2_r2 * ed2_proj,
    ])


def lenz_difference_projection(g1: EpochGeometry, g2: EpochGeometry,
                               x: UnknownsX) -> float:
    """mu * (L1 - L2) . (e_rho2 x q2) for the Laplace-Lenz vectors L.

    The epoch-2 Lenz term collapses because the projection direction is
    orthogonal to r2 by construction, leaving only its (rdot.r)(rdot.v)
    part. Scaled by mu to keep the expression polynomial.
    """
    v_axis = g2.los_cross_q
    v1 = velocity(g1, x.xi1, x.zeta1)
    v2 = velocity(g2, x.xi2, x.zeta2)
    term1 = ((speed_squared(g1, x.xi1, x.zeta1) - g1.mu / g1.r_norm)
             * float(g1.r @ v_axis)
             - float(v1 @ g1.r) * float(v1 @ v_axis))
    term2 = float(v2 @ g2.r) * float(v2 @ v_axis)
    return term1 + term2
