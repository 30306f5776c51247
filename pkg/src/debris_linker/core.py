"""Time, line-of-sight frames, orbital elements, and two-body propagation.

All quantities are km / s / rad. Epochs are Modified Julian Dates held as
floats; differences are converted to seconds for dynamics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import MU_EARTH_KM3_S2, SECONDS_PER_DAY
from .errors import (
    DegenerateAngularMomentum,
    HyperbolicOrbit,
    NonConvergence,
    PolarSingularity,
)

TWO_PI = 2.0 * math.pi


def wrap_two_pi(angle: float) -> float:
    """Wrap an angle to [0, 2*pi)."""
    return angle % TWO_PI


def angle_difference(a: float, b: float) -> float:
    """Signed difference a - b wrapped to (-pi, pi]."""
    d = (a - b) % TWO_PI
    if d > math.pi:
        d -= TWO_PI
    return d


def wrap_spherical(alpha: float, delta: float) -> tuple[float, float]:
    """Normalize a spherical pair, reflecting over the pole if needed."""
    delta = (delta + math.pi) % TWO_PI - math.pi
    if delta > math.pi / 2.0:
        delta = math.pi - delta
        alpha += math.pi
    elif delta < -math.pi / 2.0:
        delta = -math.pi - delta
        alpha += math.pi
    return wrap_two_pi(alpha), delta


def unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


@dataclass(frozen=True, order=True)
class Epoch:
    """An instant, as a Modified Julian Date."""

    mjd: float

    def seconds_until(self, other: "Epoch") -> float:
        return (other.mjd - self.mjd) * SECONDS_PER_DAY

    def plus_seconds(self, dt: float) -> "Epoch":
        return Epoch(self.mjd + dt / SECONDS_PER_DAY)


@dataclass(frozen=True)
class SphericalDirection:
    """Topocentric right ascension / declination pair, wrap-normalized."""

    alpha: float
    delta: float

    def __post_init__(self):
        a, d = wrap_spherical(self.alpha, self.delta)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "delta", d)


@dataclass(frozen=True)
class DirectionFrame:
    """Orthonormal line-of-sight frame plus the auxiliary in-plane vector.

    e_rho points along the line of sight, e_alpha along growing right
    ascension, e_delta along growing declination; (e_rho, e_alpha, e_delta)
    is right-handed. e_perp = -(cos a, sin a, 0) spans, with e_rho and
    e_delta, the derivatives of the frame under angle changes.
    """

    e_rho: np.ndarray
    e_alpha: np.ndarray
    e_delta: np.ndarray
    e_perp: np.ndarray


def direction_frame(direction: SphericalDirection) -> DirectionFrame:
    """Build the moving line-of-sight frame for a direction.

    Raises PolarSingularity within ~1e-9 rad of a pole, where e_alpha
    is undefined.
    """
    ca, sa = math.cos(direction.alpha), math.sin(direction.alpha)
    cd, sd = math.cos(direction.delta), math.sin(direction.delta)
    if abs(cd) < 1e-9:
        raise PolarSingularity(
            f"declination {direction.delta:.9f} rad too close to a pole"
        )
    e_rho = np.array([cd * ca, cd * sa, sd])
    e_alpha = np.array([-sa, ca, 0.0])
    e_delta = np.array([-sd * ca, -sd * sa, cd])
    e_perp = np.array([-ca, -sa, 0.0])
    return DirectionFrame(e_rho, e_alpha, e_delta, e_perp)


@dataclass(frozen=True)
class KeplerianElements:
    """Elliptic orbital elements: a (km), e, inclination, node, argument of
    perigee, mean anomaly (rad), at a reference epoch."""

    a: float
    e: float
    inc: float
    raan: float
    argp: float
    mean_anomaly: float
    epoch: Epoch

    def __post_init__(self):
        if not self.a > 0.0:
            raise ValueError(f"semimajor axis must be positive, got {self.a}")
        if not 0.0 <= self.e < 1.0:
            raise ValueError(f"eccentricity must be in [0, 1), got {self.e}")
        object.__setattr__(self, "raan", wrap_two_pi(self.raan))
        object.__setattr__(self, "argp", wrap_two_pi(self.argp))
        object.__setattr__(self, "mean_anomaly", wrap_two_pi(self.mean_anomaly))

    def mean_motion(self, mu: float = MU_EARTH_KM3_S2) -> float:
        return math.sqrt(mu / self.a**3)

    def period(self, mu: float = MU_EARTH_KM3_S2) -> float:
        return TWO_PI / self.mean_motion(mu)


@dataclass
class CartesianState:
    """Geocentric inertial position (km) and velocity (km/s) at an epoch."""

    r: np.ndarray
    v: np.ndarray
    epoch: Epoch

    def energy(self, mu: float = MU_EARTH_KM3_S2) -> float:
        return 0.5 * float(self.v @ self.v) - mu / float(np.linalg.norm(self.r))


def solve_kepler(mean_anomaly: float, e: float, tol: float = 1e-13,
                 max_iter: int = 50) -> float:
    """Solve E - e*sin(E) = M for the eccentric anomaly.

    Newton from E0 = M + e*sin(M); falls back to bisection on the bracket
    [M - e, M + e] if Newton stalls. Raises NonConvergence when the
    iteration budget is spent with |residual| >= tol.
    """
    m = wrap_two_pi(mean_anomaly)
    ecc = float(e)
    big_e = m + ecc * math.sin(m)
    for _ in range(max_iter):
        f = big_e - ecc * math.sin(big_e) - m
        if abs(f) < tol:
            return big_e
        big_e -= f / (1.0 - ecc * math.cos(big_e))
    # Newton did not settle; bisection is slow but guaranteed on this bracket.
    lo, hi = m - ecc, m + ecc
    for _ in range(4 * max_iter):
        mid = 0.5 * (lo + hi)
        f = mid - ecc * math.sin(mid) - m
        if abs(f) < tol:
            return mid
        if f > 0.0:
            hi = mid
        else:
            lo = mid
    raise NonConvergence(
        f"Kepler solver failed for M={m:.6f}, e={ecc:.6f} within budget"
    )


def _signed_angle(u: np.ndarray, w: np.ndarray, axis: np.ndarray) -> float:
    """Angle from u to w about axis, in [0, 2*pi)."""
    s = float(np.cross(u, w) @ axis)
    c = float(u @ w)
    return wrap_two_pi(math.atan2(s, c))


def cartesian_to_elements(state: CartesianState,
                          mu: float = MU_EARTH_KM3_S2) -> KeplerianElements:
    """Convert a bound Cartesian state to elliptic elements.

    Raises HyperbolicOrbit for non-negative energy and
    DegenerateAngularMomentum for (anti)parallel r, v.
    """
    r = np.asarray(state.r, dtype=float)
    v = np.asarray(state.v, dtype=float)
    rn = float(np.linalg.norm(r))
    vn = float(np.linalg.norm(v))
    c = np.cross(r, v)
    cn = float(np.linalg.norm(c))
    if cn <= 1e-10 * rn * max(vn, 1e-300):
        raise DegenerateAngularMomentum("r and v are nearly parallel")
    energy = 0.5 * vn * vn - mu / rn
    if energy >= 0.0:
        raise HyperbolicOrbit(f"two-body energy {energy:.6e} km^2/s^2 is not bound")
    a = -mu / (2.0 * energy)

    c_hat = c / cn
    e_vec = np.cross(v, c) / mu - r / rn
    e = float(np.linalg.norm(e_vec))

    inc = math.acos(max(-1.0, min(1.0, c[2] / cn)))
    node = np.array([-c[1], c[0], 0.0])
    nn = float(np.linalg.norm(node))
    if nn > 1e-11 * cn:
        node_hat = node / nn
        raan = wrap_two_pi(math.atan2(node[1], node[0]))
    else:
        # Equatorial: measure longitudes from the x axis.
        node_hat = np.array([1.0, 0.0, 0.0])
        raan = 0.0

    e_tol = 1e-11
    if e > e_tol:
        argp = _signed_angle(node_hat, e_vec / e, c_hat)
        true_anom = _signed_angle(e_vec / e, r / rn, c_hat)
    else:
        argp = 0.0
        true_anom = _signed_angle(node_hat, r / rn, c_hat)

    # Eccentric anomaly from the true anomaly, then Kepler's equation.
    half = 0.5 * true_anom
    ecc_anom = 2.0 * math.atan2(
        math.sqrt(max(0.0, 1.0 - e)) * math.sin(half),
        math.sqrt(1.0 + e) * math.cos(half),
    )
    mean_anom = wrap_two_pi(ecc_anom - e * math.sin(ecc_anom))
    return KeplerianElements(a, e, inc, raan, argp, mean_anom, state.epoch)


def _rotation_perifocal_to_inertial(el: KeplerianElements) -> np.ndarray:
    co, so = math.cos(el.raan), math.sin(el.raan)
    ci, si = math.cos(el.inc), math.sin(el.inc)
    cw, sw = math.cos(el.argp), math.sin(el.argp)
    return np.array([
        [co * cw - so * sw * ci, -co * sw - so * cw * ci, so * si],
        [so * cw + co * sw * ci, -so * sw + co * cw * ci, -co * si],
        [sw * si, cw * si, ci],
    ])


def elements_to_cartesian(el: KeplerianElements,
                          mu: float = MU_EARTH_KM3_S2) -> CartesianState:
    """Evaluate the Cartesian state of an elliptic orbit at its own epoch."""
    big_e = solve_kepler(el.mean_anomaly, el.e)
    ce, se = math.cos(big_e), math.sin(big_e)
    b_over_a = math.sqrt(1.0 - el.e**2)
    rn = el.a * (1.0 - el.e * ce)
    r_pf = np.array([el.a * (ce - el.e), el.a * b_over_a * se, 0.0])
    speed_factor = math.sqrt(mu * el.a) / rn
    v_pf = np.array([-speed_factor * se, speed_factor * b_over_a * ce, 0.0])
    rot = _rotation_perifocal_to_inertial(el)
    return CartesianState(rot @ r_pf, rot @ v_pf, el.epoch)


def propagate_kepler(el: KeplerianElements, dt_seconds: float,
                     mu: float = MU_EARTH_KM3_S2) -> KeplerianElements:
    """Advance the mean anomaly by dt seconds; all other elements are fixed."""
    ell = wrap_two_pi(el.mean_anomaly + el.mean_motion(mu) * dt_seconds)
    return KeplerianElements(el.a, el.e, el.inc, el.raan, el.argp, ell,
                             el.epoch.plus_seconds(dt_seconds))


def state_at(el: KeplerianElements, epoch: Epoch,
             mu: float = MU_EARTH_KM3_S2) -> CartesianState:
    """Cartesian state of the orbit at an arbitrary epoch."""
    dt = el.epoch.seconds_until(epoch)
    return elements_to_cartesian(propagate_kepler(el, dt, mu), mu)
