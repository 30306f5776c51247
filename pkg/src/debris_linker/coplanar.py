"""Plane-consistency correction for the angular data of a radar track.

Keplerian motion keeps the geocentric positions of one object in a fixed
plane through the geocenter. Measurement noise breaks that, so this
module fits the best-fitting motion plane to the track's positions and
rotates each line of sight back onto it along a geodesic arc, keeping
every measured range untouched. The correction is purely geometric and
optional; it runs before track interpolation when enabled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import SphericalDirection
from .errors import (
    CollinearPositions,
    InfeasibleCorrection,
    ParallelToNormal,
    PolarSingularity,
)
from .linkage import det3
from .observer import station_state
from .radar_sim import RadarTrack

__all__ = [
    "PlaneFit",
    "fit_plane",
    "rotate_to_plane",
    "correct_track",
]

# two smallest eigenvalues closer than this (relative to the largest)
# leave the plane direction undetermined
EIGENVALUE_GAP_REL = 1e-10

# a line of sight this close to the plane normal cannot be rotated into
# the plane along a well-defined geodesic
SIN_PHI_FLOOR = 1e-12


def _jacobi_eigh(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric 3x3 by cyclic Jacobi rotations.

    Returns (eigenvalues ascending, matching unit eigenvectors as
    columns). Converges quadratically; a handful of sweeps reaches
    machine precision at this size.
    """
    a = np.array(matrix, dtype=float)
    v = np.eye(3)
    for _ in range(30):
        off = math.sqrt(a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2)
        if off < 1e-15 * max(1.0, float(np.max(np.abs(np.diag(a))))):
            break
        for p, q in ((0, 1), (0, 2), (1, 2)):
            if a[p, q] == 0.0:
                continue
            # rotation angle that annihilates a[p,q]
            tau = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
            t = math.copysign(1.0, tau) / (abs(tau)
                                           + math.sqrt(1.0 + tau * tau))
            c = 1.0 / math.sqrt(1.0 + t * t)
            s = t * c
            rot = np.eye(3)
            rot[p, p] = rot[q, q] = c
            rot[p, q] = s
            rot[q, p] = -s
            a = rot.T @ a @ rot
            v = v @ rot
    order = np.argsort(np.diag(a))
    return np.diag(a)[order], v[:, order]


def _cubic_eigenvalues(matrix: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of a symmetric 3x3 via the trigonometric
    solution of the characteristic cubic."""
    off_sq = (matrix[0, 1] ** 2 + matrix[0, 2] ** 2 + matrix[1, 2] ** 2)
    if off_sq == 0.0:
        return np.sort(np.diag(matrix))
    mean = float(np.trace(matrix)) / 3.0
    shifted = matrix - mean * np.eye(3)
    spread = math.sqrt(float(np.sum(shifted * shifted)) / 6.0)
    ratio = det3(shifted / spread) / 2.0
    angle = math.acos(min(1.0, max(-1.0, ratio))) / 3.0
    top = mean + 2.0 * spread * math.cos(angle)
    bottom = mean + 2.0 * spread * math.cos(angle + 2.0 * math.pi / 3.0)
    return np.array([bottom, 3.0 * mean - top - bottom, top])


def _smallest_eigenpair(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(ascending eigenvalues, unit eigenvector of the smallest).

    The eigenvector comes from the cross product of two rows of
    (matrix - lambda_min I), which spans the null direction when the
    eigenvalue is simple. Near-degenerate geometry falls back to Jacobi
    rotations.
    """
    lam = _cubic_eigenvalues(matrix)
    deflated = matrix - lam[0] * np.eye(3)
    crosses = [np.cross(deflated[i], deflated[j])
               for i, j in ((0, 1), (0, 2), (1, 2))]
    norms = [float(np.linalg.norm(c)) for c in crosses]
    best = int(np.argmax(norms))
    row_scale = max(float(np.max(np.abs(deflated))), 1e-300)
    if norms[best] <= 1e-8 * row_scale ** 2:
        values, vectors = _jacobi_eigh(matrix)
        return values, vectors[:, 0]
    return lam, crosses[best] / norms[best]


@dataclass(frozen=True)
class PlaneFit:
    """Best-fit motion plane through the geocenter.

    nu is the unit normal, lambda_min the smallest eigenvalue of the
    position scatter matrix (km^2, equal to the achieved objective
    sum((r_j . nu)^2)), residuals the per-point distances r_j . nu in km.
    """

    nu: np.ndarray
    lambda_min: float
    residuals: np.ndarray


def fit_plane(positions) -> PlaneFit:
    """Fit the plane through the geocenter minimizing sum((r_j . nu)^2).

    The minimizer is the eigenvector of the smallest eigenvalue of
    sum(r_j r_j^T); its sign is chosen so that nu . (r1 x r2) >= 0,
    aligning the normal with the direction of motion. Raises
    CollinearPositions when the two smallest eigenvalues coincide to
    EIGENVALUE_GAP_REL of the largest, which happens when the points
    line up and no single plane is preferred.
    """
    points = [np.asarray(p, dtype=float) for p in positions]
    if len(points) < 3:
        raise ValueError(f"plane fit needs >= 3 positions, got {len(points)}")
    scatter = np.zeros((3, 3))
    for r in points:
        scatter += np.outer(r, r)
    lam, nu = _smallest_eigenpair(scatter)
    lam_min, lam_mid, lam_max = (float(v) for v in lam)
    if lam_mid - lam_min <= EIGENVALUE_GAP_REL * lam_max:
        raise CollinearPositions(
            f"smallest scatter eigenvalues {lam_min:.6e} and {lam_mid:.6e} "
            "are indistinguishable; the positions do not single out a plane")
    if float(nu @ np.cross(points[0], points[1])) < 0.0:
        nu = -nu
    residuals = np.array([float(r @ nu) for r in points])
    # the eigenvalue re-evaluated as the objective at nu: exact to second
    # order in the eigenvector error, where the characteristic cubic only
    # resolves it to rounding in the largest eigenvalue
    return PlaneFit(nu, float(residuals @ residuals), residuals)


def rotate_to_plane(rho: float, e_rho: np.ndarray, q: np.ndarray,
                    nu: np.ndarray) -> np.ndarray:
    """Rotate a range vector onto the plane with unit normal nu.

    The line of sight e_rho turns about the axis normal to the
    (nu, e_rho) plane, sweeping a geodesic arc of radius rho around the
    observer at q until the endpoint q + result lies in the plane. The
    two defining conditions are |result| = rho and
    (q + result) . nu = 0; of the two arc endpoints the nearer one is
    taken, so the line of sight never turns by more than 90 degrees.

    Raises InfeasibleCorrection when the sphere of radius rho around
    the observer misses the plane entirely, and ParallelToNormal when
    e_rho is within SIN_PHI_FLOOR of +-nu, where every rotation
    direction is equally good.
    """
    q_norm = float(np.linalg.norm(q))
    cos_theta = float(nu @ q) / q_norm
    cos_phi = float(nu @ e_rho)
    sin_phi = math.sqrt(max(0.0, 1.0 - cos_phi * cos_phi))
    if sin_phi < SIN_PHI_FLOOR:
        raise ParallelToNormal(
            "line of sight is parallel to the plane normal")
    # the observer sits |q . nu| away from the plane; the rho-sphere
    # around it must reach the plane for an intersection to exist
    radicand = rho * rho - (q_norm * cos_theta) ** 2
    if radicand < 0.0:
        raise InfeasibleCorrection(
            f"range {rho:.3f} km cannot reach the plane "
            f"{abs(q_norm * cos_theta):.3f} km away from the observer")
    reach = math.sqrt(radicand)
    along_los = reach / sin_phi
    along_normal = -(q_norm * cos_theta + cos_phi / sin_phi * reach)
    return along_normal * nu + along_los * e_rho


def _direction_unit(direction: SphericalDirection) -> np.ndarray:
    ca, sa = math.cos(direction.alpha), math.sin(direction.alpha)
    cd, sd = math.cos(direction.delta), math.sin(direction.delta)
    return np.array([cd * ca, cd * sa, sd])


def correct_track(track: RadarTrack) -> RadarTrack:
    """Make a track's lines of sight consistent with a single plane.

    Fits the motion plane to the geocentric positions implied by the
    raw observations, rotates every range vector onto it, and rebuilds
    the observations with the corrected angles. Ranges and epochs are
    preserved exactly. Raises PolarSingularity if a corrected direction
    lands on a celestial pole, where right ascension is undefined.
    """
    states = [station_state(o.station, o.epoch) for o in track.observations]
    units = [_direction_unit(o.direction) for o in track.observations]
    positions = [s.q + o.rho_km * u for s, o, u in
                 zip(states, track.observations, units)]
    plane = fit_plane(positions)
    corrected = []
    for obs, state, unit in zip(track.observations, states, units):
        rotated = rotate_to_plane(obs.rho_km, unit, state.q, plane.nu)
        e_new = rotated / obs.rho_km
        if math.hypot(e_new[0], e_new[1]) < 1e-9:
            raise PolarSingularity(
                "corrected line of sight points at a celestial pole")
        direction = SphericalDirection(math.atan2(e_new[1], e_new[0]),
                                       math.asin(min(1.0, max(-1.0,
                                                              e_new[2]))))
        corrected.append(replace(obs, direction=direction))
    return RadarTrack(tuple(corrected))
