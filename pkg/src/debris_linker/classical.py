"""Baseline orbit determination methods used for comparison runs.

Two classical alternatives to the angle-correcting linkage solver live
here. Gibbs' method turns three positions from a single pass into the
velocity at the middle epoch. The Keplerian-integrals method links two
radar tracks through conservation of angular momentum and energy alone,
without correcting the measured angles. Both feed the same reporting
types as the full solver so comparison tables can treat every method
uniformly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    MU_EARTH_KM3_S2,
    CartesianState,
    Epoch,
    cartesian_to_elements,
)
from .errors import CollinearPositions, DegenerateTimes
from .lambert import eccentricity_vector
from .linkage import (
    MIN_EPOCH_GAP_S,
    LinkageSolution,
    orbit_pair_from_x,
    quadratic_system,
    solve_transverse_quadratic,
)
from .observer import station_state
from .radar_sim import Attributable, RadarTrack
from .twobody_integrals import DeltaCorrections, epoch_geometry

__all__ = [
    "GibbsInput",
    "gibbs_velocity",
    "gibbs_orbit_from_track",
    "keplerian_integrals_link",
]

# directions closer than this are treated as the same line of sight
COLLINEARITY_TOL_RAD = 1e-9


@dataclass(frozen=True)
class GibbsInput:
    """Three geocentric positions of one object with their epochs.

    Positions are km vectors; epochs must be strictly increasing. The
    three points are required to define a triangle: any pair closer than
    COLLINEARITY_TOL_RAD in direction leaves the orbit plane undefined.
    """

    r1: np.ndarray
    r2: np.ndarray
    r3: np.ndarray
    t1: Epoch
    t2: Epoch
    t3: Epoch

    def __post_init__(self):
        for name in ("r1", "r2", "r3"):
            vec = np.asarray(getattr(self, name), dtype=float)
            if vec.shape != (3,):
                raise ValueError(f"{name} must be a 3-vector, got {vec.shape}")
            if not np.linalg.norm(vec) > 0.0:
                raise ValueError(f"{name} has zero length")
            object.__setattr__(self, name, vec)
        pairs = ((self.r1, self.r2), (self.r1, self.r3), (self.r2, self.r3))
        for a, b in pairs:
            sin_angle = (np.linalg.norm(np.cross(a, b))
                         / (np.linalg.norm(a) * np.linalg.norm(b)))
            if sin_angle < COLLINEARITY_TOL_RAD:
                raise CollinearPositions(
                    f"two positions subtend {sin_angle:.2e} rad; the plane "
                    "of motion is undetermined")

    def coplanarity_angle(self) -> float:
        """Angle in radians between r1 x r3 and r2.

        Exactly pi/2 when the three points are coplanar with the origin;
        the deviation from pi/2 measures how far the middle point sits
        off the plane of the outer two. Diagnostic only.
        """
        normal = np.cross(self.r1, self.r3)
        cosine = float(normal @ self.r2) / (np.linalg.norm(normal)
                                            * np.linalg.norm(self.r2))
        return math.acos(min(1.0, max(-1.0, cosine)))


def gibbs_velocity(inputs: GibbsInput,
                   mu: float = MU_EARTH_KM3_S2) -> np.ndarray:
    """Velocity at the middle epoch from three same-pass positions.

    A weighted difference of the three position vectors whose
    coefficients combine the finite-difference derivative with a
    two-body gravity correction; the truncation error scales as the
    fourth power of the observation spacing. Returns km/s.
    """
    t21 = inputs.t1.seconds_until(inputs.t2)
    t32 = inputs.t2.seconds_until(inputs.t3)
    t31 = inputs.t1.seconds_until(inputs.t3)
    if 0.0 in (t21, t32, t31):
        raise DegenerateTimes(
            f"repeated epochs in (t21, t32, t31) = ({t21}, {t32}, {t31}) s")
    denominator = t21 * t32 * t31
    diff_1 = t32 * t32 / denominator
    diff_3 = t21 * t21 / denominator
    diff_2 = diff_1 - diff_3
    grav_1 = mu * t32 / 12.0
    grav_3 = mu * t21 / 12.0
    grav_2 = grav_1 - grav_3
    d1 = diff_1 + grav_1 / np.linalg.norm(inputs.r1) ** 3
    d2 = diff_2 + grav_2 / np.linalg.norm(inputs.r2) ** 3
    d3 = diff_3 + grav_3 / np.linalg.norm(inputs.r3) ** 3
    return -d1 * inputs.r1 + d2 * inputs.r2 + d3 * inputs.r3


def _geocentric_position(observation) -> np.ndarray:
    d = observation.direction
    los = np.array([math.cos(d.delta) * math.cos(d.alpha),
                    math.cos(d.delta) * math.sin(d.alpha),
                    math.sin(d.delta)])
    q = station_state(observation.station, observation.epoch).q
    return q + observation.rho_km * los


def gibbs_orbit_from_track(track: RadarTrack,
                           indices: tuple[int, int, int] | None = None,
                           mu: float = MU_EARTH_KM3_S2) -> CartesianState:
    """Preliminary orbit from three observations of one radar track.

    Each selected observation is converted to a geocentric position
    (station position plus range times line of sight) and the three
    positions go through gibbs_velocity. By default the first, second
    and fourth points are used, which stretches the spacing without
    giving up the fourth-order error term; a 3-point track falls back
    to all of its points. Returns the Cartesian state at the middle
    selected epoch.
    """
    if indices is None:
        indices = (0, 1, 3) if len(track) >= 4 else (0, 1, 2)
    if max(indices) >= len(track):
        raise ValueError(
            f"track has {len(track)} observations, cannot take {indices}")
    obs = [track.observations[i] for i in indices]
    inputs = GibbsInput(*(_geocentric_position(o) for o in obs),
                        *(o.epoch for o in obs))
    v2 = gibbs_velocity(inputs, mu)
    return CartesianState(inputs.r2, v2, inputs.t2)


def keplerian_integrals_link(att1: Attributable, att2: Attributable,
                             mu: float = MU_EARTH_KM3_S2
                             ) -> list[LinkageSolution]:
    """Link two attributables by angular momentum and energy alone.

    Solves the same quadratically-reduced system as the full method but
    with the measured angles taken at face value, so no Newton iteration
    happens and the answer keeps whatever angular error the tracks
    carry. At most two orbits come back. residual_norm holds the
    discrimination score |(L1 - L2) . v2|, the projection of the
    Laplace-Lenz mismatch on the second velocity; the solution with the
    smaller score is listed first and flagged preferred.

    Raises NoRealRoot when the tracks admit no energy-consistent
    linkage and SingularGeometry when the reduction matrix degenerates.
    """
    gap = att1.t_bar.seconds_until(att2.t_bar)
    if gap < MIN_EPOCH_GAP_S:
        raise DegenerateTimes(
            f"track epochs are {gap:.1f} s apart; linkage needs at least "
            f"{MIN_EPOCH_GAP_S:.0f} s")
    g1 = epoch_geometry(att1, mu=mu)
    g2 = epoch_geometry(att2, mu=mu)
    roots = solve_transverse_quadratic(quadratic_system(g1, g2))
    scored = []
    for x in roots:
        state1, state2, el1, el2, consistency = orbit_pair_from_x(
            g1, g2, x, mu)
        lenz_1 = eccentricity_vector(state1.r, state1.v, mu)
        lenz_2 = eccentricity_vector(state2.r, state2.v, mu)
        score = abs(float((lenz_1 - lenz_2) @ state2.v))
        scored.append((score, x, state1, state2, el1, el2, consistency))
    scored.sort(key=lambda item: item[0])
    solutions = []
    for rank, (score, x, state1, state2, el1, el2, consistency) in \
            enumerate(scored):
        consistency = dict(consistency)
        consistency["lenz_score"] = score
        consistency["preferred"] = rank == 0
        solutions.append(LinkageSolution(
            delta=DeltaCorrections(0.0, 0.0, 0.0, 0.0), x=x,
            state1=state1, state2=state2, elements1=el1, elements2=el2,
            branch=None, iterations=0, residual_norm=score, method="ki",
            consistency=consistency, clamp_events=0, trace=()))
    return solutions
