"""Multi-revolution elliptic time-of-flight geometry.

The transfer time between two points on an ellipse depends only on the
semimajor axis, the sum of the endpoint radii, and the chord length, but
that scalar triple leaves four geometrically distinct arcs (and a
revolution count) sharing the same data. The arc taxonomy used here is
by containment: the region bounded by the arc and its chord may hold
neither focus, the attracting focus only, both foci, or the vacant focus
only. Each case fixes the signs of the two auxiliary half-angles and the
time-of-flight formula.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .constants import MU_EARTH_KM3_S2
from .errors import (
    AmbiguousRegion,
    ClampDiagnostic,
    HyperbolicOrbit,
    InfeasibleGeometry,
)

TWO_PI = 2.0 * math.pi

# sin^2 of a half-angle is clamped below 1 so its arcsin derivative stays
# finite while iterating through near-parabolic trial geometry
GAMMA_CEIL = 1.0 - 1e-12


class BranchCase(Enum):
    """Which foci the arc-chord region contains."""

    NEITHER_FOCUS = "neither"
    PRIMARY_FOCUS = "primary"
    BOTH_FOCI = "both"
    VACANT_FOCUS = "vacant"


@dataclass(frozen=True)
class LambertBranch:
    case: BranchCase
    k: int  # whole revolutions completed before the connecting arc

    def __post_init__(self):
        if self.k < 0:
            raise ValueError(f"revolution count {self.k} < 0")


@dataclass(frozen=True)
class LambertGeometry:
    """Scalar data of a two-point transfer: radii, chord, ellipse size."""

    r1: float
    r2: float
    d: float
    a: float
    beta0: float   # principal half-angle pair, both in [0, pi]
    gamma0: float


def beta_gamma(a: float, r_sum: float, d: float) -> tuple[float, float]:
    """Principal angle pair of the transfer triangle on an ellipse of size a.

    Raises InfeasibleGeometry naming the violated inequality: the chord
    can be at most the radii sum, and the ellipse must be large enough to
    reach both endpoints.
    """
    if d < 0.0 or r_sum <= 0.0 or a <= 0.0:
        raise InfeasibleGeometry(
            f"non-positive transfer data: a={a}, r_sum={r_sum}, d={d}")
    if d > r_sum:
        raise InfeasibleGeometry(f"chord {d:.6g} km exceeds radii sum {r_sum:.6g} km")
    if 4.0 * a < r_sum + d:
        raise InfeasibleGeometry(
            f"ellipse too small: 4a={4.0 * a:.6g} km < r_sum+d={r_sum + d:.6g} km")
    beta0 = 2.0 * math.asin(math.sqrt((r_sum + d) / (4.0 * a)))
    gamma0 = 2.0 * math.asin(math.sqrt((r_sum - d) / (4.0 * a)))
    return beta0, gamma0


def lambert_geometry(r1: float, r2: float, d: float, a: float) -> LambertGeometry:
    beta0, gamma0 = beta_gamma(a, r1 + r2, d)
    return LambertGeometry(r1, r2, d, a, beta0, gamma0)


def gammas_from_energy(energy: float, r_sum: float, d: float,
                       mu: float = MU_EARTH_KM3_S2) -> tuple[float, float, bool]:
    """sin^2 half-angles driven by the orbital energy unknown.

    Returns (gamma_plus, gamma_minus, clamped). Values outside [0, 1) are
    clamped with a ClampDiagnostic warning instead of failing: trial
    energies during iteration may transiently imply a too-small ellipse.
    """
    gp = -(r_sum + d) * energy / (2.0 * mu)
    gm = -(r_sum - d) * energy / (2.0 * mu)
    clamped = False
    if not 0.0 <= gp <= GAMMA_CEIL:
        gp = min(max(gp, 0.0), GAMMA_CEIL)
        clamped = True
    if not 0.0 <= gm <= GAMMA_CEIL:
        gm = min(max(gm, 0.0), GAMMA_CEIL)
        clamped = True
    if clamped:
        warnings.warn("transfer half-angle sine clamped to [0, 1)",
                      ClampDiagnostic, stacklevel=2)
    return gp, gm, clamped


def geometry_from_energy(r1: float, r2: float, d: float, energy: float,
                         mu: float = MU_EARTH_KM3_S2) -> LambertGeometry:
    """Build the transfer geometry from an energy instead of a size."""
    if energy >= 0.0:
        raise HyperbolicOrbit(f"energy {energy:.6g} km^2/s^2 is not elliptic")
    if d > r1 + r2:
        raise InfeasibleGeometry(
            f"chord {d:.6g} km exceeds radii sum {r1 + r2:.6g} km")
    a = -mu / (2.0 * energy)
    gp, gm, _ = gammas_from_energy(energy, r1 + r2, d, mu)
    beta0 = 2.0 * math.asin(math.sqrt(gp))
    gamma0 = 2.0 * math.asin(math.sqrt(gm))
    return LambertGeometry(r1, r2, d, a, beta0, gamma0)


def branch_angles(case: BranchCase, beta0: float,
                  gamma0: float) -> tuple[float, float]:
    """Signed half-angle pair for one containment case."""
    s_beta, s_gamma = branch_signs(case)
    beta = beta0 if s_beta > 0 else TWO_PI - beta0
    return beta, s_gamma * gamma0


def branch_signs(case: BranchCase) -> tuple[int, int]:
    """Derivative signs of (beta, gamma) w.r.t. the principal pair."""
    s_beta = 1 if case in (BranchCase.NEITHER_FOCUS, BranchCase.PRIMARY_FOCUS) else -1
    s_gamma = 1 if case in (BranchCase.NEITHER_FOCUS, BranchCase.VACANT_FOCUS) else -1
    return s_beta, s_gamma


def time_of_flight(geom: LambertGeometry, branch: LambertBranch,
                   mu: float = MU_EARTH_KM3_S2) -> float:
    """Transfer time in seconds along the branch's arc."""
    n = math.sqrt(mu / geom.a**3)
    beta, gamma = branch_angles(branch.case, geom.beta0, geom.gamma0)
    phase = beta - gamma - (math.sin(beta) - math.sin(gamma))
    return (phase + TWO_PI * branch.k) / n


def lambert_residual(geom: LambertGeometry, branch: LambertBranch, dt: float,
                     mu: float = MU_EARTH_KM3_S2) -> float:
    """Phase mismatch (rad) between the branch's arc and the elapsed time.

    Zero exactly when dt is the branch's transfer time.
    """
    n = math.sqrt(mu / geom.a**3)
    beta, gamma = branch_angles(branch.case, geom.beta0, geom.gamma0)
    return (beta - gamma - (math.sin(beta) - math.sin(gamma))
            + TWO_PI * branch.k - n * dt)


def eccentricity_vector(r: np.ndarray, v: np.ndarray,
                        mu: float = MU_EARTH_KM3_S2) -> np.ndarray:
    """Laplace-Lenz vector over mu: points at perigee with magnitude e."""
    r_norm = float(np.linalg.norm(r))
    return ((float(v @ v) - mu / r_norm) * r - float(r @ v) * v) / mu


def arc_eccentric_anomalies(r1_vec: np.ndarray, r2_vec: np.ndarray,
                            c: np.ndarray, a: float,
                            e_vec: np.ndarray) -> tuple[float, float, float]:
    """(E1, E2, dE) with dE = E2 - E1 wrapped to [0, 2pi).

    The perigee axis comes from e_vec; a near-circular orbit falls back to
    measuring anomalies from the first position (differences are all the
    classification needs there).
    """
    c_hat = c / np.linalg.norm(c)
    ecc = float(np.linalg.norm(e_vec))
    if ecc < 1e-8:
        p_hat = r1_vec / np.linalg.norm(r1_vec)
        ecc = 0.0
    else:
        p_hat = e_vec / ecc
    q_hat = np.cross(c_hat, p_hat)
    b = a * math.sqrt(max(0.0, 1.0 - ecc * ecc))

    def anomaly(r_vec):
        x = float(r_vec @ p_hat)
        y = float(r_vec @ q_hat)
        return math.atan2(y / b, x / a + ecc)

    e1 = anomaly(r1_vec)
    e2 = anomaly(r2_vec)
    de = (e2 - e1) % TWO_PI
    return e1, e2, de


def count_revolutions(mean_motion: float, dt: float, delta_e: float) -> int:
    """Whole revolutions between two epochs from the wrapped anomaly gap.

    The mean-anomaly sweep differs from the eccentric-anomaly sweep by at
    most 2e < 2 rad, so rounding recovers the revolution count exactly.
    """
    return max(0, round((mean_motion * dt - delta_e) / TWO_PI))


def classify_branch(r1_vec: np.ndarray, r2_vec: np.ndarray, c: np.ndarray,
                    a: float, e_vec: np.ndarray, k: int) -> LambertBranch:
    """Containment case of the actual arc from epoch-1 to epoch-2.

    Tests which side of the chord the arc midpoint and each focus fall on;
    a focus within 1e-9 chord lengths of the chord line, or an arc of
    (near-)zero sweep, has no well-defined region and raises
    AmbiguousRegion.
    """
    c_hat = c / np.linalg.norm(c)
    ecc = float(np.linalg.norm(e_vec))
    e1, _, de = arc_eccentric_anomalies(r1_vec, r2_vec, c, a, e_vec)
    if de < 1e-9 or TWO_PI - de < 1e-9:
        raise AmbiguousRegion(f"arc sweep {de:.3e} rad has no interior")

    chord = r2_vec - r1_vec
    d = float(np.linalg.norm(chord))
    m = np.cross(c_hat, chord / d)

    if ecc < 1e-8:
        p_hat = r1_vec / np.linalg.norm(r1_vec)
        ecc_eff = 0.0
    else:
        p_hat = e_vec / ecc
        ecc_eff = ecc
    q_hat = np.cross(c_hat, p_hat)
    b = a * math.sqrt(max(0.0, 1.0 - ecc_eff * ecc_eff))
    e_mid = e1 + 0.5 * de
    arc_mid = (a * (math.cos(e_mid) - ecc_eff) * p_hat
               + b * math.sin(e_mid) * q_hat)

    def side(point):
        return float(m @ (point - r1_vec))

    s_arc = side(arc_mid)
    s_primary = side(np.zeros(3))
    s_vacant = side(-2.0 * a * e_vec)
    if abs(s_primary) < 1e-9 * d or abs(s_vacant) < 1e-9 * d:
        raise AmbiguousRegion("a focus lies on the chord line")

    primary_in = (s_primary > 0.0) == (s_arc > 0.0)
    vacant_in = (s_vacant > 0.0) == (s_arc > 0.0)
    if primary_in and vacant_in:
        case = BranchCase.BOTH_FOCI
    elif primary_in:
        case = BranchCase.PRIMARY_FOCUS
    elif vacant_in:
        case = BranchCase.VACANT_FOCUS
    else:
        case = BranchCase.NEITHER_FOCUS
    return LambertBranch(case, k)
