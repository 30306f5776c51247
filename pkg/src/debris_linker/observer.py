"""Ground station state in the geocentric inertial frame.

The Earth model is a uniformly rotating sphere: the station sits at a
geocentric latitude/longitude on a sphere of configurable radius and is
carried around the z axis at the constant sidereal rate. The rotation
angle is defined to be zero at ROTATION_REFERENCE_MJD, so longitudes are
inertial longitudes at that instant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import OMEGA_EARTH_RAD_S, ROTATION_REFERENCE_MJD, SECONDS_PER_DAY
from .core import Epoch


@dataclass(frozen=True)
class StationSpec:
    """Radar site: geocentric latitude / longitude (rad) and radius (km)."""

    name: str
    latitude: float
    longitude: float
    radius_km: float = 6370.0

    def __post_init__(self):
        if not abs(self.latitude) <= math.pi / 2.0:
            raise ValueError(f"latitude {self.latitude} outside [-pi/2, pi/2]")
        if not 6300.0 <= self.radius_km <= 6400.0:
            raise ValueError(f"station radius {self.radius_km} km implausible")


@dataclass(frozen=True)
class ObserverState:
    """Inertial station position, velocity, acceleration at an epoch."""

    q: np.ndarray
    q_dot: np.ndarray
    q_ddot: np.ndarray
    epoch: Epoch


def station_state(spec: StationSpec, epoch: Epoch) -> ObserverState:
    """Rigid-rotation kinematics: q_dot = w x q, q_ddot = w x (w x q)."""
    seconds = (epoch.mjd - ROTATION_REFERENCE_MJD) * SECONDS_PER_DAY
    lam = spec.longitude + OMEGA_EARTH_RAD_S * seconds
    cl, sl = math.cos(spec.latitude), math.sin(spec.latitude)
    q = spec.radius_km * np.array([cl * math.cos(lam), cl * math.sin(lam), sl])
    q_dot = OMEGA_EARTH_RAD_S * np.array([-q[1], q[0], 0.0])
    q_ddot = -OMEGA_EARTH_RAD_S**2 * np.array([q[0], q[1], 0.0])
    return ObserverState(q, q_dot, q_ddot, epoch)
