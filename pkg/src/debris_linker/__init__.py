"""Preliminary orbits of Earth satellites from pairs of short radar tracks.

The library links two attributables (compressed radar tracks) into one
orbit by solving the shared two-body integrals for the unknown transverse
velocities while correcting the noisy angles, and benchmarks that linkage
against velocity-from-three-positions and integrals-only baselines.
"""

from .classical import (
    GibbsInput,
    gibbs_orbit_from_track,
    gibbs_velocity,
    keplerian_integrals_link,
)
from .constants import MU_EARTH_KM3_S2, OMEGA_EARTH_RAD_S
from .coplanar import PlaneFit, correct_track, fit_plane, rotate_to_plane
from .core import (
    CartesianState,
    Epoch,
    KeplerianElements,
    SphericalDirection,
    cartesian_to_elements,
    elements_to_cartesian,
    propagate_kepler,
)
from .linkage import (
    METHODS,
    BranchFailure,
    LinkageSolution,
    NewtonOptions,
    newton_solve,
)
from .observer import StationSpec, station_state
from .radar_sim import (
    Attributable,
    NoiseSpec,
    RadarTrack,
    add_noise,
    interpolate_track,
    simulate_track,
)

__version__ = "0.1.0"

__all__ = [
    "MU_EARTH_KM3_S2",
    "OMEGA_EARTH_RAD_S",
    "Epoch",
    "SphericalDirection",
    "KeplerianElements",
    "CartesianState",
    "cartesian_to_elements",
    "elements_to_cartesian",
    "propagate_kepler",
    "StationSpec",
    "station_state",
    "RadarTrack",
    "NoiseSpec",
    "Attributable",
    "simulate_track",
    "add_noise",
    "interpolate_track",
    "METHODS",
    "NewtonOptions",
    "BranchFailure",
    "LinkageSolution",
    "newton_solve",
    "GibbsInput",
    "gibbs_velocity",
    "gibbs_orbit_from_track",
    "keplerian_integrals_link",
    "PlaneFit",
    "fit_plane",
    "rotate_to_plane",
    "correct_track",
    "__version__",
]
