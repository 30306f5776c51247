"""Radar track simulation, noise injection, and attributable interpolation.

A track is a short, evenly spaced series of radar returns (range plus
topocentric right ascension / declination). Interpolation compresses a
track into an attributable: mean epoch and angles plus a least-squares
quadratic model of range giving (rho, rho_dot, rho_ddot) at the mean epoch.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .constants import MU_EARTH_KM3_S2, SECONDS_PER_DAY
from .core import (
    Epoch,
    KeplerianElements,
    SphericalDirection,
    direction_frame,
    state_at,
    wrap_two_pi,
)
from .errors import BelowHorizon, TooFewObservations
from .observer import ObserverState, StationSpec, station_state


@dataclass(frozen=True)
class RadarObservation:
    """One radar return from a station."""

    epoch: Epoch
    rho_km: float
    direction: SphericalDirection
    station: StationSpec


@dataclass(frozen=True)
class RadarTrack:
    """Evenly spaced observations from a single station.

    Nominal tracks carry >= 4 points; 3 are tolerated so downstream code
    can warn rather than refuse.
    """

    observations: tuple[RadarObservation, ...]

    def __post_init__(self):
        obs = tuple(self.observations)
        object.__setattr__(self, "observations", obs)
        if len(obs) < 3:
            raise TooFewObservations(f"track has {len(obs)} observations, need >= 3")
        names = {o.station.name for o in obs}
        if len(names) != 1:
            raise ValueError(f"track mixes stations {sorted(names)}")
        gaps = [obs[i].epoch.seconds_until(obs[i + 1].epoch) for i in range(len(obs) - 1)]
        if any(g <= 0.0 for g in gaps):
            raise ValueError("observations must be strictly time-ordered")
        # epochs are day-valued floats, so each gap carries up to one ulp of
        # the day number (~0.6 us near MJD 54127); the evenness guard is
        # about catching wrong cadences, not sub-us metrology
        tol = 1e-9 + 2.0 * math.ulp(obs[-1].epoch.mjd) * SECONDS_PER_DAY
        if max(gaps) - min(gaps) > tol:
            raise ValueError(f"uneven observation spacing: {gaps}")

    @property
    def station(self) -> StationSpec:
        return self.observations[0].station

    def __len__(self) -> int:
        return len(self.observations)


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian noise levels per channel. Angles in degrees, range in km.

    Sampling uses numpy's default_rng (PCG64) seeded with `seed`; draws are
    taken in the fixed order alpha-row, delta-row, rho-row (n samples each)
    so a given seed always maps to the same noise table. A zero sigma
    leaves its channel bit-identical.
    """

    sigma_alpha_deg: float = 0.0
    sigma_delta_deg: float = 0.0
    sigma_rho_km: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class Attributable:
    """Track summary at the mean epoch: angles and a quadratic range model."""

    t_bar: Epoch
    alpha: float
    delta: float
    rho_km: float
    rho_dot_km_s: float
    rho_ddot_km_s2: float
    observer: ObserverState


def simulate_track(el: KeplerianElements, station: StationSpec, t_bar: Epoch,
                   n: int = 4, dt_seconds: float = 10.0,
                   mu: float = MU_EARTH_KM3_S2) -> RadarTrack:
    """Generate an exact track of n returns centered on t_bar.

    Epochs are t_bar + (j - (n-1)/2)*dt. Raises BelowHorizon if the object
    drops below the station's local horizon at any epoch.
    """
    obs = []
    for j in range(n):
        epoch = t_bar.plus_seconds((j - (n - 1) / 2.0) * dt_seconds)
        sat = state_at(el, epoch, mu)
        site = station_state(station, epoch)
        d = sat.r - site.q
        rho = float(np.linalg.norm(d))
        if float(d @ site.q) <= 0.0:
            raise BelowHorizon(f"object below horizon at MJD {epoch.mjd:.6f}")
        alpha = wrap_two_pi(math.atan2(d[1], d[0]))
        delta = math.asin(d[2] / rho)
        obs.append(RadarObservation(epoch, rho, SphericalDirection(alpha, delta),
                                    station))
    return RadarTrack(tuple(obs))


def add_noise(track: RadarTrack, noise: NoiseSpec) -> RadarTrack:
    """Return a copy of the track with Gaussian noise applied per channel."""
    n = len(track)
    rng = np.random.default_rng(noise.seed)
    draws = rng.normal(size=(3, n))
    out = []
    for j, o in enumerate(track.observations):
        alpha, delta, rho = o.direction.alpha, o.direction.delta, o.rho_km
        if noise.sigma_alpha_deg > 0.0:
            alpha += math.radians(noise.sigma_alpha_deg) * draws[0, j]
        if noise.sigma_delta_deg > 0.0:
            delta += math.radians(noise.sigma_delta_deg) * draws[1, j]
        if noise.sigma_rho_km > 0.0:
            rho += noise.sigma_rho_km * draws[2, j]
        out.append(replace(o, rho_km=rho, direction=SphericalDirection(alpha, delta)))
    return RadarTrack(tuple(out))


def _circular_mean(angles: list[float]) -> float:
    """Arithmetic mean after unwrapping each angle to within pi of the last."""
    unwrapped = [angles[0]]
    for a in angles[1:]:
        prev = unwrapped[-1]
        k = round((prev - a) / (2.0 * math.pi))
        unwrapped.append(a + 2.0 * math.pi * k)
    return wrap_two_pi(sum(unwrapped) / len(unwrapped))


def interpolate_track(track: RadarTrack) -> Attributable:
    """Compress a track to an attributable at the mean epoch.

    Angles are averaged (right ascension on the circle); the range series
    is fit with a least-squares quadratic in t - t_bar whose value, slope,
    and curvature give rho, rho_dot, rho_ddot. Three points are accepted
    with a warning (the quadratic is then an exact fit with no redundancy).
    """
    n = len(track)
    if n < 3:
        raise TooFewObservations(f"{n} observations cannot determine rho_ddot")
    if n == 3:
        warnings.warn("3-point track: range quadratic has no redundancy",
                      stacklevel=2)
    t_bar = Epoch(sum(o.epoch.mjd for o in track.observations) / n)
    alpha = _circular_mean([o.direction.alpha for o in track.observations])
    delta = sum(o.direction.delta for o in track.observations) / n
    ts = np.array([t_bar.seconds_until(o.epoch) for o in track.observations])
    rhos = np.array([o.rho_km for o in track.observations])
    c0, c1, c2 = np.polynomial.polynomial.polyfit(ts, rhos, 2)
    return Attributable(
        t_bar=t_bar,
        alpha=alpha,
        delta=delta,
        rho_km=float(c0),
        rho_dot_km_s=float(c1),
        rho_ddot_km_s2=2.0 * float(c2),
        observer=station_state(track.station, t_bar),
    )


@dataclass(frozen=True)
class TruthObservation:
    """Exact observables and their rates; the simulation-side oracle."""

    epoch: Epoch
    rho_km: float
    rho_dot_km_s: float
    rho_ddot_km_s2: float
    direction: SphericalDirection
    alpha_dot: float
    delta_dot: float
    xi: float    # rho * alpha_dot * cos(delta), km/s
    zeta: float  # rho * delta_dot, km/s
    observer: ObserverState
    r: np.ndarray
    v: np.ndarray


def analytic_observation(el: KeplerianElements, station: StationSpec,
                         epoch: Epoch,
                         mu: float = MU_EARTH_KM3_S2) -> TruthObservation:
    """Closed-form observables from the true orbit, no fitting involved.

    rho_dot and rho_ddot come from differentiating |r - q| twice, with
    r_ddot = -mu r / |r|^3 and the rigid-rotation station acceleration.
    """
    sat = state_at(el, epoch, mu)
    site = station_state(station, epoch)
    d = sat.r - site.q
    d_dot = sat.v - site.q_dot
    d_ddot = -mu * sat.r / np.linalg.norm(sat.r) ** 3 - site.q_ddot
    rho = float(np.linalg.norm(d))
    rho_dot = float(d @ d_dot) / rho
    rho_ddot = (float(d_dot @ d_dot) + float(d @ d_ddot) - rho_dot**2) / rho
    alpha = wrap_two_pi(math.atan2(d[1], d[0]))
    delta = math.asin(d[2] / rho)
    direction = SphericalDirection(alpha, delta)
    frame = direction_frame(direction)
    xi = float(d_dot @ frame.e_alpha)
    zeta = float(d_dot @ frame.e_delta)
    cd = math.cos(delta)
    return TruthObservation(
        epoch=epoch, rho_km=rho, rho_dot_km_s=rho_dot, rho_ddot_km_s2=rho_ddot,
        direction=direction, alpha_dot=xi / (rho * cd), delta_dot=zeta / rho,
        xi=xi, zeta=zeta, observer=site, r=sat.r, v=sat.v,
    )


def analytic_attributable(el: KeplerianElements, station: StationSpec,
                          t_bar: Epoch,
                          mu: float = MU_EARTH_KM3_S2) -> Attributable:
    """Exact attributable at t_bar (no sampling, no fit)."""
    tr = analytic_observation(el, station, t_bar, mu)
    return Attributable(t_bar, tr.direction.alpha, tr.direction.delta,
                        tr.rho_km, tr.rho_dot_km_s, tr.rho_ddot_km_s2,
                        tr.observer)


def with_exact_range(att: Attributable, el: KeplerianElements,
                     station: StationSpec,
                     mu: float = MU_EARTH_KM3_S2) -> Attributable:
    """Replace the fitted range model with truth; angles stay untouched.

    Mirrors the protocol where range and its derivatives are trusted at
    full accuracy while angles come from the (noisy) track means.
    """
    exact = analytic_observation(el, station, att.t_bar, mu)
    return replace(att, rho_km=exact.rho_km, rho_dot_km_s=exact.rho_dot_km_s,
                   rho_ddot_km_s2=exact.rho_ddot_km_s2)


# --- plain-text track files ---
#
# Column order (one observation per line, whitespace-delimited):
#   mjd  rho_km  alpha_deg  delta_deg  station_id
# A structured header comment carries the station definition so files are
# self-contained. Values use repr-precision (17 significant digits).

def write_track(path, track: RadarTrack) -> None:
    st = track.station
    lines = [
        "# radar track: mjd rho_km alpha_deg delta_deg station_id",
        f"# station {st.name} lat_deg={math.degrees(st.latitude)!r} "
        f"lon_deg={math.degrees(st.longitude)!r} radius_km={st.radius_km!r}",
    ]
    for o in track.observations:
        lines.append(
            f"{o.epoch.mjd!r} {o.rho_km!r} {math.degrees(o.direction.alpha)!r} "
            f"{math.degrees(o.direction.delta)!r} {st.name}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_track(path) -> RadarTrack:
    station = None
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if parts and parts[0] == "station":
                    fields = dict(p.split("=", 1) for p in parts[2:])
                    station = StationSpec(
                        name=parts[1],
                        latitude=math.radians(float(fields["lat_deg"])),
                        longitude=math.radians(float(fields["lon_deg"])),
                        radius_km=float(fields["radius_km"]),
                    )
                continue
            rows.append(line.split())
    if station is None:
        raise ValueError(f"{path}: no station header found")
    obs = tuple(
        RadarObservation(
            Epoch(float(mjd)), float(rho),
            SphericalDirection(math.radians(float(a)), math.radians(float(d))),
            station,
        )
        for mjd, rho, a, d, _sid in rows
    )
    return RadarTrack(obs)
