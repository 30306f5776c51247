"""Track simulation, noise injection, and attributable compression."""

from __future__ import annotations

import math

import numpy as np
import pytest

from debris_linker.core import Epoch, SphericalDirection, direction_frame, state_at
from debris_linker.errors import BelowHorizon, TooFewObservations
from debris_linker.observer import StationSpec
from debris_linker.radar_sim import (
    Attributable,
    NoiseSpec,
    RadarObservation,
    RadarTrack,
    add_noise,
    analytic_observation,
    interpolate_track,
    read_track,
    simulate_track,
    with_exact_range,
    write_track,
)

from conftest import T_BAR_1, T_CULMINATION


def test_track_inverts_to_propagated_positions(leo_elements, radar_site):
    track = simulate_track(leo_elements, radar_site, T_BAR_1, n=4, dt_seconds=10.0)
    assert len(track) == 4
    span = track.observations[0].epoch.seconds_until(track.observations[-1].epoch)
    # day-valued epochs quantize to ~0.6 us here
    assert abs(span - 30.0) < 2e-6
    for o in track.observations:
        e_rho = direction_frame(o.direction).e_rho
        site_q = analytic_observation(leo_elements, radar_site, o.epoch).observer.q
        rebuilt = site_q + o.rho_km * e_rho
        truth = state_at(leo_elements, o.epoch).r
        assert np.max(np.abs(rebuilt - truth)) < 1e-10


def test_track_mean_epoch_is_center(leo_elements, radar_site):
    att = interpolate_track(simulate_track(leo_elements, radar_site, T_BAR_1))
    assert abs(att.t_bar.seconds_until(T_BAR_1)) < 1e-5


def test_below_horizon_is_rejected(leo_elements):
    # station on the far side of the planet from the benchmark pass
    far = StationSpec("far", latitude=math.radians(16.0),
                      longitude=math.radians(171.0))
    with pytest.raises(BelowHorizon):
        simulate_track(leo_elements, far, T_BAR_1)


def _flat_track(n: int, alpha: float = 1.0, delta: float = 0.3,
                rho: float = 1500.0, dt: float = 1.0) -> RadarTrack:
    st = StationSpec("syn", latitude=0.2, longitude=0.5)
    t0 = Epoch(54127.0)
    return RadarTrack(tuple(
        RadarObservation(t0.plus_seconds(j * dt), rho,
                         SphericalDirection(alpha, delta), st)
        for j in range(n)
    ))


def test_noise_is_seed_deterministic_and_sparse():
    clean = _flat_track(8)
    spec = NoiseSpec(sigma_alpha_deg=0.2, sigma_delta_deg=0.1,
                     sigma_rho_km=0.0, seed=42)
    a = add_noise(clean, spec)
    b = add_noise(clean, spec)
    for oa, ob, oc in zip(a.observations, b.observations, clean.observations):
        assert oa.direction.alpha == ob.direction.alpha
        assert oa.direction.delta == ob.direction.delta
        # zero-sigma channel must be untouched, not just close
        assert oa.rho_km == oc.rho_km
        assert oa.direction.alpha != oc.direction.alpha
    identity = add_noise(clean, NoiseSpec(seed=7))
    for oi, oc in zip(identity.observations, clean.observations):
        assert oi.direction.alpha == oc.direction.alpha
        assert oi.direction.delta == oc.direction.delta
        assert oi.rho_km == oc.rho_km


def test_noise_empirical_std_matches_sigma():
    clean = _flat_track(10_000)
    noisy = add_noise(clean, NoiseSpec(sigma_alpha_deg=0.2, sigma_delta_deg=0.2,
                                       sigma_rho_km=0.05, seed=3))
    d_alpha = np.array([
        o.direction.alpha - c.direction.alpha
        for o, c in zip(noisy.observations, clean.observations)
    ])
    d_rho = np.array([
        o.rho_km - c.rho_km
        for o, c in zip(noisy.observations, clean.observations)
    ])
    assert abs(np.std(d_alpha) - math.radians(0.2)) < 0.05 * math.radians(0.2)
    assert abs(np.std(d_rho) - 0.05) < 0.05 * 0.05


def test_fit_reproduces_exact_quadratic_range():
    st = StationSpec("syn", latitude=0.1, longitude=1.0)
    t0 = Epoch(54127.0)
    c0, c1, c2 = 1800.0, -2.75, 0.0065
    epochs = [t0.plus_seconds(j * 10.0) for j in range(5)]
    # evaluate the polynomial at the realized (quantized) epochs so the fit
    # sees exactly quadratic data
    t_bar = Epoch(sum(e.mjd for e in epochs) / len(epochs))
    obs = []
    for e in epochs:
        tau = t_bar.seconds_until(e)
        obs.append(RadarObservation(
            e, c0 + c1 * tau + c2 * tau * tau,
            SphericalDirection(0.8, -0.2), st))
    att = interpolate_track(RadarTrack(tuple(obs)))
    assert abs(att.rho_km - c0) < 1e-12 * c0
    assert abs(att.rho_dot_km_s - c1) < 1e-12
    assert abs(att.rho_ddot_km_s2 - 2.0 * c2) < 1e-12


def test_mean_alpha_respects_wraparound():
    st = StationSpec("syn", latitude=0.0, longitude=0.0)
    t0 = Epoch(54127.0)
    two_pi = 2.0 * math.pi
    alphas = [two_pi - 0.009, two_pi - 0.003, 0.003, 0.009]
    obs = tuple(
        RadarObservation(t0.plus_seconds(j * 10.0), 2000.0,
                         SphericalDirection(a, 0.4), st)
        for j, a in enumerate(alphas)
    )
    att = interpolate_track(RadarTrack(obs))
    # short-arc mean sits at the wrap point, nowhere near pi
    assert min(att.alpha, two_pi - att.alpha) < 1e-9


def test_fitted_range_rate_matches_analytic(leo_elements, precision_site):
    att = interpolate_track(
        simulate_track(leo_elements, precision_site, T_CULMINATION))
    truth = analytic_observation(leo_elements, precision_site, T_CULMINATION)
    assert abs(att.rho_dot_km_s - truth.rho_dot_km_s) < 2e-4


def test_mean_alpha_unbiased_at_zero_noise(leo_elements, precision_site):
    att = interpolate_track(
        simulate_track(leo_elements, precision_site, T_CULMINATION))
    truth = analytic_observation(leo_elements, precision_site, T_CULMINATION)
    bias = (att.alpha - truth.direction.alpha + math.pi) % (2 * math.pi) - math.pi
    assert abs(bias) < 1e-5


def test_fitted_range_acceleration_scale(leo_elements, precision_site):
    # LEO radar geometry: rho_ddot of order 1e-2 km/s^2
    att = interpolate_track(
        simulate_track(leo_elements, precision_site, T_CULMINATION))
    assert 1.34e-3 < abs(att.rho_ddot_km_s2) < 1.34e-1


def test_exact_range_protocol_keeps_angles(leo_elements, precision_site):
    att = interpolate_track(
        simulate_track(leo_elements, precision_site, T_CULMINATION))
    patched = with_exact_range(att, leo_elements, precision_site)
    truth = analytic_observation(leo_elements, precision_site, att.t_bar)
    assert patched.alpha == att.alpha
    assert patched.delta == att.delta
    assert patched.rho_km == truth.rho_km
    assert patched.rho_dot_km_s == truth.rho_dot_km_s
    assert patched.rho_ddot_km_s2 == truth.rho_ddot_km_s2


def test_track_file_round_trip(tmp_path, leo_elements, radar_site):
    track = simulate_track(leo_elements, radar_site, T_BAR_1)
    path = tmp_path / "track.txt"
    write_track(path, track)
    back = read_track(path)
    assert len(back) == len(track)
    st = back.station
    assert st.name == radar_site.name
    assert st.latitude == radar_site.latitude
    assert st.longitude == radar_site.longitude
    assert st.radius_km == radar_site.radius_km
    for a, b in zip(track.observations, back.observations):
        assert a.epoch.mjd == b.epoch.mjd
        assert a.rho_km == b.rho_km
        assert a.direction.alpha == b.direction.alpha
        assert a.direction.delta == b.direction.delta


def test_track_validation():
    with pytest.raises(TooFewObservations):
        _flat_track(2)
    st1 = StationSpec("one", latitude=0.1, longitude=0.2)
    st2 = StationSpec("two", latitude=0.1, longitude=0.2)
    t0 = Epoch(54127.0)
    mixed = [
        RadarObservation(t0.plus_seconds(j * 10.0), 1000.0,
                         SphericalDirection(1.0, 0.1), st1 if j < 2 else st2)
        for j in range(4)
    ]
    with pytest.raises(ValueError):
        RadarTrack(tuple(mixed))
    uneven = [
        RadarObservation(t0.plus_seconds(t), 1000.0,
                         SphericalDirection(1.0, 0.1), st1)
        for t in (0.0, 10.0, 21.0, 30.0)
    ]
    with pytest.raises(ValueError):
        RadarTrack(tuple(uneven))


def test_three_point_track_warns_but_fits():
    with pytest.warns(UserWarning):
        att = interpolate_track(_flat_track(3))
    assert abs(att.rho_km - 1500.0) < 1e-9
