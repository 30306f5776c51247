"""Command line harness for simulation, linkage and method comparison.

Subcommands cover the full experimental loop: `simulate` writes radar
track files for a scenario, `interpolate` compresses a track file into
an attributable, `link` joins two attributable files into orbits,
`gibbs` fits one track's positions directly, and `run` drives the whole
seeded Monte Carlo comparison and writes report files.

Internal units are km, s, rad; reports convert to degrees and km/d at
the presentation layer only. Exit codes: 0 success, 2 the method ran
but produced no orbit, 3 bad input.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, replace

import numpy as np

from .classical import gibbs_orbit_from_track, keplerian_integrals_link
from .constants import (
    OMEGA_EARTH_RAD_S,
    ROTATION_REFERENCE_MJD,
    SECONDS_PER_DAY,
)
from .coplanar import correct_track
from .core import (
    Epoch,
    KeplerianElements,
    angle_difference,
    cartesian_to_elements,
    state_at,
)
from .errors import (
    CollinearPositions,
    DegenerateTimes,
    InfeasibleCorrection,
    LinkageError,
    ParallelToNormal,
    PolarSingularity,
    ScenarioError,
    TooFewObservations,
)
from .linkage import newton_solve
from .observer import StationSpec, station_state
from .radar_sim import (
    Attributable,
    NoiseSpec,
    add_noise,
    analytic_attributable,
    interpolate_track,
    read_track,
    simulate_track,
    with_exact_range,
    write_track,
)

logger = logging.getLogger("debris_linker")

METHOD_CHOICES = ("infang-linear", "infang-quadratic", "ki", "gibbs")

# named noise presets: (sigma_alpha_deg, sigma_delta_deg, sigma_rho_km,
# exact_range, exact_angles). The exact-range presets keep noisy angles
# but take the range model straight from the noise-free simulation; the
# zero case is the oracle and takes both channels from truth, so every
# attributable-driven method sees its ideal input.
NOISE_PRESETS = {
    "zero": (0.0, 0.0, 0.0, True, True),
    "1": (0.2, 0.2, 0.0, True, False),
    "2": (0.1, 0.1, 0.005, False, False),
    "3": (0.2, 0.2, 0.01, False, False),
}

# domain errors that mean the input itself was unusable (exit 3); every
# other LinkageError means the computation ran out of orbits (exit 2)
BAD_INPUT_ERRORS = (
    ScenarioError,
    DegenerateTimes,
    CollinearPositions,
    TooFewObservations,
    PolarSingularity,
    InfeasibleCorrection,
    ParallelToNormal,
)

EXIT_OK = 0
EXIT_NO_SOLUTION = 2
EXIT_BAD_INPUT = 3


@dataclass(frozen=True)
class NoiseCase:
    """One named error model applied to simulated tracks."""

    name: str
    sigma_alpha_deg: float
    sigma_delta_deg: float
    sigma_rho_km: float
    exact_range: bool
    exact_angles: bool = False


@dataclass(frozen=True)
class Scenario:
    """Everything a comparison run needs, parsed from a config file."""

    name: str
    true_elements: KeplerianElements
    stations: tuple
    track_epochs: tuple
    n_obs: int
    dt_seconds: float
    noise_cases: tuple
    methods: tuple
    coplanar_precorrection: bool
    trials: int
    seed: int


@dataclass(frozen=True)
class ComparisonRow:
    """One (trial, noise case, method) outcome with signed element errors."""

    case: str
    method: str
    trial: int
    converged: bool
    coplanar_applied: bool
    failure: str | None
    iterations: int | None
    residual: float | None
    epoch_mjd: float | None
    a_km: float | None
    e: float | None
    inc_deg: float | None
    raan_deg: float | None
    argp_deg: float | None
    ell_deg: float | None
    da_km: float | None
    de: float | None
    dinc_deg: float | None
    draan_deg: float | None
    dargp_deg: float | None
    dell_deg: float | None


# --- flat key = value files ---

def _parse_kv_lines(path) -> dict:
    """Read a flat `key = value` file into {key: (value, line_number)}.

    Blank lines and `#` comments are skipped; inline comments after the
    value are allowed. Duplicate keys and lines without `=` are errors.
    """
    table: dict = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as err:
        raise ScenarioError(f"{path}: cannot read file ({err})") from err
    for number, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(
                f"{path}:{number}: expected `key = value`, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ScenarioError(f"{path}:{number}: empty key or value")
        if key in table:
            raise ScenarioError(
                f"{path}:{number}: duplicate key {key!r} "
                f"(first set on line {table[key][1]})")
        table[key] = (value, number)
    return table


class _FieldReader:
    """Typed access to parsed key/value pairs with positional errors."""

    def __init__(self, path, table: dict):
        self.path = path
        self.table = table
        self.used: set = set()

    def _raw(self, key: str, default=None, required: bool = False):
        self.used.add(key)
        if key in self.table:
            return self.table[key][0]
        if required:
            raise ScenarioError(f"{self.path}: missing required field {key!r}")
        return default

    def has(self, key: str) -> bool:
        return key in self.table

    def floating(self, key: str, default=None, required=False):
        raw = self._raw(key, required=required)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            line = self.table[key][1]
            raise ScenarioError(
                f"{self.path}:{line}: field {key!r} needs a number, "
                f"got {raw!r}") from None

    def integer(self, key: str, default=None, required=False):
        raw = self._raw(key, required=required)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            line = self.table[key][1]
            raise ScenarioError(
                f"{self.path}:{line}: field {key!r} needs an integer, "
                f"got {raw!r}") from None

    def boolean(self, key: str, default=False):
        raw = self._raw(key)
        if raw is None:
            return default
        lowered = raw.lower()
        if lowered in ("true", "yes", "1", "on"):
            return True
        if lowered in ("false", "no", "0", "off"):
            return False
        line = self.table[key][1]
        raise ScenarioError(
            f"{self.path}:{line}: field {key!r} needs true/false, got {raw!r}")

    def text(self, key: str, default=None, required=False):
        return self._raw(key, default=default, required=required)

    def check_all_consumed(self):
        unknown = sorted(set(self.table) - self.used)
        if unknown:
            key = unknown[0]
            line = self.table[key][1]
            raise ScenarioError(
                f"{self.path}:{line}: unknown field {key!r}"
                + (f" (and {len(unknown) - 1} more)" if len(unknown) > 1
                   else ""))


def _station_from(reader: _FieldReader, prefix: str,
                  default_name: str) -> StationSpec | None:
    lat_key = f"{prefix}lat_deg"
    if not reader.has(lat_key):
        # consume the group so unknown-field checking stays quiet
        for suffix in ("lat_deg", "lon_deg", "radius_km", "name"):
            reader.used.add(f"{prefix}{suffix}")
        return None
    return StationSpec(
        name=reader.text(f"{prefix}name", default=default_name),
        latitude=math.radians(reader.floating(lat_key, required=True)),
        longitude=math.radians(
            reader.floating(f"{prefix}lon_deg", required=True)),
        radius_km=reader.floating(f"{prefix}radius_km", default=6370.0),
    )


def parse_scenario(path) -> Scenario:
    """Load and validate a scenario config file."""
    reader = _FieldReader(path, _parse_kv_lines(path))
    elements = KeplerianElements(
        a=reader.floating("a_km", required=True),
        e=reader.floating("e", required=True),
        inc=math.radians(reader.floating("inc_deg", required=True)),
        raan=math.radians(reader.floating("raan_deg", required=True)),
        argp=math.radians(reader.floating("argp_deg", required=True)),
        mean_anomaly=math.radians(
            reader.floating("mean_anomaly_deg", required=True)),
        epoch=Epoch(reader.floating("elements_epoch_mjd", required=True)),
    )
    station_1 = _station_from(reader, "station_", "site-1")
    if station_1 is None:
        raise ScenarioError(f"{path}: missing required field 'station_lat_deg'")
    station_2 = _station_from(reader, "station2_", "site-2")
    stations = (station_1,) if station_2 is None else (station_1, station_2)

    epoch_1 = reader.floating("track_epoch_1_mjd", required=True)
    epoch_2 = reader.floating("track_epoch_2_mjd", required=True)
    if not epoch_1 < epoch_2:
        raise ScenarioError(
            f"{path}: track epochs must increase "
            f"(track_epoch_1_mjd={epoch_1!r}, track_epoch_2_mjd={epoch_2!r})")

    if reader.has("noise_cases"):
        for key in ("sigma_alpha_deg", "sigma_delta_deg", "sigma_rho_km",
                    "exact_range"):
            if reader.has(key):
                line = reader.table[key][1]
                raise ScenarioError(
                    f"{path}:{line}: field {key!r} conflicts with "
                    "'noise_cases'; use one style")
        names = [n.strip() for n in
                 reader.text("noise_cases").split(",") if n.strip()]
        if not names:
            raise ScenarioError(f"{path}: 'noise_cases' lists no cases")
        cases = []
        for name in names:
            if name not in NOISE_PRESETS:
                line = reader.table["noise_cases"][1]
                raise ScenarioError(
                    f"{path}:{line}: unknown noise case {name!r} "
                    f"(choices: {', '.join(sorted(NOISE_PRESETS))})")
            cases.append(NoiseCase(name, *NOISE_PRESETS[name]))
    else:
        cases = [NoiseCase(
            "custom",
            reader.floating("sigma_alpha_deg", default=0.0),
            reader.floating("sigma_delta_deg", default=0.0),
            reader.floating("sigma_rho_km", default=0.0),
            reader.boolean("exact_range", default=False),
        )]

    methods_raw = reader.text("methods")
    if methods_raw is None:
        methods = METHOD_CHOICES
    else:
        methods = tuple(m.strip() for m in methods_raw.split(",") if m.strip())
        for method in methods:
            if method not in METHOD_CHOICES:
                line = reader.table["methods"][1]
                raise ScenarioError(
                    f"{path}:{line}: unknown method {method!r} "
                    f"(choices: {', '.join(METHOD_CHOICES)})")
        if not methods:
            raise ScenarioError(f"{path}: 'methods' lists no methods")

    trials = reader.integer("trials", default=1)
    if trials < 1:
        raise ScenarioError(f"{path}: 'trials' must be >= 1, got {trials}")
    n_obs = reader.integer("n_obs", default=4)
    if n_obs < 3:
        raise ScenarioError(f"{path}: 'n_obs' must be >= 3, got {n_obs}")

    scenario = Scenario(
        name=reader.text("name",
                         default=os.path.splitext(os.path.basename(path))[0]),
        true_elements=elements,
        stations=stations,
        track_epochs=(Epoch(epoch_1), Epoch(epoch_2)),
        n_obs=n_obs,
        dt_seconds=reader.floating("dt_s", default=10.0),
        noise_cases=tuple(cases),
        methods=methods,
        coplanar_precorrection=reader.boolean("coplanar_precorrection"),
        trials=trials,
        seed=reader.integer("seed", default=0),
    )
    reader.check_all_consumed()
    return scenario


# --- attributable files ---

def write_attributable(path, att: Attributable) -> None:
    station = _station_of(att)
    lines = [
        "# attributable: fitted track summary at the mean epoch",
        f"t_bar_mjd = {att.t_bar.mjd!r}",
        f"alpha_deg = {math.degrees(att.alpha)!r}",
        f"delta_deg = {math.degrees(att.delta)!r}",
        f"rho_km = {att.rho_km!r}",
        f"rho_dot_km_s = {att.rho_dot_km_s!r}",
        f"rho_ddot_km_s2 = {att.rho_ddot_km_s2!r}",
        f"station_name = {station.name}",
        f"station_lat_deg = {math.degrees(station.latitude)!r}",
        f"station_lon_deg = {math.degrees(station.longitude)!r}",
        f"station_radius_km = {station.radius_km!r}",
    ]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _station_of(att: Attributable) -> StationSpec:
    # the observer state was built from a rigid station; recover the
    # spec from the stored geocentric position
    q = att.observer.q
    radius = float(np.linalg.norm(q))
    lat = math.asin(q[2] / radius)
    seconds = (att.t_bar.mjd - ROTATION_REFERENCE_MJD) * SECONDS_PER_DAY
    lon = math.atan2(q[1], q[0]) - OMEGA_EARTH_RAD_S * seconds
    return StationSpec("station", lat, lon % (2.0 * math.pi), radius)


def read_attributable(path) -> Attributable:
    reader = _FieldReader(path, _parse_kv_lines(path))
    station = StationSpec(
        name=reader.text("station_name", default="station"),
        latitude=math.radians(
            reader.floating("station_lat_deg", required=True)),
        longitude=math.radians(
            reader.floating("station_lon_deg", required=True)),
        radius_km=reader.floating("station_radius_km", default=6370.0),
    )
    t_bar = Epoch(reader.floating("t_bar_mjd", required=True))
    att = Attributable(
        t_bar=t_bar,
        alpha=math.radians(reader.floating("alpha_deg", required=True)),
        delta=math.radians(reader.floating("delta_deg", required=True)),
        rho_km=reader.floating("rho_km", required=True),
        rho_dot_km_s=reader.floating("rho_dot_km_s", required=True),
        rho_ddot_km_s2=reader.floating("rho_ddot_km_s2", required=True),
        observer=station_state(station, t_bar),
    )
    reader.check_all_consumed()
    return att


# --- the seeded comparison run ---

def _derived_seed(master: int, case_index: int, trial: int,
                  track_index: int) -> int:
    sequence = np.random.SeedSequence(
        [master, case_index, trial, track_index])
    return int(sequence.generate_state(1)[0])


def _station_for_track(sc: Scenario, track_index: int) -> StationSpec:
    if len(sc.stations) == 1:
        return sc.stations[0]
    return sc.stations[track_index]


def _trial_inputs(sc: Scenario, case: NoiseCase, case_index: int,
                  trial: int):
    """Simulate, perturb and compress both tracks for one trial.

    Returns (attributables, noisy tracks, coplanar_applied).
    """
    atts = []
    tracks = []
    coplanar_applied = sc.coplanar_precorrection
    for track_index, t_bar in enumerate(sc.track_epochs):
        station = _station_for_track(sc, track_index)
        clean = simulate_track(sc.true_elements, station, t_bar,
                               n=sc.n_obs, dt_seconds=sc.dt_seconds)
        if (case.sigma_alpha_deg, case.sigma_delta_deg,
                case.sigma_rho_km) == (0.0, 0.0, 0.0):
            noisy = clean
        else:
            noisy = add_noise(clean, NoiseSpec(
                case.sigma_alpha_deg, case.sigma_delta_deg,
                case.sigma_rho_km,
                seed=_derived_seed(sc.seed, case_index, trial, track_index)))
        if sc.coplanar_precorrection:
            try:
                noisy = correct_track(noisy)
            except LinkageError as err:
                coplanar_applied = False
                logger.warning(
                    "coplanar correction failed on case %s trial %d "
                    "track %d: %s", case.name, trial, track_index + 1, err)
        if case.exact_angles:
            att = analytic_attributable(sc.true_elements, station, t_bar)
        else:
            att = interpolate_track(noisy)
            if case.exact_range:
                att = with_exact_range(att, sc.true_elements, station)
        atts.append(att)
        tracks.append(noisy)
    return atts, tracks, coplanar_applied


def _true_elements_at(sc: Scenario, epoch: Epoch) -> KeplerianElements:
    return cartesian_to_elements(state_at(sc.true_elements, epoch))


def _dominant_failure(failures) -> str:
    if not failures:
        return "NoSolution"
    classes: dict = {}
    for failure in failures:
        name = failure.reason.split(":", 1)[0].strip()
        classes[name] = classes.get(name, 0) + 1
    return sorted(classes.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]


def _failure_row(case: NoiseCase, method: str, trial: int,
                 coplanar_applied: bool, failure: str) -> ComparisonRow:
    return ComparisonRow(
        case=case.name, method=method, trial=trial, converged=False,
        coplanar_applied=coplanar_applied, failure=failure,
        iterations=None, residual=None, epoch_mjd=None, a_km=None, e=None,
        inc_deg=None, raan_deg=None, argp_deg=None, ell_deg=None,
        da_km=None, de=None, dinc_deg=None, draan_deg=None,
        dargp_deg=None, dell_deg=None)


def _element_row(sc: Scenario, case: NoiseCase, method: str, trial: int,
                 coplanar_applied: bool, elements: KeplerianElements,
                 iterations: int | None,
                 residual: float | None) -> ComparisonRow:
    true = _true_elements_at(sc, elements.epoch)
    return ComparisonRow(
        case=case.name, method=method, trial=trial, converged=True,
        coplanar_applied=coplanar_applied, failure=None,
        iterations=iterations, residual=residual,
        epoch_mjd=elements.epoch.mjd,
        a_km=elements.a, e=elements.e,
        inc_deg=math.degrees(elements.inc),
        raan_deg=math.degrees(elements.raan),
        argp_deg=math.degrees(elements.argp),
        ell_deg=math.degrees(elements.mean_anomaly),
        da_km=elements.a - true.a,
        de=elements.e - true.e,
        dinc_deg=math.degrees(angle_difference(elements.inc, true.inc)),
        draan_deg=math.degrees(angle_difference(elements.raan, true.raan)),
        dargp_deg=math.degrees(angle_difference(elements.argp, true.argp)),
        dell_deg=math.degrees(angle_difference(elements.mean_anomaly,
                                               true.mean_anomaly)))


def _run_method_once(sc: Scenario, case: NoiseCase, method: str, trial: int,
                     atts, tracks, coplanar_applied: bool) -> ComparisonRow:
    try:
        if method == "gibbs":
            state = gibbs_orbit_from_track(tracks[0])
            elements = cartesian_to_elements(state)
            return _element_row(sc, case, method, trial, coplanar_applied,
                                elements, iterations=None, residual=None)
        if method == "ki":
            solutions = keplerian_integrals_link(atts[0], atts[1])
            best = solutions[0]
            return _element_row(sc, case, method, trial, coplanar_applied,
                                best.elements1, iterations=0,
                                residual=best.residual_norm)
        reduction = method.split("-", 1)[1]
        failures: list = []
        solutions = newton_solve(atts[0], atts[1], method=reduction,
                                 failures=failures)
        if not solutions:
            return _failure_row(case, method, trial, coplanar_applied,
                                _dominant_failure(failures))
        best = solutions[0]
        return _element_row(sc, case, method, trial, coplanar_applied,
                            best.elements1, iterations=best.iterations,
                            residual=best.residual_norm)
    except LinkageError as err:
        logger.debug("method %s failed on case %s trial %d: %s",
                     method, case.name, trial, err)
        return _failure_row(case, method, trial, coplanar_applied,
                            type(err).__name__)


def run_scenario(sc: Scenario):
    """Execute every (case, trial, method) cell of a scenario.

    Returns (rows, first_attributables) where rows is a flat list of
    ComparisonRow ordered by case, then trial, then method, and
    first_attributables maps case name to the trial-0 attributable pair
    for the intermediate dump.
    """
    rows = []
    first_atts: dict = {}
    for case_index, case in enumerate(sc.noise_cases):
        for trial in range(sc.trials):
            try:
                atts, tracks, coplanar_applied = _trial_inputs(
                    sc, case, case_index, trial)
            except LinkageError as err:
                logger.warning("case %s trial %d unusable: %s",
                               case.name, trial, err)
                for method in sc.methods:
                    rows.append(_failure_row(case, method, trial, False,
                                             type(err).__name__))
                continue
            if trial == 0:
                first_atts[case.name] = tuple(atts)
            for method in sc.methods:
                rows.append(_run_method_once(sc, case, method, trial, atts,
                                             tracks, coplanar_applied))
            logger.debug("case %s trial %d done", case.name, trial)
    return rows, first_atts


# --- report rendering ---

ELEMENT_COLUMNS = (
    ("a_km", "da_km", "{:.2f}"),
    ("e", "de", "{:.3f}"),
    ("inc_deg", "dinc_deg", "{:.2f}"),
    ("raan_deg", "draan_deg", "{:.2f}"),
    ("argp_deg", "dargp_deg", "{:.2f}"),
    ("ell_deg", "dell_deg", "{:.2f}"),
)


def _true_row_values(sc: Scenario) -> dict:
    el = sc.true_elements
    return {
        "a_km": el.a,
        "e": el.e,
        "inc_deg": math.degrees(el.inc),
        "raan_deg": math.degrees(el.raan),
        "argp_deg": math.degrees(el.argp),
        "ell_deg": math.degrees(el.mean_anomaly),
    }


def _format_table(header, body_rows) -> list:
    widths = [len(h) for h in header]
    for row in body_rows:
        for k, cell in enumerate(row):
            widths[k] = max(widths[k], len(cell))
    lines = ["  ".join(h.ljust(widths[k]) for k, h in enumerate(header))]
    for row in body_rows:
        lines.append("  ".join(cell.ljust(widths[k])
                               for k, cell in enumerate(row)))
    return lines


def render_comparison(sc: Scenario, rows) -> str:
    """Human comparison report: element medians, error spread, failures."""
    out = [
        f"scenario: {sc.name}",
        f"seed: {sc.seed}  trials: {sc.trials}  n_obs: {sc.n_obs}  "
        f"dt_s: {sc.dt_seconds:g}",
        f"windows: MJD {sc.track_epochs[0].mjd:.6f} / "
        f"{sc.track_epochs[1].mjd:.6f}",
        f"methods: {', '.join(sc.methods)}",
        f"coplanar precorrection: "
        f"{'on' if sc.coplanar_precorrection else 'off'}",
        "",
        "== element medians over converged trials ==",
        "(angles in degrees, distances in km; medians of the signed error",
        " added back to the true value, so wrapped angles stay meaningful)",
    ]
    true_values = _true_row_values(sc)
    for case in sc.noise_cases:
        case_rows = [r for r in rows if r.case == case.name]
        out.append("")
        if case.exact_angles:
            channels = "exact angles and range"
        elif case.exact_range:
            channels = "fitted angles, exact range"
        else:
            channels = "fitted angles and range"
        out.append(f"case {case.name} (sigma_alpha={case.sigma_alpha_deg:g} "
                   f"deg, sigma_delta={case.sigma_delta_deg:g} deg, "
                   f"sigma_rho={case.sigma_rho_km:g} km, {channels})")
        header = ["element", "true"] + list(sc.methods)
        body = []
        for value_key, error_key, fmt in ELEMENT_COLUMNS:
            cells = [value_key, fmt.format(true_values[value_key])]
            for method in sc.methods:
                errors = [getattr(r, error_key) for r in case_rows
                          if r.method == method and r.converged]
                if errors:
                    cells.append(fmt.format(
                        true_values[value_key] + float(np.median(errors))))
                else:
                    cells.append("-")
            body.append(cells)
        converged_line = ["converged", f"{sc.trials} trials"]
        for method in sc.methods:
            n_ok = sum(1 for r in case_rows
                       if r.method == method and r.converged)
            converged_line.append(f"{n_ok}/{sc.trials}")
        body.append(converged_line)
        out.extend(_format_table(header, body))

    out.extend(["", "== error spread (absolute errors, converged trials) =="])
    header = ["case", "method", "conv", "med|da|km", "iqr|da|km",
              "med|de|", "iqr|de|", "med|dI|deg", "iqr|dI|deg"]
    body = []
    for case in sc.noise_cases:
        for method in sc.methods:
            sample = [r for r in rows
                      if r.case == case.name and r.method == method]
            good = [r for r in sample if r.converged]
            cells = [case.name, method, f"{len(good)}/{len(sample)}"]
            if good:
                for key in ("da_km", "de", "dinc_deg"):
                    magnitudes = np.abs([getattr(r, key) for r in good])
                    q25, q75 = np.percentile(magnitudes, [25.0, 75.0])
                    cells.append(f"{float(np.median(magnitudes)):.4g}")
                    cells.append(f"{float(q75 - q25):.4g}")
            else:
                cells.extend(["-"] * 6)
            body.append(cells)
    out.extend(_format_table(header, body))

    failures = [r for r in rows if not r.converged]
    out.extend(["", "== failures =="])
    if failures:
        counts: dict = {}
        for r in failures:
            key = (r.case, r.method, r.failure or "unknown")
            counts[key] = counts.get(key, 0) + 1
        body = [[case, method, reason, str(count)]
                for (case, method, reason), count in sorted(counts.items())]
        out.extend(_format_table(["case", "method", "class", "count"], body))
    else:
        out.append("none")
    out.append("")
    return "\n".join(out)


def render_records(rows) -> str:
    """Machine form: one JSON object per row, keys sorted, order stable."""
    lines = []
    for row in rows:
        lines.append(json.dumps(vars(row).copy(), sort_keys=True))
    return "\n".join(lines) + ("\n" if lines else "")


def _attributable_lines(label: str, att: Attributable) -> list:
    day = SECONDS_PER_DAY
    return [
        f"{label}  t_bar_mjd={att.t_bar.mjd:.6f}  "
        f"alpha_deg={math.degrees(att.alpha):.4f}  "
        f"delta_deg={math.degrees(att.delta):.4f}  "
        f"rho_km={att.rho_km:.4f}  "
        f"rho_dot_km_d={att.rho_dot_km_s * day:.1f}  "
        f"rho_ddot_km_d2={att.rho_ddot_km_s2 * day * day:.0f}"
    ]


def render_attributables(sc: Scenario, first_atts: dict) -> str:
    """Trial-0 interpolation dump per noise case (degrees, km, km/d)."""
    out = [f"scenario: {sc.name}",
           "interpolated attributables of trial 0, per noise case",
           ""]
    for case in sc.noise_cases:
        if case.name not in first_atts:
            out.append(f"case {case.name}: trial 0 produced no attributables")
            out.append("")
            continue
        att1, att2 = first_atts[case.name]
        out.append(f"case {case.name}")
        out.extend(_attributable_lines("  window 1", att1))
        out.extend(_attributable_lines("  window 2", att2))
        out.append("")
    return "\n".join(out)


# --- solution pretty printing ---

def _solution_lines(solution) -> list:
    el = solution.elements1
    delta_deg = [math.degrees(v) for v in solution.delta.as_array()]
    lines = [
        f"method={solution.method} iterations={solution.iterations} "
        f"residual={solution.residual_norm:.3e}",
        f"  elements at MJD {el.epoch.mjd:.6f}: a={el.a:.4f} km "
        f"e={el.e:.6f} inc={math.degrees(el.inc):.4f} deg "
        f"raan={math.degrees(el.raan):.4f} deg "
        f"argp={math.degrees(el.argp):.4f} deg "
        f"ell={math.degrees(el.mean_anomaly):.4f} deg",
        f"  angle corrections (deg): "
        f"alpha1={delta_deg[0]:.6f} delta1={delta_deg[1]:.6f} "
        f"alpha2={delta_deg[2]:.6f} delta2={delta_deg[3]:.6f}",
        f"  consistency: c_rel={solution.consistency['c_rel']:.2e} "
        f"energy_rel={solution.consistency['energy_rel']:.2e}",
    ]
    if solution.branch is not None:
        lines.insert(1, f"  transfer arc: {solution.branch.case.name} "
                        f"k={solution.branch.k}")
    if "preferred" in solution.consistency:
        lines.append(f"  preferred: {solution.consistency['preferred']}")
    return lines


def _solution_record(solution) -> str:
    el = solution.elements1
    delta_deg = [math.degrees(v) for v in solution.delta.as_array()]
    record = {
        "method": solution.method,
        "iterations": solution.iterations,
        "residual": solution.residual_norm,
        "epoch_mjd": el.epoch.mjd,
        "a_km": el.a,
        "e": el.e,
        "inc_deg": math.degrees(el.inc),
        "raan_deg": math.degrees(el.raan),
        "argp_deg": math.degrees(el.argp),
        "ell_deg": math.degrees(el.mean_anomaly),
        "d_alpha1_deg": delta_deg[0],
        "d_delta1_deg": delta_deg[1],
        "d_alpha2_deg": delta_deg[2],
        "d_delta2_deg": delta_deg[3],
        "c_rel": solution.consistency["c_rel"],
        "energy_rel": solution.consistency["energy_rel"],
        "branch": None if solution.branch is None
        else f"{solution.branch.case.name}:k={solution.branch.k}",
    }
    return json.dumps(record, sort_keys=True)


# --- subcommands ---

def _cmd_simulate(args) -> int:
    sc = parse_scenario(args.scenario)
    if args.seed is not None:
        sc = replace(sc, seed=args.seed)
    case = sc.noise_cases[0]
    os.makedirs(args.out, exist_ok=True)
    paths = []
    for track_index, t_bar in enumerate(sc.track_epochs):
        station = _station_for_track(sc, track_index)
        track = simulate_track(sc.true_elements, station, t_bar,
                               n=sc.n_obs, dt_seconds=sc.dt_seconds)
        if (case.sigma_alpha_deg, case.sigma_delta_deg,
                case.sigma_rho_km) != (0.0, 0.0, 0.0):
            track = add_noise(track, NoiseSpec(
                case.sigma_alpha_deg, case.sigma_delta_deg,
                case.sigma_rho_km,
                seed=_derived_seed(sc.seed, 0, 0, track_index)))
        path = os.path.join(args.out, f"track_{track_index + 1}.txt")
        write_track(path, track)
        paths.append(path)
    print(f"wrote {len(paths)} tracks (noise case {case.name}, "
          f"seed {sc.seed}): " + ", ".join(paths))
    return EXIT_OK


def _cmd_interpolate(args) -> int:
    track = read_track(args.track_file)
    if args.coplanar:
        track = correct_track(track)
    att = interpolate_track(track)
    if args.out:
        write_attributable(args.out, att)
        print(f"wrote {args.out}")
    if args.format == "records":
        record = {
            "t_bar_mjd": att.t_bar.mjd,
            "alpha_deg": math.degrees(att.alpha),
            "delta_deg": math.degrees(att.delta),
            "rho_km": att.rho_km,
            "rho_dot_km_s": att.rho_dot_km_s,
            "rho_ddot_km_s2": att.rho_ddot_km_s2,
        }
        print(json.dumps(record, sort_keys=True))
    else:
        print("\n".join(_attributable_lines("attributable", att)))
    return EXIT_OK


def _cmd_link(args) -> int:
    att1 = read_attributable(args.att_file_1)
    att2 = read_attributable(args.att_file_2)
    if args.method == "ki":
        solutions = keplerian_integrals_link(att1, att2)
    else:
        failures: list = []
        solutions = newton_solve(att1, att2,
                                 method=args.method.split("-", 1)[1],
                                 failures=failures)
        if not solutions:
            print("no solution: " + _dominant_failure(failures),
                  file=sys.stderr)
            return EXIT_NO_SOLUTION
    if not solutions:
        print("no solution", file=sys.stderr)
        return EXIT_NO_SOLUTION
    if args.format == "records":
        for solution in solutions:
            print(_solution_record(solution))
    else:
        print(f"{len(solutions)} solution(s)")
        for solution in solutions:
            print("\n".join(_solution_lines(solution)))
    return EXIT_OK


def _cmd_gibbs(args) -> int:
    track = read_track(args.track_file)
    state = gibbs_orbit_from_track(track)
    el = cartesian_to_elements(state)
    if args.format == "records":
        record = {
            "method": "gibbs",
            "epoch_mjd": el.epoch.mjd,
            "a_km": el.a,
            "e": el.e,
            "inc_deg": math.degrees(el.inc),
            "raan_deg": math.degrees(el.raan),
            "argp_deg": math.degrees(el.argp),
            "ell_deg": math.degrees(el.mean_anomaly),
        }
        print(json.dumps(record, sort_keys=True))
    else:
        print(f"elements at MJD {el.epoch.mjd:.6f}: a={el.a:.4f} km "
              f"e={el.e:.6f} inc={math.degrees(el.inc):.4f} deg "
              f"raan={math.degrees(el.raan):.4f} deg "
              f"argp={math.degrees(el.argp):.4f} deg "
              f"ell={math.degrees(el.mean_anomaly):.4f} deg")
    return EXIT_OK


def _cmd_run(args) -> int:
    sc = parse_scenario(args.scenario)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.method:
        for method in args.method:
            if method not in METHOD_CHOICES:
                raise ScenarioError(f"unknown method {method!r}")
        overrides["methods"] = tuple(args.method)
    if args.coplanar:
        overrides["coplanar_precorrection"] = True
    if overrides:
        sc = replace(sc, **overrides)
    rows, first_atts = run_scenario(sc)
    os.makedirs(args.out, exist_ok=True)
    comparison = render_comparison(sc, rows)
    records = render_records(rows)
    attributables = render_attributables(sc, first_atts)
    for name, text in (("comparison.txt", comparison),
                       ("records.jsonl", records),
                       ("attributables.txt", attributables)):
        with open(os.path.join(args.out, name), "w") as fh:
            fh.write(text)
    print(records if args.format == "records" else comparison, end="")
    logger.info("reports written to %s", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="debris-linker",
        description="Preliminary orbits from pairs of short radar tracks")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser(
        "simulate", help="write simulated track files for a scenario")
    simulate.add_argument("--scenario", required=True)
    simulate.add_argument("--seed", type=int, default=None)
    simulate.add_argument("--out", default=".")
    simulate.set_defaults(handler=_cmd_simulate)

    interpolate = sub.add_parser(
        "interpolate", help="compress a track file into an attributable")
    interpolate.add_argument("track_file")
    interpolate.add_argument("--coplanar", action="store_true",
                             help="rotate lines of sight onto the best-fit "
                                  "plane first")
    interpolate.add_argument("--out", default=None,
                             help="also write the attributable to this file")
    interpolate.add_argument("--format", choices=("table", "records"),
                             default="table")
    interpolate.set_defaults(handler=_cmd_interpolate)

    link = sub.add_parser(
        "link", help="link two attributable files into orbits")
    link.add_argument("att_file_1")
    link.add_argument("att_file_2")
    link.add_argument("--method",
                      choices=("infang-linear", "infang-quadratic", "ki"),
                      default="infang-quadratic")
    link.add_argument("--format", choices=("table", "records"),
                      default="table")
    link.set_defaults(handler=_cmd_link)

    gibbs = sub.add_parser(
        "gibbs", help="orbit from three positions of one track file")
    gibbs.add_argument("track_file")
    gibbs.add_argument("--format", choices=("table", "records"),
                       default="table")
    gibbs.set_defaults(handler=_cmd_gibbs)

    run = sub.add_parser(
        "run", help="run a scenario comparison and write reports")
    run.add_argument("--scenario", required=True)
    run.add_argument("--seed", type=int, default=None,
                     help="override the scenario seed")
    run.add_argument("--method", action="append", default=None,
                     help="restrict to this method (repeatable)")
    run.add_argument("--coplanar", action="store_true",
                     help="force the coplanar precorrection on")
    run.add_argument("--out", default=".")
    run.add_argument("--format", choices=("table", "records"),
                     default="table")
    run.set_defaults(handler=_cmd_run)
    return parser


def _configure_logging() -> None:
    level_name = os.environ.get("DEBRIS_LINKER_LOG", "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
        stream=sys.stderr)


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except BAD_INPUT_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except LinkageError as err:
        print(f"no solution: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_NO_SOLUTION


if __name__ == "__main__":
    sys.exit(main())
