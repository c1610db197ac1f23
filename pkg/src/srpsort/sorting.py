"""Collection strategies: re-impact maps, on-ground winnowing and on-orbit collection."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from ._parallel import parallel_map
from .dynamics import Status, propagate, surface_point, to_local_horizontal, to_osculating
from .ejection import (EjectionSpec, direction_from_angles, ejection_phase, initial_elements,
                       spec_for_phase, spec_to_state)
from .errors import DirectReimpact, DomainError, HyperbolicEjection, StrategyInfeasible
from .model import ParticleModel, SystemModel
from .phasespace import collection_time_estimate, ejection_model

ON_GROUND_PHI = 1.5 * math.pi
ON_ORBIT_PHI = 0.5 * math.pi


_map = parallel_map


# --- re-impact map --------------------------------------------------------------


@dataclass(frozen=True)
class MapCell:
    lon: float  # rad, co-rotating, from the antisolar direction at ejection
    lat: float
    status: Status
    t_hours: float  # nan unless REIMPACT
    t_periods: float
    revolutions: int


def reimpact_map(system: SystemModel, beta, speed, lons, lats, max_periods=50.0, threads=1):
    """Re-impact time of radial ejections from a grid of sites at epoch 0."""
    def cell(site):
        lon, lat = site
        spec = EjectionSpec(lat, lon, speed)
        try:
            a0 = initial_elements(spec, system).a
        except HyperbolicEjection:
            return MapCell(lon, lat, Status.ESCAPE, math.nan, math.nan, 0)
        period = system.kepler_period(a0)
        out = propagate(spec_to_state(spec, system), system, beta, max_periods * period,
                        sample_every=0)
        if out.status is Status.REIMPACT:
            t = out.impact_time
            return MapCell(lon, lat, out.status, t / 3600.0, t / period, out.revolution_count)
        return MapCell(lon, lat, out.status, math.nan, math.nan, out.revolution_count)

    sites = [(lon, lat) for lat in lats for lon in lons]
    return _map(cell, sites, threads)


def write_reimpact_csv(cells, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lon_deg", "lat_deg", "t_hours", "t_periods", "status", "revolutions"])
        for c in cells:
            w.writerow([f"{math.degrees(c.lon):.17g}", f"{math.degrees(c.lat):.17g}",
                        f"{c.t_hours:.17g}", f"{c.t_periods:.17g}", c.status.value, c.revolutions])


# --- on-ground separation ---------------------------------------------------------


@dataclass(frozen=True)
class Landing:
    lat: float  # body-fixed
    lon: float
    xloc: float  # m, local horizontal frame of the ejection site
    yloc: float
    time: float  # s
    max_radius: float  # m


def landing(system: SystemModel, beta, spec: EjectionSpec, max_time=None, sample_every=0) -> Landing:
    """Body-fixed re-impact point of one grain; StrategyInfeasible if it does not land."""
    out = propagate(spec_to_state(spec, system), system, beta, max_time, sample_every=sample_every)
    if out.status is not Status.REIMPACT:
        raise StrategyInfeasible(f"grain with beta={beta} ended with {out.status.value}")
    lat, lon = out.impact_bodyfixed
    x, y, _ = to_local_horizontal(surface_point(lat, lon, system.radius), spec.latitude,
                                  spec.longitude, system.radius)
    return Landing(lat, lon, x, y, out.impact_time, out.max_radius)


def arc_distance(lat1, lon1, lat2, lon2, radius):
    """Great-circle distance on the sphere (haversine form, accurate at small arcs)."""
    s = (math.sin(0.5 * (lat2 - lat1)) ** 2
         + math.cos(lat1) * math.cos(lat2) * math.sin(0.5 * (lon2 - lon1)) ** 2)
    return 2.0 * radius * math.asin(min(1.0, math.sqrt(s)))


@dataclass(frozen=True)
class Separation:
    arc: float  # m
    xloc_a: float
    xloc_b: float
    landing_a: Landing
    landing_b: Landing


@dataclass(frozen=True)
class SeparationQuery:
    particle_a: ParticleModel
    particle_b: ParticleModel
    spec: EjectionSpec
    system: SystemModel


def separation_on_ground(query: SeparationQuery) -> Separation:
    la = landing(query.system, query.particle_a.beta, query.spec)
    lb = landing(query.system, query.particle_b.beta, query.spec)
    arc = arc_distance(la.lat, la.lon, lb.lat, lb.lon, query.system.radius)
    return Separation(arc, la.xloc, lb.xloc, la, lb)


def ground_spec(system: SystemModel, speed, phi=ON_GROUND_PHI, latitude=0.0):
    return spec_for_phase(system, phi, speed, latitude)


def separation_at_speed(pair, system: SystemModel, speed, phi=ON_GROUND_PHI):
    pa, pb = pair
    return separation_on_ground(SeparationQuery(pa, pb, ground_spec(system, speed, phi), system)).arc


@dataclass(frozen=True)
class RequiredVelocity:
    speed: float  # m/s
    speed_over_radius: float  # 1/s
    separation: float  # m at the returned speed


def required_velocity_for_separation(pair, system: SystemModel, target=1.0, phi=ON_GROUND_PHI,
                                     v_min=None, v_max=None, n_scan=60, xtol=1e-6):
    """Smallest ejection speed giving ``target`` meters of separation.

    The separation is scanned on a geometric grid up to just below the
    surface escape speed, and the first crossing is refined with brentq.
    """
    if target <= 0.0:
        raise DomainError("target separation must be positive")
    v_esc = math.sqrt(2.0 * system.mu_asteroid / system.radius)
    v_lo = v_min if v_min is not None else 1e-3 * v_esc
    v_hi = v_max if v_max is not None else 0.95 * v_esc
    grid = np.geomspace(v_lo, v_hi, n_scan)

    def f(v):
        return separation_at_speed(pair, system, v, phi) - target

    prev_v, prev_f = None, None
    for v in grid:
        try:
            fv = f(v)
        except (StrategyInfeasible, HyperbolicEjection):
            break
        if prev_f is not None and prev_f < 0.0 <= fv:
            root = brentq(f, prev_v, v, xtol=xtol * prev_v, rtol=1e-12)
            sep = f(root) + target
            return RequiredVelocity(root, root / system.radius, sep)
        prev_v, prev_f = v, fv
    raise StrategyInfeasible("no speed below the escape regime reaches the target separation")


def separation_sweep(pair, system: SystemModel, speeds, phi=ON_GROUND_PHI, pair_id="", threads=1):
    """Rows (v, v/R, separation or nan, pair_id) over a list of speeds."""
    def row(v):
        try:
            sep = separation_at_speed(pair, system, v, phi)
        except (StrategyInfeasible, HyperbolicEjection):
            sep = math.nan
        return (v, v / system.radius, sep, pair_id)

    return _map(row, list(speeds), threads)


def write_separation_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["v_mps", "v_over_R", "sep_m", "pair_id"])
        for v, vr, sep, pid in rows:
            w.writerow([f"{v:.17g}", f"{vr:.17g}", f"{sep:.17g}", pid])


# --- ejection-error sensitivity --------------------------------------------------


class ErrorKind(str, enum.Enum):
    SPEED_FRACTION = "SPEED_FRACTION"
    ANGLE_IN_PLANE = "ANGLE_IN_PLANE"


@dataclass(frozen=True)
class SensitivityQuery:
    """Nominal ejection plus one error.

    With ``hold="phase"`` the perturbed launch keeps the nominal solar phase
    angle, so the site is re-solved for the perturbed speed or direction;
    ``hold="site"`` keeps the nominal site and epoch instead.
    """

    spec: EjectionSpec
    particle: ParticleModel
    system: SystemModel
    error_kind: ErrorKind
    magnitude: float
    hold: str = "phase"

    def __post_init__(self):
        if self.magnitude < 0.0:
            raise DomainError("error magnitude must be non-negative")
        if self.hold not in ("phase", "site"):
            raise DomainError("hold must be 'phase' or 'site'")


def perturbed_spec(spec: EjectionSpec, kind: ErrorKind, magnitude, system=None, hold="site"):
    if spec.direction is not None and not spec.is_normal:
        raise DomainError("perturbations assume a surface-normal nominal direction")
    speed, direction = spec.speed, spec.direction
    if ErrorKind(kind) is ErrorKind.SPEED_FRACTION:
        speed = spec.speed * (1.0 + magnitude)
    else:
        direction = direction_from_angles(magnitude, 0.0)
    if hold == "site":
        return EjectionSpec(spec.latitude, spec.longitude, speed, direction, spec.epoch)
    phi = ejection_phase(spec, system).phi
    return spec_for_phase(system, phi, speed, spec.latitude, epoch=spec.epoch, direction=direction)


def sensitivity(query: SensitivityQuery) -> float:
    """Distance [m] between the nominal and perturbed re-impact points."""
    nominal = landing(query.system, query.particle.beta, query.spec)
    if query.magnitude == 0.0:
        return 0.0
    pert = perturbed_spec(query.spec, query.error_kind, query.magnitude, query.system, query.hold)
    try:
        other = landing(query.system, query.particle.beta, pert)
    except StrategyInfeasible as exc:
        raise StrategyInfeasible(f"perturbed trajectory does not land: {exc}") from exc
    return arc_distance(nominal.lat, nominal.lon, other.lat, other.lon, query.system.radius)


def sensitivity_sweep(system: SystemModel, particle: ParticleModel, speeds, kind, magnitude,
                      phi=ON_GROUND_PHI, hold="phase", threads=1):
    def row(v):
        try:
            spec = ground_spec(system, v, phi)
            disp = sensitivity(SensitivityQuery(spec, particle, system, ErrorKind(kind), magnitude,
                                                hold))
        except (StrategyInfeasible, HyperbolicEjection):
            disp = math.nan
        return (v / system.radius, disp, ErrorKind(kind).value, system.radius,
                system.rotation_period / 3600.0)

    return _map(row, list(speeds), threads)


def write_sensitivity_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["v_over_R", "dispersion_m", "error_kind", "R_m", "T_A_h"])
        for vr, disp, kind, R, T in rows:
            w.writerow([f"{vr:.17g}", f"{disp:.17g}", kind, f"{R:.17g}", f"{T:.17g}"])


def spin_synchronous_speed(system: SystemModel, latitude=0.0):
    """Radial speed whose initial orbit period equals the rotation period."""
    if math.isinf(system.rotation_period):
        raise DomainError("no spin-synchronous speed for a non-rotating body")
    a = (system.mu_asteroid * (system.rotation_period / (2.0 * math.pi)) ** 2) ** (1.0 / 3.0)
    R = system.radius
    w_r = system.spin_rate * R * math.cos(latitude)
    v2 = system.mu_asteroid * (2.0 / R - 1.0 / a) - w_r * w_r
    if v2 < 0.0:
        raise DomainError("surface already moves faster than the synchronous orbit")
    return math.sqrt(v2)


# --- on-orbit collection ------------------------------------------------------------


@dataclass(frozen=True)
class Collection:
    beta: float
    time: float  # s, numeric
    reached: bool  # False if the grain re-impacted before regaining the apocenter eccentricity
    e_apocenter: float
    analytic_time: float  # s
    y_crossing: float  # m, |y| of the asteroid-centric -Y crossing nearest the collection time, nan if none
    revolutions: int
    max_apocenter: float  # m


def _first_crossing(t, values, level, start):
    idx = np.nonzero((t > start) & (values >= level))[0]
    if len(idx) == 0:
        return None
    i = idx[0]
    if i == 0:
        return t[0]
    t0, t1 = t[i - 1], t[i]
    v0, v1 = values[i - 1], values[i]
    return t0 + (level - v0) * (t1 - t0) / (v1 - v0) if v1 != v0 else t1


def on_orbit_collection(system: SystemModel, beta, speed, phi=ON_ORBIT_PHI, max_time=None):
    """Time for the eccentricity to return to its first-apocenter value.

    Raises DirectReimpact if the grain lands before its first pericenter and
    StrategyInfeasible if it escapes.
    """
    spec = spec_for_phase(system, phi, speed)
    if max_time is None:
        max_time = 50.0 * system.kepler_period(initial_elements(spec, system).a)
    out = propagate(spec_to_state(spec, system), system, beta, max_time, sample_every=1)
    if out.revolution_count == 0:
        if out.status is Status.REIMPACT:
            raise DirectReimpact(f"beta={beta} re-impacts before the first pericenter")
        raise StrategyInfeasible(f"beta={beta} ends with {out.status.value} before one revolution")
    if out.status is Status.ESCAPE:
        raise StrategyInfeasible(f"beta={beta} escapes")
    states = list(out.states())
    t = out.path[:, 0]
    ecc = np.array([to_osculating(s, system).e for s in states])
    e_apo = to_osculating(next(out.states(out.apocenters[:1])), system).e
    t_peri = out.pericenters[0, 0]
    tc = _first_crossing(t, ecc, e_apo, t_peri)
    reached = tc is not None
    if tc is None:
        tc = out.impact_time if out.impact_time is not None else t[-1]
    ycross = _y_crossing_near(out.path, tc)
    model, e0, nu0, _ = ejection_model(system, beta, speed, phi)
    est = collection_time_estimate(model, e0, phi, nu0)
    apo_r = np.linalg.norm(out.apocenters[:, 1:4], axis=1) if len(out.apocenters) else np.array([0.0])
    return Collection(beta, float(tc), reached, e_apo, est, ycross, out.revolution_count,
                      float(apo_r.max()))


def _y_crossing_near(path, tc):
    """Distance at the last crossing of the -Y half-axis before ``tc``."""
    x = path[:, 1]
    y = path[:, 2]
    best = math.nan
    for i in range(1, len(path)):
        if path[i, 0] > tc:
            break
        if y[i] < 0.0 and (x[i - 1] > 0.0) != (x[i] > 0.0):
            f = x[i - 1] / (x[i - 1] - x[i])
            best = abs(y[i - 1] + f * (y[i] - y[i - 1]))
    return best


def collection_sweep(system: SystemModel, betas, speed, phi=ON_ORBIT_PHI, threads=1):
    """Per-beta Collection or the exception raised for that beta."""
    def one(b):
        try:
            return on_orbit_collection(system, b, speed, phi)
        except (DirectReimpact, StrategyInfeasible) as exc:
            return exc

    return _map(one, list(betas), threads)


def write_collection_csv(betas, results, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["beta", "status", "t_collect_h", "t_analytic_h", "e_apocenter", "y_cross_m",
                    "revolutions", "max_apocenter_m"])
        for b, r in zip(betas, results):
            if isinstance(r, Collection):
                status = "COLLECTED" if r.reached else "REIMPACT_BEFORE_RETURN"
                w.writerow([f"{b:.17g}", status, f"{r.time / 3600:.17g}", f"{r.analytic_time / 3600:.17g}",
                            f"{r.e_apocenter:.17g}", f"{r.y_crossing:.17g}", r.revolutions,
                            f"{r.max_apocenter:.17g}"])
            else:
                status = "DIRECT_REIMPACT" if isinstance(r, DirectReimpact) else "ESCAPE"
                w.writerow([f"{b:.17g}", status, "nan", "nan", "nan", "nan", 0, "nan"])
