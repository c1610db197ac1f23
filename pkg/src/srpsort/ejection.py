"""Ejection geometry: initial elements, solar phase angle and launch states.

Site longitudes are body-fixed and measured from the antisolar direction at
t = 0. At epoch t the site sits at co-rotating angle
``longitude + (spin_rate - frame_rate) * t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .dynamics import (CorotState, local_horizontal_basis, solar_longitude, surface_point,
                       to_osculating)
from .errors import DomainError, HyperbolicEjection
from .model import SystemModel

TWO_PI = 2.0 * math.pi


def direction_from_angles(in_plane=0.0, out_of_plane=0.0):
    """Unit vector in the local horizontal frame tilted from the surface normal.

    ``in_plane`` tilts toward +x_loc (along the parallel), ``out_of_plane``
    toward +y_loc (along the meridian).
    """
    ca, sa = math.cos(in_plane), math.sin(in_plane)
    cb, sb = math.cos(out_of_plane), math.sin(out_of_plane)
    return (sa * cb, sb, ca * cb)


@dataclass(frozen=True)
class EjectionSpec:
    latitude: float  # rad
    longitude: float  # rad, body-fixed, from the antisolar direction at t = 0
    speed: float  # m/s relative to the surface
    direction: tuple | None = None  # unit vector in (x_loc, y_loc, z_loc); None = normal
    epoch: float = 0.0  # s

    def __post_init__(self):
        if not abs(self.latitude) <= math.pi / 2 + 1e-15:
            raise DomainError("latitude must lie in [-pi/2, pi/2]")
        if not (self.speed >= 0.0 and math.isfinite(self.speed)):
            raise DomainError("ejection speed must be finite and non-negative")
        if not (math.isfinite(self.longitude) and math.isfinite(self.epoch)):
            raise DomainError("longitude and epoch must be finite")
        if self.direction is not None:
            d = tuple(float(c) for c in self.direction)
            n = math.sqrt(sum(c * c for c in d))
            if len(d) != 3 or abs(n - 1.0) > 1e-9:
                raise DomainError("direction must be a unit 3-vector")
            object.__setattr__(self, "direction", d)

    @property
    def is_normal(self):
        return self.direction is None or self.direction == (0.0, 0.0, 1.0)

    def corot_longitude(self, system: SystemModel):
        return self.longitude + (system.spin_rate - system.frame_rate) * self.epoch

    def solar_longitude(self, system: SystemModel):
        return solar_longitude(self.epoch, system)


@dataclass(frozen=True)
class InitialElements:
    a: float
    e: float
    nu: float


@dataclass(frozen=True)
class PhaseState:
    e: float
    phi: float  # rad in [0, 2 pi)


def surface_speed(system: SystemModel, latitude=0.0):
    """Inertial rotation speed of the surface at a latitude [m/s]."""
    return system.spin_rate * system.radius * math.cos(latitude)


def initial_elements(spec: EjectionSpec, system: SystemModel) -> InitialElements:
    """Two-body a, e and true anomaly right after a surface-normal ejection."""
    R = system.radius
    mu = system.mu_asteroid
    w_r = surface_speed(system, spec.latitude)
    v = spec.speed
    denom = 2.0 - (R / mu) * (v * v + w_r * w_r)
    if denom <= 0.0:
        raise HyperbolicEjection(f"ejection at {v} m/s is unbound")
    a0 = R / denom
    e0 = math.hypot(v * w_r * R, w_r * w_r * R - mu) / mu
    if e0 == 0.0:
        return InitialElements(a0, 0.0, 0.0)
    c = max(-1.0, min(1.0, (w_r * w_r * R - mu) / (e0 * mu)))
    return InitialElements(a0, e0, math.acos(c))


def critical_eccentricity(a0, R):
    if a0 < R:
        raise DomainError("semi-major axis below the asteroid radius")
    return 1.0 - R / a0


def phase_angle(i, raan, argp, lambda_sun):
    """Angle between the antisolar direction and the projected periapsis line."""
    phi = raan + math.atan2(math.cos(i) * math.sin(argp), math.cos(argp)) - lambda_sun + math.pi
    return phi % TWO_PI


def spec_to_state(spec: EjectionSpec, system: SystemModel) -> CorotState:
    lat = spec.latitude
    theta = spec.corot_longitude(system)
    R = system.radius
    pos = np.array(surface_point(lat, theta, R))
    ex, ey, ez = local_horizontal_basis(lat, theta)
    d = (0.0, 0.0, 1.0) if spec.direction is None else spec.direction
    n = d[0] * ex + d[1] * ey + d[2] * ez
    w_rel = system.spin_rate - system.frame_rate
    vel = np.array([-w_rel * pos[1], w_rel * pos[0], 0.0]) + spec.speed * n
    return CorotState(tuple(pos), tuple(vel), spec.epoch)


def ejection_phase(spec: EjectionSpec, system: SystemModel) -> PhaseState:
    state = spec_to_state(spec, system)
    el = to_osculating(state, system)
    return PhaseState(el.e, phase_angle(el.i, el.raan, el.argp, spec.solar_longitude(system)))


def spec_for_phase(system: SystemModel, phi0, speed, latitude=0.0, longitude=None, epoch=0.0,
                   direction=None):
    """Ejection spec whose initial solar phase angle is ``phi0``.

    With ``longitude=None`` the site longitude is solved at the given epoch.
    Otherwise the epoch is solved within the first synodic day for the given
    site longitude.
    """
    probe = EjectionSpec(latitude, 0.0, speed, direction, 0.0)

    def phase_at(theta):
        s = EjectionSpec(latitude, theta, speed, direction, 0.0)
        return ejection_phase(s, system).phi

    # in the co-rotating frame the phase advances one-for-one with the site angle
    if direction is None and latitude == 0.0:
        theta = (phi0 + initial_elements(probe, system).nu) % TWO_PI
    else:
        theta0 = (phi0 + initial_elements(EjectionSpec(latitude, 0.0, speed), system).nu) % TWO_PI

        def resid(t):
            return math.remainder(phase_at(t) - phi0, TWO_PI)

        lo, hi = theta0 - 0.5, theta0 + 0.5
        if resid(lo) * resid(hi) > 0.0:
            raise DomainError("could not bracket the requested phase angle")
        theta = brentq(resid, lo, hi, xtol=1e-15, rtol=1e-15) % TWO_PI

    w_rel = system.spin_rate - system.frame_rate
    if longitude is None:
        lon = (theta - w_rel * epoch) % TWO_PI
        return EjectionSpec(latitude, lon, speed, direction, epoch)
    gap = (theta - longitude) if w_rel > 0.0 else (longitude - theta)
    dt = (gap % TWO_PI) / abs(w_rel)
    return EjectionSpec(latitude, longitude, speed, direction, dt)
