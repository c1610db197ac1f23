"""Physical constants, system and particle parameterization.

All derived quantities of the Sun-asteroid system live here so that every
other module agrees on the same normalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DomainError


@dataclass(frozen=True)
class PhysicalConstants:
    solar_luminosity: float = 3.846e26  # W
    speed_of_light: float = 2.99792458e8  # m/s
    solar_grav_param: float = 1.32712440018e20  # m^3/s^2
    grav_constant: float = 6.674e-11  # m^3/(kg s^2)


CONSTANTS = PhysicalConstants()
AU = 1.495978707e11  # m


def compute_beta(r, rho, Q=1.0, constants=CONSTANTS):
    """Lightness number of a spherical grain (SRP over solar gravity).

    Parameters
    ----------
    r : float
        Grain radius [m].
    rho : float
        Grain density [kg/m^3].
    Q : float
        Radiation pressure coefficient, 1 for a perfect absorber.
    """
    if not r > 0:
        raise DomainError(f"grain radius must be positive, got {r!r}")
    if not rho > 0:
        raise DomainError(f"grain density must be positive, got {rho!r}")
    if Q < 0:
        raise DomainError(f"Q must be non-negative, got {Q!r}")
    c = constants
    return 3.0 * c.solar_luminosity * Q / (
        16.0 * math.pi * c.speed_of_light * c.solar_grav_param * r * rho
    )


def beta_to_radius(beta, rho, Q=1.0, constants=CONSTANTS):
    """Grain radius [m] giving lightness ``beta`` at density ``rho``."""
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta!r}")
    if not rho > 0:
        raise DomainError(f"grain density must be positive, got {rho!r}")
    c = constants
    return 3.0 * c.solar_luminosity * Q / (
        16.0 * math.pi * c.speed_of_light * c.solar_grav_param * beta * rho
    )


@dataclass(frozen=True)
class SystemModel:
    """Homogeneous spherical asteroid on a circular heliocentric orbit.

    ``rotation_period`` may be ``math.inf`` for a non-rotating body. The spin
    axis is the +z axis of the co-rotating frame (prograde).
    """

    radius: float  # m
    bulk_density: float  # kg/m^3
    rotation_period: float  # s
    heliocentric_distance: float = AU  # m
    constants: PhysicalConstants = field(default=CONSTANTS, repr=False)

    def __post_init__(self):
        for name in ("radius", "bulk_density", "rotation_period", "heliocentric_distance"):
            value = getattr(self, name)
            if not value > 0:
                raise DomainError(f"{name} must be positive, got {value!r}")
        if self.heliocentric_distance < 1e3 * self.radius:
            raise DomainError("heliocentric distance must greatly exceed the asteroid radius")

    @property
    def mu_sun(self):
        return self.constants.solar_grav_param

    @property
    def mu_asteroid(self):
        c = self.constants
        return c.grav_constant * (4.0 / 3.0) * math.pi * self.radius**3 * self.bulk_density

    @property
    def mass_ratio(self):
        mu_a = self.mu_asteroid
        return mu_a / (mu_a + self.mu_sun)

    @property
    def frame_rate(self):
        """Angular rate of the Sun-asteroid line, Omega_R [rad/s]."""
        return math.sqrt((self.mu_asteroid + self.mu_sun) / self.heliocentric_distance**3)

    @property
    def spin_rate(self):
        """Inertial spin rate 2*pi/T_A [rad/s]; zero when non-rotating."""
        if math.isinf(self.rotation_period):
            return 0.0
        return 2.0 * math.pi / self.rotation_period

    @property
    def time_unit(self):
        """sqrt(R^3/mu_A) [s], the kernel's time scale."""
        return math.sqrt(self.radius**3 / self.mu_asteroid)

    @property
    def srp_accel_per_beta(self):
        """Solar gravity at the asteroid, mu_S/d^2; SRP acceleration is beta times this."""
        return self.mu_sun / self.heliocentric_distance**2

    def kepler_period(self, a):
        return 2.0 * math.pi * math.sqrt(a**3 / self.mu_asteroid)

    def surface_gravity(self):
        return self.mu_asteroid / self.radius**2


def build_system(R, density, T_A, d=AU, constants=CONSTANTS):
    return SystemModel(R, density, T_A, d, constants)


@dataclass(frozen=True)
class ParticleModel:
    radius: float  # m
    density: float  # kg/m^3
    Q: float = 1.0

    def __post_init__(self):
        if not self.radius > 0 or not self.density > 0:
            raise DomainError("grain radius and density must be positive")
        if self.Q < 0:
            raise DomainError("Q must be non-negative")

    @property
    def beta(self):
        return compute_beta(self.radius, self.density, self.Q)

    @property
    def mass(self):
        return 4.0 / 3.0 * math.pi * self.radius**3 * self.density
