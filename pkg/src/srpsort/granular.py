"""Cohesion and aggregate corrections to single-grain lightness."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError
from .model import ParticleModel, SystemModel, build_system

ION_DIAMETER = 1.32e-10  # m, O2- ion

# Calibration anchor for the default Hamaker coefficient: a cohesion to
# weight ratio of 1e6 for a 100 um grain of the mean chondrite-mix density
# on a 100 m, 2600 kg/m^3 body spinning in 5 h.
BOND_ANCHOR = 1.0e6
ANCHOR_GRAIN_RADIUS = 100e-6
ANCHOR_GRAIN_DENSITY = 3522.5
ANCHOR_SYSTEM = build_system(100.0, 2600.0, 5.0 * 3600.0)


@dataclass(frozen=True)
class AggregateModel:
    monomer: ParticleModel
    equivalent_radius: float  # m
    porosity: float = 0.0
    shape_factor: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.porosity < 1.0:
            raise DomainError("porosity must lie in [0, 1)")
        if not self.shape_factor > 0.0:
            raise DomainError("shape factor must be positive")
        if self.equivalent_radius < self.monomer.radius:
            raise DomainError("equivalent radius cannot be below the monomer radius")


def effective_beta(agg: AggregateModel) -> float:
    """Lightness of a porous cluster, f / (1 - porosity) * r / r_eq * beta."""
    if agg.porosity >= 1.0:
        raise DomainError("porosity must be below 1")
    r = agg.monomer.radius
    return agg.shape_factor / (1.0 - agg.porosity) * (r / agg.equivalent_radius) * agg.monomer.beta


def doublet_area_ratio(tilt):
    """Projected area of two touching equal spheres over twice one sphere's disk.

    ``tilt`` is the angle between the doublet axis and the Sun line, so 0 is
    end-on (one disk hides the other) and pi/2 is broadside.
    """
    d = 2.0 * abs(math.sin(tilt))  # projected centre distance in units of r
    lens = 2.0 * math.acos(min(1.0, d / 2.0)) - 0.5 * d * math.sqrt(max(0.0, 4.0 - d * d))
    return (2.0 * math.pi - lens) / (2.0 * math.pi)


def doublet_beta(monomer: ParticleModel, tilt):
    """Lightness of a two-grain contact doublet at a given orientation."""
    return doublet_area_ratio(tilt) * monomer.beta


@dataclass(frozen=True)
class CohesionParams:
    hamaker: float  # J
    cleanliness: float = 1.0
    ion_diameter: float = ION_DIAMETER  # m

    def __post_init__(self):
        if not self.hamaker > 0.0:
            raise DomainError("Hamaker coefficient must be positive")
        if not 0.0 < self.cleanliness <= 1.0:
            raise DomainError("cleanliness must lie in (0, 1]")
        if not self.ion_diameter > 0.0:
            raise DomainError("ion diameter must be positive")


def cohesion_force(params: CohesionParams, r) -> float:
    """Van der Waals contact force between equal grains [N]."""
    if not r > 0.0:
        raise DomainError("grain radius must be positive")
    return params.hamaker * params.cleanliness**2 / (48.0 * params.ion_diameter**2) * (0.5 * r)


def effective_surface_gravity(system: SystemModel, latitude=0.0):
    """Gravity minus centrifugal relief at the surface [m/s^2]."""
    w = system.spin_rate
    return system.surface_gravity() - w * w * system.radius * math.cos(latitude)


def grain_weight(r, density, system: SystemModel, latitude=0.0):
    g = effective_surface_gravity(system, latitude)
    if g <= 0.0:
        raise DomainError("spin exceeds surface gravity; loose grains are not bound")
    return (4.0 / 3.0) * math.pi * r**3 * density * g


def bond_ratio(params: CohesionParams, r, system: SystemModel, density=ANCHOR_GRAIN_DENSITY,
               latitude=0.0):
    """Cohesion over effective surface weight for a grain of radius ``r``."""
    return cohesion_force(params, r) / grain_weight(r, density, system, latitude)


def calibrate_hamaker(target=BOND_ANCHOR, r=ANCHOR_GRAIN_RADIUS, density=ANCHOR_GRAIN_DENSITY,
                      system=ANCHOR_SYSTEM, cleanliness=1.0, ion_diameter=ION_DIAMETER):
    """Hamaker coefficient [J] that gives ``target`` Bond ratio for the given case."""
    unit = CohesionParams(1.0, cleanliness, ion_diameter)
    return target * grain_weight(r, density, system) / cohesion_force(unit, r)


DEFAULT_HAMAKER = calibrate_hamaker()
DEFAULT_COHESION = CohesionParams(DEFAULT_HAMAKER)


__all__ = [
    "ION_DIAMETER", "BOND_ANCHOR", "AggregateModel", "effective_beta", "doublet_area_ratio",
    "doublet_beta", "CohesionParams", "cohesion_force", "effective_surface_gravity",
    "grain_weight", "bond_ratio", "calibrate_hamaker", "DEFAULT_HAMAKER", "DEFAULT_COHESION",
]
