"""Collinear libration points, zero-velocity curves and return velocities."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import kernels
from .dynamics import kernel_params, surface_point
from .errors import ClosedRegionImpossible, DomainError
from .model import SystemModel


@dataclass(frozen=True)
class LibrationPair:
    x1: float  # normalized barycentric
    x2: float
    C1: float  # normalized, 2U at the point
    C2: float
    beta: float
    offset1: float  # m from the asteroid center, negative (sunward)
    offset2: float  # m, positive (antisolar)
    reduced_C1: float  # m^2/s^2, same convention as EnergyReport.reduced
    reduced_C2: float


def _axial_accel(u, params):
    return kernels.rhs([u, 0.0, 0.0, 0.0, 0.0, 0.0], params)[3]


def _axial_root(params, sign, hill):
    """Zero of the x-acceleration on one side of the asteroid (kernel units)."""
    f = lambda u: _axial_accel(sign * u, params)
    inner = 1e-3 * hill
    outer = 10.0 * hill
    # SRP pushes L1 far outside the classical Hill bracket and L2 inside it
    limit = 0.5 / params[2]
    while f(inner) * f(outer) > 0.0:
        if outer < limit:
            outer *= 2.0
        inner *= 0.5
        if inner < 1e-9 * hill:
            raise DomainError("no libration point found on this side of the asteroid")
    u = brentq(f, inner, outer, xtol=1e-15 * hill, rtol=1e-15, maxiter=500)
    # Newton polish with a central-difference slope
    for _ in range(3):
        g = f(u)
        if g == 0.0:
            break
        du = u * 1e-7
        slope = (f(u + du) - f(u - du)) / (2.0 * du)
        step = g / slope
        if abs(step) > 1e-6 * u:
            break
        u -= step
    return sign * u


def _hill(system):
    """Hill radius in asteroid radii."""
    return system.heliocentric_distance * (system.mass_ratio / 3.0) ** (1.0 / 3.0) / system.radius


def libration_points(system: SystemModel, beta) -> LibrationPair:
    if not 0.0 <= beta < 1.0:
        raise DomainError("beta must lie in [0, 1)")
    params = kernel_params(system, beta)
    R = system.radius
    d = system.heliocentric_distance
    u1 = _axial_root(params, -1.0, _hill(system))
    u2 = _axial_root(params, 1.0, _hill(system))
    vs = R / system.time_unit
    rc1 = kernels.reduced_jacobi([u1, 0, 0, 0, 0, 0], params) * vs * vs
    rc2 = kernels.reduced_jacobi([u2, 0, 0, 0, 0, 0], params) * vs * vs
    from .dynamics import normalized_potential

    x_ast = 1.0 - system.mass_ratio
    x1 = x_ast + u1 * R / d
    x2 = x_ast + u2 * R / d
    C1 = 2.0 * normalized_potential(x1, 0.0, 0.0, system, beta)
    C2 = 2.0 * normalized_potential(x2, 0.0, 0.0, system, beta)
    return LibrationPair(x1, x2, C1, C2, float(beta), u1 * R, u2 * R, rc1, rc2)


def libration_residual(system: SystemModel, beta, offset):
    """x-acceleration at an axial point, in units of d * Omega_R^2."""
    from .dynamics import CorotState, acceleration

    return acceleration(CorotState((offset, 0.0, 0.0), (0.0, 0.0, 0.0)), system, beta)[0]


def l2_distance(system: SystemModel, beta):
    """Asteroid-centric distance of L2 [m]."""
    if not 0.0 <= beta < 1.0:
        raise DomainError("beta must lie in [0, 1)")
    return _axial_root(kernel_params(system, beta), 1.0, _hill(system)) * system.radius


def beta_l2_at_surface(system: SystemModel, lo=1e-6, hi=0.999):
    """Lightness number at which L2 sits on the asteroid surface."""
    f = lambda b: l2_distance(system, b) - system.radius
    if f(lo) * f(hi) > 0.0:
        raise DomainError("L2 does not reach the surface for beta in the search interval")
    return brentq(f, lo, hi, xtol=1e-14, rtol=1e-12)


def _site_energy(system, beta, lat, lon):
    """(2U at the surface point, squared co-rotating surface speed), m^2/s^2."""
    params = kernel_params(system, beta)
    R = system.radius
    vs = R / system.time_unit
    p = surface_point(lat, lon, 1.0)
    two_u = kernels.reduced_jacobi(list(p) + [0.0, 0.0, 0.0], params) * vs * vs
    v_t = (system.spin_rate - system.frame_rate) * R * math.cos(lat)
    return two_u, v_t * v_t


def zvc_open_velocity(system: SystemModel, beta, lat=0.0, lon=0.0, point="L2"):
    """Radial ejection speed at which the zero-velocity surface opens at L2 (or L1).

    ``lon`` is measured in the co-rotating frame from the antisolar direction.
    The surface rotation speed enters the kinetic term. Returns 0 when the
    region is already open at zero ejection speed.
    """
    lp = libration_points(system, beta)
    offset = lp.offset2 if point == "L2" else lp.offset1
    if abs(offset) <= system.radius:
        return 0.0  # the gate lies inside the body, nothing is enclosed
    c_gate = lp.reduced_C2 if point == "L2" else lp.reduced_C1
    two_u, vt2 = _site_energy(system, beta, lat, lon)
    slack = two_u - vt2 - c_gate
    return math.sqrt(slack) if slack > 0.0 else 0.0


def guaranteed_return_velocity(system: SystemModel, beta, lon=0.0, lat=0.0):
    """Largest radial speed for which neither L1 nor L2 is energetically reachable."""
    lp = libration_points(system, beta)
    c_gate = max(lp.reduced_C1, lp.reduced_C2)
    two_u, vt2 = _site_energy(system, beta, lat, lon)
    slack = two_u - vt2 - c_gate
    inside = min(abs(lp.offset1), abs(lp.offset2)) <= system.radius
    if slack <= 0.0 or inside:
        raise ClosedRegionImpossible(
            f"zero-velocity surface is open at zero ejection speed for beta={beta}")
    return math.sqrt(slack)


def max_open_velocity(system: SystemModel, betas, lat=0.0, lon=0.0):
    return max(zvc_open_velocity(system, b, lat, lon) for b in betas)


@dataclass(frozen=True)
class ZvcGrid:
    x: np.ndarray  # normalized barycentric
    y: np.ndarray
    value: np.ndarray  # 2U - C0 [m^2/s^2], shape (len(y), len(x))
    c0: float


def zvc_grid(system: SystemModel, beta, ejection_speed, extent=None, n=201, lat=0.0, lon=0.0):
    """Field 2U - C0 on the z = 0 plane around the asteroid.

    C0 is the integral of a radial ejection with ``ejection_speed`` from the
    given site. ``extent`` is the half-width in meters (default 2x the L2
    distance). Points inside the asteroid are set to NaN.
    """
    R = system.radius
    if extent is None:
        extent = 2.0 * l2_distance(system, beta)
    two_u, vt2 = _site_energy(system, beta, lat, lon)
    c0 = two_u - vt2 - ejection_speed**2
    params = kernel_params(system, beta)
    vs2 = (R / system.time_unit) ** 2
    offsets = np.linspace(-extent, extent, n)
    value = np.empty((n, n))
    for j, yy in enumerate(offsets):
        for i, xx in enumerate(offsets):
            if xx * xx + yy * yy < R * R:
                value[j, i] = np.nan
            else:
                value[j, i] = kernels.reduced_jacobi([xx / R, yy / R, 0, 0, 0, 0], params) * vs2 - c0
    d = system.heliocentric_distance
    x_ast = 1.0 - system.mass_ratio
    return ZvcGrid(x_ast + offsets / d, offsets / d, value, c0)


def zvc_encloses_asteroid(grid: ZvcGrid):
    """True when the allowed region (value >= 0) around the asteroid does not reach the grid edge."""
    from scipy.ndimage import label

    allowed = np.nan_to_num(grid.value, nan=1.0) >= 0.0
    labels, _ = label(allowed)
    n = len(grid.x)
    centre = labels[n // 2, n // 2]
    edge = np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]])
    return centre not in set(edge.tolist())


def write_zvc_csv(grid: ZvcGrid, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x_norm", "y_norm", "value"])
        for j, yy in enumerate(grid.y):
            for i, xx in enumerate(grid.x):
                w.writerow([f"{xx:.17g}", f"{yy:.17g}", f"{grid.value[j, i]:.17g}"])


__all__ = [
    "LibrationPair", "libration_points", "libration_residual", "l2_distance",
    "beta_l2_at_surface", "zvc_open_velocity", "guaranteed_return_velocity",
    "max_open_velocity", "ZvcGrid", "zvc_grid", "zvc_encloses_asteroid", "write_zvc_csv",
]
