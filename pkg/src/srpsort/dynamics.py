"""Co-rotating dynamics of a grain near the asteroid.

States are kept asteroid-centric, in meters and m/s, in the Sun-asteroid
co-rotating frame (x away from the Sun, z along the spin axis). The
barycentric normalized coordinates of the photo-gravitational problem are
available through :meth:`CorotState.normalized`, but integration never runs in
them: at 1 AU a 10 km asteroid sits at x = 1 - mu with a radius of ~7e-8, which
would leave only eight significant digits for the local motion.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DomainError, NumericalError
from .model import SystemModel

RTOL = 1e-12
ATOL = 1e-14
# process-wide defaults used when propagate() gets no explicit tolerances
TOLERANCES = {"rtol": RTOL, "atol": ATOL}


@dataclass(frozen=True)
class CorotState:
    position: tuple  # m, asteroid-centric, co-rotating axes
    velocity: tuple  # m/s, relative to the co-rotating frame
    epoch: float = 0.0  # s

    def __post_init__(self):
        pos = tuple(float(v) for v in self.position)
        vel = tuple(float(v) for v in self.velocity)
        if len(pos) != 3 or len(vel) != 3:
            raise DomainError("position and velocity must have three components")
        if not all(math.isfinite(v) for v in pos + vel + (self.epoch,)):
            raise DomainError("state components must be finite")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "velocity", vel)

    @property
    def radius(self):
        return math.sqrt(sum(v * v for v in self.position))

    def normalized(self, system: SystemModel):
        """Barycentric position / d and velocity / (d Omega_R)."""
        d = system.heliocentric_distance
        vscale = d * system.frame_rate
        x_ast = 1.0 - system.mass_ratio
        pos = (x_ast + self.position[0] / d, self.position[1] / d, self.position[2] / d)
        vel = tuple(v / vscale for v in self.velocity)
        return pos, vel

    @classmethod
    def from_normalized(cls, position, velocity, system: SystemModel, epoch=0.0):
        d = system.heliocentric_distance
        vscale = d * system.frame_rate
        x_ast = 1.0 - system.mass_ratio
        pos = ((position[0] - x_ast) * d, position[1] * d, position[2] * d)
        return cls(pos, tuple(v * vscale for v in velocity), epoch)


def kernel_params(system: SystemModel, beta):
    """Parameters of the scaled equations of motion (lengths in R, time in sqrt(R^3/mu_A))."""
    tau = system.time_unit
    R = system.radius
    return (
        system.frame_rate * tau,
        system.srp_accel_per_beta * tau * tau / R,
        R / system.heliocentric_distance,
        float(beta),
    )


def to_kernel(state: CorotState, system: SystemModel):
    R = system.radius
    vs = R / system.time_unit
    return [c / R for c in state.position] + [c / vs for c in state.velocity]


def from_kernel(y, system: SystemModel, epoch0=0.0, t=0.0):
    R = system.radius
    tau = system.time_unit
    vs = R / tau
    return CorotState(
        (y[0] * R, y[1] * R, y[2] * R), (y[3] * vs, y[4] * vs, y[5] * vs), epoch0 + t * tau
    )


def _check_position(state, system):
    if state.radius <= 1e-9 * system.radius:
        raise DomainError("state coincides with the asteroid center")


def acceleration(state: CorotState, system: SystemModel, beta):
    """Right-hand side of the co-rotating equations, in units of d * Omega_R^2."""
    _check_position(state, system)
    params = kernel_params(system, beta)
    a = kernels.rhs(to_kernel(state, system), params)[3:]
    tau = system.time_unit
    scale = (system.radius / tau**2) / (system.heliocentric_distance * system.frame_rate**2)
    return tuple(v * scale for v in a)


def acceleration_si(state: CorotState, system: SystemModel, beta):
    """Same as :func:`acceleration` in m/s^2."""
    scale = system.heliocentric_distance * system.frame_rate**2
    return tuple(v * scale for v in acceleration(state, system, beta))


@dataclass(frozen=True)
class EnergyReport:
    U: float  # normalized
    T: float  # normalized
    C: float  # normalized, 2U - 2T
    reduced: float  # m^2/s^2, C with the heliocentric constant removed


def normalized_potential(x, y, z, system: SystemModel, beta):
    """Effective potential U (barycentric, normalized) including the SRP factor."""
    mu = system.mass_ratio
    r1 = math.sqrt((x + mu) ** 2 + y * y + z * z)
    r2 = math.sqrt((x + mu - 1.0) ** 2 + y * y + z * z)
    if r1 == 0.0 or r2 == 0.0:
        raise DomainError("position coincides with a primary")
    return 0.5 * (x * x + y * y) + (1.0 - mu) * (1.0 - beta) / r1 + mu / r2


def jacobi_integral(state: CorotState, system: SystemModel, beta):
    _check_position(state, system)
    pos, vel = state.normalized(system)
    U = normalized_potential(*pos, system, beta)
    T = 0.5 * sum(v * v for v in vel)
    params = kernel_params(system, beta)
    vs = system.radius / system.time_unit
    reduced = kernels.reduced_jacobi(to_kernel(state, system), params) * vs * vs
    return EnergyReport(U, T, 2.0 * U - 2.0 * T, reduced)


def reduced_potential(position, system: SystemModel, beta):
    """Potential per unit mass [m^2/s^2] relative to the asteroid center value of the solar part."""
    y = [c / system.radius for c in position] + [0.0, 0.0, 0.0]
    vs = system.radius / system.time_unit
    return 0.5 * kernels.reduced_jacobi(y, kernel_params(system, beta)) * vs * vs


# --- frames ---------------------------------------------------------------


def _rotz(angle, v):
    c, s = math.cos(angle), math.sin(angle)
    return (c * v[0] - s * v[1], s * v[0] + c * v[1], v[2])


def corot_to_inertial(position, velocity, t, system: SystemModel):
    """Co-rotating to non-rotating asteroid-centric axes (aligned at t = 0)."""
    w = system.frame_rate
    v_in = (velocity[0] - w * position[1], velocity[1] + w * position[0], velocity[2])
    return _rotz(w * t, position), _rotz(w * t, v_in)


def inertial_to_corot(position, velocity, t, system: SystemModel):
    w = system.frame_rate
    p = _rotz(-w * t, position)
    v = _rotz(-w * t, velocity)
    return p, (v[0] + w * p[1], v[1] - w * p[0], v[2])


def inertial_to_bodyfixed(position, velocity, t, system: SystemModel):
    """Body-fixed axes: longitude zero is the antisolar direction at t = 0."""
    w = system.spin_rate
    p = _rotz(-w * t, position)
    v = _rotz(-w * t, velocity)
    return p, (v[0] + w * p[1], v[1] - w * p[0], v[2])


def bodyfixed_to_inertial(position, velocity, t, system: SystemModel):
    w = system.spin_rate
    v_in = (velocity[0] - w * position[1], velocity[1] + w * position[0], velocity[2])
    return _rotz(w * t, position), _rotz(w * t, v_in)


def corot_to_bodyfixed(state: CorotState, system: SystemModel):
    p, v = corot_to_inertial(state.position, state.velocity, state.epoch, system)
    return inertial_to_bodyfixed(p, v, state.epoch, system)


def latlon(position):
    x, y, z = position
    return math.atan2(z, math.hypot(x, y)), math.atan2(y, x) % (2.0 * math.pi)


def surface_point(lat, lon, radius):
    c = math.cos(lat)
    return (radius * c * math.cos(lon), radius * c * math.sin(lon), radius * math.sin(lat))


def local_horizontal_basis(lat, lon):
    """Unit vectors (x_loc, y_loc, z_loc) at a surface site.

    z_loc is the outward normal, x_loc points along the parallel against the
    spin (westward, the direction ejecta drift), y_loc = z_loc x x_loc
    (southward) completes a right-handed frame.
    """
    up = (math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), math.sin(lat))
    east = (-math.sin(lon), math.cos(lon), 0.0)
    x_loc = tuple(-c for c in east)
    y_loc = np.cross(up, x_loc)
    return np.array(x_loc), y_loc, np.array(up)


def to_local_horizontal(point_bf, site_lat, site_lon, radius):
    """Body-fixed point expressed in the site's local horizontal frame [m]."""
    ex, ey, ez = local_horizontal_basis(site_lat, site_lon)
    d = np.asarray(point_bf, dtype=float) - np.asarray(surface_point(site_lat, site_lon, radius))
    return float(d @ ex), float(d @ ey), float(d @ ez)


def from_local_horizontal(local, site_lat, site_lon, radius):
    ex, ey, ez = local_horizontal_basis(site_lat, site_lon)
    p = np.asarray(surface_point(site_lat, site_lon, radius)) + local[0] * ex + local[1] * ey + local[2] * ez
    return tuple(float(c) for c in p)


# --- osculating elements --------------------------------------------------


@dataclass(frozen=True)
class Elements:
    a: float  # m, negative if hyperbolic
    e: float
    i: float
    raan: float
    argp: float
    nu: float
    degenerate: bool = False  # rectilinear, angles by convention

    def as_tuple(self):
        return (self.a, self.e, self.i, self.raan, self.argp, self.nu)


def elements_from_cartesian(position, velocity, mu):
    """Two-body elements about the asteroid from inertial position/velocity.

    Rectilinear orbits get the plane of the position vector and the spin axis
    (i = 90 deg, node at the site meridian) with the pericenter opposite the
    current position and nu = pi. Equatorial orbits put the node on +x.
    Circular orbits put the pericenter at the node.
    """
    r = np.asarray(position, dtype=float)
    v = np.asarray(velocity, dtype=float)
    rn = float(np.linalg.norm(r))
    if rn == 0.0:
        raise DomainError("position must be nonzero")
    vn2 = float(v @ v)
    hvec = np.cross(r, v)
    h = float(np.linalg.norm(hvec))
    energy = 0.5 * vn2 - mu / rn
    a = -mu / (2.0 * energy) if energy != 0.0 else math.inf
    evec = ((vn2 - mu / rn) * r - float(r @ v) * v) / mu
    e = float(np.linalg.norm(evec))
    two_pi = 2.0 * math.pi

    if h <= 1e-12 * rn * math.sqrt(vn2 + mu / rn):
        lat = math.atan2(r[2], math.hypot(r[0], r[1]))
        raan = math.atan2(r[1], r[0]) % two_pi if math.hypot(r[0], r[1]) > 0 else 0.0
        argp = math.atan2(-math.sin(lat), -math.cos(lat)) % two_pi
        return Elements(a, 1.0, math.pi / 2, raan, argp, math.pi, True)

    inc = math.acos(max(-1.0, min(1.0, hvec[2] / h)))
    node = np.array([-hvec[1], hvec[0], 0.0])
    nn = float(np.linalg.norm(node))
    equatorial = nn <= 1e-13 * h
    if equatorial:
        raan = 0.0
        node_dir = np.array([1.0, 0.0, 0.0])
    else:
        node_dir = node / nn
        raan = math.atan2(node_dir[1], node_dir[0]) % two_pi
    h_dir = hvec / h
    perp = np.cross(h_dir, node_dir)  # in-plane, 90 deg ahead of the node

    def angle_in_plane(vec):
        return math.atan2(float(vec @ perp), float(vec @ node_dir)) % two_pi

    u = angle_in_plane(r)  # argument of latitude
    if e <= 1e-12:
        return Elements(a, e, inc, raan, 0.0, u, False)
    argp = angle_in_plane(evec)
    nu = (u - argp) % two_pi
    return Elements(a, e, inc, raan, argp, nu, False)


def cartesian_from_elements(a, e, i, raan, argp, nu, mu):
    p = a * (1.0 - e * e)
    if p <= 0.0:
        raise DomainError("semi-latus rectum must be positive")
    r = p / (1.0 + e * math.cos(nu))
    cn, sn = math.cos(nu), math.sin(nu)
    pos_pf = np.array([r * cn, r * sn, 0.0])
    k = math.sqrt(mu / p)
    vel_pf = np.array([-k * sn, k * (e + cn), 0.0])
    cO, sO = math.cos(raan), math.sin(raan)
    co, so = math.cos(argp), math.sin(argp)
    ci, si = math.cos(i), math.sin(i)
    rot = np.array([
        [cO * co - sO * so * ci, -cO * so - sO * co * ci, sO * si],
        [sO * co + cO * so * ci, -sO * so + cO * co * ci, -cO * si],
        [so * si, co * si, ci],
    ])
    return tuple(rot @ pos_pf), tuple(rot @ vel_pf)


def to_osculating(state: CorotState, system: SystemModel, beta_ignored=None):
    """Osculating elements of a co-rotating state, about the asteroid.

    Angles refer to non-rotating axes that coincide with the co-rotating ones
    at t = 0. SRP is not folded into the elements.
    """
    p, v = corot_to_inertial(state.position, state.velocity, state.epoch, system)
    return elements_from_cartesian(p, v, system.mu_asteroid)


def solar_longitude(t, system: SystemModel, lambda0=math.pi):
    """Sun direction seen from the asteroid in the non-rotating axes."""
    return lambda0 + system.frame_rate * t


def phase_angle_of_state(state: CorotState, system: SystemModel):
    from .ejection import phase_angle

    el = to_osculating(state, system)
    return phase_angle(el.i, el.raan, el.argp, solar_longitude(state.epoch, system))


# --- propagation ----------------------------------------------------------


class Status(str, enum.Enum):
    REIMPACT = "REIMPACT"
    ESCAPE = "ESCAPE"
    TIMEOUT = "TIMEOUT"


_STATUS = {kernels.REIMPACT: Status.REIMPACT, kernels.ESCAPE: Status.ESCAPE,
           kernels.TIMEOUT: Status.TIMEOUT}


@dataclass
class TrajectoryOutcome:
    status: Status
    final_state: CorotState
    impact_time: float | None = None  # s since ejection
    impact_bodyfixed: tuple | None = None  # (lat, lon) rad
    revolution_count: int = 0
    path: np.ndarray = field(default_factory=lambda: np.empty((0, 7)), repr=False)
    pericenters: np.ndarray = field(default_factory=lambda: np.empty((0, 7)), repr=False)
    apocenters: np.ndarray = field(default_factory=lambda: np.empty((0, 7)), repr=False)
    nsteps: int = 0
    epoch0: float = 0.0

    def states(self, rows=None):
        """Yield CorotState objects from an SI sample array (defaults to the path)."""
        rows = self.path if rows is None else rows
        for row in rows:
            yield CorotState(row[1:4], row[4:7], self.epoch0 + row[0])

    @property
    def max_radius(self):
        radii = [self.final_state.radius]
        if len(self.apocenters):
            radii.extend(np.linalg.norm(self.apocenters[:, 1:4], axis=1))
        if len(self.path):
            radii.extend(np.linalg.norm(self.path[:, 1:4], axis=1))
        return float(max(radii))


def default_max_time(state0: CorotState, system: SystemModel, periods=50.0):
    el = to_osculating(state0, system)
    if el.a > 0 and math.isfinite(el.a):
        return periods * system.kepler_period(el.a)
    return periods * system.kepler_period(system.radius)


def default_escape_radius(system: SystemModel, beta):
    from .equilibria import l2_distance

    return 5.0 * l2_distance(system, beta)


def _rows_to_si(rows, system):
    out = np.array(rows, dtype=float, copy=True)
    if out.size:
        tau = system.time_unit
        R = system.radius
        out[:, 0] *= tau
        out[:, 1:4] *= R
        out[:, 4:7] *= R / tau
    return out


def propagate(state0: CorotState, system: SystemModel, beta, max_time=None, *,
              rtol=None, atol=None, escape_radius=None, sample_every=1, backend=None,
              max_steps=2_000_000):
    """Integrate a grain until re-impact, escape or ``max_time`` [s].

    ``escape_radius`` [m] defaults to five times the L2 distance for ``beta``.
    Returns a :class:`TrajectoryOutcome` with samples in SI units, times
    measured from ``state0.epoch``.
    """
    if state0.radius < system.radius * (1.0 - 1e-12):
        raise DomainError("initial state lies inside the asteroid")
    rtol = TOLERANCES["rtol"] if rtol is None else rtol
    atol = TOLERANCES["atol"] if atol is None else atol
    if max_time is None:
        max_time = default_max_time(state0, system)
    if escape_radius is None:
        escape_radius = default_escape_radius(system, beta)
    tau = system.time_unit
    out = kernels.propagate(
        to_kernel(state0, system), kernel_params(system, beta), max_time / tau, rtol, atol,
        escape_radius / system.radius, max_steps=max_steps, sample_every=sample_every,
        backend=backend,
    )
    final = from_kernel(out["y"], system, state0.epoch, out["t"])
    if out["status"] == kernels.FAILED:
        raise NumericalError("integration failed (step underflow or step limit)", final)
    status = _STATUS[out["status"]]
    outcome = TrajectoryOutcome(
        status=status,
        final_state=final,
        revolution_count=len(out["peri"]),
        path=_rows_to_si(out["samples"], system),
        pericenters=_rows_to_si(out["peri"], system),
        apocenters=_rows_to_si(out["apo"], system),
        nsteps=out["nsteps"],
        epoch0=state0.epoch,
    )
    if status is Status.REIMPACT:
        outcome.impact_time = out["t"] * tau
        p_bf, _ = corot_to_bodyfixed(final, system)
        outcome.impact_bodyfixed = latlon(p_bf)
    return outcome


def write_trajectory_csv(outcome: TrajectoryOutcome, system: SystemModel, path, beta=0.0):
    """Dump samples: t_s, normalized x..vz, r_astro_m, e_osc, phi_deg."""
    from .ejection import phase_angle

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_s", "x", "y", "z", "vx", "vy", "vz", "r_astro_m", "e_osc", "phi_deg"])
        for row, st in zip(outcome.path, outcome.states()):
            pos, vel = st.normalized(system)
            el = to_osculating(st, system)
            phi = phase_angle(el.i, el.raan, el.argp, solar_longitude(st.epoch, system))
            writer.writerow([repr(float(row[0]))] + [repr(float(c)) for c in pos + vel]
                            + [repr(st.radius), repr(el.e), repr(math.degrees(phi))])
