"""Planar orbit-averaged model of eccentricity and solar phase angle.

The independent variable is the solar longitude; time follows from
``lambda / n_sun`` with n_sun = sqrt(mu_S / d^3). The flow is integrated in
the regularized variables p = e cos(phi), q = e sin(phi), which remove the
1/e factor of the (e, phi) form and stay smooth through e = 0. The (e, phi)
and canonical (k, phi) forms are available for cross-checks.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from .errors import DomainError, Unreachable
from .model import SystemModel

TWO_PI = 2.0 * math.pi
E_MIN_PERIOD = 0.05
RECTILINEAR_LIMIT = "RECTILINEAR_LIMIT"


@dataclass(frozen=True)
class HamiltonianModel:
    srp_coeff: float  # C
    tidal_coeff: float  # A
    mean_sma: float  # m
    system: SystemModel = field(repr=False)
    beta: float = 0.0

    @property
    def n_sun(self):
        """Mean motion of the Sun in the asteroid sky [rad/s]."""
        return math.sqrt(self.system.mu_sun / self.system.heliocentric_distance**3)

    def without_tides(self):
        return replace(self, tidal_coeff=0.0)


def srp_coefficient(system: SystemModel, beta, a_mean):
    return 1.5 * beta * math.sqrt(system.mu_sun * a_mean / (system.mu_asteroid * system.heliocentric_distance))


def tidal_coefficient(system: SystemModel, a_mean):
    d = system.heliocentric_distance
    return 0.75 * math.sqrt(system.mu_sun * a_mean**3 / (system.mu_asteroid * d**3))


def build_model(system: SystemModel, beta, a_mean, tides=True) -> HamiltonianModel:
    if a_mean <= 0.0:
        raise DomainError("mean semi-major axis must be positive")
    A = tidal_coefficient(system, a_mean) if tides else 0.0
    return HamiltonianModel(srp_coefficient(system, beta, a_mean), A, float(a_mean), system, float(beta))


def mean_sma(system: SystemModel, beta, a0, e0, phi0, x0):
    """Orbit-averaged semi-major axis after an ejection from co-rotating x = ``x0``.

    SRP is a constant push along +x, so the mean energy differs from the
    ejection energy by its work between the launch point and the
    time-averaged position of the ellipse, -3/2 a e along the periapsis line.
    """
    mu = system.mu_asteroid
    energy = -mu / (2.0 * a0) + beta * system.srp_accel_per_beta * (-1.5 * a0 * e0 * math.cos(phi0) - x0)
    if energy >= 0.0:
        raise DomainError("mean orbit is unbound")
    return -mu / (2.0 * energy)


def ejection_model(system: SystemModel, beta, speed, phi0=math.pi / 2, tides=True):
    """Averaged model for an equatorial ejection at solar phase ``phi0``.

    Returns (model, e0, nu0, a0).
    """
    from .ejection import EjectionSpec, initial_elements

    ie = initial_elements(EjectionSpec(0.0, 0.0, speed), system)
    x0 = system.radius * math.cos(phi0 + ie.nu)
    a_bar = mean_sma(system, beta, ie.a, ie.e, phi0, x0)
    return build_model(system, beta, a_bar, tides), ie.e, ie.nu, ie.a


def tidal_to_srp_ratio(system: SystemModel, beta, a_mean):
    return tidal_coefficient(system, a_mean) / srp_coefficient(system, beta, a_mean)


def tidal_srp_crossing(system: SystemModel, beta):
    """Mean semi-major axis [m] at which the tidal and SRP coefficients are equal."""
    # A/C is linear in a_mean, so the crossing has a closed form
    return system.radius / tidal_to_srp_ratio(system, beta, system.radius)


def hamiltonian(model: HamiltonianModel, e, phi):
    e = np.asarray(e, dtype=float)
    if np.any(e < 0.0) or np.any(e >= 1.0):
        raise DomainError("eccentricity must lie in [0, 1)")
    A, C = model.tidal_coeff, model.srp_coeff
    H = np.sqrt(1.0 - e * e) + 0.5 * A * e * e * (1.0 + 5.0 * np.cos(2.0 * phi)) - C * e * np.cos(phi)
    return float(H) if H.ndim == 0 else H


def _h_pq(model, p, q):
    k = math.sqrt(max(0.0, 1.0 - p * p - q * q))
    return k + model.tidal_coeff * (3.0 * p * p - 2.0 * q * q) - model.srp_coeff * p


def rhs_regularized(lam, y, model):
    p, q = y
    A, C = model.tidal_coeff, model.srp_coeff
    k = math.sqrt(max(0.0, 1.0 - p * p - q * q))
    # k * dH/dq and k * dH/dp written without the 1/k factor
    dp = q + 4.0 * A * q * k
    dq = -p + (6.0 * A * p - C) * k
    return [dp, dq]


def rhs_noncanonical(lam, y, model):
    e, phi = y
    A, C = model.tidal_coeff, model.srp_coeff
    k = math.sqrt(1.0 - e * e)
    h_e = -e / k + A * e * (1.0 + 5.0 * math.cos(2.0 * phi)) - C * math.cos(phi)
    h_phi = -5.0 * A * e * e * math.sin(2.0 * phi) + C * e * math.sin(phi)
    return [-(k / e) * h_phi, (k / e) * h_e]


def rhs_canonical(lam, y, model):
    k, phi = y
    A, C = model.tidal_coeff, model.srp_coeff
    e = math.sqrt(1.0 - k * k)
    h_phi = -5.0 * A * e * e * math.sin(2.0 * phi) + C * e * math.sin(phi)
    h_k = 1.0 - A * k * (1.0 + 5.0 * math.cos(2.0 * phi)) + C * (k / e) * math.cos(phi)
    return [h_phi, -h_k]


@dataclass
class PhaseTrajectory:
    lam: np.ndarray  # solar longitude advance from the start [rad]
    e: np.ndarray
    phi: np.ndarray  # wrapped to [0, 2 pi)
    k: np.ndarray
    H: float
    markers: list = field(default_factory=list)  # (lam, label)
    model: HamiltonianModel | None = field(default=None, repr=False)

    @property
    def time(self):
        return self.lam / self.model.n_sun

    @property
    def h_drift(self):
        H = hamiltonian(self.model, np.minimum(self.e, 1.0 - 1e-16), self.phi)
        return float(np.max(np.abs(H - self.H)) / abs(self.H))


def flow(model: HamiltonianModel, e0, phi0, lam_span, form="regularized", n_out=2001,
         rtol=1e-12, atol=1e-14, t_eval=None):
    """Integrate the averaged equations over ``lam_span`` (radians of solar longitude).

    Integration stops with a ``RECTILINEAR_LIMIT`` marker if e reaches 1.
    """
    if not 0.0 <= e0 < 1.0:
        raise DomainError("initial eccentricity must lie in [0, 1)")
    lam_end = float(lam_span)
    if t_eval is None:
        t_eval = np.linspace(0.0, lam_end, n_out)
    H0 = hamiltonian(model, e0, phi0)
    if form == "regularized":
        y0 = [e0 * math.cos(phi0), e0 * math.sin(phi0)]
        fun = rhs_regularized

        def limit(lam, y, m):
            return 1.0 - 1e-12 - (y[0] ** 2 + y[1] ** 2)
    elif form == "noncanonical":
        if e0 == 0.0:
            raise DomainError("the (e, phi) form is singular at e = 0")
        y0 = [e0, phi0]
        fun = rhs_noncanonical

        def limit(lam, y, m):
            return 1.0 - 1e-9 - y[0]
    elif form == "canonical":
        if e0 == 0.0:
            raise DomainError("the (k, phi) form is singular at e = 0")
        y0 = [math.sqrt(1.0 - e0 * e0), phi0]
        fun = rhs_canonical

        def limit(lam, y, m):
            return y[0] - 1e-9
    else:
        raise ValueError(f"unknown form {form!r}")
    limit.terminal = True
    sol = solve_ivp(fun, (0.0, lam_end), y0, method="DOP853", t_eval=t_eval, args=(model,),
                    rtol=rtol, atol=atol, events=limit)
    if sol.status < 0:
        raise RuntimeError(sol.message)
    a, b = np.asarray(sol.y, dtype=float).reshape(2, -1)
    if form == "regularized":
        e = np.hypot(a, b)
        phi = np.arctan2(b, a) % TWO_PI
    elif form == "noncanonical":
        e, phi = a, b % TWO_PI
    else:
        e, phi = np.sqrt(np.maximum(0.0, 1.0 - a * a)), b % TWO_PI
    markers = []
    if sol.status == 1:
        markers.append((float(sol.t_events[0][0]), RECTILINEAR_LIMIT))
    return PhaseTrajectory(sol.t, e, phi, np.sqrt(np.maximum(0.0, 1.0 - e * e)), H0, markers, model)


def state_after(model: HamiltonianModel, e0, phi0, dlam, rtol=1e-12):
    """(e, phi) after a solar-longitude advance, or None if e reached 1 first."""
    if dlam == 0.0:
        return e0, phi0 % TWO_PI
    tr = flow(model, e0, phi0, dlam, t_eval=[dlam], rtol=rtol)
    if tr.markers or len(tr.e) == 0:
        return None
    return float(tr.e[-1]), float(tr.phi[-1])


# --- closed-form transfer time (no tides) ----------------------------------


def _isoline_harmonic(C, H):
    """k(lam) = kc + amp * sin(w (lam - lam_c)) along an isoline without tides."""
    w = math.sqrt(1.0 + C * C)
    disc = 1.0 + C * C - H * H
    if disc < 0.0:
        raise Unreachable("isoline does not exist for this Hamiltonian value")
    kc = H / (1.0 + C * C)
    amp = C * math.sqrt(disc) / (1.0 + C * C)
    return w, kc, amp


def _isoline_phase_arg(k, kc, amp, tol=1e-9):
    s = (k - kc) / amp
    if abs(s) > 1.0 + tol:
        raise Unreachable(f"k = {k} is not reachable on this isoline (s = {s})")
    return max(-1.0, min(1.0, s))


def time_along_isoline(model: HamiltonianModel, H, k0, k1, increasing=True):
    """Time [s] to move from k0 to k1 along the isoline H without tides.

    ``increasing`` gives the initial sense of k (k grows while sin(phi) > 0).
    The first forward arrival at k1 is returned, so the result is never
    negative and includes passages through the turning points.
    """
    C = model.srp_coeff
    if C <= 0.0:
        raise Unreachable("transfer time needs a positive SRP coefficient")
    w, kc, amp = _isoline_harmonic(C, H)
    s0 = _isoline_phase_arg(k0, kc, amp)
    s1 = _isoline_phase_arg(k1, kc, amp)
    if k1 == k0:
        return 0.0
    th0 = math.asin(s0) if increasing else math.pi - math.asin(s0)
    # first phase at or after th0 where sin(th) = s1
    best = min((base - th0) % TWO_PI for base in (math.asin(s1), math.pi - math.asin(s1)))
    return best / w / model.n_sun


def isoline_k_after(model: HamiltonianModel, H, k0, dlam, increasing=True):
    """k after a solar-longitude advance along a tide-free isoline."""
    w, kc, amp = _isoline_harmonic(model.srp_coeff, H)
    s0 = _isoline_phase_arg(k0, kc, amp)
    th0 = math.asin(s0) if increasing else math.pi - math.asin(s0)
    return kc + amp * math.sin(th0 + w * dlam)


def eccentricity_at_phase(model: HamiltonianModel, H, phi):
    """Eccentricities on the isoline H at a given phase angle (ascending order)."""
    f = lambda e: hamiltonian(model, e, phi) - H
    grid = np.linspace(0.0, 1.0 - 1e-12, 2001)
    vals = [f(e) for e in grid]
    roots = []
    for i in range(len(grid) - 1):
        if vals[i] == 0.0:
            roots.append(float(grid[i]))
        elif vals[i] * vals[i + 1] < 0.0:
            roots.append(brentq(f, grid[i], grid[i + 1], xtol=1e-15, rtol=1e-14))
    return roots


# --- periods ----------------------------------------------------------------


def _dt_dnu(nu, a, e, phi, system: SystemModel, beta):
    mu = system.mu_asteroid
    d = system.heliocentric_distance
    one = 1.0 + e * math.cos(nu)
    base = math.sqrt(a**3 / mu) * (1.0 - e * e) ** 1.5 / one**2
    pert = beta * (system.mu_sun / mu) * (a * a / (d * d)) * (1.0 - e * e) ** 2 / (e * one**2)
    return base * (1.0 - pert * (math.cos(phi) + math.sin(nu) * math.sin(phi + nu) / one))


def time_between_anomalies(system: SystemModel, beta, a, e, phi, nu0, nu1):
    """Time [s] from true anomaly nu0 to nu1 including the pericenter drift due to SRP."""
    if not 0.0 < e < 1.0:
        raise DomainError("eccentricity must lie in (0, 1)")
    val, _ = quad(_dt_dnu, nu0, nu1, args=(a, e, phi, system, beta), epsabs=0.0, epsrel=1e-11, limit=200)
    return val


def srp_period(system: SystemModel, beta, a_mean, e_mean, phi, strict=False):
    """Orbital period with the first-order SRP correction [s].

    Below ``E_MIN_PERIOD`` the correction diverges; the Kepler period is
    returned with a warning, or DomainError is raised when ``strict``.
    """
    kepler = system.kepler_period(a_mean)
    if beta == 0.0:
        return kepler
    if not e_mean < 1.0:
        raise DomainError("mean eccentricity must be below 1")
    if e_mean < E_MIN_PERIOD:
        if strict:
            raise DomainError(f"mean eccentricity {e_mean} below {E_MIN_PERIOD}")
        warnings.warn("eccentricity too small for the SRP period correction; using Kepler period")
        return kepler
    d = system.heliocentric_distance
    corr = 0.5 * beta * (system.mu_sun / system.mu_asteroid) * (a_mean / d) ** 2 * math.cos(phi)
    return kepler * (1.0 - corr * (12.0 + 13.0 * e_mean**2) / (4.0 * e_mean))


# --- ejection-level predictions ---------------------------------------------


@dataclass(frozen=True)
class FirstRevolution:
    phi0: float
    e0: float
    H: float
    t_apocenter: float  # s
    t_pericenter: float  # s
    e_apocenter: float  # nan if e reached 1
    e_pericenter: float
    e_crit: float

    @property
    def multirev(self):
        return self.e_pericenter < self.e_crit


def first_revolution(model: HamiltonianModel, e0, phi0, nu0):
    """Analytic eccentricity at the first apocenter and pericenter after ejection."""
    sysm = model.system
    a = model.mean_sma
    t_apo = time_between_anomalies(sysm, model.beta, a, e0, phi0, nu0, math.pi)
    t_peri = time_between_anomalies(sysm, model.beta, a, e0, phi0, nu0, TWO_PI)
    n = model.n_sun
    res = []
    for t in (t_apo, t_peri):
        st = state_after(model, e0, phi0, n * t)
        res.append(math.nan if st is None else st[0])
    e_crit = 1.0 - sysm.radius / a
    return FirstRevolution(phi0 % TWO_PI, e0, hamiltonian(model, e0, phi0), t_apo, t_peri,
                           res[0], res[1], e_crit)


def multirev_region(model: HamiltonianModel, e0, a0, R, nu0, n_phi=721):
    """Intervals of initial phase angle [rad] whose first pericenter clears the surface.

    Returns a list of (phi_start, phi_end) pairs in [0, 2 pi).
    """
    if a0 < R:
        raise DomainError("semi-major axis below the asteroid radius")
    e_crit = 1.0 - R / a0
    phis = np.linspace(0.0, TWO_PI, n_phi, endpoint=False)
    step = phis[1] - phis[0]
    n = model.n_sun
    sysm = model.system

    def margin(phi):
        t = time_between_anomalies(sysm, model.beta, model.mean_sma, e0, phi, nu0, TWO_PI)
        st = state_after(model, e0, phi, n * t)
        return 1.0 if st is None else st[0] - e_crit

    vals = [margin(p) for p in phis]
    inside = [v < 0.0 for v in vals]
    intervals = []
    i = 0
    while i < n_phi:
        if inside[i]:
            j = i
            while j + 1 < n_phi and inside[j + 1]:
                j += 1
            lo = phis[i] if i == 0 else brentq(margin, phis[i - 1], phis[i], xtol=1e-10)
            hi = phis[j] + step if j == n_phi - 1 else brentq(margin, phis[j], phis[j + 1], xtol=1e-10)
            intervals.append((float(lo), float(hi)))
            i = j + 1
        else:
            i += 1
    if len(intervals) > 1 and intervals[0][0] == 0.0 and math.isclose(intervals[-1][1], TWO_PI):
        first = intervals.pop(0)
        last = intervals.pop()
        intervals.append((last[0], first[1] + TWO_PI))
    return intervals


def collection_time_estimate(model: HamiltonianModel, e0, phi0, nu0):
    """Analytic time [s] for the eccentricity to come back to its first-apocenter value.

    The first apocenter follows from the anomaly integral, the rest from the
    tide-free isoline: the return point mirrors the apocenter about the
    turning point of k, so the estimate is 2 t(k0 -> k_turn) - t_apocenter.
    """
    m0 = model.without_tides()
    H = hamiltonian(m0, e0, phi0)
    k0 = math.sqrt(1.0 - e0 * e0)
    increasing = math.sin(phi0) > 0.0
    w, kc, amp = _isoline_harmonic(m0.srp_coeff, H)
    k_turn = kc + amp if increasing else kc - amp
    t_turn = time_along_isoline(m0, H, k0, k_turn, increasing)
    t_apo = time_between_anomalies(model.system, model.beta, model.mean_sma, e0, phi0, nu0, math.pi)
    return 2.0 * t_turn - t_apo


# --- geometry ----------------------------------------------------------------


def y_axis_height(a_mean, e, phi, side=-1):
    """Distance from the asteroid center where a frozen ellipse crosses the Y-axis.

    ``side=-1`` takes the -Y half-axis, where orbits with phi near 90 deg have
    their apocenter. NaN is returned for e >= 1.
    """
    e = np.asarray(e, dtype=float)
    phi = np.asarray(phi, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        h = a_mean * (1.0 - e * e) / (1.0 + side * e * np.sin(phi))
    h = np.where(e < 1.0, h, np.nan)
    return float(h) if h.ndim == 0 else h


def y_axis_height_isolines(a_mean, e_grid, phi_grid, side=-1):
    """Height field on a (phi, e) mesh, shape (len(e_grid), len(phi_grid))."""
    E, P = np.meshgrid(np.asarray(e_grid, float), np.asarray(phi_grid, float), indexing="ij")
    return y_axis_height(a_mean, E, P, side)


# --- exports -------------------------------------------------------------------


def phase_space_table(model: HamiltonianModel, system: SystemModel, speed, phis, latitude=0.0):
    """Per-phase rows for an equatorial ejection: H and analytic apsis times."""
    from .ejection import EjectionSpec, initial_elements

    ie = initial_elements(EjectionSpec(latitude, 0.0, speed), system)
    rows = []
    for phi in phis:
        fr = first_revolution(model, ie.e, phi, ie.nu)
        rows.append((math.degrees(phi), ie.e, fr.H, fr.t_pericenter, fr.t_apocenter,
                     fr.e_pericenter, fr.e_apocenter))
    return rows


PHASE_COLUMNS = ["phi_deg", "e", "H", "t_to_pericenter_s", "t_to_apocenter_s",
                 "e_at_pericenter", "e_at_apocenter"]


def write_phase_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PHASE_COLUMNS)
        for r in rows:
            w.writerow([f"{v:.17g}" for v in r])


def isolines(model: HamiltonianModel, seeds, n_points=721):
    """Polylines of constant H traced with the flow from (e, phi) seeds."""
    out = []
    span = TWO_PI / math.sqrt(1.0 + model.srp_coeff**2)
    for idx, (e0, phi0) in enumerate(seeds):
        tr = flow(model, e0, phi0, span, n_out=n_points)
        out.append((idx, tr.H, tr.phi, tr.e))
    return out


def write_isolines_csv(lines, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iso_id", "H", "phi_deg", "e"])
        for idx, H, phi, e in lines:
            for p, ee in zip(phi, e):
                w.writerow([idx, f"{H:.17g}", f"{math.degrees(p):.17g}", f"{ee:.17g}"])
