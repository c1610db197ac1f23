"""Monte Carlo dispersion of the on-ground strategy for a regolith mixture.

Every shot draws its own counter-based random stream from
``(master_seed, shot_index)``, so the records do not depend on how the
shots are scheduled across threads.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from ._parallel import parallel_map
from .dynamics import Status, propagate, surface_point, to_local_horizontal
from .ejection import EjectionSpec, direction_from_angles, spec_to_state
from .errors import DomainError, NumericalError
from .model import ParticleModel, SystemModel
from .sorting import ON_GROUND_PHI, ground_spec

TRUNCATION_SIGMAS = 3.0


@dataclass(frozen=True)
class MaterialComponent:
    name: str
    mass_fraction: float
    density_mean: float  # kg/m^3
    density_sigma: float  # kg/m^3

    def __post_init__(self):
        if not self.name:
            raise DomainError("material name must be non-empty")
        if not 0.0 <= self.mass_fraction <= 1.0:
            raise DomainError(f"{self.name}: mass fraction must lie in [0, 1]")
        if not self.density_mean > 0.0:
            raise DomainError(f"{self.name}: density must be positive")
        if not self.density_sigma >= 0.0:
            raise DomainError(f"{self.name}: density sigma must be non-negative")


# S-type ordinary chondrite regolith
CHONDRITE_MIX = (
    MaterialComponent("Fe-Ni", 0.02, 7500.0, 70.0),
    MaterialComponent("High density opx", 0.15, 3950.0, 100.0),
    MaterialComponent("Medium density ol", 0.50, 3500.0, 100.0),
    MaterialComponent("Low density ol", 0.28, 3200.0, 50.0),
    MaterialComponent("Plagioclase", 0.05, 2680.0, 40.0),
)


def validate_mix(mix):
    mix = tuple(mix)
    if not mix:
        raise DomainError("material mix is empty")
    names = [m.name for m in mix]
    if len(set(names)) != len(names):
        raise DomainError("material names must be unique")
    total = math.fsum(m.mass_fraction for m in mix)
    if abs(total - 1.0) > 1e-9:
        raise DomainError(f"mass fractions sum to {total!r}, expected 1")
    return mix


def mix_mean_density(mix):
    return math.fsum(m.mass_fraction * m.density_mean for m in mix)


@dataclass(frozen=True)
class UncertaintyConfig:
    speed_mean: float = 0.0235  # m/s
    speed_sigma_fraction: float = 0.01
    angle_sigma: float = math.radians(0.33)  # rad, each of two directions
    mu_log: float = -9.21  # ln of radius in m
    sigma_log: float = 0.05
    phi: float = ON_GROUND_PHI
    latitude: float = 0.0

    def __post_init__(self):
        if not self.speed_mean > 0.0:
            raise DomainError("speed_mean must be positive")
        for name in ("speed_sigma_fraction", "angle_sigma", "sigma_log"):
            v = getattr(self, name)
            if not (v >= 0.0 and math.isfinite(v)):
                raise DomainError(f"{name} must be finite and non-negative")
        if not math.isfinite(self.mu_log):
            raise DomainError("mu_log must be finite")

    def radius_stats(self):
        """(mode, mean, std) of the lognormal grain radius [m]."""
        m, s = self.mu_log, self.sigma_log
        mean = math.exp(m + 0.5 * s * s)
        return math.exp(m - s * s), mean, mean * math.sqrt(math.expm1(s * s))


def shot_rng(master_seed, index):
    """Independent Philox stream for one shot."""
    ss = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, int(index)])
    return np.random.Generator(np.random.Philox(ss))


def _truncated_normal(rng, mean, sigma):
    if sigma == 0.0:
        return mean
    while True:
        z = rng.standard_normal()
        if abs(z) <= TRUNCATION_SIGMAS:
            return mean + sigma * z


@dataclass(frozen=True)
class Shot:
    material: str
    particle: ParticleModel
    spec: EjectionSpec


def sample_shot(mix, uncertainty: UncertaintyConfig, rng, site: EjectionSpec) -> Shot:
    """Draw material, density, radius, speed and two angle errors.

    ``site`` is the nominal ejection (location, epoch, speed); the sampled
    speed and direction replace its own.
    """
    u = rng.random()
    cum = np.cumsum([m.mass_fraction for m in mix])
    idx = min(int(np.searchsorted(cum, u * cum[-1], side="right")), len(mix) - 1)
    mat = mix[idx]
    rho = _truncated_normal(rng, mat.density_mean, mat.density_sigma)
    r = float(np.exp(uncertainty.mu_log + uncertainty.sigma_log * rng.standard_normal()))
    speed = uncertainty.speed_mean * (1.0 + uncertainty.speed_sigma_fraction * rng.standard_normal())
    a_lon = uncertainty.angle_sigma * rng.standard_normal()
    a_lat = uncertainty.angle_sigma * rng.standard_normal()
    direction = None if a_lon == 0.0 and a_lat == 0.0 else direction_from_angles(a_lon, a_lat)
    spec = EjectionSpec(site.latitude, site.longitude, max(speed, 0.0), direction, site.epoch)
    return Shot(mat.name, ParticleModel(r, rho), spec)


@dataclass(frozen=True)
class ShotRecord:
    material: str
    rho: float  # kg/m^3
    radius: float  # m
    beta: float
    xloc: float  # m, nan unless REIMPACT
    yloc: float
    hmax: float  # m above the surface sphere
    time: float  # s, flight time or time at termination
    status: str


@dataclass(frozen=True)
class MaterialStats:
    name: str
    count: int
    reimpacts: int
    mean_xloc: float
    std_xloc: float
    min_xloc: float
    max_xloc: float
    mean_yloc: float
    std_yloc: float
    max_hmax: float


@dataclass(frozen=True)
class McResult:
    records: tuple
    stats: tuple = field(default=())
    nominal: ShotRecord | None = None
    reference: ShotRecord | None = None  # beta = 0 control shot
    seed: int = 0

    def by_material(self, name):
        return [r for r in self.records if r.material == name]

    def reimpacts(self):
        return [r for r in self.records if r.status == Status.REIMPACT.value]


def _fly(system, spec, particle, material, max_time):
    try:
        out = propagate(spec_to_state(spec, system), system, particle.beta, max_time, sample_every=0)
    except NumericalError:
        return ShotRecord(material, particle.density, particle.radius, particle.beta,
                          math.nan, math.nan, math.nan, math.nan, "FAILED")
    hmax = out.max_radius - system.radius
    if out.status is Status.REIMPACT:
        lat, lon = out.impact_bodyfixed
        x, y, _ = to_local_horizontal(surface_point(lat, lon, system.radius), spec.latitude,
                                      spec.longitude, system.radius)
        return ShotRecord(material, particle.density, particle.radius, particle.beta,
                          x, y, hmax, out.impact_time, out.status.value)
    return ShotRecord(material, particle.density, particle.radius, particle.beta,
                      math.nan, math.nan, hmax, float(out.final_state.epoch - spec.epoch),
                      out.status.value)


def material_stats(records, mix):
    stats = []
    for m in mix:
        rows = [r for r in records if r.material == m.name]
        hit = [r for r in rows if r.status == Status.REIMPACT.value]
        x = np.array([r.xloc for r in hit])
        y = np.array([r.yloc for r in hit])
        h = np.array([r.hmax for r in rows if math.isfinite(r.hmax)])
        nan = math.nan
        stats.append(MaterialStats(
            m.name, len(rows), len(hit),
            float(x.mean()) if len(x) else nan, float(x.std()) if len(x) else nan,
            float(x.min()) if len(x) else nan, float(x.max()) if len(x) else nan,
            float(y.mean()) if len(y) else nan, float(y.std()) if len(y) else nan,
            float(h.max()) if len(h) else nan))
    return tuple(stats)


def run_campaign(system: SystemModel, mix, uncertainty: UncertaintyConfig, n_shots,
                 master_seed=0, threads=1, max_time=None) -> McResult:
    """Propagate ``n_shots`` sampled grains from one ejector site.

    The site is placed at the nominal phase angle for the nominal speed.
    Shots that fail numerically are recorded as FAILED; the campaign always
    completes.
    """
    if n_shots < 1:
        raise DomainError("n_shots must be at least 1")
    mix = validate_mix(mix)
    site = ground_spec(system, uncertainty.speed_mean, uncertainty.phi, uncertainty.latitude)
    if max_time is None:
        max_time = 10.0 * system.rotation_period if math.isfinite(system.rotation_period) else None

    def one(i):
        shot = sample_shot(mix, uncertainty, shot_rng(master_seed, i), site)
        return _fly(system, shot.spec, shot.particle, shot.material, max_time)

    records = tuple(parallel_map(one, range(n_shots), threads))
    _, r_mean, _ = uncertainty.radius_stats()
    rho_mix = mix_mean_density(mix)
    nominal = _fly(system, site, ParticleModel(r_mean, rho_mix), "nominal", max_time)
    ref = _fly_beta0(system, site, max_time)
    return McResult(records, material_stats(records, mix), nominal, ref, int(master_seed))


def _fly_beta0(system, site, max_time):
    out = propagate(spec_to_state(site, system), system, 0.0, max_time, sample_every=0)
    x = y = math.nan
    if out.status is Status.REIMPACT:
        lat, lon = out.impact_bodyfixed
        x, y, _ = to_local_horizontal(surface_point(lat, lon, system.radius), site.latitude,
                                      site.longitude, system.radius)
    return ShotRecord("no-srp", math.nan, math.nan, 0.0, x, y, out.max_radius - system.radius,
                      out.impact_time if out.impact_time is not None else math.nan,
                      out.status.value)


@dataclass(frozen=True)
class PairOverlap:
    a: str
    b: str
    threshold: float  # m, midpoint of the two mean x_loc
    misclassified: float  # fraction of the two groups on the wrong side


@dataclass(frozen=True)
class GradientReport:
    materials: tuple  # (name, mean_xloc, std_xloc, n) ordered by mean density
    overlaps: tuple


def pair_overlap(xa, xb):
    """Threshold at the midpoint of the means and the fraction it misclassifies."""
    xa, xb = np.asarray(xa, float), np.asarray(xb, float)
    ma, mb = xa.mean(), xb.mean()
    t = 0.5 * (ma + mb)
    if ma <= mb:
        wrong = np.count_nonzero(xa > t) + np.count_nonzero(xb < t)
    else:
        wrong = np.count_nonzero(xa < t) + np.count_nonzero(xb > t)
    return float(t), wrong / (len(xa) + len(xb))


def density_gradient_report(result: McResult, mix) -> GradientReport:
    hits = {}
    for r in result.reimpacts():
        hits.setdefault(r.material, []).append(r.xloc)
    ordered = sorted((m for m in mix if hits.get(m.name)), key=lambda m: -m.density_mean)
    rows = tuple((m.name, float(np.mean(hits[m.name])), float(np.std(hits[m.name])),
                  len(hits[m.name])) for m in ordered)
    overlaps = []
    for i, ma in enumerate(ordered):
        for mb in ordered[i + 1:]:
            t, f = pair_overlap(hits[ma.name], hits[mb.name])
            overlaps.append(PairOverlap(ma.name, mb.name, t, f))
    return GradientReport(rows, tuple(overlaps))


SHOT_COLUMNS = ["material", "rho_kgm3", "r_um", "beta", "xloc_m", "yloc_m", "hmax_m", "t_s", "status"]
SUMMARY_COLUMNS = ["material", "count", "reimpacts", "mean_xloc_m", "std_xloc_m", "min_xloc_m",
                   "max_xloc_m", "mean_yloc_m", "std_yloc_m", "max_hmax_m"]


def _g(v):
    return f"{v:.17g}"


def write_shots_csv(result: McResult, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SHOT_COLUMNS)
        for r in result.records:
            w.writerow([r.material, _g(r.rho), _g(r.radius * 1e6), _g(r.beta), _g(r.xloc),
                        _g(r.yloc), _g(r.hmax), _g(r.time), r.status])


def write_summary_csv(result: McResult, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for s in result.stats:
            w.writerow([s.name, s.count, s.reimpacts, _g(s.mean_xloc), _g(s.std_xloc),
                        _g(s.min_xloc), _g(s.max_xloc), _g(s.mean_yloc), _g(s.std_yloc),
                        _g(s.max_hmax)])
        for tag, r in (("nominal", result.nominal), ("no-srp", result.reference)):
            if r is not None:
                n = 1 if r.status == Status.REIMPACT.value else 0
                w.writerow([tag, 1, n, _g(r.xloc), "0", _g(r.xloc), _g(r.xloc), _g(r.yloc), "0",
                            _g(r.hmax)])


__all__ = [
    "MaterialComponent", "CHONDRITE_MIX", "validate_mix", "mix_mean_density", "UncertaintyConfig",
    "shot_rng", "Shot", "sample_shot", "ShotRecord", "MaterialStats", "McResult", "material_stats",
    "run_campaign", "PairOverlap", "GradientReport", "pair_overlap", "density_gradient_report",
    "SHOT_COLUMNS", "SUMMARY_COLUMNS", "write_shots_csv", "write_summary_csv",
]
