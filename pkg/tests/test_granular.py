import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from srpsort.errors import DomainError
from srpsort.granular import (ANCHOR_SYSTEM, BOND_ANCHOR, DEFAULT_COHESION, DEFAULT_HAMAKER,
                              AggregateModel, CohesionParams, bond_ratio, calibrate_hamaker,
                              cohesion_force, doublet_area_ratio, doublet_beta,
                              effective_beta, effective_surface_gravity, grain_weight)
from srpsort.model import ParticleModel, build_system

MONO = ParticleModel(1e-4, 3500.0)


def test_aggregate_trivial_cases():
    assert effective_beta(AggregateModel(MONO, MONO.radius)) == pytest.approx(MONO.beta)
    assert effective_beta(AggregateModel(MONO, 10 * MONO.radius, porosity=0.9)) == \
        pytest.approx(MONO.beta, rel=1e-12)
    assert effective_beta(AggregateModel(MONO, 2 * MONO.radius, shape_factor=1.5)) == \
        pytest.approx(0.75 * MONO.beta)


@settings(max_examples=50)
@given(st.floats(1.0, 50.0), st.floats(0.0, 0.95))
def test_aggregate_monotone(scale, phi):
    b = effective_beta(AggregateModel(MONO, scale * MONO.radius, porosity=phi))
    bigger = effective_beta(AggregateModel(MONO, 1.1 * scale * MONO.radius, porosity=phi))
    porous = effective_beta(AggregateModel(MONO, scale * MONO.radius, porosity=min(phi + 0.02, 0.99)))
    assert bigger < b < porous


@pytest.mark.parametrize("kw", [dict(porosity=1.0), dict(porosity=-0.1), dict(shape_factor=0.0)])
def test_aggregate_validation(kw):
    with pytest.raises(DomainError):
        AggregateModel(MONO, MONO.radius, **kw)
    with pytest.raises(DomainError):
        AggregateModel(MONO, 0.5 * MONO.radius)


def _raster_ratio(tilt, n=801):
    d = 2.0 * abs(math.sin(tilt))
    xs = np.linspace(-1.0, 1.0 + d, n)
    ys = np.linspace(-1.0, 1.0, n)
    X, Y = np.meshgrid(xs, ys)
    inside = (X**2 + Y**2 <= 1) | ((X - d) ** 2 + Y**2 <= 1)
    area = inside.mean() * (xs[-1] - xs[0]) * (ys[-1] - ys[0])
    return area / (2 * math.pi)


def test_doublet_limits_and_raster():
    assert doublet_area_ratio(0.0) == pytest.approx(0.5)
    assert doublet_area_ratio(math.pi / 2) == pytest.approx(1.0)
    for tilt in np.linspace(0.05, 1.5, 7):
        assert doublet_area_ratio(tilt) == pytest.approx(_raster_ratio(tilt), abs=5e-3)
    t = np.linspace(0, math.pi / 2, 50)
    r = [doublet_area_ratio(x) for x in t]
    assert all(b >= a for a, b in zip(r, r[1:]))
    assert doublet_beta(MONO, math.pi / 2) == pytest.approx(MONO.beta)


def test_cohesion_force_formula():
    p = CohesionParams(1e-20, cleanliness=0.5, ion_diameter=2e-10)
    expect = 1e-20 * 0.25 * 1e-4 / (96 * 4e-20)
    assert cohesion_force(p, 1e-4) == pytest.approx(expect, rel=1e-14)
    with pytest.raises(DomainError):
        cohesion_force(p, 0.0)
    for kw in (dict(hamaker=0.0), dict(hamaker=1e-20, cleanliness=0.0),
               dict(hamaker=1e-20, ion_diameter=-1.0)):
        with pytest.raises(DomainError):
            CohesionParams(**kw)


@settings(max_examples=50)
@given(st.floats(1e-6, 1e-2))
def test_bond_inverse_square(r):
    b1 = bond_ratio(DEFAULT_COHESION, r, ANCHOR_SYSTEM)
    b2 = bond_ratio(DEFAULT_COHESION, 2 * r, ANCHOR_SYSTEM)
    assert b1 / b2 == pytest.approx(4.0, rel=1e-12)


def test_default_calibration():
    assert bond_ratio(DEFAULT_COHESION, 1e-4, ANCHOR_SYSTEM) == pytest.approx(BOND_ANCHOR, rel=1e-12)
    assert DEFAULT_HAMAKER == pytest.approx(calibrate_hamaker(), rel=0)
    assert 1e-21 < DEFAULT_HAMAKER < 1e-19


def test_centrifugal_relief():
    g0 = ANCHOR_SYSTEM.surface_gravity()
    assert effective_surface_gravity(ANCHOR_SYSTEM) < g0
    assert effective_surface_gravity(ANCHOR_SYSTEM, math.pi / 2) == pytest.approx(g0, abs=1e-18)
    w = ANCHOR_SYSTEM.spin_rate
    assert g0 - effective_surface_gravity(ANCHOR_SYSTEM) == pytest.approx(w * w * 100.0)
    fast = build_system(100.0, 2600.0, 3600.0)
    with pytest.raises(DomainError):
        grain_weight(1e-4, 3500.0, fast)
