import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from srpsort.dynamics import Status, surface_point
from srpsort.ejection import EjectionSpec, ejection_phase, initial_elements
from srpsort.errors import DirectReimpact, DomainError, StrategyInfeasible
from srpsort.model import ParticleModel
from srpsort.sorting import (Collection, ErrorKind, SensitivityQuery, SeparationQuery,
                             arc_distance, collection_sweep, ground_spec, landing,
                             on_orbit_collection, perturbed_spec, reimpact_map,
                             required_velocity_for_separation, sensitivity, separation_at_speed,
                             separation_on_ground, separation_sweep, spin_synchronous_speed,
                             write_collection_csv, write_reimpact_csv, write_separation_csv)

FINE = ParticleModel(1e-4, 3200.0)
COARSE = ParticleModel(1e-3, 3200.0)


@settings(max_examples=100)
@given(st.floats(-1.4, 1.4), st.floats(0, 6.28), st.floats(-1.4, 1.4), st.floats(0, 6.28))
def test_arc_distance_vs_vectors(lat1, lon1, lat2, lon2):
    R = 1e4
    u = surface_point(lat1, lon1, 1.0)
    v = surface_point(lat2, lon2, 1.0)
    ang = math.atan2(np.linalg.norm(np.cross(u, v)), np.dot(u, v))
    assert arc_distance(lat1, lon1, lat2, lon2, R) == pytest.approx(R * ang, abs=1e-6)


def test_xloc_monotone_in_beta(small5):
    spec = ground_spec(small5, 0.0235)
    x = [landing(small5, b, spec).xloc for b in (0.0, 5e-4, 1e-3, 2e-3, 4e-3)]
    assert all(b > a for a, b in zip(x, x[1:]))
    assert landing(small5, 1e-3, spec).yloc == pytest.approx(0.0, abs=1e-9)


def test_separation_swap_symmetry(sys3):
    spec = ground_spec(sys3, 2.0)
    ab = separation_on_ground(SeparationQuery(FINE, COARSE, spec, sys3))
    ba = separation_on_ground(SeparationQuery(COARSE, FINE, spec, sys3))
    assert ab.arc == pytest.approx(ba.arc, rel=1e-12)
    assert (ab.xloc_a, ab.xloc_b) == pytest.approx((ba.xloc_b, ba.xloc_a), rel=1e-12)
    same = separation_on_ground(SeparationQuery(FINE, FINE, spec, sys3))
    assert same.arc == 0.0


def test_required_velocity_consistent(sys3):
    rv = required_velocity_for_separation((FINE, COARSE), sys3, target=1.0)
    assert rv.separation == pytest.approx(1.0, abs=1e-3)
    assert separation_at_speed((FINE, COARSE), sys3, rv.speed) == pytest.approx(1.0, abs=1e-3)
    assert separation_at_speed((FINE, COARSE), sys3, 0.9 * rv.speed) < 1.0
    assert rv.speed_over_radius == pytest.approx(rv.speed / sys3.radius)
    with pytest.raises(DomainError):
        required_velocity_for_separation((FINE, COARSE), sys3, target=0.0)


def test_required_velocity_infeasible(sys3):
    with pytest.raises(StrategyInfeasible):
        required_velocity_for_separation((FINE, FINE), sys3, target=1.0, n_scan=8)


def test_separation_sweep_and_csv(sys3, tmp_path):
    rows = separation_sweep((FINE, COARSE), sys3, [1.0, 2.0, 50.0], pair_id="p")
    assert rows[0][2] < rows[1][2]
    assert math.isnan(rows[2][2])  # above escape speed
    write_separation_csv(rows, tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "v_mps,v_over_R,sep_m,pair_id" and len(lines) == 4


def test_perturbed_spec_hold_modes(small5):
    spec = ground_spec(small5, 0.0235)
    site = perturbed_spec(spec, ErrorKind.SPEED_FRACTION, 0.01, small5, hold="site")
    assert (site.latitude, site.longitude, site.epoch) == (spec.latitude, spec.longitude, spec.epoch)
    assert site.speed == pytest.approx(0.0235 * 1.01)
    phase = perturbed_spec(spec, ErrorKind.ANGLE_IN_PLANE, math.radians(0.33), small5, hold="phase")
    assert ejection_phase(phase, small5).phi == pytest.approx(ejection_phase(spec, small5).phi,
                                                              abs=1e-9)
    assert phase.speed == spec.speed


def test_sensitivity_zero_and_positive(small5):
    spec = ground_spec(small5, 0.0235)
    q0 = SensitivityQuery(spec, FINE, small5, ErrorKind.SPEED_FRACTION, 0.0)
    assert sensitivity(q0) == 0.0
    q = SensitivityQuery(spec, FINE, small5, ErrorKind.SPEED_FRACTION, 0.01)
    assert sensitivity(q) > 0.0
    with pytest.raises(DomainError):
        SensitivityQuery(spec, FINE, small5, ErrorKind.SPEED_FRACTION, -1.0)
    with pytest.raises(DomainError):
        SensitivityQuery(spec, FINE, small5, ErrorKind.SPEED_FRACTION, 0.1, hold="nope")


def test_spin_synchronous_speed(sys4, still):
    v = spin_synchronous_speed(sys4)
    a = initial_elements(EjectionSpec(0.0, 0.0, v), sys4).a
    assert sys4.kepler_period(a) == pytest.approx(sys4.rotation_period, rel=1e-9)
    with pytest.raises(DomainError):
        spin_synchronous_speed(still)


def test_reimpact_map_small(sys4, tmp_path):
    lons = np.radians([45.0, 135.0, 225.0, 315.0])
    lats = np.radians([-30.0, 30.0])
    cells = reimpact_map(sys4, 0.0045, 10.34, lons, lats, max_periods=5)
    assert len(cells) == 8
    for c in cells:
        assert c.status in set(Status)
        if c.status is Status.REIMPACT:
            assert c.t_hours > 0 and c.t_periods > 0
    write_reimpact_csv(cells, tmp_path / "m.csv")
    assert (tmp_path / "m.csv").read_text().splitlines()[0] == \
        "lon_deg,lat_deg,t_hours,t_periods,status,revolutions"
    assert cells == reimpact_map(sys4, 0.0045, 10.34, lons, lats, max_periods=5, threads=3)


def test_collection_outcomes(sys3, tmp_path):
    with pytest.raises(DirectReimpact):
        on_orbit_collection(sys3, 0.001, 9.5)
    with pytest.raises(StrategyInfeasible):
        on_orbit_collection(sys3, 0.02, 9.5)
    betas = [0.001, 0.01, 0.02]
    res = collection_sweep(sys3, betas, 9.5)
    assert isinstance(res[0], DirectReimpact) and isinstance(res[2], StrategyInfeasible)
    c = res[1]
    assert isinstance(c, Collection) and c.reached and c.time > 0 and c.revolutions >= 1
    write_collection_csv(betas, res, tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0].startswith("beta,status,t_collect_h")
    assert "COLLECTED" in lines[2]
