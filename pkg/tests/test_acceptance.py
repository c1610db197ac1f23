"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line with the measured values before
asserting, so ``pytest -v -s`` (or the captured log) gives a one-page
summary.
"""

import math
import time

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from srpsort.dynamics import (CorotState, Status, cartesian_from_elements, corot_to_inertial,
                              elements_from_cartesian, inertial_to_corot, jacobi_integral,
                              phase_angle_of_state, propagate, to_osculating)
from srpsort.ejection import (EjectionSpec, critical_eccentricity, initial_elements,
                              spec_for_phase, spec_to_state)
from srpsort.equilibria import max_open_velocity, zvc_open_velocity
from srpsort.granular import (ANCHOR_SYSTEM, DEFAULT_COHESION, bond_ratio, doublet_beta)
from srpsort.model import ParticleModel, build_system, compute_beta
from srpsort.montecarlo import (CHONDRITE_MIX, UncertaintyConfig, run_campaign, write_shots_csv,
                                write_summary_csv)
from srpsort.phasespace import (ejection_model, flow, hamiltonian, rhs_canonical, srp_period,
                                tidal_srp_crossing, tidal_to_srp_ratio, time_along_isoline)
from srpsort.sorting import (Collection, ErrorKind, SensitivityQuery, ground_spec,
                             on_orbit_collection, reimpact_map, required_velocity_for_separation,
                             sensitivity, sensitivity_sweep, spin_synchronous_speed)

HOUR = 3600.0


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {n:2d}] {'PASS' if ok else 'FAIL'}: {detail}")
        return ok
    return emit


def within(x, target, rel):
    return abs(x - target) <= rel * abs(target)


def test_c01_beta_anchor(report):
    b = compute_beta(35e-6, 3200.0, 1.0)
    ok = 4.8e-3 <= b <= 5.4e-3
    assert report(1, ok, f"beta(35 um, 3200 kg/m3) = {b:.4e} (want [4.8e-3, 5.4e-3])")


def test_c02_ejection_eccentricity(report, sys3):
    ie = initial_elements(EjectionSpec(0.0, 0.0, 9.5), sys3)
    ecrit = critical_eccentricity(ie.a, sys3.radius)
    ok = abs(ie.e - 0.93) <= 0.005 and abs(ecrit - 0.708) <= 0.005
    assert report(2, ok, f"e0 = {ie.e:.4f} (0.93 +- 0.005), e_crit = {ecrit:.4f} (0.708 +- 0.005)")


def test_c03_zvc_thresholds(report, sys4):
    vmax = max_open_velocity(sys4, [i * 1e-4 for i in range(101)])
    vclose = zvc_open_velocity(sys4, 5.1e-3, 0.0, math.pi)
    ok = within(vmax, 11.2, 0.02) and within(vclose, 10.34, 0.02)
    assert report(3, ok, f"max open velocity = {vmax:.3f} m/s (11.2 +- 2%), "
                         f"closure at beta=5.1e-3 = {vclose:.3f} m/s (10.34 +- 2%)")


def test_c04_reimpact_map(report, sys4):
    lons = np.radians(np.arange(5.0, 360.0, 10.0))
    lats = np.radians(np.arange(-85.0, 90.0, 10.0))
    t0 = time.perf_counter()
    cells = reimpact_map(sys4, 0.0045, 10.34, lons, lats, max_periods=50.0)
    wall = time.perf_counter() - t0
    fast = sum(1 for c in cells if c.status is Status.REIMPACT and c.t_periods < 1.0)
    frac = fast / len(cells)
    multi = [c for c in cells if c.revolutions >= 1]
    mlon = sorted({round(math.degrees(c.lon)) for c in multi})
    in_q3 = all(180.0 - 10.0 <= d <= 270.0 + 10.0 for d in mlon)
    ok = len(cells) == 648 and frac >= 0.6 and multi and in_q3 and wall < 300
    assert report(4, ok, f"{fast}/{len(cells)} = {frac:.1%} re-impact within one period; "
                         f"multi-revolution cells {len(multi)} at lon {mlon} deg; {wall:.1f} s")


def test_c05_direct_reimpact_threshold(report, sys3):
    spec = spec_for_phase(sys3, math.pi / 2, 9.5)
    state = spec_to_state(spec, sys3)
    direct = []
    for b in np.round(np.arange(0.0030, 0.00501, 1e-4), 6):
        out = propagate(state, sys3, float(b), 60 * HOUR, sample_every=0)
        if out.status is Status.REIMPACT and out.revolution_count == 0:
            direct.append(float(b))
    largest = max(direct) if direct else math.nan
    ok = 0.0035 <= largest <= 0.0045
    assert report(5, ok, f"largest beta re-impacting before first pericenter = {largest:.4f} "
                         f"(want [0.0035, 0.0045])")


def test_c06_on_orbit_collection(report, sys3):
    betas = np.round(np.arange(0.0040, 0.01201, 2e-4), 6)
    collected = []
    for b in betas:
        try:
            c = on_orbit_collection(sys3, float(b), 9.5)
        except Exception:
            continue
        if c.reached:
            collected.append(c)
    light, heavy = collected[-1], collected[0]
    worst = max(abs(c.analytic_time / c.time - 1.0) for c in collected)
    ok_light = 20 * HOUR <= light.time <= 30 * HOUR
    ok = ok_light and heavy.time > 70 * HOUR and worst <= 0.2
    assert report(6, ok, f"lightest collectible beta={light.beta:.4f} at {light.time / HOUR:.2f} h "
                         f"(want [20, 30] h); heaviest beta={heavy.beta:.4f} at "
                         f"{heavy.time / HOUR:.2f} h (want > 70 h); worst analytic error "
                         f"{worst:.1%} over {len(collected)} betas (want <= 20%)")


def _anomaly_period_check(system, beta):
    spec = spec_for_phase(system, math.pi / 2, 9.5)
    out = propagate(spec_to_state(spec, system), system, beta, None, sample_every=1)
    tp = out.pericenters[:, 0]
    t = out.path[:, 0]
    states = list(out.states())
    idx = np.nonzero((t >= tp[0]) & (t <= tp[1]))[0]
    el = [to_osculating(states[i], system) for i in idx]
    ph = np.array([phase_angle_of_state(states[i], system) for i in idx])
    w = np.gradient(t[idx])
    a = np.sum(w * [x.a for x in el]) / w.sum()
    e = np.sum(w * [x.e for x in el]) / w.sum()
    phi = math.atan2(np.sum(w * np.sin(ph)), np.sum(w * np.cos(ph)))
    return srp_period(system, beta, a, e, phi), tp[1] - tp[0]


def test_c07_phase_space_fidelity(report, sys3):
    model, e_ej, _, _ = ejection_model(sys3, 0.0045, 9.5, math.pi / 2)
    span = 2 * math.pi / math.sqrt(1 + model.srp_coeff**2)
    drift = max(flow(model, e, p, span).h_drift
                for e, p in [(0.3, 1.6), (0.5, 0.5), (0.2, 4.0), (0.6, 2.5)])

    m0 = model.without_tides()
    C = m0.srp_coeff
    quad_err = 0.0
    for e0, phi0, frac in [(e_ej, 1.6, 0.3), (e_ej, 1.6, 0.9), (e_ej, 1.2, 0.5), (e_ej, 2.2, 0.7)]:
        H = hamiltonian(m0, e0, phi0)
        k0 = math.sqrt(1 - e0 * e0)
        k_top = (H + C * math.sqrt(1 + C * C - H * H)) / (1 + C * C)
        k1 = k0 + frac * (k_top - k0)

        def hit(lam, y, m, k1=k1):
            return y[0] - k1

        hit.terminal = True
        sol = solve_ivp(rhs_canonical, (0, 20.0), [k0, phi0], method="DOP853", args=(m0,),
                        rtol=1e-12, atol=1e-14, events=hit)
        t_num = sol.t_events[0][0] / model.n_sun
        t_an = time_along_isoline(m0, H, k0, k1, increasing=True)
        quad_err = max(quad_err, abs(t_an / t_num - 1))

    Tanom, Tprop = _anomaly_period_check(sys3, 0.0045)
    err18 = abs(Tanom / Tprop - 1)
    ok = drift <= 1e-9 and quad_err <= 5e-3 and err18 <= 0.05
    assert report(7, ok, f"H drift {drift:.1e} (<= 1e-9); isoline time vs quadrature "
                         f"{quad_err:.2e} (<= 0.5%); period {Tanom / HOUR:.3f} h vs propagated "
                         f"{Tprop / HOUR:.3f} h, {err18:.2%} (<= 5%)")


def test_c08_winnowing_velocities(report):
    rot = build_system(1e4, 2600.0, 2.5 * HOUR)
    still = build_system(1e4, 2600.0, math.inf)
    mm, cm = ParticleModel(1e-3, 3200.0), ParticleModel(1e-2, 3200.0)
    light, dense = ParticleModel(1e-3, 2680.0), ParticleModel(1e-3, 3740.0)
    v_rot = required_velocity_for_separation((mm, cm), rot).speed
    v_still = required_velocity_for_separation((mm, cm), still).speed
    lo = required_velocity_for_separation((light, dense), rot).speed
    hi = required_velocity_for_separation((light, dense), still).speed
    ok = (within(v_rot, 2.0, 0.15) and within(v_still, 4.5, 0.15) and within(lo, 4.0, 0.15)
          and within(hi, 6.2, 0.15))
    assert report(8, ok, f"1 mm/1 cm: {v_rot:.3f} m/s at 2.5 h (2 +- 15%), {v_still:.3f} m/s "
                         f"non-rotating (4.5 +- 15%); density pair band [{lo:.3f}, {hi:.3f}] m/s "
                         f"(endpoints 4 and 6.2 +- 15%)")


def _speed_dispersions(T_h, v_over_R, grain):
    out = []
    for R in (1e4, 1e3, 1e2):
        s = build_system(R, 2600.0, T_h * HOUR)
        q = SensitivityQuery(ground_spec(s, v_over_R * R), grain, s, ErrorKind.SPEED_FRACTION, 0.01)
        out.append(sensitivity(q))
    return out


def _angle_minimum(T_h, sweep):
    """Interior local minimum of the angle-error dispersion, as a fraction of v_sync."""
    s = build_system(1e4, 2600.0, T_h * HOUR)
    rows = sensitivity_sweep(s, ParticleModel(1e-4, 3200.0), sweep * 1e4, ErrorKind.ANGLE_IN_PLANE,
                             math.radians(0.33))
    d = np.array([r[1] for r in rows])
    local = [i for i in range(1, len(d) - 1)
             if np.all(np.isfinite(d[i - 1:i + 2])) and d[i] < d[i - 1] and d[i] < d[i + 1]]
    if not local:
        return False, math.nan
    i = min(local, key=lambda j: d[j])
    return True, sweep[i] / (spin_synchronous_speed(s) / 1e4)


def test_c09_sensitivity(report):
    grain = ParticleModel(1e-4, 3200.0)
    fast = _speed_dispersions(2.5, 0.06e-3, grain)
    slow_sys = build_system(1e4, 2600.0, 100 * HOUR)
    pair = (ParticleModel(1e-4, 3200.0), ParticleModel(1e-3, 3200.0))
    k_slow = required_velocity_for_separation(pair, slow_sys).speed / 1e4
    slow = _speed_dispersions(100.0, k_slow, grain)
    ok_fast = all(within(x, t, 0.25) for x, t in zip(fast, (20.0, 2.0, 0.2)))
    ok_slow = all(within(x, t, 0.25) for x, t in zip(slow, (0.5, 0.07, 0.02)))
    sweep = np.geomspace(0.02e-3, 2.0e-3, 61)
    minima = {T: _angle_minimum(T, sweep) for T in (4.0, 5.0, 10.0)}
    ok_min = all(interior and within(ratio, 1.0, 0.25) for interior, ratio in minima.values())
    fmt = lambda xs: "/".join(f"{x:.3g}" for x in xs)
    mins = ", ".join(f"{T:g} h: {'at ' + format(r, '.2f') + ' v_sync' if i else 'none'}"
                     for T, (i, r) in minima.items())
    ok = ok_fast and ok_slow and ok_min
    assert report(9, ok, f"fast {fmt(fast)} m (20/2/0.2 +- 25%: {'ok' if ok_fast else 'no'}); "
                         f"slow {fmt(slow)} m (0.5/0.07/0.02 +- 25%: {'ok' if ok_slow else 'no'}); "
                         f"angle minimum {mins} (within 25% of v_sync: "
                         f"{'ok' if ok_min else 'no'})")


def test_c10_monte_carlo(report, small5, tmp_path):
    unc = UncertaintyConfig()
    t0 = time.perf_counter()
    res = run_campaign(small5, CHONDRITE_MIX, unc, 10_000, master_seed=42, threads=8)
    wall = time.perf_counter() - t0
    again = run_campaign(small5, CHONDRITE_MIX, unc, 10_000, master_seed=42, threads=8)
    blobs = []
    for i, r in enumerate((res, again)):
        write_shots_csv(r, tmp_path / f"shots{i}.csv")
        write_summary_csv(r, tmp_path / f"summary{i}.csv")
        blobs.append((tmp_path / f"shots{i}.csv").read_bytes()
                     + (tmp_path / f"summary{i}.csv").read_bytes())
    identical = blobs[0] == blobs[1]
    stats = {s.name: s for s in res.stats}
    hmax = max(r.hmax for r in res.records if math.isfinite(r.hmax))
    feni = stats["Fe-Ni"].mean_xloc
    lightest = min(CHONDRITE_MIX, key=lambda m: m.density_mean).name
    tail = stats[lightest].max_xloc
    by_density = sorted(CHONDRITE_MIX, key=lambda m: -m.density_mean)
    means = [stats[m.name].mean_xloc for m in by_density]
    ordered = all(b > a for a, b in zip(means, means[1:]))
    ok = (wall < 120 and within(hmax, 5.0, 0.3) and within(feni, 3.0, 0.3)
          and within(tail, 7.0, 0.3) and ordered and identical)
    assert report(10, ok, f"{wall:.1f} s on 8 threads (< 120 s); max height {hmax:.2f} m (5 +- 30%); "
                          f"Fe-Ni mean x_loc {feni:.2f} m (3 +- 30%); {lightest} max x_loc "
                          f"{tail:.2f} m (7 +- 30%); means by density {fmt_list(means)} "
                          f"{'strictly ordered' if ordered else 'NOT ordered'}; rerun "
                          f"{'bit-identical' if identical else 'DIFFERS'}")


def fmt_list(xs):
    return "[" + ", ".join(f"{x:.2f}" for x in xs) + "]"


def test_c11_granular_anchors(report):
    bond = bond_ratio(DEFAULT_COHESION, 100e-6, ANCHOR_SYSTEM)
    mono = ParticleModel(100e-6, 3500.0)
    tilts = np.linspace(0.0, math.pi / 2, 91)
    bd = [doublet_beta(mono, t) for t in tilts]
    ok_doublet = min(bd) >= 0.5 * mono.beta - 1e-15 and max(bd) <= mono.beta + 1e-15
    sys3 = build_system(1e4, 2600.0, 3 * HOUR)
    model, _, _, _ = ejection_model(sys3, 0.0045, 9.5, math.pi / 2)
    crossing = tidal_srp_crossing(sys3, 0.0045)
    ratio_at_abar = tidal_to_srp_ratio(sys3, 0.0045, model.mean_sma)
    ok_cross = 10 * sys3.radius <= crossing <= 40 * sys3.radius
    ok = 3e5 <= bond <= 3e6 and ok_doublet and ok_cross
    assert report(11, ok, f"Bond ratio {bond:.3g} ([3e5, 3e6]); doublet beta in "
                          f"[{min(bd) / mono.beta:.3f}, {max(bd) / mono.beta:.3f}] beta "
                          f"([0.5, 1]); tidal/SRP = 1 at {crossing / sys3.radius:.4g} R "
                          f"(want [10, 40] R; ratio at mean orbit {ratio_at_abar:.2e})")


def test_c12_property_suites(report, sys3):
    # Jacobi over 10 revolutions of a near-circular 15 km orbit
    s0 = CorotState((1.5e4, 0.0, 0.0), (0.0, 6.9, 0.4))
    jac = 0.0
    for beta in (0.0, 1e-3):
        out = propagate(s0, sys3, beta, 10 * sys3.kepler_period(1.5e4), sample_every=1)
        c = np.array([jacobi_integral(s, sys3, beta).C for s in out.states()])
        jac = max(jac, float(np.max(np.abs(c / c[0] - 1))))
    # planarity and impact residual on an equatorial hop
    out = propagate(spec_to_state(EjectionSpec(0.0, 0.3, 2.0), sys3), sys3, 0.0045, None,
                    sample_every=1)
    planar = float(np.max(np.abs(out.path[:, 3])))
    resid = abs(np.linalg.norm(out.final_state.position) - sys3.radius) / sys3.radius
    # element round trip and frame inverse
    rng = np.random.default_rng(0)
    el_err = fr_err = 0.0
    for _ in range(200):
        a, e = rng.uniform(1.2e4, 5e4), rng.uniform(0.01, 0.9)
        i, raan, argp, nu = rng.uniform(0.05, 3.0), *rng.uniform(0, 2 * math.pi, 3)
        r, v = cartesian_from_elements(a, e, i, raan, argp, nu, sys3.mu_asteroid)
        el = elements_from_cartesian(r, v, sys3.mu_asteroid)
        r2, v2 = cartesian_from_elements(el.a, el.e, el.i, el.raan, el.argp, el.nu,
                                         sys3.mu_asteroid)
        el_err = max(el_err, np.max(np.abs(np.subtract(r2, r))) / a,
                     np.max(np.abs(np.subtract(v2, v))) / np.linalg.norm(v))
        t = rng.uniform(0, 1e6)
        pi_, vi_ = corot_to_inertial(r, v, t, sys3)
        r3, v3 = inertial_to_corot(pi_, vi_, t, sys3)
        fr_err = max(fr_err, np.max(np.abs(np.subtract(r3, r))) / a,
                     np.max(np.abs(np.subtract(v3, v))) / np.linalg.norm(v))
    ok = jac <= 1e-9 and planar == 0.0 and resid <= 1e-6 and el_err <= 1e-10 and fr_err <= 1e-12
    assert report(12, ok, f"Jacobi drift {jac:.1e} (<= 1e-9); max |z| {planar:.1e} m; impact "
                          f"residual {resid:.1e} R (<= 1e-6); element round trip {el_err:.1e} "
                          f"(<= 1e-10); frame inverse {fr_err:.1e} (<= 1e-12)")
