"""Command-line front end: ``srpsort <command> --config run.yaml``.

Every run writes its CSV artifacts plus ``manifest.json`` into the output
directory. Exit codes: 0 success, 2 configuration error, 3 numerical
failure, 1 anything unexpected.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import platform
import sys
import time
import traceback
from pathlib import Path

import numpy as np
import scipy

from . import __version__, dynamics, kernels
from .config import COMMANDS, RunConfig, parse_config, parse_tolerance_overrides, validate_config
from .errors import ConfigError, DomainError, NumericalError, StrategyInfeasible

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_ERROR = 1

MANIFEST = "manifest.json"


def _g(v):
    return f"{v:.17g}"


def _beta(cfg: RunConfig, default=0.0):
    b = cfg.scenario.get("beta")
    if b is not None:
        return b
    if cfg.particle is not None:
        return cfg.particle.beta
    return default


def _speeds(cfg: RunConfig):
    sc = cfg.scenario
    if sc.get("speeds_mps") is not None:
        return list(sc["speeds_mps"])
    return [k * cfg.system.radius for k in sc["v_over_R"]]


# --- subcommands --------------------------------------------------------------------
# each returns (list of written file names, dict of scalar results)


def cmd_zvc(cfg: RunConfig, out: Path):
    from .equilibria import libration_points, write_zvc_csv, zvc_encloses_asteroid, zvc_grid

    sc = cfg.scenario
    beta = _beta(cfg)
    lat, lon = math.radians(sc["lat_deg"]), math.radians(sc["lon_deg"])
    grid = zvc_grid(cfg.system, beta, sc["speed_mps"], sc["extent_m"], sc["n"], lat, lon)
    write_zvc_csv(grid, out / "zvc.csv")
    lp = libration_points(cfg.system, beta)
    return ["zvc.csv"], {"beta": beta, "C0": grid.c0, "L1_offset_m": lp.offset1,
                         "L2_offset_m": lp.offset2, "enclosed": zvc_encloses_asteroid(grid)}


def cmd_return_velocity(cfg: RunConfig, out: Path):
    from .equilibria import guaranteed_return_velocity, libration_points, zvc_open_velocity
    from .errors import ClosedRegionImpossible

    sc = cfg.scenario
    lat, lon = math.radians(sc["lat_deg"]), math.radians(sc["lon_deg"])
    with open(out / "return_velocity.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["beta", "L1_offset_m", "L2_offset_m", "v_open_L2_mps", "v_open_L1_mps",
                    "v_return_mps"])
        best = 0.0
        for b in sc["betas"]:
            lp = libration_points(cfg.system, b)
            v2 = zvc_open_velocity(cfg.system, b, lat, lon, "L2")
            v1 = zvc_open_velocity(cfg.system, b, lat, lon, "L1")
            try:
                vr = guaranteed_return_velocity(cfg.system, b, lon, lat)
            except ClosedRegionImpossible:
                vr = math.nan
            best = max(best, v2)
            w.writerow([_g(b), _g(lp.offset1), _g(lp.offset2), _g(v2), _g(v1), _g(vr)])
    return ["return_velocity.csv"], {"max_open_velocity_mps": best}


def cmd_propagate(cfg: RunConfig, out: Path):
    from .ejection import EjectionSpec, direction_from_angles, spec_for_phase, spec_to_state

    sc = cfg.scenario
    beta = _beta(cfg)
    lat = math.radians(sc["lat_deg"])
    tilt = (math.radians(sc["in_plane_deg"]), math.radians(sc["out_of_plane_deg"]))
    direction = None if tilt == (0.0, 0.0) else direction_from_angles(*tilt)
    if sc.get("phi_deg") is not None:
        lon = None if sc.get("lon_deg") is None else math.radians(sc["lon_deg"])
        spec = spec_for_phase(cfg.system, math.radians(sc["phi_deg"]), sc["speed_mps"], lat,
                              lon, sc["epoch_s"], direction)
    else:
        spec = EjectionSpec(lat, math.radians(sc["lon_deg"]), sc["speed_mps"], direction,
                            sc["epoch_s"])
    res = dynamics.propagate(spec_to_state(spec, cfg.system), cfg.system, beta, sc["max_time_s"],
                             sample_every=sc["sample_every"])
    dynamics.write_trajectory_csv(res, cfg.system, out / "trajectory.csv", beta)
    info = {"beta": beta, "status": res.status.value, "revolutions": res.revolution_count,
            "final_time_s": res.final_state.epoch - spec.epoch, "max_radius_m": res.max_radius,
            "lon_deg": math.degrees(spec.longitude), "epoch_s": spec.epoch}
    if res.impact_time is not None:
        info["impact_time_s"] = res.impact_time
        info["impact_lat_deg"] = math.degrees(res.impact_bodyfixed[0])
        info["impact_lon_deg"] = math.degrees(res.impact_bodyfixed[1])
    return ["trajectory.csv"], info


def cmd_reimpact_map(cfg: RunConfig, out: Path):
    from .sorting import reimpact_map, write_reimpact_csv

    sc = cfg.scenario
    nl, nb = sc["n_lon"], sc["n_lat"]
    lons = [math.radians((i + 0.5) * 360.0 / nl) for i in range(nl)]
    lats = [math.radians(-90.0 + (j + 0.5) * 180.0 / nb) for j in range(nb)]
    cells = reimpact_map(cfg.system, _beta(cfg), sc["speed_mps"], lons, lats, sc["max_periods"],
                         cfg.threads)
    write_reimpact_csv(cells, out / "reimpact_map.csv")
    quick = sum(1 for c in cells if c.t_periods < 1.0)
    multi = sum(1 for c in cells if c.revolutions > 0)
    return ["reimpact_map.csv"], {"cells": len(cells), "reimpact_within_one_period": quick,
                                  "multi_revolution": multi}


def cmd_phase_space(cfg: RunConfig, out: Path):
    from .phasespace import (ejection_model, isolines, multirev_region, phase_space_table,
                             write_isolines_csv, write_phase_csv)

    sc = cfg.scenario
    beta, v = sc["beta"], sc["speed_mps"]
    model, e0, nu0, a0 = ejection_model(cfg.system, beta, v, math.pi / 2, sc["tides"])
    if sc.get("phi_deg") is not None:
        phis = [math.radians(p) for p in sc["phi_deg"]]
    else:
        phis = list(np.linspace(0.0, 2.0 * math.pi, sc["n_phi"], endpoint=False))
    write_phase_csv(phase_space_table(model, cfg.system, v, phis), out / "phase_space.csv")
    write_isolines_csv(isolines(model, [(e0, p) for p in phis]), out / "isolines.csv")
    region = multirev_region(model, e0, a0, cfg.system.radius, nu0)
    info = {"e0": e0, "a0_m": a0, "mean_sma_m": model.mean_sma, "srp_coeff": model.srp_coeff,
            "tidal_coeff": model.tidal_coeff}
    info["multirev_phi_deg"] = [[math.degrees(lo), math.degrees(hi)] for lo, hi in region]
    return ["phase_space.csv", "isolines.csv"], info


def cmd_collection(cfg: RunConfig, out: Path):
    from .sorting import Collection, collection_sweep, write_collection_csv

    sc = cfg.scenario
    betas = sc["betas"]
    res = collection_sweep(cfg.system, betas, sc["speed_mps"], math.radians(sc["phi_deg"]),
                           cfg.threads)
    write_collection_csv(betas, res, out / "collection.csv")
    ok = [r for r in res if isinstance(r, Collection) and r.reached]
    return ["collection.csv"], {"collected": len(ok)}


def cmd_separation(cfg: RunConfig, out: Path):
    from .sorting import required_velocity_for_separation, separation_sweep, write_separation_csv

    sc = cfg.scenario
    phi = math.radians(sc["phi_deg"])
    rows = []
    info = {}
    for pid, pa, pb in cfg.pairs:
        rows += separation_sweep((pa, pb), cfg.system, _speeds(cfg), phi, pid, cfg.threads)
        if sc.get("target_m") is not None:
            try:
                rv = required_velocity_for_separation((pa, pb), cfg.system, sc["target_m"], phi)
                info[f"required_speed_mps.{pid}"] = rv.speed
            except StrategyInfeasible:
                info[f"required_speed_mps.{pid}"] = math.nan
    write_separation_csv(rows, out / "separation.csv")
    return ["separation.csv"], info


def cmd_sensitivity(cfg: RunConfig, out: Path):
    from .sorting import ErrorKind, sensitivity_sweep, write_sensitivity_csv

    sc = cfg.scenario
    kind = ErrorKind(sc["error_kind"])
    mag = sc["magnitude"]
    if mag is None:
        mag = 0.01 if kind is ErrorKind.SPEED_FRACTION else 0.33
    if kind is ErrorKind.ANGLE_IN_PLANE:
        mag = math.radians(mag)  # configured in degrees
    rows = sensitivity_sweep(cfg.system, cfg.particle, _speeds(cfg), kind, mag,
                             math.radians(sc["phi_deg"]), sc["hold"], cfg.threads)
    write_sensitivity_csv(rows, out / "sensitivity.csv")
    return ["sensitivity.csv"], {"beta": cfg.particle.beta}


def cmd_montecarlo(cfg: RunConfig, out: Path):
    from .montecarlo import (CHONDRITE_MIX, MaterialComponent, UncertaintyConfig,
                             density_gradient_report, run_campaign, write_shots_csv,
                             write_summary_csv)

    if cfg.mix:
        mix = tuple(MaterialComponent(m["material"], m["fraction"], m["density_mean_kgm3"],
                                      m["density_sigma_kgm3"]) for m in cfg.mix)
    else:
        mix = CHONDRITE_MIX
    u = cfg.data["uncertainty"]
    unc = UncertaintyConfig(u["speed_mean_mps"], u["speed_sigma_fraction"],
                            math.radians(u["angle_sigma_deg"]), u["radius_mu_log"],
                            u["radius_sigma_log"], math.radians(cfg.scenario["phi_deg"]))
    res = run_campaign(cfg.system, mix, unc, cfg.scenario["n_shots"], cfg.seed, cfg.threads)
    write_shots_csv(res, out / "shots.csv")
    write_summary_csv(res, out / "summary.csv")
    info = {"shots": len(res.records), "reimpacts": len(res.reimpacts())}
    if len({r.material for r in res.reimpacts()}) >= 2:
        rep = density_gradient_report(res, mix)
        info["overlap"] = {f"{o.a}|{o.b}": o.misclassified for o in rep.overlaps}
    return ["shots.csv", "summary.csv"], info


def cmd_cohesion(cfg: RunConfig, out: Path):
    from .granular import (DEFAULT_HAMAKER, ANCHOR_SYSTEM, AggregateModel, CohesionParams,
                           bond_ratio, cohesion_force, effective_beta, grain_weight)
    from .model import ParticleModel

    sc = cfg.scenario
    c = cfg.data["cohesion"]
    params = CohesionParams(c["hamaker_J"] or DEFAULT_HAMAKER, c["cleanliness"],
                            c["ion_diameter_m"])
    system = cfg.system or ANCHOR_SYSTEM
    rho = sc["grain_density_kgm3"]
    files = ["cohesion.csv"]
    with open(out / "cohesion.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r_m", "F_c_N", "weight_N", "bond_ratio"])
        for r in sc["radii_m"]:
            w.writerow([_g(r), _g(cohesion_force(params, r)), _g(grain_weight(r, rho, system)),
                        _g(bond_ratio(params, r, system, rho))])
    if sc["porosities"] and sc["radius_ratios"]:
        files.append("aggregate.csv")
        with open(out / "aggregate.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r_m", "porosity", "r_eq_over_r", "shape_factor", "beta", "beta_eff"])
            for r in sc["radii_m"]:
                mono = ParticleModel(r, rho)
                for phi in sc["porosities"]:
                    for k in sc["radius_ratios"]:
                        agg = AggregateModel(mono, k * r, phi, sc["shape_factor"])
                        w.writerow([_g(r), _g(phi), _g(k), _g(sc["shape_factor"]), _g(mono.beta),
                                    _g(effective_beta(agg))])
    return files, {"hamaker_J": params.hamaker}


HANDLERS = {
    "zvc": cmd_zvc,
    "return-velocity": cmd_return_velocity,
    "propagate": cmd_propagate,
    "reimpact-map": cmd_reimpact_map,
    "phase-space": cmd_phase_space,
    "collection": cmd_collection,
    "separation": cmd_separation,
    "sensitivity": cmd_sensitivity,
    "montecarlo": cmd_montecarlo,
    "cohesion": cmd_cohesion,
}


# --- driver -------------------------------------------------------------------------


def build_parser():
    ap = argparse.ArgumentParser(prog="srpsort",
                                 description="SRP dust dynamics and regolith sorting runs")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} scenario")
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--threads", type=int, help="worker threads (overrides the config)")
        p.add_argument("--tolerance-overrides", default="",
                       help="comma list such as rtol=1e-10,atol=1e-13")
    return ap


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _write_manifest(out, manifest):
    out.mkdir(parents=True, exist_ok=True)
    with open(out / MANIFEST, "w") as fh:
        json.dump(_jsonable(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")


def run(argv=None):
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    manifest = {
        "command": args.command,
        "versions": {"srpsort": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__,
                     "kernel_backend": kernels.BACKEND},
        "status": "running",
    }
    out = Path(args.out or "out")
    saved_tol = dict(dynamics.TOLERANCES)
    try:
        try:
            if args.config:
                text = Path(args.config).read_text()
                cfg = validate_config(text, args.command)
            else:
                cfg = parse_config({}, args.command)
        except OSError as exc:
            raise ConfigError([f"--config: {exc}"]) from exc
        overrides = dict(cfg.tolerances)
        overrides.update(parse_tolerance_overrides(args.tolerance_overrides))
        data = dict(cfg.data)
        if args.out:
            data["output"] = args.out
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError(["--seed: expected a non-negative integer"])
            data["seed"] = args.seed
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError(["--threads: expected a positive integer"])
            data["threads"] = args.threads
        if overrides:
            data["tolerances"] = overrides
        cfg = RunConfig(cfg.command, data, cfg.system, cfg.particle, cfg.pairs, cfg.mix,
                        data["seed"], data["threads"], data["output"], overrides)
        out = Path(cfg.output)
        manifest.update(config=cfg.data, seed=cfg.seed, threads=cfg.threads)
        out.mkdir(parents=True, exist_ok=True)
        dynamics.TOLERANCES.update(overrides)
        files, results = HANDLERS[args.command](cfg, out)
        manifest.update(status="ok", outputs=files, results=results)
        code = EXIT_OK
    except ConfigError as exc:
        manifest.update(status="config_error", failure="ConfigError", diagnostics=exc.diagnostics)
        code = EXIT_CONFIG
    except (NumericalError, StrategyInfeasible) as exc:
        manifest.update(status="numerical_failure", failure=type(exc).__name__, message=str(exc))
        code = EXIT_NUMERICAL
    except DomainError as exc:
        manifest.update(status="config_error", failure=type(exc).__name__, diagnostics=[str(exc)])
        code = EXIT_CONFIG
    except Exception as exc:  # unexpected: still leave a manifest behind
        manifest.update(status="error", failure=type(exc).__name__, message=str(exc),
                        traceback=traceback.format_exc())
        code = EXIT_ERROR
    finally:
        dynamics.TOLERANCES.clear()
        dynamics.TOLERANCES.update(saved_tol)
    manifest["wall_time_s"] = time.perf_counter() - t0
    _write_manifest(out, manifest)
    if code != EXIT_OK:
        for line in manifest.get("diagnostics", [manifest.get("message", "")]):
            print(f"srpsort: {line}", file=sys.stderr)
    return code


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
