import csv
import json
import math
from pathlib import Path

import pytest
import yaml

from srpsort import cli, dynamics
from srpsort.config import COMMANDS, parse_config, parse_tolerance_overrides, validate_config
from srpsort.errors import ConfigError, NumericalError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
PAIR = ("pairs:\n  - {id: p, a: {radius_m: 1e-4, density_kgm3: 3200}, "
        "b: {radius_m: 1e-3, density_kgm3: 3200}}\n")
SYSTEM = "system: {radius_m: 10000, density_kgm3: 2600, rotation_period_h: 3}\n"


def _write(tmp_path, text, name="run.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _run(tmp_path, command, text, *extra):
    out = tmp_path / "out"
    code = cli.run([command, "--config", _write(tmp_path, text), "--out", str(out), *extra])
    return code, out, json.loads((out / "manifest.json").read_text())


def test_example_configs_validate():
    for path in sorted(CONFIGS.glob("*.yaml")):
        command = path.stem.replace("_", "-")
        assert command in COMMANDS
        validate_config(path.read_text(), command)


def test_echo_round_trip():
    text = (CONFIGS / "montecarlo.yaml").read_text()
    cfg = validate_config(text, "montecarlo")
    again = validate_config(cfg.echo(), "montecarlo")
    assert again.data == cfg.data
    assert again.system == cfg.system and again.mix == cfg.mix


def test_infinite_period_echo():
    cfg = validate_config(SYSTEM.replace("3}", "inf}") + "scenario: {speed_mps: 1.0}\n", "zvc")
    assert math.isinf(cfg.system.rotation_period)
    assert yaml.safe_load(cfg.echo())["system"]["rotation_period_h"] == "inf"
    assert math.isinf(validate_config(cfg.echo(), "zvc").system.rotation_period)


def test_diagnostics_name_path_and_line():
    text = (SYSTEM.replace("2600", "-5")
            + "scenario:\n  speed_mps: 1.0\n  bogus: 3\n"
            + "seed: -1\n")
    with pytest.raises(ConfigError) as err:
        validate_config(text, "zvc")
    msgs = err.value.diagnostics
    assert any(m.startswith("system.density_kgm3 (line 1)") and "positive" in m for m in msgs)
    assert any(m.startswith("scenario.bogus (line 4)") and "unknown key" in m for m in msgs)
    assert any(m.startswith("seed") for m in msgs)


def test_missing_required_and_exclusive():
    with pytest.raises(ConfigError, match="system"):
        parse_config({}, "zvc")
    text = SYSTEM + PAIR + "scenario: {speeds_mps: [1.0], v_over_R: [1e-4]}\n"
    with pytest.raises(ConfigError, match="exactly one"):
        validate_config(text, "separation")


def test_mix_fraction_sum_reported():
    text = SYSTEM + ("mix:\n  - {material: a, fraction: 0.5, density_mean_kgm3: 3000, "
                     "density_sigma_kgm3: 1}\n  - {material: b, fraction: 0.2, "
                     "density_mean_kgm3: 2000, density_sigma_kgm3: 1}\n")
    with pytest.raises(ConfigError, match="0.7"):
        validate_config(text, "montecarlo")


def test_exponent_without_point_is_a_number():
    cfg = validate_config(SYSTEM + "particle: {radius_m: 1e-4, density_kgm3: 3200}\n"
                          "scenario: {v_over_R: [2e-4]}\n", "sensitivity")
    assert cfg.particle.radius == 1e-4 and cfg.scenario["v_over_R"] == [2e-4]


def test_bad_yaml_is_config_error():
    with pytest.raises(ConfigError):
        validate_config("system: [unclosed\n", "zvc")


def test_tolerance_override_parse():
    assert parse_tolerance_overrides("rtol=1e-10, atol=1e-12") == {"rtol": 1e-10, "atol": 1e-12}
    assert parse_tolerance_overrides(None) == {}
    for bad in ("rtol", "rtol=abc", "foo=1", "rtol=-1"):
        with pytest.raises(ConfigError):
            parse_tolerance_overrides(bad)


@pytest.mark.parametrize("name", ["zvc", "return_velocity", "propagate", "phase_space",
                                  "separation", "sensitivity", "cohesion"])
def test_subcommands_run(tmp_path, name):
    command = name.replace("_", "-")
    code, out, man = _run(tmp_path, command, (CONFIGS / f"{name}.yaml").read_text())
    assert code == 0 and man["status"] == "ok"
    for f in man["outputs"]:
        assert (out / f).stat().st_size > 0
    assert man["config"]["output"] == str(out)
    assert {"srpsort", "python", "numpy", "kernel_backend"} <= set(man["versions"])
    assert man["wall_time_s"] >= 0


def test_small_grid_commands(tmp_path):
    code, out, _ = _run(tmp_path, "reimpact-map", SYSTEM + "scenario: {beta: 0.0045, speed_mps: 10, "
                        "n_lon: 3, n_lat: 2, max_periods: 3}\n")
    assert code == 0
    assert len((out / "reimpact_map.csv").read_text().splitlines()) == 7
    code, out, _ = _run(tmp_path, "collection", SYSTEM + "scenario: {betas: [0.001, 0.02], speed_mps: 9.5}\n")
    assert code == 0
    rows = list(csv.DictReader(open(out / "collection.csv")))
    assert [r["status"] for r in rows] == ["DIRECT_REIMPACT", "ESCAPE"]
    small = "system: {radius_m: 100, density_kgm3: 2600, rotation_period_h: 5}\n"
    code, out, man = _run(tmp_path, "montecarlo", small + "scenario: {n_shots: 20}\nseed: 3\n")
    assert code == 0 and man["results"]["shots"] == 20


def test_empty_sweep_header_only(tmp_path):
    code, out, _ = _run(tmp_path, "separation", SYSTEM + PAIR + "scenario: {speeds_mps: []}\n")
    assert code == 0
    assert (out / "separation.csv").read_text().splitlines() == ["v_mps,v_over_R,sep_m,pair_id"]


def test_rerun_byte_identical(tmp_path):
    text = ("system: {radius_m: 100, density_kgm3: 2600, rotation_period_h: 5}\n"
            "scenario: {n_shots: 15}\nseed: 9\n")
    outs = []
    for i, threads in enumerate(("1", "3")):
        out = tmp_path / f"o{i}"
        assert cli.run(["montecarlo", "--config", _write(tmp_path, text), "--out", str(out),
                        "--threads", threads]) == 0
        outs.append(out)
    for f in ("shots.csv", "summary.csv"):
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()


def test_config_error_exit_and_manifest(tmp_path, capsys):
    code, out, man = _run(tmp_path, "zvc", SYSTEM.replace("10000", "0") + "scenario: {}\n")
    assert code == cli.EXIT_CONFIG == 2
    assert man["status"] == "config_error" and len(man["diagnostics"]) == 2
    assert "srpsort: system.radius_m" in capsys.readouterr().err


def test_domain_error_exit(tmp_path):
    fast = "system: {radius_m: 100, density_kgm3: 2600, rotation_period_h: 1}\n"
    code, _, man = _run(tmp_path, "cohesion", fast)
    assert code == 2 and man["failure"] == "DomainError"


def test_numerical_failure_exit(tmp_path, monkeypatch):
    def boom(cfg, out):
        raise NumericalError("step size underflow")

    monkeypatch.setitem(cli.HANDLERS, "zvc", boom)
    code, _, man = _run(tmp_path, "zvc", SYSTEM + "scenario: {speed_mps: 1.0}\n")
    assert code == cli.EXIT_NUMERICAL == 3
    assert man["status"] == "numerical_failure" and man["message"] == "step size underflow"


def test_unexpected_error_still_writes_manifest(tmp_path, monkeypatch):
    monkeypatch.setitem(cli.HANDLERS, "zvc", lambda cfg, out: 1 / 0)
    code, _, man = _run(tmp_path, "zvc", SYSTEM + "scenario: {speed_mps: 1.0}\n")
    assert code == 1 and man["failure"] == "ZeroDivisionError"


def test_tolerance_overrides_applied_and_restored(tmp_path, monkeypatch):
    seen = {}

    def spy(cfg, out):
        seen.update(dynamics.TOLERANCES)
        return [], {}

    before = dict(dynamics.TOLERANCES)
    monkeypatch.setitem(cli.HANDLERS, "zvc", spy)
    code, _, man = _run(tmp_path, "zvc", SYSTEM + "scenario: {speed_mps: 1.0}\n"
                        "tolerances: {atol: 1.0e-9}\n", "--tolerance-overrides", "rtol=1e-8")
    assert code == 0
    assert seen == {"rtol": 1e-8, "atol": 1e-9}
    assert man["config"]["tolerances"] == {"rtol": 1e-8, "atol": 1e-9}
    assert dynamics.TOLERANCES == before


def test_missing_config_file(tmp_path):
    out = tmp_path / "o"
    assert cli.run(["zvc", "--config", str(tmp_path / "nope.yaml"), "--out", str(out)]) == 2
    assert json.loads((out / "manifest.json").read_text())["status"] == "config_error"
