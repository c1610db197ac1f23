"""Run configuration: YAML schema, validation and echo.

All sections are optional at parse time; each subcommand states which ones
it needs. Diagnostics name the dotted field path and, when the text came
from a file, the line number.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import yaml

from .errors import ConfigError, DomainError
from .model import AU, ParticleModel, SystemModel

COMMANDS = (
    "zvc", "return-velocity", "propagate", "reimpact-map", "phase-space", "collection",
    "separation", "sensitivity", "montecarlo", "cohesion",
)


# --- field kinds ------------------------------------------------------------------


def _num(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise TypeError("expected a number")
    v = float(v)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _period(v):
    if isinstance(v, str) and v.strip().lower() in ("inf", "infinity"):
        return math.inf
    v = _num(v)
    return v


def _int(v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise TypeError("expected an integer")
    return int(v)


def _bool(v):
    if not isinstance(v, bool):
        raise TypeError("expected true or false")
    return v


def _str(v):
    if not isinstance(v, str):
        raise TypeError("expected a string")
    return v


def _numlist(v):
    if not isinstance(v, list):
        raise TypeError("expected a list of numbers")
    return [_num(x) for x in v]


def _positive(v):
    return None if v > 0 else "must be positive"


def _nonneg(v):
    return None if v >= 0 else "must be non-negative"


def _unit_interval(v):
    return None if 0 < v <= 1 else "must lie in (0, 1]"


def _fraction(v):
    return None if 0 <= v <= 1 else "must lie in [0, 1]"


def _beta(v):
    return None if 0 <= v < 1 else "must lie in [0, 1)"


def _lat(v):
    return None if -90 <= v <= 90 else "must lie in [-90, 90] degrees"


def _porosity(v):
    return None if 0 <= v < 1 else "must lie in [0, 1)"


def _all(check):
    def run(values):
        for i, x in enumerate(values):
            msg = check(x)
            if msg:
                return f"entry {i} {msg}"
        return None
    return run


def _one_of(*options):
    def run(v):
        return None if v in options else f"must be one of {', '.join(options)}"
    return run


@dataclass(frozen=True)
class F:
    kind: object
    required: bool = False
    default: object = None
    check: object = None


SYSTEM = {
    "radius_m": F(_num, True, check=_positive),
    "density_kgm3": F(_num, True, check=_positive),
    "rotation_period_h": F(_period, True, check=_positive),
    "distance_au": F(_num, False, 1.0, _positive),
}

PARTICLE = {
    "radius_m": F(_num, False, None, _positive),
    "density_kgm3": F(_num, False, None, _positive),
    "Q": F(_num, False, 1.0, _nonneg),
}

MATERIAL = {
    "material": F(_str, True),
    "fraction": F(_num, True, check=_fraction),
    "density_mean_kgm3": F(_num, True, check=_positive),
    "density_sigma_kgm3": F(_num, True, check=_nonneg),
}

UNCERTAINTY = {
    "speed_mean_mps": F(_num, False, 0.0235, _positive),
    "speed_sigma_fraction": F(_num, False, 0.01, _nonneg),
    "angle_sigma_deg": F(_num, False, 0.33, _nonneg),
    "radius_mu_log": F(_num, False, -9.21),
    "radius_sigma_log": F(_num, False, 0.05, _nonneg),
}

COHESION = {
    "hamaker_J": F(_num, False, None, _positive),
    "cleanliness": F(_num, False, 1.0, _unit_interval),
    "ion_diameter_m": F(_num, False, 1.32e-10, _positive),
}

TOLERANCES = {
    "rtol": F(_num, False, None, _positive),
    "atol": F(_num, False, None, _positive),
}

SCENARIOS = {
    "zvc": {
        "beta": F(_num, False, 0.0, _beta),
        "speed_mps": F(_num, True, check=_nonneg),
        "extent_m": F(_num, False, None, _positive),
        "n": F(_int, False, 201, _positive),
        "lat_deg": F(_num, False, 0.0, _lat),
        "lon_deg": F(_num, False, 0.0),
    },
    "return-velocity": {
        "betas": F(_numlist, True, check=_all(_beta)),
        "lat_deg": F(_num, False, 0.0, _lat),
        "lon_deg": F(_num, False, 0.0),
    },
    "propagate": {
        "beta": F(_num, False, None, _beta),
        "speed_mps": F(_num, True, check=_nonneg),
        "lat_deg": F(_num, False, 0.0, _lat),
        "lon_deg": F(_num, False, None),
        "phi_deg": F(_num, False, None),
        "epoch_s": F(_num, False, 0.0),
        "max_time_s": F(_num, False, None, _positive),
        "in_plane_deg": F(_num, False, 0.0),
        "out_of_plane_deg": F(_num, False, 0.0),
        "sample_every": F(_int, False, 1, _nonneg),
    },
    "reimpact-map": {
        "beta": F(_num, False, 0.0, _beta),
        "speed_mps": F(_num, True, check=_nonneg),
        "n_lon": F(_int, False, 36, _positive),
        "n_lat": F(_int, False, 18, _positive),
        "max_periods": F(_num, False, 50.0, _positive),
    },
    "phase-space": {
        "beta": F(_num, True, check=_beta),
        "speed_mps": F(_num, True, check=_positive),
        "phi_deg": F(_numlist, False, None),
        "n_phi": F(_int, False, 73, _positive),
        "tides": F(_bool, False, True),
    },
    "collection": {
        "betas": F(_numlist, True, check=_all(_beta)),
        "speed_mps": F(_num, True, check=_positive),
        "phi_deg": F(_num, False, 90.0),
    },
    "separation": {
        "speeds_mps": F(_numlist, False, None, _all(_positive)),
        "v_over_R": F(_numlist, False, None, _all(_positive)),
        "phi_deg": F(_num, False, 270.0),
        "target_m": F(_num, False, None, _positive),
    },
    "sensitivity": {
        "error_kind": F(_str, False, "SPEED_FRACTION", _one_of("SPEED_FRACTION", "ANGLE_IN_PLANE")),
        "magnitude": F(_num, False, None, _nonneg),
        "speeds_mps": F(_numlist, False, None, _all(_positive)),
        "v_over_R": F(_numlist, False, None, _all(_positive)),
        "phi_deg": F(_num, False, 270.0),
        "hold": F(_str, False, "phase", _one_of("phase", "site")),
    },
    "montecarlo": {
        "n_shots": F(_int, False, 10000, _positive),
        "phi_deg": F(_num, False, 270.0),
    },
    "cohesion": {
        "radii_m": F(_numlist, False, [100e-6], _all(_positive)),
        "grain_density_kgm3": F(_num, False, 3522.5, _positive),
        "porosities": F(_numlist, False, [], _all(_porosity)),
        "radius_ratios": F(_numlist, False, [], _all(lambda v: None if v >= 1 else "must be >= 1")),
        "shape_factor": F(_num, False, 1.0, _positive),
    },
}

NEEDS_SYSTEM = set(COMMANDS) - {"cohesion"}


# --- line numbers -------------------------------------------------------------------


def _line_map(node, path=(), out=None):
    out = {} if out is None else out
    if node is None:
        return out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = k.value
            out[path + (key,)] = k.start_mark.line + 1
            _line_map(v, path + (key,), out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_map(v, path + (i,), out)
    return out


class _Diag:
    def __init__(self, lines=None):
        self.lines = lines or {}
        self.messages = []

    def add(self, path, msg):
        name = ".".join(str(p) for p in path) or "<root>"
        line = None
        for n in range(len(path), -1, -1):
            line = self.lines.get(tuple(path[:n]))
            if line is not None:
                break
        where = f" (line {line})" if line is not None else ""
        self.messages.append(f"{name}{where}: {msg}")


def _section(data, schema, path, diag, fill=True):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        diag.add(path, "expected a mapping")
        return {}
    out = {}
    for key in data:
        if key not in schema:
            diag.add(path + (key,), f"unknown key (allowed: {', '.join(schema)})")
    for key, f in schema.items():
        if key not in data or data[key] is None:
            if f.required:
                diag.add(path + (key,), "required field is missing")
            elif fill:
                out[key] = f.default
            continue
        try:
            value = f.kind(data[key])
        except (TypeError, ValueError) as exc:
            diag.add(path + (key,), str(exc))
            continue
        msg = f.check(value) if f.check else None
        if msg:
            diag.add(path + (key,), f"{msg}, got {data[key]!r}")
            continue
        out[key] = value
    return out


# --- parsed config --------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    command: str
    data: dict  # normalized, defaults filled, echoable
    system: SystemModel | None
    particle: ParticleModel | None
    pairs: tuple = ()
    mix: tuple = ()
    seed: int = 0
    threads: int = 1
    output: str = "out"
    tolerances: dict = field(default_factory=dict)

    @property
    def scenario(self):
        return self.data.get("scenario", {})

    def echo(self):
        """YAML text that validates back to an equal configuration."""
        return yaml.safe_dump(_yaml_ready(self.data), sort_keys=False)


def _yaml_ready(obj):
    if isinstance(obj, dict):
        return {k: _yaml_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_yaml_ready(v) for v in obj]
    if isinstance(obj, float) and math.isinf(obj):
        return "inf"
    return obj


def _particle(d, path, diag):
    if not d:
        return None
    if d.get("radius_m") is None or d.get("density_kgm3") is None:
        diag.add(path, "particle needs radius_m and density_kgm3")
        return None
    return ParticleModel(d["radius_m"], d["density_kgm3"], d["Q"])


TOP = ("system", "particle", "pairs", "mix", "uncertainty", "cohesion", "scenario", "output",
       "seed", "threads", "tolerances")


def parse_config(raw, command, lines=None) -> RunConfig:
    """Validate an already-loaded mapping for ``command``."""
    diag = _Diag(lines)
    if command not in COMMANDS:
        raise ConfigError([f"unknown command {command!r}"])
    raw = {} if raw is None else raw
    if not isinstance(raw, dict):
        raise ConfigError(["<root>: expected a mapping"])
    for key in raw:
        if key not in TOP:
            diag.add((key,), f"unknown key (allowed: {', '.join(TOP)})")
    data = {}

    system = None
    if "system" in raw or command in NEEDS_SYSTEM:
        if "system" not in raw:
            diag.add(("system",), f"section required by '{command}'")
        else:
            s = _section(raw["system"], SYSTEM, ("system",), diag)
            data["system"] = s
            if all(k in s for k in ("radius_m", "density_kgm3", "rotation_period_h")):
                try:
                    system = SystemModel(s["radius_m"], s["density_kgm3"],
                                         s["rotation_period_h"] * 3600.0, s["distance_au"] * AU)
                except DomainError as exc:
                    diag.add(("system",), str(exc))

    particle = None
    if "particle" in raw:
        p = _section(raw["particle"], PARTICLE, ("particle",), diag)
        data["particle"] = p
        particle = _particle(p, ("particle",), diag)
    if command == "sensitivity" and particle is None and "particle" not in raw:
        diag.add(("particle",), "section required by 'sensitivity'")

    pairs = []
    if "pairs" in raw or command == "separation":
        items = raw.get("pairs")
        if not isinstance(items, list) or not items:
            if command == "separation" or items is not None:
                diag.add(("pairs",), "expected a non-empty list of {id, a, b}")
        else:
            out = []
            for i, item in enumerate(items):
                path = ("pairs", i)
                if not isinstance(item, dict):
                    diag.add(path, "expected a mapping with id, a, b")
                    continue
                for key in item:
                    if key not in ("id", "a", "b"):
                        diag.add(path + (key,), "unknown key (allowed: id, a, b)")
                pid = item.get("id", f"pair{i}")
                if not isinstance(pid, str):
                    diag.add(path + ("id",), "expected a string")
                a = _section(item.get("a"), PARTICLE, path + ("a",), diag)
                b = _section(item.get("b"), PARTICLE, path + ("b",), diag)
                pa = _particle(a, path + ("a",), diag)
                pb = _particle(b, path + ("b",), diag)
                out.append({"id": pid, "a": a, "b": b})
                if pa and pb:
                    pairs.append((str(pid), pa, pb))
            data["pairs"] = out

    mix = []
    if "mix" in raw:
        items = raw["mix"]
        if not isinstance(items, list) or not items:
            diag.add(("mix",), "expected a non-empty list of materials")
        else:
            out = []
            for i, item in enumerate(items):
                m = _section(item, MATERIAL, ("mix", i), diag)
                out.append(m)
            total = math.fsum(m.get("fraction", 0.0) for m in out)
            if abs(total - 1.0) > 1e-9:
                diag.add(("mix",), f"material fractions sum to {total:.12g}, expected 1")
            names = [m.get("material") for m in out]
            if len(set(names)) != len(names):
                diag.add(("mix",), "material names must be unique")
            data["mix"] = out
            mix = out

    for name, schema in (("uncertainty", UNCERTAINTY), ("cohesion", COHESION)):
        if name in raw or (name == "uncertainty" and command == "montecarlo") or (
                name == "cohesion" and command == "cohesion"):
            data[name] = _section(raw.get(name), schema, (name,), diag)

    data["scenario"] = _section(raw.get("scenario"), SCENARIOS[command], ("scenario",), diag)
    sc = data["scenario"]
    if command in ("separation", "sensitivity"):
        if (sc.get("speeds_mps") is None) == (sc.get("v_over_R") is None):
            diag.add(("scenario",), "give exactly one of speeds_mps or v_over_R")
    if command == "propagate" and sc.get("lon_deg") is None and sc.get("phi_deg") is None:
        sc["lon_deg"] = 0.0

    output = raw.get("output", "out")
    if not isinstance(output, str) or not output:
        diag.add(("output",), "expected a directory path")
        output = "out"
    data["output"] = output
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        diag.add(("seed",), "expected a non-negative integer")
        seed = 0
    data["seed"] = seed
    threads = raw.get("threads", 1)
    if isinstance(threads, bool) or not isinstance(threads, int) or threads < 1:
        diag.add(("threads",), "expected a positive integer")
        threads = 1
    data["threads"] = threads
    tol = _section(raw.get("tolerances"), TOLERANCES, ("tolerances",), diag, fill=False)
    if tol:
        data["tolerances"] = tol

    if diag.messages:
        raise ConfigError(diag.messages)
    return RunConfig(command, data, system, particle, tuple(pairs), tuple(mix), seed, threads,
                     output, tol)


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``1e-4`` (no decimal point) as a float."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
    |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
    |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
    |[-+]?\.(?:inf|Inf|INF)
    |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."))


def validate_config(text, command) -> RunConfig:
    """Parse YAML text and validate it for ``command``; raises ConfigError."""
    try:
        node = yaml.compose(text, Loader=_Loader)
        raw = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        raise ConfigError([f"<root>: invalid YAML: {exc}"]) from exc
    return parse_config(raw, command, _line_map(node))


def parse_tolerance_overrides(text):
    """``"rtol=1e-10,atol=1e-13"`` to a dict; raises ConfigError on bad keys."""
    out, diag = {}, []
    for part in filter(None, (p.strip() for p in (text or "").split(","))):
        key, sep, value = part.partition("=")
        key = key.strip()
        if not sep or key not in TOLERANCES:
            diag.append(f"--tolerance-overrides: bad entry {part!r} (allowed keys: rtol, atol)")
            continue
        try:
            v = float(value)
        except ValueError:
            diag.append(f"--tolerance-overrides: {key} is not a number")
            continue
        if not (v > 0 and math.isfinite(v)):
            diag.append(f"--tolerance-overrides: {key} must be positive")
            continue
        out[key] = v
    if diag:
        raise ConfigError(diag)
    return out


__all__ = ["COMMANDS", "RunConfig", "parse_config", "validate_config", "parse_tolerance_overrides"]
