"""Run configuration: TOML files with explicit units, converted to SI at parse time.

Frequencies are written as ordinary frequencies (``"11.36 MHz"``) and stored as
angular frequencies (rad/s); ``"... rad/s"`` is accepted verbatim. Times take
``s, ms, us, ns``; fields ``T, mT, uT, nT, pT``; voltages ``V, mV``. Plain
numbers are only accepted for dimensionless keys. Validation collects every
problem before raising.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import tomli

from nvccdd.errors import InvalidParameterError

TWO_PI = 2.0 * math.pi

UNITS = {
    "freq": {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "μs": 1e-6, "µs": 1e-6, "ns": 1e-9, "ps": 1e-12},
    "field": {"t": 1.0, "mt": 1e-3, "ut": 1e-6, "μt": 1e-6, "µt": 1e-6, "nt": 1e-9, "pt": 1e-12},
    "volt": {"v": 1.0, "mv": 1e-3, "uv": 1e-6, "μv": 1e-6, "µv": 1e-6},
    "angle": {"rad": 1.0, "deg": math.pi / 180.0},
}
_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([^\s\d].*?)\s*$")


class ConfigError(InvalidParameterError):
    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


def parse_quantity(text, kind: str) -> float:
    """Convert ``"<number> <unit>"`` to SI; frequencies become rad/s."""
    if kind not in UNITS:
        raise InvalidParameterError(f"unknown quantity kind {kind!r}")
    if isinstance(text, bool) or not isinstance(text, str):
        raise InvalidParameterError(f"expected a string with a {kind} unit, got {text!r}")
    m = _QUANTITY.match(text)
    if not m:
        raise InvalidParameterError(f"cannot parse {text!r} as a {kind} quantity")
    value, unit = float(m.group(1)), m.group(2)
    if kind == "freq" and unit == "rad/s":
        return value
    scale = UNITS[kind].get(unit.lower())
    if scale is None:
        raise InvalidParameterError(
            f"unit {unit!r} in {text!r} is not a {kind} unit ({', '.join(UNITS[kind])})")
    v = value * scale
    return TWO_PI * v if kind == "freq" else v


# ---------------------------------------------------------------------------
# Schema: section -> key -> (kind, default). REQUIRED marks mandatory keys.

REQUIRED = object()
OPTIONAL = None

PULSE_STYLES = ("rect", "BB1", "CORPSE", "CORP2SE", "ideal")
FIT_MODELS = ("DampedSinusoid", "DampedSinusoidExp", "DampedSinusoidGauss",
              "DampedSinusoidBackground", "TwoToneCcdd", "LorentzianTriplet",
              "BiExpSaturation", "StretchedExp", "Linear")

SCHEMA: dict[str, dict[str, tuple]] = {
    "system": {
        "omega0": ("freq", REQUIRED),
    },
    "drive": {
        "omega1": ("freq", REQUIRED),
        "omega2": ("freq", "0 Hz"),
        "omega1_mod": ("freq", OPTIONAL),
        "eps1": ("float", 0.0),
        "eps2": ("float", 0.0),
        "carrier": ("freq", OPTIONAL),
        "phase": ("angle", "0 rad"),
    },
    "target": {
        "omega_t": ("freq", "0 Hz"),
        "field": ("field", OPTIONAL),  # alternative to omega_t via the gyromagnetic ratio
        "carrier": ("carrier", "auto"),
        "xi": ("angle", f"{math.pi / 2!r} rad"),
        "eps_t": ("float", 0.0),
    },
    "inhomogeneity": {
        "sigma_eps": ("float", 0.1),
        "eps_target_coupled": ("bool", True),
        "profile": (("gaussian", "lorentzian"), "gaussian"),
        "fwhm": ("freq", "415 kHz"),
        "hyperfine_splitting": ("freq", "2.16 MHz"),
        "weights": ("weights", "equal"),
        "sampling": (("quadrature", "monte-carlo"), "quadrature"),
        "eps_rule": (("gauss-hermite", "uniform"), "gauss-hermite"),
        "n_eps": ("int", 21),
        "n_delta": ("int", 15),
        "n_samples": ("int", 10000),
    },
    "protocol": {
        "pulse_style": (PULSE_STYLES, "rect"),
        "pulse_rabi": ("freq", OPTIONAL),
        "period": ("period", "auto"),
        "count": ("int", 200),
        "steps_per_cycle": ("int", 50),
        "t1": ("time", OPTIONAL),
        "t2rho": ("time", OPTIONAL),
        "tau": ("time", "67 us"),
        "amplitudes": ("amplitudes", OPTIONAL),
        "n_reps": ("int", 1000),
        "odmr_span": ("freq", "8 MHz"),
        "odmr_points": ("int", 161),
    },
    "readout": {
        "contrast": ("float", 0.029),
        "baseline": ("float", 0.0),
        "noise_std_per_shot": ("float", 0.0),
        "shots": ("int", 1),
        "polarization": ("float", 1.0),
    },
    "analysis": {
        "fit_model": (FIT_MODELS, "DampedSinusoid"),
        "fit_p": ("float", OPTIONAL),
        "repetition_period": ("time", "1 ms"),
        "overlapping": ("bool", False),
    },
    "fidelity_map": {
        "theta": ("angle", f"{math.pi / 2!r} rad"),
        "phi": ("angle", "0 rad"),
        "rabi": ("freq", OPTIONAL),
        "delta_span": ("freq", OPTIONAL),
        "delta_points": ("int", 41),
        "eps_span": ("float", 0.2),
        "eps_points": ("int", 41),
    },
}
TOP_LEVEL = {"seed": ("int", 0), "output_dir": ("str", "out")}


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration in SI units (angular frequencies in rad/s).

    ``raw`` keeps the file's values with defaults filled, in file units, so that
    the run can be reproduced from a sidecar.
    """

    values: dict
    seed: int = 0
    output_dir: str = "out"
    raw: dict = field(default_factory=dict)
    source: str = ""

    def section(self, name: str) -> dict:
        return self.values[name]

    def __getitem__(self, key: str):
        sec, _, name = key.partition(".")
        return self.values[sec][name]


def _convert(kind, value, where: str, problems: list[str]):
    def bad(msg):
        problems.append(f"{where}: {msg}")
        return None

    try:
        if isinstance(kind, tuple):
            if value not in kind:
                return bad(f"{value!r} not one of {', '.join(kind)}")
            return value
        if kind in UNITS:
            return parse_quantity(value, kind)
        if kind == "float":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                if isinstance(value, str):
                    return bad(f"dimensionless key given a unit string {value!r}")
                return bad(f"expected a number, got {value!r}")
            if not math.isfinite(value):
                return bad("must be finite")
            return float(value)
        if kind == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                return bad(f"expected an integer, got {value!r}")
            return value
        if kind == "bool":
            if not isinstance(value, bool):
                return bad(f"expected true or false, got {value!r}")
            return value
        if kind == "str":
            if not isinstance(value, str):
                return bad(f"expected a string, got {value!r}")
            return value
        if kind == "carrier":
            if value in ("auto", "low-attenuation", "resonant"):
                return value
            return parse_quantity(value, "freq")
        if kind == "period":
            if value in ("auto", "omega1-cycle", "omega2-cycle"):
                return value
            return parse_quantity(value, "time")
        if kind == "weights":
            if value in ("equal", "as-fitted"):
                return value
            if (isinstance(value, list) and len(value) == 3
                    and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)):
                return tuple(float(v) for v in value)
            return bad("expected 'equal', 'as-fitted' or a list of three numbers")
        if kind == "amplitudes":
            if not (isinstance(value, dict) and set(value) <= {"start", "stop", "count"}
                    and {"start", "stop", "count"} <= set(value)):
                return bad("expected a table with start, stop, count")
            unit_kind = "field" if _is_field(value["start"]) else "freq"
            start = parse_quantity(value["start"], unit_kind)
            stop = parse_quantity(value["stop"], unit_kind)
            if isinstance(value["count"], bool) or not isinstance(value["count"], int):
                return bad("count must be an integer")
            return {"kind": unit_kind, "start": start, "stop": stop, "count": value["count"]}
    except InvalidParameterError as exc:
        return bad(str(exc))
    raise AssertionError(kind)


def _is_field(text) -> bool:
    if not isinstance(text, str):
        return False
    m = _QUANTITY.match(text)
    return bool(m) and m.group(2).lower() in UNITS["field"]


def _validate_ranges(v: dict, problems: list[str]):
    def need(cond, msg):
        if not cond:
            problems.append(msg)

    sysv, drv, inh, pro, ro = v["system"], v["drive"], v["inhomogeneity"], v["protocol"], v["readout"]
    if sysv.get("omega0") is not None:
        need(sysv["omega0"] > 0, "system.omega0: must be > 0")
    if drv.get("omega1") is not None:
        need(drv["omega1"] > 0, "drive.omega1: must be > 0")
    if drv.get("omega2") is not None:
        need(drv["omega2"] >= 0, "drive.omega2: must be >= 0")
    if v["target"].get("omega_t") is not None:
        need(v["target"]["omega_t"] >= 0, "target.omega_t: must be >= 0")
    if inh.get("sigma_eps") is not None:
        need(inh["sigma_eps"] >= 0, "inhomogeneity.sigma_eps: must be >= 0")
    for k in ("n_eps", "n_delta", "n_samples"):
        if inh.get(k) is not None:
            need(inh[k] >= 1, f"inhomogeneity.{k}: must be >= 1")
    w = inh.get("weights")
    if isinstance(w, tuple):
        need(all(x >= 0 for x in w) and abs(sum(w) - 1) <= 1e-12,
             "inhomogeneity.weights: must be >= 0 and sum to 1")
    for k in ("count", "steps_per_cycle", "n_reps", "odmr_points"):
        if pro.get(k) is not None:
            need(pro[k] >= 1, f"protocol.{k}: must be >= 1")
    if pro.get("tau") is not None:
        need(pro["tau"] > 0, "protocol.tau: must be > 0")
    if ro.get("contrast") is not None:
        need(ro["contrast"] > 0, "readout.contrast: must be > 0")
    if ro.get("shots") is not None:
        need(ro["shots"] >= 1, "readout.shots: must be >= 1")
    if ro.get("noise_std_per_shot") is not None:
        need(ro["noise_std_per_shot"] >= 0, "readout.noise_std_per_shot: must be >= 0")
    if ro.get("polarization") is not None:
        need(0 <= ro["polarization"] <= 1, "readout.polarization: must lie in [0, 1]")
    if isinstance(v["target"].get("field"), float) and v["target"].get("omega_t"):
        problems.append("target: give either omega_t or field, not both")


def build_config(data: dict, source: str = "") -> RunConfig:
    """Validate a parsed key-value tree; raises :class:`ConfigError` listing all problems."""
    problems: list[str] = []
    if not isinstance(data, dict):
        raise ConfigError(["top level must be a table"])
    for key in data:
        if key not in SCHEMA and key not in TOP_LEVEL:
            problems.append(f"unknown key {key!r}")
    values: dict = {}
    raw: dict = {}
    for sec, keys in SCHEMA.items():
        given = data.get(sec, {})
        if not isinstance(given, dict):
            problems.append(f"{sec}: must be a table")
            given = {}
        for key in given:
            if key not in keys:
                problems.append(f"unknown key '{sec}.{key}'")
        out, rsec = {}, {}
        for key, (kind, default) in keys.items():
            where = f"{sec}.{key}"
            if key in given:
                val = given[key]
            elif default is REQUIRED:
                problems.append(f"missing required key '{where}'")
                out[key] = None
                continue
            else:
                val = default
            if val is None:
                out[key] = None
                continue
            rsec[key] = val
            out[key] = _convert(kind, val, where, problems)
        values[sec] = out
        raw[sec] = rsec
    top = {}
    for key, (kind, default) in TOP_LEVEL.items():
        val = data.get(key, default)
        top[key] = _convert(kind, val, key, problems)
        raw[key] = val
    if isinstance(top["seed"], int) and not 0 <= top["seed"] < 2 ** 64:
        problems.append("seed: must be an unsigned 64-bit integer")
    _validate_ranges(values, problems)
    if problems:
        raise ConfigError(problems)
    return RunConfig(values, top["seed"], top["output_dir"], raw, source)


def parse_config(path) -> RunConfig:
    """Read and validate a TOML run configuration (duplicate keys are rejected)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"config file not found: {path}"])
    try:
        data = tomli.loads(path.read_text(encoding="utf-8"))
    except tomli.TOMLDecodeError as exc:
        raise ConfigError([f"{path}: {exc}"]) from None
    return build_config(data, str(path))


def dumps_toml(raw: dict) -> str:
    """Serialise a two-level tree of scalars, lists and tables back to TOML."""

    def scalar(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, (int, float)):
            return repr(v)
        if isinstance(v, str):
            return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
        if isinstance(v, (list, tuple)):
            return "[" + ", ".join(scalar(x) for x in v) + "]"
        if isinstance(v, dict):
            return "{ " + ", ".join(f"{k} = {scalar(x)}" for k, x in v.items()) + " }"
        raise InvalidParameterError(f"cannot serialise {v!r}")

    lines = [f"{k} = {scalar(v)}" for k, v in raw.items() if not isinstance(v, dict)]
    for k, v in raw.items():
        if isinstance(v, dict):
            lines.append("")
            lines.append(f"[{k}]")
            lines += [f"{kk} = {scalar(vv)}" for kk, vv in v.items()]
    return "\n".join(lines) + "\n"
