"""Batch command-line runner.

Every subcommand writes its data (CSV, or JSON with ``--format json``) plus a
JSON sidecar that holds the full configuration, the seed and the tool version.
A sidecar can be passed back through ``--config`` to re-run the experiment.

Exit status: 0 success, 1 invalid input or configuration, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from nvccdd import __version__
from nvccdd import io as nio
from nvccdd.analysis import (
    calibrate,
    estimate_sensitivity,
    fit,
    get_model,
    sem_scaling,
    signal_to_field,
)
from nvccdd.analysis.fit import damped_sinusoid
from nvccdd.config import ConfigError, RunConfig, build_config, dumps_toml, parse_config
from nvccdd.errors import InvalidParameterError, NumericalError
from nvccdd.pipeline import (
    amplitude_grid,
    ensemble_from,
    field_of_rabi,
    interaction_time,
    simulate_calibration,
    spec_from,
)
from nvccdd.protocols import (
    measure_response_curve,
    repeated_measurement,
    run_odmr,
    run_protocol,
)
from nvccdd.pulses import compile_rotation, fidelity_map, write_fidelity_csv

TWO_PI = 2.0 * math.pi

TRACE_COMMANDS = ("rabi", "ramsey", "echo", "t1", "spinlock", "ccdd", "ccdd-mag", "rabi-mag")
SIM_COMMANDS = TRACE_COMMANDS + ("odmr", "response", "repeat", "fidelity-map")
ANALYSIS_COMMANDS = ("calibrate", "allan", "fit")
COMMANDS = SIM_COMMANDS + ANALYSIS_COMMANDS


class Context:
    def __init__(self, args, cfg: RunConfig | None):
        self.args = args
        self.cfg = cfg
        self.seed = args.seed if args.seed is not None else (cfg.seed if cfg else 0)
        self.threads = args.threads or os.cpu_count() or 1
        out = args.out or (cfg.output_dir if cfg else "out")
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.fmt = args.format

    def provenance(self) -> dict:
        # everything needed to re-run; nothing that varies between identical runs
        prov = {"schema_version": nio.SCHEMA_VERSION, "tool_version": __version__,
                "subcommand": self.args.command, "seed": self.seed}
        if self.cfg is not None:
            prov["config"] = self.cfg.raw
        return prov

    def emit(self, stem: str, header, columns, meta: dict) -> Path:
        meta = {**self.provenance(), **meta}
        if self.fmt == "json":
            data = {h: np.asarray(c).tolist() for h, c in zip(header, columns)}
            return nio.write_json(self.out / f"{stem}.json", {**meta, "data": data})
        path = nio.write_table(self.out / f"{stem}.csv", header, columns)
        nio.write_json(self.out / f"{stem}.json", meta)
        return path


def _load_config(path: str | None, required: bool) -> RunConfig | None:
    if path is None:
        if required:
            raise ConfigError(["--config is required for this subcommand"])
        return None
    p = Path(path)
    if p.suffix == ".json":
        if not p.is_file():
            raise ConfigError([f"config file not found: {p}"])
        side = json.loads(p.read_text(encoding="utf-8"))
        if "config" not in side:
            raise ConfigError([f"{p}: sidecar has no 'config' section"])
        return build_config(side["config"], str(p))
    return parse_config(p)


def _protocol_meta(obj) -> dict:
    return {k: v for k, v in obj.metadata.items() if k != "schema_version"}


# ---------------------------------------------------------------------------
# Subcommands


def cmd_trace(ctx: Context) -> int:
    spec = spec_from(ctx.cfg, ctx.args.command, ctx.seed, ctx.threads)
    ens = ensemble_from(ctx.cfg, ctx.seed)
    tr = run_protocol(spec, ens)
    ctx.emit(ctx.args.command, nio.TRACE_COLUMNS,
             (tr.times, tr.signal_plus, tr.signal_minus, tr.differential), _protocol_meta(tr))
    return 0


def cmd_odmr(ctx: Context) -> int:
    spec = spec_from(ctx.cfg, "odmr", ctx.seed, ctx.threads)
    ens = ensemble_from(ctx.cfg, ctx.seed)
    p = ctx.cfg.section("protocol")
    f0 = spec.system.omega0 / TWO_PI
    half = p["odmr_span"] / TWO_PI / 2
    freqs = np.linspace(f0 - half, f0 + half, p["odmr_points"])
    spec_ = run_odmr(spec, ens, freqs)
    ctx.emit("odmr", ("freq_hz", "signal"), (spec_.freqs_hz, spec_.signal),
             _protocol_meta(spec_))
    return 0


def cmd_response(ctx: Context) -> int:
    spec = spec_from(ctx.cfg, "ccdd-mag", ctx.seed, ctx.threads)
    ens = ensemble_from(ctx.cfg, ctx.seed)
    tau = interaction_time(spec, ctx.cfg["protocol.tau"])
    amps = amplitude_grid(ctx.cfg)
    curve = measure_response_curve(spec, ens, tau, amps)
    ctx.emit("response", ("omega_t_rad_s", "field_t", "signal"),
             (curve.amplitudes, field_of_rabi(curve.amplitudes), curve.signal),
             _protocol_meta(curve))
    return 0


def cmd_repeat(ctx: Context) -> int:
    spec = spec_from(ctx.cfg, "ccdd-mag", ctx.seed, ctx.threads)
    ens = ensemble_from(ctx.cfg, ctx.seed)
    tau = interaction_time(spec, ctx.cfg["protocol.tau"])
    series = repeated_measurement(spec, ens, tau, spec.target.omega_t_rabi,
                                  ctx.cfg["protocol.n_reps"], ctx.seed)
    idx = np.arange(series.size)
    ctx.emit("repeat", ("index", "signal"), (idx, series),
             {"tau_s": tau, "omega_t_rad_s": spec.target.omega_t_rabi,
              "protocol": spec.to_dict()})
    return 0


def cmd_fidelity_map(ctx: Context) -> int:
    f = ctx.cfg.section("fidelity_map")
    style = ctx.cfg["protocol.pulse_style"]
    if style == "ideal":
        raise InvalidParameterError("fidelity-map needs a physical pulse style")
    rabi = f["rabi"] or ctx.cfg["drive.omega1"]
    span = f["delta_span"] if f["delta_span"] is not None else 0.4 * rabi
    seq = compile_rotation(style, f["theta"], f["phi"], rabi)
    d = np.linspace(-span / 2, span / 2, f["delta_points"])
    e = np.linspace(-f["eps_span"] / 2, f["eps_span"] / 2, f["eps_points"])
    fmap = fidelity_map(seq, None, d, e, ctx.threads)
    meta = {**ctx.provenance(), "pulse_style": style, "theta_rad": f["theta"],
            "phi_rad": f["phi"], "rabi_rad_s": rabi}
    if ctx.fmt == "json":
        nio.write_json(ctx.out / "fidelity-map.json",
                       {**meta, "delta_hz": d / TWO_PI, "eps": e, "fidelity": fmap})
    else:
        write_fidelity_csv(ctx.out / "fidelity-map.csv", d, e, fmap)
        nio.write_json(ctx.out / "fidelity-map.json", meta)
    return 0


def _pairs(path, what: str) -> np.ndarray:
    cols = nio.read_table(path)
    names = list(cols)
    if len(names) < 2:
        raise InvalidParameterError(f"{path}: {what} needs two columns")
    return np.column_stack([cols[names[0]], cols[names[-1]]])


def cmd_calibrate(ctx: Context) -> int:
    """Calibrate from two CSVs, or simulate both sweeps from the config.

    Simulated sweeps use the target field (T) as the source amplitude, so ``a``
    is in Hz per tesla and the response slope ``R`` per tesla.
    """
    a = ctx.args
    if a.input or a.freq_input:
        if not (a.input and a.freq_input):
            raise InvalidParameterError(
                "calibrate needs both --freq-input (amplitude, f' Hz) and --input (amplitude, signal)")
        cal = calibrate(_pairs(a.freq_input, "frequency sweep"), _pairs(a.input, "response curve"))
        out = {**ctx.provenance(), "calibration": cal.as_dict(a.amplitude_unit),
               "inputs": {"freq": str(a.freq_input), "response": str(a.input)}}
    else:
        if ctx.cfg is None:
            raise InvalidParameterError("calibrate needs --config or the two input CSVs")
        spec = spec_from(ctx.cfg, "ccdd-mag", ctx.seed, ctx.threads)
        ens = ensemble_from(ctx.cfg, ctx.seed)
        amps = amplitude_grid(ctx.cfg)
        fields = field_of_rabi(amps)
        # the slope through the origin is best determined by a wide, fast sweep
        mid = float(np.mean(fields))
        run = simulate_calibration(spec, ens, ctx.cfg["protocol.tau"], field_of_rabi(1.0),
                                   np.linspace(mid / 2, 1.5 * mid, 5), fields)
        cal = run.result
        nio.write_table(ctx.out / "calibration-freq.csv", ("field_t", "freq_hz"),
                        run.freq_vs_amp.T)
        nio.write_table(ctx.out / "calibration-response.csv", ("field_t", "signal"),
                        run.response.T)
        out = {**ctx.provenance(), "calibration": cal.as_dict("T"), "tau_s": run.tau}
    if a.signal is not None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            est = signal_to_field(a.signal, cal)
        out["field"] = {"signal": a.signal, "field_t": est.value, "extrapolated": est.extrapolated}
    nio.write_json(ctx.out / "calibration.json", out)
    return 0


def cmd_allan(ctx: Context) -> int:
    a = ctx.args
    if not a.input:
        raise InvalidParameterError("allan needs --input (CSV series)")
    cols = nio.read_table(a.input)
    col = a.column or list(cols)[-1]
    if col not in cols:
        raise InvalidParameterError(f"column {col!r} not in {a.input}")
    series = cols[col] * a.scale
    period = a.repetition_period
    if period is None:
        period = ctx.cfg["analysis.repetition_period"] if ctx.cfg else 1e-3
    sc = sem_scaling(series, period)
    sens = estimate_sensitivity(series, period)
    meta = {**ctx.provenance(), "input": str(a.input), "column": col, "scale": a.scale,
            "repetition_period_s": period, "divergence_tau_s": sc.divergence_tau,
            "sensitivity": {"eta": sens.eta, "flagged": sens.flagged,
                            "n_points": sens.n_points, "message": sens.message},
            "mean": float(np.mean(series)), "sem": float(np.std(series, ddof=1) / math.sqrt(series.size))}
    if ctx.fmt == "json":
        nio.write_json(ctx.out / "allan.json", {**meta, "data": {
            "tau_s": sc.taus, "adev": sc.adev, "sem": sc.sem}})
    else:
        nio.write_table(ctx.out / "allan.csv", ("tau_s", "adev", "sem"), (sc.taus, sc.adev, sc.sem))
        nio.write_json(ctx.out / "allan.json", meta)
    return 0


def cmd_fit(ctx: Context) -> int:
    a = ctx.args
    if not a.input:
        raise InvalidParameterError("fit needs --input (trace CSV)")
    cols = nio.read_table(a.input)
    names = list(cols)
    x = cols[names[0]]
    y = cols["differential"] if "differential" in cols else cols[names[-1]]
    name = a.model or (ctx.cfg["analysis.fit_model"] if ctx.cfg else "DampedSinusoid")
    p = ctx.cfg["analysis.fit_p"] if ctx.cfg else None
    model = damped_sinusoid(p=p) if (name == "DampedSinusoid" and p is not None) else get_model(name)
    res = fit(model, x, y)
    nio.write_fit_report(ctx.out / "fit.json", res, **ctx.provenance(), input=str(a.input))
    return 0 if res.converged else 2


HANDLERS = {**{c: cmd_trace for c in TRACE_COMMANDS}, "odmr": cmd_odmr, "response": cmd_response,
            "repeat": cmd_repeat, "fidelity-map": cmd_fidelity_map, "calibrate": cmd_calibrate,
            "allan": cmd_allan, "fit": cmd_fit}


class _Parser(argparse.ArgumentParser):
    # usage errors are validation errors (exit 1); 2 is reserved for numerical failure
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="nvccdd", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML run configuration or a JSON sidecar")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--threads", type=int, help="worker threads (default: all cores)")
        p.add_argument("--out", help="output directory (default: config output_dir)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        if name in ANALYSIS_COMMANDS:
            p.add_argument("--input", help="input CSV")
        if name == "calibrate":
            p.add_argument("--freq-input", help="CSV of (amplitude, slow frequency in Hz)")
            p.add_argument("--signal", type=float, help="signal to convert to a field")
            p.add_argument("--amplitude-unit", default="V", help="unit of the input amplitudes")
        if name == "allan":
            p.add_argument("--column", help="series column (default: last)")
            p.add_argument("--scale", type=float, default=1.0,
                           help="factor converting the column to field units")
            p.add_argument("--repetition-period", type=float, help="seconds per reading")
        if name == "fit":
            p.add_argument("--model", help="fit model name")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise InvalidParameterError("--seed must be an unsigned 64-bit integer")
        if args.threads is not None and args.threads < 1:
            raise InvalidParameterError("--threads must be >= 1")
        cfg = _load_config(args.config, required=args.command in SIM_COMMANDS)
        ctx = Context(args, cfg)
        return HANDLERS[args.command](ctx)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (InvalidParameterError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


def write_config(path, cfg: RunConfig) -> Path:
    """Write ``cfg.raw`` back as TOML."""
    path = Path(path)
    path.write_text(dumps_toml(cfg.raw), encoding="utf-8")
    return path


if __name__ == "__main__":
    raise SystemExit(main())
