"""Glue between a :class:`~nvccdd.config.RunConfig` and the library objects,
plus the multi-run calibration sweeps."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from nvccdd.analysis.calibration import GAMMA_E, CalibrationResult, calibrate, field_to_rabi
from nvccdd.analysis.fit import damped_sinusoid, fit
from nvccdd.config import RunConfig
from nvccdd.ensemble import (
    AS_FITTED_WEIGHTS,
    Ensemble,
    InhomogeneityModel,
    build_quadrature,
    sample_monte_carlo,
)
from nvccdd.errors import InvalidParameterError
from nvccdd.protocols import (
    ProtocolKind,
    ProtocolSpec,
    ReadoutModel,
    Relaxation,
    Sampling,
    measure_response_curve,
    run_ccdd_magnetometry,
)
from nvccdd.spin import DriveConfig, SystemParams, TargetSignal

TWO_PI = 2.0 * math.pi

# fallback sampling periods of the protocols without a natural drive cycle
_FREE_PERIOD = {ProtocolKind.RAMSEY: 10e-9, ProtocolKind.HAHN_ECHO: 10e-9,
                ProtocolKind.T1: 50e-6}


def inhomogeneity_from(cfg: RunConfig) -> InhomogeneityModel:
    s = cfg.section("inhomogeneity")
    w = s["weights"]
    if w == "equal":
        w = (1 / 3, 1 / 3, 1 / 3)
    elif w == "as-fitted":
        w = AS_FITTED_WEIGHTS
    return InhomogeneityModel(
        sigma_eps=s["sigma_eps"], eps_target_coupled=s["eps_target_coupled"],
        detuning_profile=s["profile"], detuning_fwhm=s["fwhm"] / TWO_PI,
        hyperfine_splitting=s["hyperfine_splitting"] / TWO_PI, hyperfine_weights=tuple(w))


def ensemble_from(cfg: RunConfig, seed: int) -> Ensemble:
    s = cfg.section("inhomogeneity")
    model = inhomogeneity_from(cfg)
    if s["sampling"] == "monte-carlo":
        return sample_monte_carlo(model, s["n_samples"], seed)
    return build_quadrature(model, s["n_eps"], s["n_delta"], s["eps_rule"])


def _target_rabi(cfg: RunConfig) -> float:
    t = cfg.section("target")
    if t["field"] is not None:
        return field_to_rabi(t["field"])
    return t["omega_t"]


def spec_from(cfg: RunConfig, kind: str, seed: int, threads: int = 1) -> ProtocolSpec:
    """Protocol specification of subcommand ``kind`` described by ``cfg``."""
    kind = ProtocolKind(kind)
    system = SystemParams(cfg["system.omega0"])
    d = cfg.section("drive")
    drive = DriveConfig(d["omega1"], d["omega2"], d["omega1_mod"], d["eps1"], d["eps2"],
                        d["carrier"], d["phase"])
    t = cfg.section("target")
    carrier = t["carrier"]
    if carrier == "auto":
        carrier = "low-attenuation" if kind == ProtocolKind.CCDD_MAGNETOMETRY else "resonant"
    if carrier == "low-attenuation":
        carrier = system.omega0 - drive.omega2
    elif carrier == "resonant":
        carrier = system.omega0
    target = TargetSignal(_target_rabi(cfg), carrier, t["xi"], t["eps_t"])
    p = cfg.section("protocol")
    period = p["period"]
    if period == "auto":
        if kind == ProtocolKind.RABI:
            period = "omega1-fine"
        elif kind == ProtocolKind.CCDD_MAGNETOMETRY:
            period = "omega2-cycle"
        elif kind in (ProtocolKind.SPIN_LOCK, ProtocolKind.CCDD):
            period = "omega1-cycle"
    if period == "omega1-cycle":
        period = TWO_PI / drive.omega1
    elif period == "omega1-fine":
        period = TWO_PI / drive.omega1 / 40
    elif period == "omega2-cycle":
        if drive.omega2 <= 0:
            raise InvalidParameterError("protocol.period = 'omega2-cycle' needs drive.omega2 > 0")
        period = TWO_PI / drive.omega2
    elif period == "auto":
        if kind == ProtocolKind.DIRECT_RABI_MAGNETOMETRY and target.omega_t_rabi > 0:
            period = TWO_PI / target.omega_t_rabi / 20
        else:
            period = _FREE_PERIOD.get(kind, TWO_PI / drive.omega1)
    r = cfg.section("readout")
    return ProtocolSpec(
        kind=kind, system=system, drive=drive, sampling=Sampling(period, p["count"]),
        target=target, pulse_style=p["pulse_style"], pulse_rabi=p["pulse_rabi"],
        relaxation=Relaxation(p["t1"], p["t2rho"]),
        readout=ReadoutModel(r["contrast"], r["baseline"], r["noise_std_per_shot"], r["shots"],
                             r["polarization"]),
        steps_per_cycle=p["steps_per_cycle"], seed=seed, threads=threads)


def amplitude_grid(cfg: RunConfig) -> np.ndarray:
    """Target Rabi frequencies (rad/s) of ``protocol.amplitudes``."""
    a = cfg["protocol.amplitudes"]
    if a is None:
        raise InvalidParameterError("protocol.amplitudes is required for this subcommand")
    grid = np.linspace(a["start"], a["stop"], a["count"])
    return field_to_rabi(grid) if a["kind"] == "field" else grid


def interaction_time(spec: ProtocolSpec, tau: float) -> float:
    """``tau`` rounded to a whole number of second-drive periods."""
    if spec.drive is None or spec.drive.omega2 <= 0:
        return tau
    cycle = TWO_PI / spec.drive.omega2
    return max(1, round(tau / cycle)) * cycle


# ---------------------------------------------------------------------------
# Calibration sweeps


def slow_frequency(spec: ProtocolSpec, ensemble, omega_t: float) -> tuple[float, float]:
    """Fitted slow-oscillation frequency (Hz) and its σ for one target amplitude."""
    s = replace(spec, kind=ProtocolKind.CCDD_MAGNETOMETRY,
                target=replace(spec.target, omega_t_rabi=float(omega_t)),
                readout=replace(spec.readout, noise_std_per_shot=0.0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        tr = run_ccdd_magnetometry(s, ensemble)
    r = fit(damped_sinusoid(p=1.0, background=True), tr.times, tr.differential)
    if not r.converged:
        raise InvalidParameterError(f"frequency fit failed at omega_t = {omega_t!r} rad/s")
    return r["omega"] / TWO_PI, r.sigma("omega") / TWO_PI


@dataclass(frozen=True)
class CalibrationRun:
    """Both sweeps of a simulated calibration, in source volts."""

    volts_per_rabi: float  # source volts per rad/s of target Rabi frequency
    freq_vs_amp: np.ndarray  # (V, f' Hz)
    response: np.ndarray  # (V, S)
    tau: float
    result: CalibrationResult


def simulate_calibration(spec: ProtocolSpec, ensemble, tau: float, volts_per_rabi: float,
                         freq_volts, response_volts) -> CalibrationRun:
    """Frequency-versus-amplitude sweep plus response sweep at fixed ``tau``.

    Source amplitudes are in volts; the source produces a target Rabi frequency
    ``V / volts_per_rabi``.
    """
    if not (volts_per_rabi > 0 and math.isfinite(volts_per_rabi)):
        raise InvalidParameterError("volts_per_rabi must be > 0")
    fv = np.asarray(freq_volts, dtype=float)
    rv = np.asarray(response_volts, dtype=float)
    freqs = [slow_frequency(spec, ensemble, v / volts_per_rabi)[0] for v in fv]
    tau = interaction_time(spec, tau)
    curve = measure_response_curve(replace(spec, kind=ProtocolKind.CCDD_MAGNETOMETRY), ensemble,
                                   tau, rv / volts_per_rabi)
    fva = np.column_stack([fv, freqs])
    resp = np.column_stack([rv, curve.signal])
    return CalibrationRun(volts_per_rabi, fva, resp, tau, calibrate(fva, resp))


def field_of_rabi(omega_t: float) -> float:
    """Field amplitude (T) of a target Rabi frequency (rad/s)."""
    return omega_t / (TWO_PI * GAMMA_E)
