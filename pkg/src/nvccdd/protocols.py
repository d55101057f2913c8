"""Measurement sequences run over an ensemble.

Every protocol works in the frame rotating at the drive carrier. Coherent
protocols prepare the spin along +x with a π/2 pulse of phase π/2 and read out
with a π/2 pulse of phase -π/2 ("plus", maps +x to |0>) or +π/2 ("minus"), so
that ``P0± = (1 ± x)/2`` and the differential signal is ``contrast · x``.
Population protocols (Rabi, T1, direct-Rabi magnetometry) read ``P0`` directly
and obtain the second channel from an ideal inversion before readout.

Each channel is reported as ``baseline + contrast · P0``.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.special import ndtri

from nvccdd import __version__
from nvccdd.ensemble import Ensemble
from nvccdd.errors import InvalidParameterError, NumericalError
from nvccdd.pulses import compile_rotation, make_rect, sequence_unitary
from nvccdd.spin import (
    NO_TARGET,
    DriveConfig,
    SystemParams,
    TargetSignal,
    evolve,
    rwa_field,
    rwa_step,
    su2_mul,
)

PI = math.pi
TWO_PI = 2.0 * PI

# members per work item; fixed so that results do not depend on --threads
CHUNK = 128
# largest denominator accepted when matching the sampling period to the field period
MAX_PERIOD_RATIO = 4096


class ProtocolKind(str, Enum):
    RABI = "rabi"
    ODMR = "odmr"
    RAMSEY = "ramsey"
    HAHN_ECHO = "echo"
    T1 = "t1"
    SPIN_LOCK = "spinlock"
    CCDD = "ccdd"
    CCDD_MAGNETOMETRY = "ccdd-mag"
    DIRECT_RABI_MAGNETOMETRY = "rabi-mag"


PULSE_STYLE_NAMES = ("rect", "BB1", "CORPSE", "CORP2SE", "ideal")


@dataclass(frozen=True)
class ReadoutModel:
    """Maps populations to photoluminescence-like signals."""

    contrast: float = 0.029
    baseline: float = 0.0
    noise_std_per_shot: float = 0.0
    shots: int = 1
    polarization: float = 1.0

    def __post_init__(self):
        vals = (self.contrast, self.baseline, self.noise_std_per_shot, self.polarization)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidParameterError("readout parameters must be finite")
        if self.contrast <= 0:
            raise InvalidParameterError("contrast must be > 0")
        if self.shots < 1:
            raise InvalidParameterError("shots must be >= 1")
        if self.noise_std_per_shot < 0:
            raise InvalidParameterError("noise_std_per_shot must be >= 0")
        if not 0 <= self.polarization <= 1:
            raise InvalidParameterError("polarization must lie in [0, 1]")

    @property
    def noise_std(self) -> float:
        return self.noise_std_per_shot / math.sqrt(self.shots)

    def signal(self, p0):
        return self.baseline + self.contrast * np.asarray(p0)


@dataclass(frozen=True)
class Sampling:
    """Sample times ``period · k`` for ``k = 0 .. count-1``."""

    period: float
    count: int

    def __post_init__(self):
        if not (math.isfinite(self.period) and self.period > 0):
            raise InvalidParameterError("sampling period must be > 0")
        if self.count < 1:
            raise InvalidParameterError("sampling count must be >= 1")

    @property
    def times(self) -> np.ndarray:
        return self.period * np.arange(self.count)


@dataclass(frozen=True)
class Relaxation:
    """Phenomenological envelopes; ``None`` disables a channel.

    ``t1`` multiplies population protocols (T1) and ``t2rho`` all coherent or
    driven ones.
    """

    t1: float | None = None
    t2rho: float | None = None

    def __post_init__(self):
        for v in (self.t1, self.t2rho):
            if v is not None and not (math.isfinite(v) and v > 0):
                raise InvalidParameterError("relaxation times must be > 0")


@dataclass(frozen=True)
class ProtocolSpec:
    kind: ProtocolKind
    system: SystemParams
    drive: DriveConfig | None
    sampling: Sampling
    target: TargetSignal = NO_TARGET
    pulse_style: str = "rect"
    pulse_rabi: float | None = None
    relaxation: Relaxation = Relaxation()
    readout: ReadoutModel = ReadoutModel()
    steps_per_cycle: int = 50
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", ProtocolKind(self.kind))
        if self.pulse_style not in PULSE_STYLE_NAMES:
            raise InvalidParameterError(f"unknown pulse style {self.pulse_style!r}")
        if self.pulse_rabi is not None and not (math.isfinite(self.pulse_rabi)
                                                and self.pulse_rabi > 0):
            raise InvalidParameterError("pulse_rabi must be > 0")
        if self.threads < 1:
            raise InvalidParameterError("threads must be >= 1")

    @property
    def rabi_for_pulses(self) -> float:
        if self.pulse_rabi is not None:
            return self.pulse_rabi
        if self.drive is None:
            raise InvalidParameterError("pulse_rabi is required when there is no drive")
        return self.drive.omega1

    @property
    def frame(self) -> float:
        return self.drive.carrier_for(self.system) if self.drive else self.system.omega0

    def to_dict(self) -> dict:
        """Everything that determines the output; the thread count does not."""
        d = asdict(self)
        d["kind"] = self.kind.value
        del d["threads"]
        return d


@dataclass(frozen=True)
class TimeTrace:
    times: np.ndarray
    signal_plus: np.ndarray
    signal_minus: np.ndarray
    differential: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        arrs = [np.array(a, dtype=float).reshape(-1) for a in
                (self.times, self.signal_plus, self.signal_minus, self.differential)]
        if len({a.size for a in arrs}) != 1:
            raise InvalidParameterError("trace columns must have equal length")
        for name, a in zip(("times", "signal_plus", "signal_minus", "differential"), arrs):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @classmethod
    def from_channels(cls, times, plus, minus, metadata=None) -> "TimeTrace":
        plus = np.asarray(plus, dtype=float)
        minus = np.asarray(minus, dtype=float)
        return cls(times, plus, minus, plus - minus, dict(metadata or {}))


@dataclass(frozen=True)
class Spectrum:
    freqs_hz: np.ndarray
    signal: np.ndarray
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ResponseCurve:
    amplitudes: np.ndarray  # target Rabi frequencies, rad/s
    signal: np.ndarray
    tau: float
    metadata: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Stroboscopic propagation


def _field_rates(drive: DriveConfig | None, target: TargetSignal, frame: float,
                 sys: SystemParams) -> list[float]:
    """Angular frequencies of the explicit time dependence of the RWA field."""
    rates = []
    if drive is not None and drive.omega2 > 0:
        rates.append(abs(drive.omega1_mod))
    if target.omega_t_rabi > 0:
        rates.append(abs(frame - target.carrier_for(sys)))
    return [r for r in rates if r > 0]


def _ratio(x: float, tol: float = 1e-9) -> Fraction | None:
    f = Fraction(x).limit_denominator(MAX_PERIOD_RATIO)
    if f == 0 or abs(float(f) - x) > tol * max(1.0, abs(x)):
        return None
    return f


def _fundamental_period(rates: list[float]) -> float | None:
    """Smallest common period of the given rates, or None if incommensurate."""
    if not rates:
        return None
    r0 = rates[0]
    fracs = []
    for r in rates:
        f = _ratio(r / r0)
        if f is None:
            return None
        fracs.append(f)
    q = 1
    for f in fracs:
        q = q * f.denominator // math.gcd(q, f.denominator)
    g = q
    for f in fracs:
        g = math.gcd(g, int(f * q))
    return TWO_PI * q / (r0 * g)


def _plan(period: float, field_period: float | None) -> tuple[float, int, int] | None:
    """(base step g, samples-per-step a, steps-per-field-period b) or None."""
    if field_period is None:
        return period, 1, 1
    f = _ratio(period / field_period)
    if f is None:
        return None
    a, b = f.numerator, f.denominator
    return field_period / b, a, b


def stroboscopic_unitaries(field: Callable, times: np.ndarray, dt_max: float, n_members: int,
                           field_period: float | None):
    """Cumulative unitaries at ``times``; exploits periodicity of the field.

    When the sample spacing and the field period are commensurate, the
    propagator over one field period is computed once and the remaining samples
    follow from exact products of it.
    """
    times = np.asarray(times, dtype=float)
    k = times.size
    uniform = k >= 2 and np.allclose(np.diff(times), times[1], rtol=1e-12, atol=0)
    plan = _plan(times[1], field_period) if uniform else None
    if plan is None:
        return evolve(field, times, dt_max, n_members)
    g, a, b = plan
    va, vb = evolve(field, g * np.arange(b + 1), dt_max, n_members)
    A = np.empty((k, n_members), dtype=complex)
    B = np.empty((k, n_members), dtype=complex)
    pa = np.ones(n_members, dtype=complex)
    pb = np.zeros(n_members, dtype=complex)
    s_done = 0
    for i in range(k):
        s, j = divmod(i * a, b)
        while s_done < s:
            pa, pb = su2_mul(va[b], vb[b], pa, pb)
            s_done += 1
        A[i], B[i] = su2_mul(va[j], vb[j], pa, pb)
    return A, B


# ---------------------------------------------------------------------------
# Building blocks


def _pulse(style: str, theta: float, phi: float, rabi: float, delta, eps):
    """Cayley-Klein pair of a π/2- or π-type rotation for every member."""
    if style == "ideal":
        a, b = sequence_unitary(make_rect(theta, phi, rabi), 0.0, 0.0)
        shape = np.broadcast_shapes(np.shape(delta), np.shape(eps))
        return np.broadcast_to(a, shape), np.broadcast_to(b, shape)
    return sequence_unitary(compile_rotation(style, theta, phi, rabi), delta, eps)


def _p0(a, polarization: float):
    """P0 after a unitary with first column (a, b) acting on a partly polarised |0>."""
    pa = np.abs(a) ** 2
    return polarization * pa + (1.0 - polarization) * (1.0 - pa)


def _map_chunks(fn: Callable[[Ensemble], tuple], ens: Ensemble, threads: int) -> list:
    """Apply ``fn`` to fixed-size member chunks; sum each returned array in chunk order."""
    chunks = [ens[i:i + CHUNK] for i in range(0, len(ens), CHUNK)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(fn, chunks))
    else:
        parts = [fn(c) for c in chunks]
    total = [np.array(p, dtype=float) for p in parts[0]]
    for part in parts[1:]:
        for acc, p in zip(total, part):
            acc += p
    return total


def _wsum(values: np.ndarray, weight: np.ndarray) -> np.ndarray:
    # plain elementwise sum: independent of BLAS threading
    return (values * weight).sum(axis=-1)


def _envelope(times: np.ndarray, tau: float | None) -> np.ndarray:
    if tau is None:
        return np.ones_like(times)
    return np.exp(-times / tau)


def _member_detuning(spec: ProtocolSpec, ens: Ensemble) -> np.ndarray:
    return spec.system.omega0 - spec.frame + ens.delta


def _noise(spec: ProtocolSpec, n: int) -> tuple[np.ndarray, np.ndarray]:
    std = spec.readout.noise_std
    if std == 0:
        return np.zeros(n), np.zeros(n)
    raw = np.random.Philox(key=int(spec.seed)).random_raw((n, 2))
    z = ndtri(((raw >> np.uint64(11)).astype(float) + 0.5) * 2.0 ** -53)
    return std * z[:, 0], std * z[:, 1]


def _metadata(spec: ProtocolSpec, ens: Ensemble, notes: list[str], **extra) -> dict:
    meta = {
        "tool_version": __version__,
        "protocol": spec.to_dict(),
        "ensemble": {"members": len(ens), "sha256": ens.digest()},
        "seed": spec.seed,
        "warnings": list(notes),
    }
    meta.update(extra)
    return meta


def _finish(spec: ProtocolSpec, ens: Ensemble, times, p_plus, p_minus, env, notes,
            **extra) -> TimeTrace:
    p_plus = 0.5 + (p_plus - 0.5) * env
    p_minus = 0.5 + (p_minus - 0.5) * env
    if not (np.all(np.isfinite(p_plus)) and np.all(np.isfinite(p_minus))):
        raise NumericalError("non-finite populations")
    n_plus, n_minus = _noise(spec, times.size)
    ro = spec.readout
    return TimeTrace.from_channels(times, ro.signal(p_plus) + n_plus, ro.signal(p_minus) + n_minus,
                                   _metadata(spec, ens, notes, **extra))


def _warn(notes: list[str], msg: str):
    notes.append(msg)
    warnings.warn(msg, RuntimeWarning, stacklevel=3)


def _require(spec: ProtocolSpec, *kinds: ProtocolKind):
    if spec.kind not in kinds:
        raise InvalidParameterError(
            f"protocol kind {spec.kind.value!r} not valid here; expected "
            + " or ".join(k.value for k in kinds))


def _driven_populations(spec: ProtocolSpec, ens: Ensemble, drive: DriveConfig | None,
                        target: TargetSignal, times: np.ndarray, transverse: bool):
    """Ensemble-mean P0 of both readout channels under continuous driving."""
    sys = spec.system
    frame = spec.frame
    dt = rwa_step(sys, drive, target, ens.delta, ens.eps1, ens.eps2, ens.eps_t, steps_per_cycle=spec.steps_per_cycle,
                  frame=frame)
    field_period = _fundamental_period(_field_rates(drive, target, frame, sys))
    rabi = spec.rabi_for_pulses if transverse else None
    pol = spec.readout.polarization

    def work(ch: Ensemble):
        m = len(ch)
        fld = rwa_field(sys, drive, target, ch.delta, ch.eps1, ch.eps2, ch.eps_t, m,
                        frame=frame)
        A, B = stroboscopic_unitaries(fld, times, dt, m, field_period)
        if not transverse:
            p = _p0(A, pol)
            return _wsum(p, ch.weight), _wsum(1.0 - p, ch.weight)
        det = spec.system.omega0 - frame + ch.delta
        pa, pb = _pulse(spec.pulse_style, PI / 2, PI / 2, rabi, det, ch.eps1)
        A, B = su2_mul(A, B, pa, pb)
        out = []
        for phase in (-PI / 2, PI / 2):
            ra, rb = _pulse(spec.pulse_style, PI / 2, phase, rabi, det, ch.eps1)
            fa, _ = su2_mul(ra, rb, A, B)
            out.append(_wsum(_p0(fa, pol), ch.weight))
        return tuple(out)

    return _map_chunks(work, ens, spec.threads)


# ---------------------------------------------------------------------------
# Protocols


def run_rabi(spec: ProtocolSpec, ensemble) -> TimeTrace:
    """Single resonant drive from |0>; P0 versus drive duration."""
    _require(spec, ProtocolKind.RABI)
    ens = Ensemble.from_members(ensemble)
    if spec.drive is None:
        raise InvalidParameterError("Rabi requires a drive")
    drive = replace(spec.drive, omega2=0.0)
    t = spec.sampling.times
    pp, pm = _driven_populations(spec, ens, drive, NO_TARGET, t, transverse=False)
    return _finish(spec, ens, t, pp, pm, _envelope(t, spec.relaxation.t2rho), [])


def run_direct_rabi_magnetometry(spec: ProtocolSpec, ensemble) -> TimeTrace:
    """The target alone drives the bare transition."""
    _require(spec, ProtocolKind.DIRECT_RABI_MAGNETOMETRY)
    ens = Ensemble.from_members(ensemble)
    if spec.target.omega_t_rabi <= 0:
        raise InvalidParameterError("direct Rabi magnetometry requires omega_t_rabi > 0")
    t = spec.sampling.times
    pp, pm = _driven_populations(spec, ens, None, spec.target, t, transverse=False)
    return _finish(spec, ens, t, pp, pm, _envelope(t, spec.relaxation.t2rho), [])


def run_spin_lock(spec: ProtocolSpec, ensemble) -> TimeTrace:
    """π/2 preparation, continuous first drive, π/2 readout with both phases."""
    _require(spec, ProtocolKind.SPIN_LOCK)
    ens = Ensemble.from_members(ensemble)
    if spec.drive is None:
        raise InvalidParameterError("spin locking requires a drive")
    drive = replace(spec.drive, omega2=0.0)
    t = spec.sampling.times
    pp, pm = _driven_populations(spec, ens, drive, NO_TARGET, t, transverse=True)
    return _finish(spec, ens, t, pp, pm, _envelope(t, spec.relaxation.t2rho), [])


def _check_strobe(notes, period: float, omega: float, label: str):
    f = _ratio(period * omega / TWO_PI, tol=1e-6)
    if f is None or f.denominator != 1:
        _warn(notes, f"sampling period is not an integer multiple of 2π/{label}")


def run_ccdd(spec: ProtocolSpec, ensemble) -> TimeTrace:
    """Transverse CCDD without target."""
    _require(spec, ProtocolKind.CCDD)
    ens = Ensemble.from_members(ensemble)
    if spec.drive is None:
        raise InvalidParameterError("CCDD requires a drive")
    notes: list[str] = []
    if spec.drive.omega2 == 0:
        _warn(notes, "omega2 = 0: CCDD degenerates to spin locking")
    _check_strobe(notes, spec.sampling.period, spec.drive.omega1, "Ω₁")
    t = spec.sampling.times
    pp, pm = _driven_populations(spec, ens, spec.drive, NO_TARGET, t, transverse=True)
    return _finish(spec, ens, t, pp, pm, _envelope(t, spec.relaxation.t2rho), notes)


def resonance_mismatch(spec: ProtocolSpec) -> float:
    """``ω_t - (ω₀ - Ω₂)`` in rad/s."""
    return spec.target.carrier_for(spec.system) - (spec.system.omega0 - spec.drive.omega2)


def run_ccdd_magnetometry(spec: ProtocolSpec, ensemble) -> TimeTrace:
    """Transverse CCDD with the target near the low-attenuation resonance."""
    _require(spec, ProtocolKind.CCDD_MAGNETOMETRY)
    ens = Ensemble.from_members(ensemble)
    if spec.drive is None or spec.drive.omega2 <= 0:
        raise InvalidParameterError("CCDD magnetometry requires both drives")
    notes: list[str] = []
    mismatch = resonance_mismatch(spec)
    if abs(mismatch) > spec.drive.omega2 / 2:
        _warn(notes, "target violates the resonance ω_t = ω₀ - Ω₂ by more than Ω₂/2")
    _check_strobe(notes, TWO_PI / spec.drive.omega2, spec.drive.omega1, "Ω₁ for the Ω₂ period")
    _check_strobe(notes, spec.sampling.period, spec.drive.omega2, "Ω₂")
    t = spec.sampling.times
    pp, pm = _driven_populations(spec, ens, spec.drive, spec.target, t, transverse=True)
    return _finish(spec, ens, t, pp, pm, _envelope(t, spec.relaxation.t2rho), notes,
                   resonance_mismatch_rad_s=mismatch)


def _free_populations(spec: ProtocolSpec, ens: Ensemble, times: np.ndarray, echo: bool):
    rabi = spec.rabi_for_pulses
    pol = spec.readout.polarization
    style = spec.pulse_style

    def work(ch: Ensemble):
        det = _member_detuning(spec, ch)
        pa, pb = _pulse(style, PI / 2, PI / 2, rabi, det, ch.eps1)
        # free precession for the total time t, split in two halves around the π pulse
        arm = times[:, None] / (2.0 if echo else 1.0)
        fa = np.exp(-0.5j * det[None, :] * arm)
        fb = np.zeros_like(fa)
        A, B = su2_mul(fa, fb, pa, pb)
        if echo:
            xa, xb = _pulse(style, PI, 0.0, rabi, det, ch.eps1)
            A, B = su2_mul(xa, xb, A, B)
            A, B = su2_mul(fa, fb, A, B)
        out = []
        for phase in (-PI / 2, PI / 2):
            ra, rb = _pulse(style, PI / 2, phase, rabi, det, ch.eps1)
            a, _ = su2_mul(ra, rb, A, B)
            out.append(_wsum(_p0(a, pol), ch.weight))
        return tuple(out)

    return _map_chunks(work, ens, spec.threads)


def run_ramsey(spec: ProtocolSpec, ensemble) -> TimeTrace:
    """π/2 - free precession t - π/2(±)."""
    _require(spec, ProtocolKind.RAMSEY)
    ens = Ensemble.from_members(ensemble)
    t = spec.sampling.times
    pp, pm = _free_populations(spec, ens, t, echo=False)
    return _finish(spec, ens, t, pp, pm, _envelope(t, spec.relaxation.t2rho), [])


def run_hahn_echo(spec: ProtocolSpec, ensemble) -> TimeTrace:
    """π/2 - t/2 - π_x - t/2 - π/2(±); ``t`` is the total free-evolution time."""
    _require(spec, ProtocolKind.HAHN_ECHO)
    ens = Ensemble.from_members(ensemble)
    t = spec.sampling.times
    pp, pm = _free_populations(spec, ens, t, echo=True)
    return _finish(spec, ens, t, pp, pm, _envelope(t, spec.relaxation.t2rho), [])


def run_t1(spec: ProtocolSpec, ensemble) -> TimeTrace:
    """Initialise, wait, read P0; the second channel inverts before readout."""
    _require(spec, ProtocolKind.T1)
    ens = Ensemble.from_members(ensemble)
    t = spec.sampling.times
    p = np.full(t.size, spec.readout.polarization)
    return _finish(spec, ens, t, p, 1.0 - p, _envelope(t, spec.relaxation.t1), [])


def run_odmr(spec: ProtocolSpec, ensemble, freq_grid) -> Spectrum:
    """Population left in |0> after a π pulse at each carrier frequency.

    The signal is ``baseline + contrast · (P0 - 1)`` so resonances appear as dips.
    """
    _require(spec, ProtocolKind.ODMR)
    ens = Ensemble.from_members(ensemble)
    freqs = np.asarray(freq_grid, dtype=float).reshape(-1)
    if freqs.size == 0 or not np.all(np.isfinite(freqs)):
        raise InvalidParameterError("freq_grid must be non-empty and finite")
    rabi = spec.rabi_for_pulses
    pol = spec.readout.polarization
    style = spec.pulse_style

    def work(ch: Ensemble):
        det = spec.system.omega0 + ch.delta[None, :] - TWO_PI * freqs[:, None]
        a, _ = _pulse(style, PI, 0.0, rabi, det, ch.eps1[None, :])
        return (_wsum(_p0(a, pol), ch.weight),)

    (p0,) = _map_chunks(work, ens, spec.threads)
    ro = spec.readout
    return Spectrum(freqs, ro.baseline + ro.contrast * (p0 - 1.0),
                    _metadata(spec, ens, []))


RUNNERS = {
    ProtocolKind.RABI: run_rabi,
    ProtocolKind.RAMSEY: run_ramsey,
    ProtocolKind.HAHN_ECHO: run_hahn_echo,
    ProtocolKind.T1: run_t1,
    ProtocolKind.SPIN_LOCK: run_spin_lock,
    ProtocolKind.CCDD: run_ccdd,
    ProtocolKind.CCDD_MAGNETOMETRY: run_ccdd_magnetometry,
    ProtocolKind.DIRECT_RABI_MAGNETOMETRY: run_direct_rabi_magnetometry,
}


def run_protocol(spec: ProtocolSpec, ensemble) -> TimeTrace:
    try:
        runner = RUNNERS[spec.kind]
    except KeyError:
        raise InvalidParameterError(f"{spec.kind.value} does not produce a time trace") from None
    return runner(spec, ensemble)


def _single_time_spec(spec: ProtocolSpec, tau: float) -> ProtocolSpec:
    # two samples (0, τ) keep the stroboscopic shortcut available
    return replace(spec, sampling=Sampling(tau, 2), readout=replace(spec.readout,
                                                                    noise_std_per_shot=0.0))


def measure_response_curve(spec: ProtocolSpec, ensemble, tau_fixed: float,
                           amplitude_grid) -> ResponseCurve:
    """Differential signal at fixed interaction time versus target Rabi frequency."""
    if not (math.isfinite(tau_fixed) and tau_fixed > 0):
        raise InvalidParameterError("tau_fixed must be > 0")
    amps = np.asarray(amplitude_grid, dtype=float).reshape(-1)
    if amps.size == 0 or not np.all(np.isfinite(amps)) or np.any(amps < 0):
        raise InvalidParameterError("amplitude_grid must be finite and >= 0")
    ens = Ensemble.from_members(ensemble)
    base = _single_time_spec(spec, tau_fixed)
    out = np.empty(amps.size)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for i, amp in enumerate(amps):
            s = replace(base, target=replace(spec.target, omega_t_rabi=float(amp)))
            out[i] = run_protocol(s, ens).differential[1]
    meta = _metadata(spec, ens, [], tau_s=tau_fixed)
    return ResponseCurve(amps, out, tau_fixed, meta)


def repeated_measurement(spec: ProtocolSpec, ensemble, tau_fixed: float,
                         amplitude_fixed: float, n_reps: int, seed: int) -> np.ndarray:
    """``n_reps`` noisy differential readings at fixed τ and target amplitude."""
    if n_reps < 2:
        raise InvalidParameterError("n_reps must be >= 2")
    curve = measure_response_curve(spec, ensemble, tau_fixed, [amplitude_fixed])
    s0 = curve.signal[0]
    std = spec.readout.noise_std
    if std == 0:
        return np.full(n_reps, s0)
    raw = np.random.Philox(key=int(seed)).random_raw((n_reps, 2))
    z = ndtri(((raw >> np.uint64(11)).astype(float) + 0.5) * 2.0 ** -53)
    return s0 + std * (z[:, 0] - z[:, 1])
