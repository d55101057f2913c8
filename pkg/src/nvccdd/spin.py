"""Two-level propagation under the two-drive CCDD Hamiltonian.

Conventions used throughout the package:

* ħ = 1 and every Hamiltonian is written as ``H = a0 I + (ax σx + ay σy + az σz) / 2``
  so that the Rabi frequency of a resonant drive equals ``|a|``.
* A lab-frame field term ``g(t) cos(ω_c t + θ) σx`` appears in the frame rotating
  at the carrier ω_c (after the RWA) as ``g (cos θ σx + sin θ σy) / 2``. Drive phase
  0 is therefore the +x axis of the Bloch sphere and phase π/2 is +y.
* States in the rotating frame map back to the lab through
  ``ψ_lab(t) = exp(-i ω_c t σz / 2) ψ_rot(t)``; global phases are kept.

SU(2) elements are carried in Cayley-Klein form ``U = [[a, -b*], [b, a*]]`` so an
ensemble of unitaries is just a pair of complex arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from nvccdd.errors import InvalidParameterError

TWO_PI = 2.0 * math.pi

# Gauss-Legendre nodes/weights of the fourth-order commutator-free Magnus step.
_SQ3_6 = math.sqrt(3.0) / 6.0
_NODE1, _NODE2 = 0.5 - _SQ3_6, 0.5 + _SQ3_6
_W1, _W2 = 0.25 - _SQ3_6, 0.25 + _SQ3_6

# Upper bound on complex elements materialised per batch of step unitaries.
_BATCH_ELEMENTS = 1 << 20


@dataclass(frozen=True)
class SpinState:
    """Normalized two-component state ``c0|0> + c1|1>``."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(2)
        if not np.all(np.isfinite(amps)):
            raise InvalidParameterError("state amplitudes must be finite")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > 1e-10:
            raise InvalidParameterError(f"state is not normalized (norm² = {norm!r})")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def ground(cls) -> "SpinState":
        return cls(np.array([1.0, 0.0], dtype=complex))

    @classmethod
    def excited(cls) -> "SpinState":
        return cls(np.array([0.0, 1.0], dtype=complex))

    @classmethod
    def normalized(cls, c0: complex, c1: complex) -> "SpinState":
        amps = np.array([c0, c1], dtype=complex)
        return cls(amps / np.linalg.norm(amps))

    @classmethod
    def from_bloch(cls, theta: float, phi: float) -> "SpinState":
        """State with Bloch vector (sinθ cosφ, sinθ sinφ, cosθ)."""
        return cls(np.array([math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2)]))

    @property
    def c0(self) -> complex:
        return complex(self.amplitudes[0])

    @property
    def c1(self) -> complex:
        return complex(self.amplitudes[1])

    def bloch(self) -> np.ndarray:
        c0, c1 = self.amplitudes
        x = 2.0 * (np.conj(c0) * c1).real
        y = 2.0 * (np.conj(c0) * c1).imag
        z = abs(c0) ** 2 - abs(c1) ** 2
        return np.array([x, y, z])


@dataclass(frozen=True)
class PauliCoefficients:
    """``H = a0 I + (ax σx + ay σy + az σz) / 2`` in rad/s."""

    ax: float = 0.0
    ay: float = 0.0
    az: float = 0.0
    a0: float = 0.0


@dataclass(frozen=True)
class SystemParams:
    omega0: float  # transition angular frequency, rad/s

    def __post_init__(self):
        if not (math.isfinite(self.omega0) and self.omega0 > 0):
            raise InvalidParameterError("omega0 must be a positive finite angular frequency")


@dataclass(frozen=True)
class DriveConfig:
    """The two CCDD drives.

    ``omega1``/``omega2`` are the Rabi frequencies of the first and second drive,
    ``omega1_mod`` the modulation frequency of the second drive (defaults to
    ``omega1``), ``carrier`` the common carrier (defaults to the system's omega0)
    and ``phase`` a common phase offset of both drives.
    """

    omega1: float
    omega2: float = 0.0
    omega1_mod: float | None = None
    eps1: float = 0.0
    eps2: float = 0.0
    carrier: float | None = None
    phase: float = 0.0

    def __post_init__(self):
        vals = [self.omega1, self.omega2, self.eps1, self.eps2, self.phase]
        vals += [v for v in (self.omega1_mod, self.carrier) if v is not None]
        if not all(math.isfinite(v) for v in vals):
            raise InvalidParameterError("drive parameters must be finite")
        if self.omega1 <= 0:
            raise InvalidParameterError("omega1 must be > 0")
        if self.omega2 < 0:
            raise InvalidParameterError("omega2 must be >= 0")
        if self.omega1_mod is None:
            object.__setattr__(self, "omega1_mod", self.omega1)

    def carrier_for(self, sys: SystemParams) -> float:
        return sys.omega0 if self.carrier is None else self.carrier


@dataclass(frozen=True)
class TargetSignal:
    """The microwave field to be sensed.

    ``omega_t_carrier`` defaults to omega0. With the phase convention above,
    ``xi = π/2`` puts the target in quadrature with the first drive, which is the
    orientation that the transverse CCDD readout is sensitive to.
    """

    omega_t_rabi: float = 0.0
    omega_t_carrier: float | None = None
    xi: float = math.pi / 2
    eps_t: float = 0.0

    def __post_init__(self):
        vals = [self.omega_t_rabi, self.xi, self.eps_t]
        if self.omega_t_carrier is not None:
            vals.append(self.omega_t_carrier)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidParameterError("target parameters must be finite")
        if self.omega_t_rabi < 0:
            raise InvalidParameterError("omega_t_rabi must be >= 0")

    def carrier_for(self, sys: SystemParams) -> float:
        return sys.omega0 if self.omega_t_carrier is None else self.omega_t_carrier


NO_TARGET = TargetSignal()


# ---------------------------------------------------------------------------
# SU(2) kernels


def su2_exp(ax, ay, az, dt):
    """Cayley-Klein parameters of ``exp(-i dt (a·σ)/2)``, elementwise."""
    ax, ay, az = np.broadcast_arrays(
        np.asarray(ax, float), np.asarray(ay, float), np.asarray(az, float)
    )
    half = 0.5 * dt
    theta = np.sqrt(ax * ax + ay * ay + az * az) * half
    c = np.cos(theta)
    # sin(θ)/|a| without the 0/0 at a = 0
    s = half * np.sinc(theta / math.pi)
    return c - 1j * s * az, s * (ay - 1j * ax)


def su2_mul(a2, b2, a1, b1):
    """Product ``U2 @ U1`` of Cayley-Klein pairs."""
    return a2 * a1 - np.conj(b2) * b1, b2 * a1 + np.conj(a2) * b1


def su2_apply(a, b, psi0):
    """Apply ``[[a, -b*], [b, a*]]`` to a state given as a length-2 array."""
    c0, c1 = psi0[0], psi0[1]
    return a * c0 - np.conj(b) * c1, b * c0 + np.conj(a) * c1


def su2_reduce(a, b):
    """Time-ordered product along the last axis (index 0 acts first)."""
    while a.shape[-1] > 1:
        if a.shape[-1] % 2:
            pad = [(0, 0)] * (a.ndim - 1) + [(0, 1)]
            a = np.pad(a, pad, constant_values=1.0)
            b = np.pad(b, pad, constant_values=0.0)
        a, b = su2_mul(a[..., 1::2], b[..., 1::2], a[..., 0::2], b[..., 0::2])
    return a[..., 0], b[..., 0]


def su2_step(h: PauliCoefficients, dt: float, psi: SpinState) -> SpinState:
    """Exact propagation of ``psi`` for ``dt`` under the constant Hamiltonian ``h``."""
    vals = (h.ax, h.ay, h.az, h.a0, dt)
    if not all(math.isfinite(v) for v in vals):
        raise InvalidParameterError("su2_step requires finite inputs")
    if dt < 0:
        raise InvalidParameterError("dt must be >= 0")
    a, b = su2_exp(h.ax, h.ay, h.az, dt)
    c0, c1 = su2_apply(complex(a), complex(b), psi.amplitudes)
    phase = np.exp(-1j * h.a0 * dt)
    out = np.array([c0, c1]) * phase
    # the closed form is unitary to rounding; renormalise only the last ulp
    return SpinState(out / np.linalg.norm(out))


# ---------------------------------------------------------------------------
# Piecewise propagation

FieldFn = Callable[[np.ndarray], tuple]


def _check_grid(t_grid) -> np.ndarray:
    t = np.asarray(t_grid, dtype=float).reshape(-1)
    if t.size == 0:
        raise InvalidParameterError("t_grid must not be empty")
    if not np.all(np.isfinite(t)):
        raise InvalidParameterError("t_grid must be finite")
    if t[0] != 0.0:
        raise InvalidParameterError("t_grid must start at 0")
    if np.any(np.diff(t) < 0):
        raise InvalidParameterError("t_grid must be sorted ascending")
    return t


def _block_unitaries(field: FieldFn, starts: np.ndarray, dt: float, n_sub: int, n_members: int):
    """Unitaries of ``len(starts)`` intervals each made of ``n_sub`` CF4 steps."""
    t0 = starts[:, None] + dt * np.arange(n_sub)[None, :]
    h1 = [np.broadcast_to(v, (n_members,) + t0.shape) for v in field(t0 + _NODE1 * dt)]
    h2 = [np.broadcast_to(v, (n_members,) + t0.shape) for v in field(t0 + _NODE2 * dt)]
    first = [_W2 * p + _W1 * q for p, q in zip(h1, h2)]
    second = [_W1 * p + _W2 * q for p, q in zip(h1, h2)]
    a1, b1 = su2_exp(*first, dt)
    a2, b2 = su2_exp(*second, dt)
    a, b = su2_mul(a2, b2, a1, b1)
    return su2_reduce(a, b)


def evolve(field: FieldFn, t_grid, dt_max: float, n_members: int = 1):
    """Cumulative unitaries ``U(t_k, 0)`` for a time-dependent field.

    ``field(t)`` receives a 2-D array of times and must return ``(ax, ay, az)``
    broadcastable to ``(n_members,) + t.shape``. Each sample interval is split into
    the smallest integer number of equal steps not longer than ``dt_max``; each
    step is a fourth-order commutator-free Magnus product of two exact SU(2)
    exponentials with the field sampled at the Gauss-Legendre nodes.

    Returns Cayley-Klein arrays of shape ``(len(t_grid), n_members)``.
    """
    t = _check_grid(t_grid)
    A = np.ones((t.size, n_members), dtype=complex)
    B = np.zeros((t.size, n_members), dtype=complex)
    acc_a = np.ones(n_members, dtype=complex)
    acc_b = np.zeros(n_members, dtype=complex)
    widths = np.diff(t)
    if not math.isfinite(dt_max):
        n_sub = np.ones(widths.size, dtype=int)
    else:
        n_sub = np.maximum(1, np.ceil(widths / dt_max * (1 - 1e-12)).astype(int))
    k = 0
    while k < widths.size:
        w, n = widths[k], n_sub[k]
        if w == 0.0:
            A[k + 1], B[k + 1] = acc_a, acc_b
            k += 1
            continue
        # batch consecutive intervals sharing width and step count
        per_interval = n * n_members
        batch = max(1, _BATCH_ELEMENTS // per_interval)
        j = k + 1
        while j < widths.size and j - k < batch and widths[j] == w and n_sub[j] == n:
            j += 1
        dt = w / n
        if per_interval <= _BATCH_ELEMENTS:
            ia, ib = _block_unitaries(field, t[k:j], dt, n, n_members)
        else:
            # a single long interval, split into sub-blocks
            chunk = max(1, _BATCH_ELEMENTS // n_members)
            ia = np.ones((n_members, 1), dtype=complex)
            ib = np.zeros((n_members, 1), dtype=complex)
            done = 0
            while done < n:
                m = min(chunk, n - done)
                start = np.array([t[k] + done * dt])
                ca, cb = _block_unitaries(field, start, dt, m, n_members)
                ia, ib = su2_mul(ca, cb, ia, ib)
                done += m
            j = k + 1
        for col in range(j - k):
            acc_a, acc_b = su2_mul(ia[:, col], ib[:, col], acc_a, acc_b)
            A[k + 1 + col], B[k + 1 + col] = acc_a, acc_b
        k = j
    return A, B


def _member_arrays(n_members: int, **values):
    out = {}
    for name, v in values.items():
        arr = np.broadcast_to(np.asarray(v, dtype=float), (n_members,))
        if not np.all(np.isfinite(arr)):
            raise InvalidParameterError(f"{name} must be finite")
        out[name] = arr.reshape(n_members, 1, 1)
    return out


def lab_field(sys: SystemParams, drive: DriveConfig | None, target: TargetSignal,
              delta, eps1=0.0, eps2=0.0, eps_t=0.0, n_members: int = 1) -> FieldFn:
    """Lab-frame field of the full two-drive Hamiltonian plus target."""
    p = _member_arrays(n_members, delta=delta, eps1=eps1, eps2=eps2, eps_t=eps_t)
    w0 = sys.omega0
    omt = target.omega_t_rabi
    wt = target.carrier_for(sys)

    def field(t):
        f = omt * (1 + p["eps_t"]) * np.cos(wt * t + target.xi)
        if drive is not None:
            wc = drive.carrier_for(sys)
            f = f + drive.omega1 * (1 + drive.eps1 + p["eps1"]) * np.cos(wc * t + drive.phase)
            if drive.omega2 > 0:
                f = f + (2 * drive.omega2 * (1 + drive.eps2 + p["eps2"])
                         * np.sin(wc * t + drive.phase) * np.cos(drive.omega1_mod * t))
        return 2 * f, 0.0, w0 + p["delta"]

    return field


def rwa_field(sys: SystemParams, drive: DriveConfig | None, target: TargetSignal,
              delta, eps1=0.0, eps2=0.0, eps_t=0.0, n_members: int = 1,
              keep_counter_rotating: bool = False, frame: float | None = None) -> FieldFn:
    """Field in the frame rotating at the drive carrier (or ``frame``)."""
    if frame is None:
        frame = drive.carrier_for(sys) if drive is not None else sys.omega0
    if keep_counter_rotating:
        lab = lab_field(sys, drive, target, delta, eps1, eps2, eps_t, n_members)

        def exact(t):
            fx2, _, az = lab(t)
            return fx2 * np.cos(frame * t), -fx2 * np.sin(frame * t), az - frame

        return exact

    p = _member_arrays(n_members, delta=delta, eps1=eps1, eps2=eps2, eps_t=eps_t)
    detuning = sys.omega0 - frame
    wt = target.carrier_for(sys)

    def field(t):
        ax = np.zeros(1)
        ay = np.zeros(1)
        if drive is not None:
            o1 = drive.omega1 * (1 + drive.eps1 + p["eps1"])
            ax = ax + o1 * math.cos(drive.phase)
            ay = ay + o1 * math.sin(drive.phase)
            if drive.omega2 > 0:
                g = 2 * drive.omega2 * (1 + drive.eps2 + p["eps2"]) * np.cos(drive.omega1_mod * t)
                ax = ax + g * math.sin(drive.phase)
                ay = ay - g * math.cos(drive.phase)
        if target.omega_t_rabi > 0:
            ang = target.xi - (frame - wt) * t
            g = target.omega_t_rabi * (1 + p["eps_t"])
            ax = ax + g * np.cos(ang)
            ay = ay + g * np.sin(ang)
        return ax, ay, detuning + p["delta"]

    return field


def lab_step(sys: SystemParams, drive: DriveConfig | None, target: TargetSignal,
             steps_per_cycle: int = 20) -> float:
    if steps_per_cycle < 20:
        raise InvalidParameterError("steps_per_cycle must be >= 20 in the lab frame")
    nu = max(sys.omega0, target.carrier_for(sys), drive.carrier_for(sys) if drive else 0.0)
    return TWO_PI / nu / steps_per_cycle


def rwa_step(sys: SystemParams, drive: DriveConfig | None, target: TargetSignal,
             delta=0.0, eps1=0.0, eps2=0.0, eps_t=0.0, steps_per_cycle: int = 50,
             keep_counter_rotating: bool = False, frame: float | None = None) -> float:
    """Step length resolving the fastest frequency retained in the rotating frame.

    Member parameters may be arrays; the bound is taken over all of them so the
    step does not depend on how an ensemble is later partitioned.
    """
    if steps_per_cycle < 1:
        raise InvalidParameterError("steps_per_cycle must be >= 1")
    if frame is None:
        frame = drive.carrier_for(sys) if drive is not None else sys.omega0
    e1 = float(np.max(np.abs(eps1), initial=0.0))
    e2 = float(np.max(np.abs(eps2), initial=0.0))
    et = float(np.max(np.abs(eps_t), initial=0.0))
    dmax = float(np.max(np.abs(sys.omega0 - frame + np.asarray(delta, float)), initial=0.0))
    rates = [dmax]
    amp = dmax
    if drive is not None:
        amp += drive.omega1 * (1 + abs(drive.eps1) + e1)
        amp += 2 * drive.omega2 * (1 + abs(drive.eps2) + e2)
        if drive.omega2 > 0:
            rates.append(drive.omega1_mod)
    if target.omega_t_rabi > 0:
        amp += target.omega_t_rabi * (1 + et)
        rates.append(abs(frame - target.carrier_for(sys)))
    rates.append(amp)
    if keep_counter_rotating:
        wc = drive.carrier_for(sys) if drive is not None else 0.0
        rates.append(frame + wc + (drive.omega1_mod if drive is not None else 0.0))
        if target.omega_t_rabi > 0:
            rates.append(frame + target.carrier_for(sys))
    nu = max(rates)
    if nu == 0:
        return math.inf
    return TWO_PI / nu / steps_per_cycle


def _states(A, B, psi0: SpinState) -> list[SpinState]:
    c0, c1 = su2_apply(A[:, 0], B[:, 0], psi0.amplitudes)
    out = []
    for x, y in zip(c0, c1):
        v = np.array([x, y])
        out.append(SpinState(v / np.linalg.norm(v)))
    return out


def propagate_lab(sys: SystemParams, drive: DriveConfig | None, target: TargetSignal | None,
                  delta: float, psi0: SpinState, t_grid: Sequence[float],
                  steps_per_cycle: int = 20) -> list[SpinState]:
    """Integrate the full lab-frame Hamiltonian; the reference path for the RWA."""
    target = target or NO_TARGET
    dt = lab_step(sys, drive, target, steps_per_cycle)
    A, B = evolve(lab_field(sys, drive, target, delta), t_grid, dt)
    return _states(A, B, psi0)


def propagate_rwa(sys: SystemParams, drive: DriveConfig | None, target: TargetSignal | None,
                  delta: float, psi0: SpinState, t_grid: Sequence[float],
                  keep_counter_rotating: bool = False,
                  steps_per_cycle: int = 50) -> list[SpinState]:
    """Propagate in the frame rotating at the first-drive carrier.

    With ``keep_counter_rotating`` the frame change is exact; otherwise terms at
    twice the carrier are dropped. Returned states are rotating-frame states (see
    :func:`to_lab_frame`).
    """
    target = target or NO_TARGET
    dt = rwa_step(sys, drive, target, delta, steps_per_cycle=steps_per_cycle,
                  keep_counter_rotating=keep_counter_rotating)
    A, B = evolve(rwa_field(sys, drive, target, delta,
                            keep_counter_rotating=keep_counter_rotating), t_grid, dt)
    return _states(A, B, psi0)


def to_lab_frame(psi: SpinState, t: float, carrier: float) -> SpinState:
    ph = np.exp(-0.5j * carrier * t)
    c0, c1 = psi.amplitudes
    return SpinState(np.array([c0 * ph, c1 * np.conj(ph)]))


def population(psi: SpinState, level: int) -> float:
    if level not in (0, 1):
        raise InvalidParameterError("level must be 0 or 1")
    return float(abs(psi.amplitudes[level]) ** 2)


def fidelity(psi: SpinState, phi: SpinState) -> float:
    return float(abs(np.vdot(psi.amplitudes, phi.amplitudes)) ** 2)
