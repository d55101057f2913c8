"""Rectangular and composite pulse programs and their error-fidelity maps.

Segments are listed in time order. A segment of Rabi frequency Ω and phase φ
generates ``H = (Ω(1+ε)(cos φ σx + sin φ σy) + (δ - detuning_frame) σz) / 2`` in
the frame rotating at the drive carrier.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from nvccdd.errors import InvalidParameterError
from nvccdd.spin import SpinState, su2_exp, su2_mul

PI = math.pi


@dataclass(frozen=True)
class PulseSegment:
    duration: float
    rabi: float
    phase: float
    detuning_frame: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.duration, self.rabi, self.phase,
                                               self.detuning_frame)):
            raise InvalidParameterError("pulse segment parameters must be finite")
        if self.duration < 0 or self.rabi < 0:
            raise InvalidParameterError("duration and rabi must be >= 0")

    @property
    def angle(self) -> float:
        return self.rabi * self.duration


@dataclass(frozen=True)
class PulseSequence:
    segments: tuple[PulseSegment, ...] = ()
    label: str = ""

    @property
    def duration(self) -> float:
        return float(sum(s.duration for s in self.segments))

    def __add__(self, other: "PulseSequence") -> "PulseSequence":
        label = "+".join(x for x in (self.label, other.label) if x)
        return PulseSequence(self.segments + other.segments, label)


@dataclass(frozen=True)
class CompositeAngles:
    """Angles of the BB1, CORPSE and CORP²SE expansions of a rotation by ``theta``."""

    theta: float
    bb1_phi1: float
    bb1_phi2: float
    corpse_beta: float
    corpse_theta1: float
    corpse_theta2: float
    corpse_theta3: float
    corp2se_alpha: float
    corp2se_theta1: float
    corp2se_theta2: float

    @classmethod
    def for_angle(cls, theta: float, n1: int = 1, n2: int = 1, n3: int = 0) -> "CompositeAngles":
        phi1 = math.acos(-theta / (4 * PI))
        beta = math.asin(0.5 * math.sin(theta / 2))
        alpha = math.cos(theta / 2)
        a2 = alpha * alpha
        return cls(
            theta=theta,
            bb1_phi1=phi1,
            bb1_phi2=3 * phi1,
            corpse_beta=beta,
            corpse_theta1=2 * PI * n1 + theta / 2 - beta,
            corpse_theta2=2 * PI * n2 - 2 * beta,
            corpse_theta3=2 * PI * n3 + theta / 2 - beta,
            corp2se_alpha=alpha,
            # the 2π-shifted branch of the middle pulse is the detuning-robust solution
            corp2se_theta1=-math.asin(math.sqrt((1 - a2) / (1 + a2))),
            corp2se_theta2=math.acos(a2) - 2 * PI,
        )


def _rotation(theta: float, phi: float, rabi: float) -> PulseSegment:
    # negative rotation angles are driven about the antipodal axis
    if theta < 0:
        theta, phi = -theta, phi + PI
    return PulseSegment(theta / rabi, rabi, phi)


def _check_rabi(rabi: float):
    if not (math.isfinite(rabi) and rabi > 0):
        raise InvalidParameterError("rabi must be > 0")


def make_rect(theta: float, phi: float, rabi: float) -> PulseSequence:
    _check_rabi(rabi)
    if not (math.isfinite(theta) and math.isfinite(phi)):
        raise InvalidParameterError("theta and phi must be finite")
    return PulseSequence((_rotation(theta, phi, rabi),), "rect")


def expand_bb1(theta: float, phi: float, rabi: float) -> PulseSequence:
    _check_rabi(rabi)
    if not 0 < theta <= 2 * PI:
        raise InvalidParameterError("BB1 requires 0 < theta <= 2π")
    ang = CompositeAngles.for_angle(theta)
    segs = (
        _rotation(PI, phi + ang.bb1_phi1, rabi),
        _rotation(2 * PI, phi + ang.bb1_phi2, rabi),
        _rotation(PI, phi + ang.bb1_phi1, rabi),
        _rotation(theta, phi, rabi),
    )
    return PulseSequence(segs, "BB1")


def expand_corpse(theta: float, phi: float, rabi: float,
                  n1: int = 1, n2: int = 1, n3: int = 0) -> PulseSequence:
    _check_rabi(rabi)
    if not 0 < theta <= 2 * PI:
        raise InvalidParameterError("CORPSE requires 0 < theta <= 2π")
    ang = CompositeAngles.for_angle(theta, n1, n2, n3)
    angles = (ang.corpse_theta1, ang.corpse_theta2, ang.corpse_theta3)
    if min(angles) < 0:
        raise InvalidParameterError(f"CORPSE angles {angles} negative for n=({n1},{n2},{n3})")
    segs = (
        _rotation(angles[0], phi, rabi),
        _rotation(angles[1], phi - PI, rabi),
        _rotation(angles[2], phi, rabi),
    )
    return PulseSequence(segs, "CORPSE")


def expand_corp2se(theta: float, phi: float, rabi: float) -> PulseSequence:
    _check_rabi(rabi)
    if not 0 < theta <= PI:
        raise InvalidParameterError("CORP2SE requires 0 < theta <= π")
    ang = CompositeAngles.for_angle(theta)
    segs = (
        _rotation(ang.corp2se_theta1, phi - 3 * PI / 4, rabi),
        _rotation(ang.corp2se_theta2, phi - PI / 4, rabi),
        _rotation(ang.corp2se_theta1, phi - 3 * PI / 4, rabi),
    )
    return PulseSequence(segs, "CORP2SE")


PULSE_STYLES = {
    "rect": make_rect,
    "BB1": expand_bb1,
    "CORPSE": expand_corpse,
    "CORP2SE": expand_corp2se,
}


def compile_rotation(style: str, theta: float, phi: float, rabi: float) -> PulseSequence:
    try:
        builder = PULSE_STYLES[style]
    except KeyError:
        raise InvalidParameterError(f"unknown pulse style {style!r}") from None
    return builder(theta, phi, rabi)


def sequence_unitary(seq: PulseSequence, delta, eps):
    """Cayley-Klein pair of the sequence; ``delta`` and ``eps`` may be arrays."""
    delta = np.asarray(delta, float)
    eps = np.asarray(eps, float)
    shape = np.broadcast_shapes(delta.shape, eps.shape)
    a = np.ones(shape, dtype=complex)
    b = np.zeros(shape, dtype=complex)
    for s in seq.segments:
        if s.duration == 0:
            continue
        amp = s.rabi * (1 + eps)
        sa, sb = su2_exp(amp * math.cos(s.phase), amp * math.sin(s.phase),
                         delta - s.detuning_frame, s.duration)
        a, b = su2_mul(sa, sb, a, b)
    return a, b


def apply_sequence(seq: PulseSequence, delta: float, eps: float) -> np.ndarray:
    """2×2 unitary of the sequence at detuning ``delta`` (rad/s) and amplitude error ``eps``."""
    if not (math.isfinite(delta) and math.isfinite(eps)):
        raise InvalidParameterError("delta and eps must be finite")
    a, b = sequence_unitary(seq, delta, eps)
    a, b = complex(a), complex(b)
    return np.array([[a, -b.conjugate()], [b, a.conjugate()]])


def ideal_state(seq: PulseSequence) -> SpinState:
    """State reached from |0> with no errors."""
    u = apply_sequence(seq, 0.0, 0.0)
    return SpinState(u[:, 0])


def gate_fidelity(u: np.ndarray, v: np.ndarray) -> float:
    return float(abs(np.trace(u.conj().T @ v)) / 2)


def state_fidelity(seq: PulseSequence, target: SpinState, delta: float, eps: float) -> float:
    u = apply_sequence(seq, delta, eps)
    return float(abs(np.vdot(target.amplitudes, u[:, 0])) ** 2)


def fidelity_map(seq: PulseSequence, target_state: SpinState | None,
                 delta_grid, eps_grid, threads: int = 1) -> np.ndarray:
    """``F[i, j] = |<target| U(delta_i, eps_j) |0>|²``.

    Rows are parallelised across ``threads``; the output is independent of it.
    """
    if target_state is None:
        target_state = ideal_state(seq)
    d = np.asarray(delta_grid, float).reshape(-1)
    e = np.asarray(eps_grid, float).reshape(-1)
    if not (np.all(np.isfinite(d)) and np.all(np.isfinite(e))):
        raise InvalidParameterError("grids must be finite")
    t0, t1 = target_state.amplitudes

    def row(delta):
        a, b = sequence_unitary(seq, delta, e)
        # U|0> = (a, b)
        return np.abs(np.conj(t0) * a + np.conj(t1) * b) ** 2

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(row, d))
    else:
        rows = [row(x) for x in d]
    return np.clip(np.array(rows).reshape(d.size, e.size), 0.0, 1.0)


def write_fidelity_csv(path, delta_grid, eps_grid, fmap):
    """Columns ``delta_hz, eps, fidelity``; ``delta_grid`` is in rad/s."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["delta_hz", "eps", "fidelity"])
        for i, d in enumerate(delta_grid):
            for j, e in enumerate(eps_grid):
                w.writerow([repr(float(d / (2 * PI))), repr(float(e)), repr(float(fmap[i, j]))])
