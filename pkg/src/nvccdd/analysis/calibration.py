"""Signal-to-field calibration of CCDD magnetometry.

Two sweeps are combined: the slow-oscillation frequency ``f' = Ω_t'/2π`` versus
source amplitude ``V`` gives ``f' = a V``; the differential signal at fixed
interaction time gives ``S = R V + S0`` in its linear region. With
``Ω_t' = Ω_t / 2 = π γ_e B`` this yields ``B = 2 a (S - S0) / (γ_e R)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from nvccdd.errors import InvalidParameterError

GAMMA_E = 28.024e9  # Hz/T

# largest relative departure of the local slope from the central one inside the linear region
LINEAR_TOLERANCE = 0.10


@dataclass(frozen=True)
class CalibrationResult:
    a: float  # Hz per unit of source amplitude (volts in the experiment)
    a_sigma: float
    R: float  # per unit of source amplitude
    R_sigma: float
    S0: float  # response offset
    linear_region: tuple[float, float]  # source amplitudes
    gamma_e: float = GAMMA_E

    @property
    def signal_range(self) -> tuple[float, float]:
        lo, hi = (self.R * v + self.S0 for v in self.linear_region)
        return (min(lo, hi), max(lo, hi))

    def field_per_volt(self) -> float:
        return 2.0 * self.a / self.gamma_e

    def as_dict(self, amplitude_unit: str = "V") -> dict:
        return {"amplitude_unit": amplitude_unit, "a_hz_per_unit": self.a, "a_sigma": self.a_sigma,
                "R_per_unit": self.R, "R_sigma": self.R_sigma, "S0": self.S0,
                "linear_region": list(self.linear_region), "gamma_e_hz_per_t": self.gamma_e}


def _pairs(data, name) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidParameterError(f"{name} must be a sequence of (amplitude, value) pairs")
    if arr.shape[0] < 3:
        raise InvalidParameterError(f"{name} needs at least 3 points")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError(f"{name} must be finite")
    order = np.argsort(arr[:, 0], kind="stable")
    return arr[order, 0], arr[order, 1]


def _proportional_fit(x, y) -> tuple[float, float]:
    """Slope of ``y = a x`` and its standard error."""
    sxx = float(x @ x)
    if sxx == 0:
        raise InvalidParameterError("amplitudes must not all be zero")
    a = float(x @ y) / sxx
    r = y - a * x
    dof = max(1, x.size - 1)
    return a, math.sqrt(float(r @ r) / dof / sxx)


def linear_region(x, y, tolerance: float = LINEAR_TOLERANCE) -> tuple[int, int]:
    """Index range ``[i, j]`` of the maximal contiguous run around the centre of
    the sweep where the local slope stays within ``tolerance`` of the central slope."""
    slope = np.gradient(y, x)
    c = x.size // 2
    ref = slope[c]
    if ref == 0:
        raise InvalidParameterError("response has zero slope at the centre of the sweep")
    ok = np.abs(slope - ref) <= tolerance * abs(ref)
    i = j = c
    while i > 0 and ok[i - 1]:
        i -= 1
    while j < x.size - 1 and ok[j + 1]:
        j += 1
    return i, j


def calibrate(freq_vs_amp, response_curve) -> CalibrationResult:
    """Fit ``a`` from ``(V, f')`` pairs and ``R, S0`` from ``(V, S)`` pairs."""
    va, fa = _pairs(freq_vs_amp, "freq_vs_amp")
    vr, sr = _pairs(response_curve, "response_curve")
    if np.ptp(fa) == 0 or np.ptp(sr) == 0:
        raise InvalidParameterError("degenerate (constant) calibration data")
    if np.ptp(vr) == 0 or np.any(np.diff(vr) == 0):
        raise InvalidParameterError("response amplitudes must be distinct")
    a, a_sig = _proportional_fit(va, fa)
    i, j = linear_region(vr, sr)
    if j - i + 1 < 3:
        # too few points for a fit with uncertainty; fall back to the central triple
        c = vr.size // 2
        i, j = max(0, c - 1), min(vr.size - 1, c + 1)
    x, y = vr[i:j + 1], sr[i:j + 1]
    X = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    R, S0 = float(coef[0]), float(coef[1])
    r = y - X @ coef
    dof = max(1, x.size - 2)
    cov = np.linalg.pinv(X.T @ X) * float(r @ r) / dof
    if a <= 0:
        raise InvalidParameterError("frequency-versus-amplitude slope must be positive")
    return CalibrationResult(a, a_sig, R, math.sqrt(max(cov[0, 0], 0.0)), S0,
                             (float(x[0]), float(x[-1])))


@dataclass(frozen=True)
class FieldEstimate:
    value: float  # tesla
    extrapolated: bool


def signal_to_field(S, cal: CalibrationResult) -> FieldEstimate:
    """``B = 2a (S - S0) / (γ_e R)``; flags signals outside the linear region."""
    S = float(S)
    if not math.isfinite(S):
        raise InvalidParameterError("signal must be finite")
    lo, hi = cal.signal_range
    extrap = not (lo <= S <= hi)
    if extrap:
        warnings.warn("signal outside the calibrated linear region", RuntimeWarning,
                      stacklevel=2)
    B = 2.0 * cal.a * (S - cal.S0) / (cal.gamma_e * cal.R)
    return FieldEstimate(B, extrap)


def field_to_rabi(B: float, gamma_e: float = GAMMA_E) -> float:
    """Target Rabi frequency (rad/s) of a field amplitude ``B`` (T)."""
    return 2.0 * math.pi * gamma_e * B
