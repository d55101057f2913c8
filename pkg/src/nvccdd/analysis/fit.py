"""Nonlinear least-squares fits of the trace and spectrum models.

Every model carries an analytic Jacobian. The optimiser is scipy's bounded
trust-region reflective solver, run from one or more automatically generated
starting points; the start with the lowest residual wins (ties by start order).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import hilbert

from nvccdd.analysis.spectra import dominant_frequency, spectral_peaks
from nvccdd.errors import InvalidParameterError

MAX_NFEV = 500
INF = math.inf


@dataclass(frozen=True)
class FitModel:
    """A parametric model ``y = f(x; θ)`` with its Jacobian and bounds.

    ``fixed`` maps parameter names to values held constant during the fit.
    ``guess(x, y)`` returns a list of candidate full parameter vectors.
    """

    kind: str
    names: tuple[str, ...]
    units: tuple[str, ...]
    func: Callable
    jac: Callable
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    guess: Callable
    fixed: dict = field(default_factory=dict)
    periodic: tuple[str, ...] = ()
    angular: tuple[str, ...] = ()  # frequencies capped at the sampling Nyquist limit

    def __post_init__(self):
        k = len(self.names)
        if not (len(self.units) == len(self.lower) == len(self.upper) == k):
            raise InvalidParameterError("model parameter metadata lengths differ")
        unknown = set(self.fixed) - set(self.names)
        if unknown:
            raise InvalidParameterError(f"unknown fixed parameters {sorted(unknown)}")

    @property
    def free(self) -> list[int]:
        return [i for i, n in enumerate(self.names) if n not in self.fixed]

    def with_fixed(self, **values) -> "FitModel":
        return replace(self, fixed={**self.fixed, **values})

    def __call__(self, x, params) -> np.ndarray:
        return self.func(np.asarray(x, float), np.asarray(params, float))


@dataclass(frozen=True)
class FitResult:
    model: str
    names: tuple[str, ...]
    units: tuple[str, ...]
    values: np.ndarray
    sigmas: np.ndarray
    residual_rms: float
    converged: bool
    message: str = ""
    nfev: int = 0

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def sigma(self, name: str) -> float:
        return float(self.sigmas[self.names.index(name)])

    def as_dict(self) -> dict:
        return {
            "model": self.model,
            "converged": self.converged,
            "residual_rms": self.residual_rms,
            "message": self.message,
            "parameters": [
                {"name": n, "value": float(v), "sigma": float(s), "unit": u}
                for n, v, s, u in zip(self.names, self.values, self.sigmas, self.units)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# Shared pieces


def _stretch(t, T, p):
    """``E = exp(-(t/T)^p)`` with its derivatives in T and p."""
    r = np.abs(t) / T
    u = r ** p
    E = np.exp(-u)
    with np.errstate(divide="ignore", invalid="ignore"):
        ulog = np.where(r > 0, u * np.log(np.where(r > 0, r, 1.0)), 0.0)
    return E, E * p * u / T, -E * ulog


def _wrap(phi):
    return (phi + math.pi) % (2 * math.pi) - math.pi


def _envelope_time(t, y, p=1.0):
    """1/e time from a log-linear regression of the analytic-signal envelope."""
    env = np.abs(hilbert(y - np.mean(y) if y.size > 3 else y))
    ok = env > 0.1 * env.max()
    if ok.sum() < 3 or env.max() == 0:
        return (t[-1] - t[0]) / 2 or 1.0
    # exclude edges, where the Hilbert envelope is biased
    idx = np.flatnonzero(ok)
    idx = idx[(idx > 1) & (idx < t.size - 2)] if idx.size > 6 else idx
    tt, le = t[idx], np.log(env[idx])
    x = tt ** p if p != 1 else tt
    slope = np.polyfit(x, le, 1)[0]
    span = t[-1] - t[0]
    if slope >= 0:
        return 2 * span
    return float(min((-1.0 / slope) ** (1.0 / p), 10 * span))


def _phase(t, y, omega, A=None):
    z = np.sum(y * np.exp(-1j * omega * t)[: y.size])
    return float(np.angle(z))


# ---------------------------------------------------------------------------
# Damped sinusoid, optionally on an exponential background


def damped_sinusoid(p: float | None = None, background: bool = False) -> FitModel:
    """``A exp(-(t/T)^p) cos(Ωt + φ) + C [+ B exp(-t/τ_b)]``.

    ``p`` free in [0.5, 4] when None, otherwise fixed.
    """
    names = ["A", "T", "p", "omega", "phi", "C"]
    units = ["", "s", "", "rad/s", "rad", ""]
    lower = [0.0, 0.0, 0.5, 0.0, -INF, -INF]
    upper = [INF, INF, 4.0, INF, INF, INF]
    if background:
        names += ["B", "tau_b"]
        units += ["", "s"]
        lower += [-INF, 0.0]
        upper += [INF, INF]

    def func(t, th):
        A, T, pp, w, phi, C = th[:6]
        E, _, _ = _stretch(t, T, pp)
        y = A * E * np.cos(w * t + phi) + C
        if background:
            y = y + th[6] * np.exp(-t / th[7])
        return y

    def jac(t, th):
        A, T, pp, w, phi, C = th[:6]
        E, dT, dp = _stretch(t, T, pp)
        c, s = np.cos(w * t + phi), np.sin(w * t + phi)
        cols = [E * c, A * c * dT, A * c * dp, -A * E * s * t, -A * E * s, np.ones_like(t)]
        if background:
            eb = np.exp(-t / th[7])
            cols += [eb, th[6] * eb * t / th[7] ** 2]
        return np.stack(cols, axis=1)

    def guess(t, y):
        span = t[-1] - t[0]
        p0 = 1.0 if p is None else p
        starts = []
        tail = y[-max(3, y.size // 4):]
        # a multi-component trace can put the best single tone on a weaker peak
        for w in spectral_peaks(t, y, 3):
            for C in ((y.max() + y.min()) / 2, float(np.mean(tail))):
                A = (y.max() - y.min()) / 2
                T = _envelope_time(t, y - C, p0)
                phi = _phase(t, y - C, w)
                for Tm in (1.0, 0.3, 3.0):
                    th = [A, min(T * Tm, 10 * span), p0, w, phi, C]
                    if background:
                        th += [0.0, span / 3]
                    starts.append(th)
                if background:
                    # background carries the initial offset of the trace
                    B = float(y[: max(3, y.size // 10)].mean() - C)
                    starts.append([A, T, p0, w, phi, C, B, span / 5])
        return starts

    model = FitModel("DampedSinusoid", tuple(names), tuple(units), func, jac, tuple(lower),
                     tuple(upper), guess, periodic=("phi",), angular=("omega",))
    return model if p is None else model.with_fixed(p=float(p))


# ---------------------------------------------------------------------------
# Two damped tones on a saturating background


def two_tone_ccdd(p1: float = 1.0, p2: float = 2.0) -> FitModel:
    """``Σ_n A_n exp(-(t/T_n)^{p_n}) cos(Ω_n t + φ_n) + B exp(-t/τ) + C``.

    The envelope exponents are held at ``p1`` (exponential) and ``p2`` (Gaussian).
    """
    names = ("A1", "omega1", "T1", "phi1", "A2", "omega2", "T2", "phi2", "B", "tau", "C")
    units = ("", "rad/s", "s", "rad", "", "rad/s", "s", "rad", "", "s", "")
    lower = (0.0, 0.0, 0.0, -INF, 0.0, 0.0, 0.0, -INF, -INF, 0.0, -INF)
    upper = (INF,) * 3 + (INF,) * 8

    def tone(t, A, w, T, phi, p):
        E, dT, _ = _stretch(t, T, p)
        c, s = np.cos(w * t + phi), np.sin(w * t + phi)
        return A * E * c, [E * c, -A * E * s * t, A * c * dT, -A * E * s]

    def func(t, th):
        y1, _ = tone(t, *th[0:4], p1)
        y2, _ = tone(t, *th[4:8], p2)
        return y1 + y2 + th[8] * np.exp(-t / th[9]) + th[10]

    def jac(t, th):
        _, c1 = tone(t, *th[0:4], p1)
        _, c2 = tone(t, *th[4:8], p2)
        eb = np.exp(-t / th[9])
        return np.stack(c1 + c2 + [eb, th[8] * eb * t / th[9] ** 2, np.ones_like(t)], axis=1)

    def profile(t, y, w1, T1, w2, T2, tb):
        """Best linear parameters and cost for fixed rates (variable projection)."""
        E1 = _stretch(t, T1, p1)[0]
        E2 = _stretch(t, T2, p2)[0]
        X = np.stack([E1 * np.cos(w1 * t), -E1 * np.sin(w1 * t), E2 * np.cos(w2 * t),
                      -E2 * np.sin(w2 * t), np.exp(-t / tb), np.ones_like(t)], axis=1)
        c, *_ = np.linalg.lstsq(X, y, rcond=None)
        r = X @ c - y
        A1, phi1 = math.hypot(c[0], c[1]), math.atan2(c[1], c[0])
        A2, phi2 = math.hypot(c[2], c[3]), math.atan2(c[3], c[2])
        return float(r @ r), [A1, w1, T1, phi1, A2, w2, T2, phi2, c[4], tb, c[5]]

    def guess(t, y):
        span = t[-1] - t[0]
        # the first difference suppresses the slow background in the spectrum
        w = dominant_frequency(t[:-1], np.diff(y))
        # the envelope estimate is unreliable under beating, so the times are gridded too
        Ts = span * np.array([1 / 16, 1 / 8, 1 / 4, 1 / 2, 1.0, 2.0])
        cands = []
        for tb in (span / 5, span, 5 * span):
            for d1 in (-0.02, -0.01, -0.005, 0.0, 0.005, 0.01, 0.02):
                for d2 in np.linspace(-0.05, 0.05, 21):
                    if abs(d2 - d1) < 0.002:
                        continue
                    for T1 in Ts:
                        for f2 in (0.5, 1.0, 2.0):
                            cands.append(profile(t, y, w * (1 + d1), T1, w * (1 + d2), T1 * f2, tb))
        cands.sort(key=lambda c: c[0])
        # keep the best starts of both tone orderings, which fall into separate basins
        above = [th for _, th in cands if th[5] > th[1]][:3]
        below = [th for _, th in cands if th[5] < th[1]][:3]
        return [th for _, th in cands[:3]] + above + below

    return FitModel("TwoToneCcdd", names, units, func, jac, lower, upper, guess,
                    periodic=("phi1", "phi2"), angular=("omega1", "omega2"))


# ---------------------------------------------------------------------------
# ODMR triplet


def lorentzian_triplet() -> FitModel:
    """``Σ_n A_n w_n² / ((x - f_n)² + w_n²) + offset`` with x in Hz."""
    names = ("A1", "f1", "w1", "A2", "f2", "w2", "A3", "f3", "w3", "offset")
    units = ("", "Hz", "Hz", "", "Hz", "Hz", "", "Hz", "Hz", "")
    lower = (-INF, -INF, 0.0) * 3 + (-INF,)
    upper = (INF,) * 10

    def func(x, th):
        y = np.full_like(x, th[9])
        for k in range(3):
            A, f, w = th[3 * k:3 * k + 3]
            y = y + A * w * w / ((x - f) ** 2 + w * w)
        return y

    def jac(x, th):
        cols = []
        for k in range(3):
            A, f, w = th[3 * k:3 * k + 3]
            d = x - f
            q = d * d + w * w
            cols += [w * w / q, A * w * w * 2 * d / q ** 2, A * 2 * w * d * d / q ** 2]
        cols.append(np.ones_like(x))
        return np.stack(cols, axis=1)

    def guess(x, y):
        off = float(np.median(y))
        dev = y - off
        sign = -1.0 if abs(dev.min()) >= abs(dev.max()) else 1.0
        mag = sign * dev
        span = x[-1] - x[0]
        sep = span / 12
        peaks = []
        for i in np.argsort(mag)[::-1]:
            if all(abs(x[i] - x[j]) > sep for j in peaks):
                peaks.append(i)
            if len(peaks) == 3:
                break
        while len(peaks) < 3:
            peaks.append(int(np.argmax(mag)))
        peaks.sort(key=lambda i: x[i])
        th = []
        for i in peaks:
            half = mag[i] / 2
            j = i
            while j < x.size - 1 and mag[j] > half:
                j += 1
            w = max(abs(x[j] - x[i]), abs(x[1] - x[0]))
            th += [sign * mag[i], x[i], w]
        th.append(off)
        return [th]

    return FitModel("LorentzianTriplet", names, units, func, jac, lower, upper, guess)


# ---------------------------------------------------------------------------
# Exponential families


def biexp_saturation() -> FitModel:
    """``b1 exp(-t/t1) + b2 exp(-t/t2) + c``; reported with ``t1 <= t2``."""
    names = ("b1", "t1", "b2", "t2", "c")
    units = ("", "s", "", "s", "")

    def func(t, th):
        b1, t1, b2, t2, c = th
        return b1 * np.exp(-t / t1) + b2 * np.exp(-t / t2) + c

    def jac(t, th):
        b1, t1, b2, t2, c = th
        e1, e2 = np.exp(-t / t1), np.exp(-t / t2)
        return np.stack([e1, b1 * e1 * t / t1 ** 2, e2, b2 * e2 * t / t2 ** 2,
                         np.ones_like(t)], axis=1)

    def guess(t, y):
        span = t[-1] - t[0]
        c = float(np.mean(y[-max(2, y.size // 20):]))
        d = y[0] - c
        starts = []
        for f1, f2 in ((0.02, 0.3), (0.05, 0.5), (0.01, 0.2), (0.1, 1.0)):
            for share in (0.5, 0.3, 0.7):
                starts.append([d * share, f1 * span, d * (1 - share), f2 * span, c])
        return starts

    return FitModel("BiExpSaturation", names, units, func, jac, (-INF, 0, -INF, 0, -INF),
                    (INF,) * 5, guess)


def stretched_exp(p: float | None = None) -> FitModel:
    """``A exp(-(t/T)^p) + C``."""
    names = ("A", "T", "p", "C")
    units = ("", "s", "", "")

    def func(t, th):
        A, T, pp, C = th
        return A * _stretch(t, T, pp)[0] + C

    def jac(t, th):
        A, T, pp, C = th
        E, dT, dp = _stretch(t, T, pp)
        return np.stack([E, A * dT, A * dp, np.ones_like(t)], axis=1)

    def guess(t, y):
        span = t[-1] - t[0]
        C = float(np.mean(y[-max(2, y.size // 10):]))
        A = float(y[0] - C)
        target = abs(A) / math.e
        below = np.flatnonzero(np.abs(y - C) <= target)
        T = float(t[below[0]] - t[0]) if below.size else span
        p0 = 1.0 if p is None else p
        return [[A, max(T, span / y.size), p0, C], [A, span / 3, p0, C]]

    model = FitModel("StretchedExp", names, units, func, jac, (-INF, 0.0, 0.25, -INF),
                     (INF, INF, 4.0, INF), guess)
    return model if p is None else model.with_fixed(p=float(p))


def linear() -> FitModel:
    """``slope · x + intercept``."""

    def func(x, th):
        return th[0] * x + th[1]

    def jac(x, th):
        return np.stack([x, np.ones_like(x)], axis=1)

    def guess(x, y):
        slope, icpt = np.polyfit(x, y, 1) if np.ptp(x) > 0 else (0.0, float(np.mean(y)))
        return [[float(slope), float(icpt)]]

    return FitModel("Linear", ("slope", "intercept"), ("", ""), func, jac, (-INF, -INF),
                    (INF, INF), guess)


MODELS: dict[str, Callable[[], FitModel]] = {
    "DampedSinusoid": damped_sinusoid,
    "DampedSinusoidExp": lambda: damped_sinusoid(p=1.0),
    "DampedSinusoidGauss": lambda: damped_sinusoid(p=2.0),
    "DampedSinusoidBackground": lambda: damped_sinusoid(p=1.0, background=True),
    "TwoToneCcdd": two_tone_ccdd,
    "LorentzianTriplet": lorentzian_triplet,
    "BiExpSaturation": biexp_saturation,
    "StretchedExp": stretched_exp,
    "Linear": linear,
}


def get_model(name: str) -> FitModel:
    try:
        return MODELS[name]()
    except KeyError:
        raise InvalidParameterError(f"unknown fit model {name!r}; choose from {sorted(MODELS)}") from None


# ---------------------------------------------------------------------------
# Driver


def _solve(model: FitModel, x, y, start):
    free = model.free
    full = np.array(start, dtype=float)
    for name, v in model.fixed.items():
        full[model.names.index(name)] = v
    lo = np.array(model.lower, float)
    hi = np.array(model.upper, float)
    if model.angular and x.size > 1:
        nyq = math.pi / float(np.min(np.diff(np.sort(x))) or INF)
        for name in model.angular:
            i = model.names.index(name)
            hi[i] = min(hi[i], nyq)
    lo, hi = lo[free], hi[free]
    x0 = np.clip(full[free], lo, hi)
    # nudge starts off the bounds so the interior-point solver accepts them
    span = np.where(np.isfinite(hi - lo), hi - lo, np.maximum(np.abs(x0), 1.0))
    x0 = np.where(x0 <= lo, lo + 1e-6 * span, x0)
    x0 = np.where(x0 >= hi, hi - 1e-6 * span, x0)
    scale = np.where(np.abs(x0) > 0, np.abs(x0), 1.0)

    def unpack(z):
        th = full.copy()
        th[free] = z * scale
        return th

    def resid(z):
        return model.func(x, unpack(z)) - y

    def jac(z):
        return model.jac(x, unpack(z))[:, free] * scale

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        try:
            sol = least_squares(resid, x0 / scale, jac=jac, bounds=(lo / scale, hi / scale),
                                method="trf", max_nfev=MAX_NFEV, x_scale="jac")
        except (ValueError, np.linalg.LinAlgError) as exc:
            return None, str(exc)
    return sol, unpack(sol.x)


def fit(model: FitModel, x, y, init=None) -> FitResult:
    """Fit ``model`` to samples ``(x, y)``.

    ``init`` is None (automatic multi-start), a full parameter vector, or a list
    of vectors. Failure to converge is reported in the result, never raised.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.size != y.size:
        raise InvalidParameterError("x and y must have the same length")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InvalidParameterError("data must be finite")
    k = len(model.free)
    if x.size < 3 * k:
        raise InvalidParameterError(f"need at least {3 * k} samples for {k} free parameters")
    if init is None:
        starts = model.guess(x, y)
    else:
        arr = np.asarray(init, dtype=float)
        starts = [arr] if arr.ndim == 1 else list(arr)
    best = None
    for s in starts:
        if len(s) != len(model.names) or not np.all(np.isfinite(s)):
            continue
        sol, th = _solve(model, x, y, s)
        if sol is None:
            continue
        cost = float(sol.cost) if np.isfinite(sol.cost) else INF
        if best is None or cost < best[0]:
            best = (cost, sol, th)
    names, units = model.names, model.units
    if best is None:
        nan = np.full(len(names), np.nan)
        return FitResult(model.kind, names, units, nan, nan, INF, False, "no usable start")
    cost, sol, th = best
    r = model.func(x, th) - y
    free = model.free
    dof = max(1, x.size - k)
    J = model.jac(x, th)[:, free]
    s2 = float(r @ r) / dof
    # columns differ by many decades (seconds versus rad/s), so invert the
    # column-normalised normal matrix to keep pinv from truncating directions
    norm = np.linalg.norm(J, axis=0)
    norm = np.where(norm > 0, norm, 1.0)
    Jn = J / norm
    cov = np.linalg.pinv(Jn.T @ Jn) * s2 / np.outer(norm, norm)
    sig = np.zeros(len(names))
    sig[free] = np.sqrt(np.clip(np.diag(cov), 0, None))
    th = th.copy()
    for name in model.periodic:
        i = names.index(name)
        th[i] = _wrap(th[i])
    if model.kind == "BiExpSaturation" and th[1] > th[3]:
        th = th[[2, 3, 0, 1, 4]]
        sig = sig[[2, 3, 0, 1, 4]]
    rms = float(np.sqrt(np.mean(r * r)))
    converged = bool(sol.status > 0 and np.all(np.isfinite(th)) and np.isfinite(rms))
    return FitResult(model.kind, names, units, th, sig, rms, converged, sol.message, sol.nfev)


def fit_trace(model: FitModel, trace, init=None) -> FitResult:
    """Fit the differential channel of a :class:`~nvccdd.protocols.TimeTrace`."""
    return fit(model, trace.times, trace.differential, init)
