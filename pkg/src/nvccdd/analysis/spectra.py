"""Power spectra of uniformly sampled signals."""

from __future__ import annotations

import math

import numpy as np

from nvccdd.errors import InvalidParameterError

TWO_PI = 2.0 * math.pi


def _uniform_step(times) -> float:
    t = np.asarray(times, dtype=float).reshape(-1)
    if t.size < 2:
        raise InvalidParameterError("need at least two samples")
    d = np.diff(t)
    if not (np.all(np.isfinite(d)) and d[0] > 0 and np.allclose(d, d[0], rtol=1e-9, atol=0)):
        raise InvalidParameterError("samples must be uniformly spaced")
    return float(d[0])


def psd(times, values) -> tuple[np.ndarray, np.ndarray]:
    """One-sided periodogram of the mean-removed signal.

    Normalised so that ``sum(power) * df`` equals the (population) variance.
    Frequencies are in Hz.
    """
    dt = _uniform_step(times)
    y = np.asarray(values, dtype=float).reshape(-1)
    n = y.size
    if n != np.size(times):
        raise InvalidParameterError("times and values must have the same length")
    y = y - y.mean()
    X = np.fft.rfft(y)
    df = 1.0 / (n * dt)
    power = np.abs(X) ** 2 / (n * n * df)
    power[1:] *= 2.0
    if n % 2 == 0:
        power[-1] /= 2.0
    return np.fft.rfftfreq(n, dt), power


def spectral_peaks(times, values, count: int = 3) -> np.ndarray:
    """Angular frequencies of the ``count`` strongest spectral peaks.

    The FFT of the zero-padded signal is searched for local maxima at least
    two resolution bins apart, each refined by a parabola through the log magnitudes, and returned strongest
    first. No taper is applied: the traces of interest decay, and a taper would
    weight their tails over the early samples that carry most of the
    oscillation.
    """
    if count < 1:
        raise InvalidParameterError("count must be >= 1")
    dt = _uniform_step(times)
    y = np.asarray(values, dtype=float) - np.mean(values)
    n = 16 * y.size
    spec = np.abs(np.fft.rfft(y, n))
    inner = np.flatnonzero((spec[1:-1] >= spec[:-2]) & (spec[1:-1] > spec[2:])) + 1
    if inner.size == 0:
        inner = np.array([int(np.argmax(spec[1:])) + 1])
    # skip the sidelobes of stronger peaks (within two resolution bins)
    ks = []
    for k in inner[np.argsort(spec[inner])[::-1]]:
        if all(abs(int(k) - j) >= 2 * 16 for j in ks):
            ks.append(int(k))
        if len(ks) == count:
            break
    out = []
    for k in ks:
        kf = float(k)
        if 1 <= k < spec.size - 1:
            l, c, r = np.log(spec[k - 1:k + 2] + 1e-300)
            den = l - 2 * c + r
            if den != 0:
                kf = k + 0.5 * (l - r) / den
        out.append(TWO_PI * kf / (n * dt))
    return np.array(out)


def dominant_frequency(times, values) -> float:
    """Angular frequency of the strongest spectral component."""
    return float(spectral_peaks(times, values, 1)[0])
