import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import TWO_PI
from nvccdd.analysis import dominant_frequency, psd, spectral_peaks
from nvccdd.errors import InvalidParameterError


@given(n=st.integers(8, 400), seed=st.integers(0, 2 ** 32 - 1))
def test_parseval(n, seed):
    t = np.arange(n) * 1e-6
    y = np.random.default_rng(seed).normal(0, 1, n) + 3.0
    f, p = psd(t, y)
    df = f[1] - f[0]
    assert np.sum(p) * df == pytest.approx(np.var(y), rel=1e-8)


def test_sinusoid_single_bin():
    dt, n = 1e-7, 1000
    t = np.arange(n) * dt
    f0 = 50 / (n * dt)  # exactly on a bin
    f, p = psd(t, 0.3 * np.sin(TWO_PI * f0 * t))
    k = int(np.argmax(p))
    assert f[k] == pytest.approx(f0)
    assert np.sum(p) - p[k] < 1e-20 * p[k] + 1e-25


def test_white_noise_flat():
    n = 2 ** 16
    t = np.arange(n) * 1e-3
    f, p = psd(t, np.random.default_rng(5).normal(0, 1, n))
    # average down to 64 bands; each holds ~512 bins, scatter ~ 1/sqrt(512)
    bands = p[1:].reshape(64, -1).mean(axis=1)
    assert np.all(np.abs(bands / bands.mean() - 1) < 0.2)
    # one-sided level: variance spread over [0, fs/2]
    assert bands.mean() == pytest.approx(2 * 1e-3, rel=0.05)


def test_non_uniform_grid_rejected():
    t = np.array([0.0, 1.0, 2.5, 3.0])
    with pytest.raises(InvalidParameterError):
        psd(t, np.ones(4))
    with pytest.raises(InvalidParameterError):
        dominant_frequency(t, np.ones(4))
    with pytest.raises(InvalidParameterError):
        psd(np.arange(5.0), np.ones(4))


def test_dominant_frequency_off_bin():
    t = np.arange(300) * 88e-9
    w = TWO_PI * 1.1436e6
    y = np.exp(-t / 5e-6) * np.cos(w * t + 0.3)
    assert dominant_frequency(t, y) == pytest.approx(w, rel=2e-3)


def test_spectral_peaks_order():
    t = np.arange(2000) * 1e-7
    y = np.cos(TWO_PI * 1e5 * t) + 0.5 * np.cos(TWO_PI * 3e5 * t) + 0.3 * np.cos(TWO_PI * 7e5 * t)
    pk = spectral_peaks(t, y, 3) / TWO_PI
    assert pk == pytest.approx([1e5, 3e5, 7e5], rel=1e-3)
    with pytest.raises(InvalidParameterError):
        spectral_peaks(t, y, 0)


def test_damped_trace_peak_not_biased_by_taper():
    # a fast transient plus a slow tone that carries most of the early-time power
    t = np.arange(400) * 0.5e-6
    y = 0.005 * np.exp(-t / 14e-6) * np.cos(TWO_PI * 1e5 * t) + 0.004 * np.exp(-t / 1e-6)
    assert dominant_frequency(t, y) / TWO_PI == pytest.approx(1e5, rel=0.05)
    assert math.isfinite(dominant_frequency(t, y))
