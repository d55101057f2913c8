import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import TWO_PI
from nvccdd.analysis import (
    MODELS,
    biexp_saturation,
    damped_sinusoid,
    fit,
    fit_trace,
    get_model,
    linear,
    lorentzian_triplet,
    stretched_exp,
    two_tone_ccdd,
)
from nvccdd.errors import InvalidParameterError
from nvccdd.protocols import TimeTrace

# CCDD(n=2) row of the main fitting table
CCDD_A, CCDD_T, CCDD_OMEGA = 0.025, 4.58e-6, TWO_PI * 1.134e6
# "Rect. strong" row of the CCDD fitting table
RECT_STRONG = np.array([0.0249, TWO_PI * 1.143e6, 12.0e-6, -1.94, 0.0140, TWO_PI * 1.130e6,
                        15.5e-6, 2.28, 0.0238, 50.3e-6, -0.0123])


def _grid(n=400, dt=1 / 11.36e6):
    return np.arange(n) * dt


def test_damped_sinusoid_noiseless_recovery():
    t = _grid()
    m = damped_sinusoid(p=1.0)
    y = m(t, [CCDD_A, CCDD_T, 1.0, CCDD_OMEGA, 0.0, 0.0])
    r = fit(m, t, y)
    assert r.converged
    for name, v in (("A", CCDD_A), ("T", CCDD_T), ("omega", CCDD_OMEGA)):
        assert r[name] == pytest.approx(v, rel=1e-6)
    assert r.residual_rms < 1e-10


def test_two_tone_regression_from_table_row():
    t = np.arange(0, 60e-6, 1 / 11.36e6)
    m = two_tone_ccdd()
    y = m(t, RECT_STRONG) + np.random.default_rng(8).normal(0, 5e-4, t.size)
    r = fit(m, t, y)
    assert r.converged
    assert r["omega1"] == pytest.approx(RECT_STRONG[1], rel=0.01)
    assert r["omega2"] == pytest.approx(RECT_STRONG[5], rel=0.01)
    assert r["T1"] == pytest.approx(RECT_STRONG[2], rel=0.10)
    assert r["T2"] == pytest.approx(RECT_STRONG[6], rel=0.10)


def test_linear_constant_trace_has_zero_slope():
    x = np.linspace(0, 1, 30)
    r = fit(linear(), x, np.full(30, 0.3))
    assert r["slope"] == pytest.approx(0.0, abs=1e-12)
    assert r["intercept"] == pytest.approx(0.3)
    y = 0.3 + np.random.default_rng(1).normal(0, 0.01, 30)
    r = fit(linear(), x, y)
    assert abs(r["slope"]) <= 3 * r.sigma("slope")


def test_fit_consistency_within_three_sigma():
    m = damped_sinusoid(p=1.0)
    true = np.array([CCDD_A, CCDD_T, 1.0, CCDD_OMEGA, 0.4, -0.002])
    t = _grid(300)
    clean = m(t, true)
    free = [i for i, n in enumerate(m.names) if n not in m.fixed]
    hits = 0
    for seed in range(100):
        y = clean + np.random.default_rng(seed).normal(0, 5e-4, t.size)
        r = fit(m, t, y)
        d = np.abs(r.values[free] - true[free])
        hits += bool(r.converged and np.all(d <= 3 * r.sigmas[free]))
    assert hits >= 95


@given(A=st.floats(0.005, 0.05), T=st.floats(1e-6, 20e-6), f=st.floats(0.2e6, 2e6),
       phi=st.floats(-3.0, 3.0), C=st.floats(-0.02, 0.02))
def test_damped_sinusoid_recovery_property(A, T, f, phi, C):
    t = np.arange(400) * 25e-9
    m = damped_sinusoid(p=1.0)
    true = [A, T, 1.0, TWO_PI * f, phi, C]
    r = fit(m, t, m(t, true))
    assert r.residual_rms < 1e-6 * A
    assert r["omega"] == pytest.approx(TWO_PI * f, rel=1e-5)


def test_free_exponent_and_gaussian_envelope():
    t = np.arange(400) * 10e-9
    m = damped_sinusoid()
    true = [0.02, 1.5e-6, 1.7, TWO_PI * 2e6, 1.0, 0.001]
    r = fit(m, t, m(t, true))
    assert r["p"] == pytest.approx(1.7, rel=1e-6)
    g = get_model("DampedSinusoidGauss")
    r = fit(g, t, g(t, [0.02, 1.5e-6, 2.0, TWO_PI * 2e6, 1.0, 0.0]))
    assert r["T"] == pytest.approx(1.5e-6, rel=1e-6)
    assert r.sigma("p") == 0.0


def test_exponent_stays_in_bounds():
    t = np.arange(300) * 10e-9
    y = 0.01 * np.exp(-((t / 1e-6) ** 6)) * np.cos(TWO_PI * 3e6 * t)
    r = fit(damped_sinusoid(), t, y)
    assert 0.5 <= r["p"] <= 4.0


def test_background_model_recovery():
    t = np.arange(200) * (1 / 1.13e6)
    m = get_model("DampedSinusoidBackground")
    true = [0.008, 57e-6, 1.0, TWO_PI * 62.3e3, 0.3, 0.008, 0.011, 0.44e-6 * 10]
    r = fit(m, t, m(t, true))
    assert r["omega"] == pytest.approx(true[3], rel=1e-6)
    assert r["A"] == pytest.approx(true[0], rel=1e-5)


def test_lorentzian_triplet_from_spectrum_table():
    x = np.linspace(2.7035e9, 2.7125e9, 401)
    true = [-2.71e-3, 2.705854e9, 385e3, -3.35e-3, 2.708018e9, 415e3, -5.14e-3, 2.710167e9,
            422e3, 0.0]
    m = lorentzian_triplet()
    y = m(x, true) + np.random.default_rng(3).normal(0, 1e-4, x.size)
    r = fit(m, x, y)
    for k in range(3):
        assert r[f"f{k + 1}"] == pytest.approx(true[3 * k + 1], abs=10e3)
        assert r[f"w{k + 1}"] == pytest.approx(true[3 * k + 2], rel=0.1)


def test_biexp_saturation_spin_lock_times():
    t = np.linspace(0, 3e-3, 300)
    m = biexp_saturation()
    true = [0.01, 25.1e-6, 0.015, 888e-6, 0.0005]
    r = fit(m, t, m(t, true))
    assert r["t1"] == pytest.approx(25.1e-6, rel=1e-4)
    assert r["t2"] == pytest.approx(888e-6, rel=1e-4)
    # reported with t1 <= t2 whatever the start ordering
    swapped = [0.015, 888e-6, 0.01, 25.1e-6, 0.0005]
    r2 = fit(m, t, m(t, true), init=swapped)
    assert r2["t1"] < r2["t2"]


def test_stretched_exp_t1():
    t = np.linspace(0, 25e-3, 60)
    m = stretched_exp(p=1.0)
    y = m(t, [0.02, 5.0e-3, 1.0, 0.0]) + np.random.default_rng(2).normal(0, 2e-4, t.size)
    r = fit(m, t, y)
    assert r["T"] == pytest.approx(5.0e-3, rel=0.05)


def test_every_model_name_resolves():
    for name in MODELS:
        m = get_model(name)
        assert len(m.names) == len(m.units) == len(m.lower) == len(m.upper)
    with pytest.raises(InvalidParameterError):
        get_model("Sinc")


def test_too_few_samples_and_bad_data():
    m = damped_sinusoid(p=1.0)
    with pytest.raises(InvalidParameterError):
        fit(m, np.arange(10.0), np.zeros(10))
    with pytest.raises(InvalidParameterError):
        fit(linear(), np.arange(10.0), np.arange(9.0))
    y = np.zeros(20)
    y[3] = np.nan
    with pytest.raises(InvalidParameterError):
        fit(linear(), np.arange(20.0), y)


def test_unfittable_data_is_flagged_not_raised():
    t = np.arange(60) * 1e-7
    r = fit(damped_sinusoid(), t, np.zeros(60))
    assert np.all(r.sigmas >= 0)
    assert math.isfinite(r.residual_rms)
    bad = fit(damped_sinusoid(p=1.0), t, np.zeros(60), init=[np.nan] * 6)
    assert not bad.converged


def test_frequency_capped_at_nyquist():
    t = np.arange(200) * 1e-7
    y = 0.01 * np.cos(TWO_PI * 1.2e6 * t)  # aliases to 0.8 MHz at 10 MS/s
    r = fit(damped_sinusoid(p=1.0), t, y)
    assert r["omega"] <= math.pi / 1e-7 * (1 + 1e-12)


def test_fit_trace_and_report():
    t = _grid(200)
    m = damped_sinusoid(p=1.0)
    d = m(t, [CCDD_A, CCDD_T, 1.0, CCDD_OMEGA, 0.0, 0.0])
    r = fit_trace(m, TimeTrace(t, d, -d, d))
    rep = r.as_dict()
    assert rep["model"] == "DampedSinusoid"
    assert [p["name"] for p in rep["parameters"]] == list(m.names)
    assert rep["parameters"][1]["unit"] == "s"
    assert '"converged": true' in r.to_json()
