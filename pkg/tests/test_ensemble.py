import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import OMEGA0, OMEGA1, TWO_PI
from nvccdd.ensemble import (
    AS_FITTED_WEIGHTS,
    FWHM_PER_SIGMA,
    Ensemble,
    EnsembleMember,
    InhomogeneityModel,
    analytic_rabi_decay,
    average_traces,
    build_quadrature,
    rabi_envelope_time,
    sample_monte_carlo,
    weighted_mean,
)
from nvccdd.errors import InvalidParameterError
from nvccdd.protocols import ProtocolSpec, ReadoutModel, Sampling, run_rabi
from nvccdd.spin import DriveConfig, SystemParams

AMPLITUDE_ONLY = InhomogeneityModel(detuning_fwhm=0.0, hyperfine_weights=(0, 1, 0))


def moments(ens, values):
    m = float(values @ ens.weight)
    return m, float(((values - m) ** 2) @ ens.weight)


def test_quadrature_moments():
    model = InhomogeneityModel(sigma_eps=0.1, detuning_fwhm=415e3, hyperfine_splitting=2.16e6)
    ens = build_quadrature(model, 15, 11)
    assert len(ens) == 3 * 15 * 11
    assert ens.weight.sum() == pytest.approx(1.0, abs=1e-14)
    m, v = moments(ens, ens.eps1)
    assert m == pytest.approx(0.0, abs=1e-15) and v == pytest.approx(0.01, rel=1e-12)
    sig_d = TWO_PI * 415e3 / FWHM_PER_SIGMA
    line = TWO_PI * 2.16e6
    m, v = moments(ens, ens.delta)
    assert m == pytest.approx(0.0, abs=1e-6)
    assert v == pytest.approx(sig_d ** 2 + 2 / 3 * line ** 2, rel=1e-12)
    # Gauss-Hermite is exact for fourth moments of ε
    assert float(ens.eps1 ** 4 @ ens.weight) == pytest.approx(3e-4, rel=1e-12)


def test_quadrature_hyperfine_weights_and_order():
    model = InhomogeneityModel(hyperfine_weights=AS_FITTED_WEIGHTS)
    ens = build_quadrature(model, 3, 5)
    per_line = ens.weight.reshape(3, -1).sum(axis=1)
    assert np.allclose(per_line, AS_FITTED_WEIGHTS)
    assert ens.delta[0] < ens.delta[15] < ens.delta[30]


def test_zero_weight_lines_are_dropped():
    ens = build_quadrature(AMPLITUDE_ONLY, 7, 9)
    assert len(ens) == 7 and np.all(ens.delta == 0)


def test_target_coupling_flag():
    ens = build_quadrature(InhomogeneityModel(eps_target_coupled=False), 5, 3)
    assert np.all(ens.eps_t == 0) and np.any(ens.eps1 != 0)


def test_lorentzian_characteristic_function():
    fwhm = 400e3
    ens = build_quadrature(InhomogeneityModel(sigma_eps=0.0, detuning_profile="lorentzian",
                                              detuning_fwhm=fwhm, hyperfine_weights=(0, 1, 0)),
                           1, 401)
    gamma = TWO_PI * fwhm / 2
    for t in (0.2e-6, 1e-6, 2e-6):
        # truncation at ±10 FWHM removes about 3 % of the tail mass
        assert float(np.cos(ens.delta * t) @ ens.weight) == pytest.approx(math.exp(-gamma * t), abs=0.04)


def test_rabi_envelope_matches_characteristic_function():
    """Quadrature-averaged Rabi trace against the Gaussian closed form."""
    ens = build_quadrature(AMPLITUDE_ONLY, 41, 1)
    spec = ProtocolSpec("rabi", SystemParams(OMEGA0), DriveConfig(OMEGA1), Sampling(5e-9, 120),
                        readout=ReadoutModel(contrast=1.0))
    tr = run_rabi(spec, ens)
    p0 = analytic_rabi_decay(OMEGA1 * tr.times, 0.1)
    assert np.allclose(tr.signal_plus, p0, atol=1e-9)
    assert np.allclose(tr.differential, 2 * p0 - 1, atol=1e-9)


def test_monte_carlo_matches_quadrature():
    model = AMPLITUDE_ONLY
    spec = ProtocolSpec("rabi", SystemParams(OMEGA0), DriveConfig(OMEGA1), Sampling(5e-9, 80))
    q = run_rabi(spec, build_quadrature(model, 41, 1)).differential
    n = 4000
    mc = run_rabi(spec, sample_monte_carlo(model, n, 3)).differential
    # each point's error is below 5 standard errors of a ±contrast variable
    assert np.max(np.abs(mc - q)) < 5 * 0.029 / math.sqrt(n)


def test_monte_carlo_determinism_and_prefix():
    model = InhomogeneityModel()
    a = sample_monte_carlo(model, 500, 11)
    b = sample_monte_carlo(model, 500, 11)
    assert a.digest() == b.digest()
    # member i depends only on (seed, i)
    c = sample_monte_carlo(model, 200, 11)
    assert np.array_equal(a.delta[:200], c.delta) and np.array_equal(a.eps1[:200], c.eps1)
    assert sample_monte_carlo(model, 500, 12).digest() != a.digest()


def test_monte_carlo_statistics():
    model = InhomogeneityModel(hyperfine_weights=AS_FITTED_WEIGHTS)
    ens = sample_monte_carlo(model, 100_000, 0)
    assert np.std(ens.eps1) == pytest.approx(0.1, rel=0.02)
    centre = np.round(ens.delta / (TWO_PI * 2.16e6)).astype(int)
    frac = [np.mean(centre == k) for k in (-1, 0, 1)]
    assert np.allclose(frac, AS_FITTED_WEIGHTS, atol=0.01)
    spread = ens.delta[centre == 0] / TWO_PI
    assert np.std(spread) == pytest.approx(415e3 / FWHM_PER_SIGMA, rel=0.02)


def test_monte_carlo_validation():
    with pytest.raises(InvalidParameterError):
        sample_monte_carlo(InhomogeneityModel(), 0, 1)
    with pytest.raises(InvalidParameterError):
        sample_monte_carlo(InhomogeneityModel(), 10, -1)


@pytest.mark.parametrize("kwargs", [dict(sigma_eps=-0.1), dict(detuning_profile="box"),
                                    dict(hyperfine_weights=(0.5, 0.5, 0.5)),
                                    dict(detuning_fwhm=math.inf)])
def test_model_validation(kwargs):
    with pytest.raises(InvalidParameterError):
        InhomogeneityModel(**kwargs)


def test_ensemble_container():
    ens = build_quadrature(InhomogeneityModel(), 3, 3)
    assert isinstance(ens[0], EnsembleMember)
    part = ens[:5]
    assert len(part) == 5 and np.array_equal(part.weight, ens.weight[:5])
    again = Ensemble.from_members(list(ens))
    assert again.digest() == ens.digest()
    with pytest.raises(InvalidParameterError):
        Ensemble([0.0], [0.0], [0.0], [0.0], [0.0])
    with pytest.raises(InvalidParameterError):
        Ensemble.from_members([])
    with pytest.raises(InvalidParameterError):
        Ensemble([0.0, 1.0], [0.0], [0.0], [0.0], [1.0])


@given(st.lists(st.floats(0.01, 10.0), min_size=1, max_size=6))
def test_average_traces_is_weighted_mean(ws):
    rng = np.random.default_rng(len(ws))
    traces = rng.normal(size=(len(ws), 9))
    w = np.array(ws)
    expect = (w[:, None] * traces).sum(0) / w.sum()
    assert np.allclose(average_traces(zip(ws, traces)), expect)
    assert np.allclose(weighted_mean(w / w.sum(), traces.T), expect)


def test_average_traces_errors():
    with pytest.raises(InvalidParameterError):
        average_traces([])
    with pytest.raises(InvalidParameterError):
        average_traces([(1.0, np.zeros(3)), (1.0, np.zeros(4))])


def test_rabi_envelope_time():
    assert rabi_envelope_time(OMEGA1, 0.1) == pytest.approx(198.13e-9, rel=1e-4)
    assert rabi_envelope_time(OMEGA1, 0.0) == math.inf
    T = rabi_envelope_time(OMEGA1, 0.1)
    # the Gaussian envelope exp(-(Ωtσ)²/2) reaches 1/e at T
    assert math.exp(-0.5 * (OMEGA1 * T * 0.1) ** 2) == pytest.approx(math.exp(-1))


# --- documented examples and invariants ---------------------------------------------


def test_single_member_quadrature():
    ens = build_quadrature(InhomogeneityModel(hyperfine_weights=(0, 1, 0)), 1, 1)
    assert len(ens) == 1 and ens[0] == EnsembleMember(0.0, 0.0, 0.0, 0.0, 1.0)


def test_triplet_offsets():
    ens = build_quadrature(InhomogeneityModel(sigma_eps=0.0, detuning_fwhm=0.0), 1, 1)
    assert np.allclose(ens.delta / TWO_PI, [-2.16e6, 0.0, 2.16e6])


def test_gaussian_detuning_variance_single_line():
    model = InhomogeneityModel(hyperfine_weights=(0, 1, 0))
    ens = build_quadrature(model, 1, 15)
    m, v = moments(ens, ens.delta / TWO_PI)
    assert m == pytest.approx(0.0, abs=1e-6)
    assert v == pytest.approx((415e3 / FWHM_PER_SIGMA) ** 2, rel=1e-3)


def test_monte_carlo_single_line_weights():
    ens = sample_monte_carlo(InhomogeneityModel(detuning_fwhm=0.0, hyperfine_weights=(1, 0, 0)),
                             1000, 4)
    assert np.allclose(ens.delta, -TWO_PI * 2.16e6)


def _rabi_trace(ens, sampling=Sampling(4e-9, 250)):
    spec = ProtocolSpec("rabi", SystemParams(OMEGA0), DriveConfig(OMEGA1), sampling)
    return run_rabi(spec, ens).differential


def test_quadrature_convergence_in_eps():
    # Gauss-Hermite resolves the ε integrand over the first 0.8 µs of driving
    model = InhomogeneityModel()
    window = Sampling(2e-9, 400)
    a = _rabi_trace(build_quadrature(model, 21, 15), window)
    b = _rabi_trace(build_quadrature(model, 41, 15), window)
    assert np.sqrt(np.mean((a - b) ** 2)) < 1e-4


def test_uniform_eps_rule_converges_and_agrees():
    model = InhomogeneityModel()
    a = _rabi_trace(build_quadrature(model, 101, 15, "uniform"))
    b = _rabi_trace(build_quadrature(model, 201, 15, "uniform"))
    assert np.sqrt(np.mean((a - b) ** 2)) < 1e-8
    window = Sampling(2e-9, 400)
    gh = _rabi_trace(build_quadrature(model, 41, 15), window)
    un = _rabi_trace(build_quadrature(model, 201, 15, "uniform"), window)
    assert np.sqrt(np.mean((gh - un) ** 2)) < 1e-6


def test_uniform_eps_rule_moments_and_validation():
    ens = build_quadrature(InhomogeneityModel(detuning_fwhm=0.0), 401, 1, "uniform")
    m, v = moments(ens, ens.eps1)
    assert m == pytest.approx(0.0, abs=1e-15)
    # truncation at ±6σ removes a relative 7e-8 of the variance
    assert v == pytest.approx(0.01, rel=1e-6)
    assert np.max(np.abs(ens.eps1)) == pytest.approx(0.6)
    with pytest.raises(InvalidParameterError):
        build_quadrature(InhomogeneityModel(), 5, 5, "simpson")


def test_monte_carlo_agreement_full_model():
    model = InhomogeneityModel()
    q = _rabi_trace(build_quadrature(model, 41, 15))
    mc = _rabi_trace(sample_monte_carlo(model, 100_000, 1))
    assert np.sqrt(np.mean((q - mc) ** 2)) < 0.01 * 0.029


def test_average_traces_examples():
    tr = np.linspace(0, 1, 5)
    assert np.allclose(average_traces([(0.2, tr), (0.8, tr)]), tr)
    assert np.allclose(average_traces([(1.0, np.ones(3)), (1.0, -np.ones(3))]), 0.0)


def test_analytic_rabi_decay_examples():
    assert analytic_rabi_decay(0.0, 0.1) == 1.0
    th = np.linspace(0, 20, 9)
    assert np.allclose(analytic_rabi_decay(th, 0.0), 0.5 * (1 + np.cos(th)))
    with pytest.raises(InvalidParameterError):
        analytic_rabi_decay(1.0, -0.1)
