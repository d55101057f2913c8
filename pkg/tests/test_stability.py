import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nvccdd.analysis import allan_deviation, estimate_sensitivity, sem_scaling
from nvccdd.analysis.stability import MIN_CLUSTERS, log_cluster_sizes, loglog_slope
from nvccdd.errors import InvalidParameterError


def test_alternating_series_m1():
    y = np.tile([1.0, -1.0], 50)
    assert allan_deviation(y, [1])[0] == pytest.approx(math.sqrt(2))
    assert allan_deviation(y, [1], overlapping=True)[0] == pytest.approx(math.sqrt(2))
    # even cluster sizes average the alternation away
    assert allan_deviation(y, [2, 10]) == pytest.approx([0.0, 0.0])


def test_white_noise_law_two_decades():
    sigma = 0.7
    y = np.random.default_rng(11).normal(0, sigma, 2_000_000)
    ms = np.array([1, 3, 10, 30, 100])
    adev = allan_deviation(y, ms)
    assert adev == pytest.approx(sigma / np.sqrt(ms), rel=0.05)
    assert loglog_slope(ms, adev) == pytest.approx(-0.5, abs=0.05)


def test_overlapping_matches_white_noise():
    y = np.random.default_rng(4).normal(0, 1, 200_000)
    ms = np.array([1, 10, 100])
    assert allan_deviation(y, ms, overlapping=True) == pytest.approx(1 / np.sqrt(ms), rel=0.05)


def test_too_short_and_bad_clusters():
    with pytest.raises(InvalidParameterError):
        allan_deviation(np.zeros(10), [6])
    with pytest.raises(InvalidParameterError):
        allan_deviation(np.zeros(10), [0])
    with pytest.raises(InvalidParameterError):
        allan_deviation(np.zeros(10), [1.5])
    with pytest.raises(InvalidParameterError):
        allan_deviation([0.0, np.inf, 1.0, 2.0], [1])
    with pytest.raises(InvalidParameterError):
        sem_scaling(np.zeros(3))
    with pytest.raises(InvalidParameterError):
        sem_scaling(np.zeros(10), repetition_period=0.0)


def test_constant_series():
    sc = sem_scaling(np.full(5000, 2.5), 1e-3)
    assert np.all(sc.sem == 0) and np.all(sc.adev == 0)
    assert sc.divergence_tau is None
    assert estimate_sensitivity(np.full(5000, 2.5), 1e-3).eta == 0.0


def test_sem_inverse_sqrt_scaling():
    y = np.random.default_rng(0).normal(0, 1, 10_000)
    sc = sem_scaling(y, 2e-3)
    assert sc.taus == pytest.approx(sc.cluster_sizes * 2e-3)
    assert loglog_slope(sc.taus, sc.sem) == pytest.approx(-0.5, abs=1e-12)


def test_divergence_random_walk_versus_white():
    rng = np.random.default_rng(9)
    n = 200_000
    white = rng.normal(0, 1, n)
    walk = white + np.cumsum(rng.normal(0, 0.01, n))
    assert sem_scaling(white, 1.0).divergence_tau is None
    d = sem_scaling(walk, 1.0).divergence_tau
    assert d is not None and d <= n / MIN_CLUSTERS


@given(seed=st.integers(0, 2 ** 32 - 1), sigma=st.floats(0.1, 10.0), tr=st.floats(1e-4, 1.0))
def test_sensitivity_white_noise(seed, sigma, tr):
    y = np.random.default_rng(seed).normal(0, sigma, 20_000)
    est = estimate_sensitivity(y, tr)
    assert not est.flagged
    assert est.eta == pytest.approx(sigma * math.sqrt(tr), rel=0.10)


def test_sensitivity_shot_scaling():
    rng = np.random.default_rng(2)
    one = estimate_sensitivity(rng.normal(0, 1.0, 50_000), 1e-3).eta
    two = estimate_sensitivity(rng.normal(0, 1.0 / math.sqrt(2), 50_000), 1e-3).eta
    assert one / two == pytest.approx(math.sqrt(2), rel=0.05)


def test_sensitivity_flagged_without_white_region():
    est = estimate_sensitivity(np.random.default_rng(1).normal(0, 1, 400), 1.0)
    assert est.flagged and est.n_points == 0


def test_log_cluster_sizes():
    m = log_cluster_sizes(10_000)
    assert m[0] == 1 and m[-1] <= 5000
    assert np.all(np.diff(m) > 0)


def test_sem_csv(tmp_path):
    sc = sem_scaling(np.random.default_rng(0).normal(0, 1, 1000))
    sc.write_csv(tmp_path / "a.csv")
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert lines[0] == "tau_s,adev,sem"
    assert len(lines) == sc.taus.size + 1
