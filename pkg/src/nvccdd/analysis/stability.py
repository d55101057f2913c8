"""Allan deviation, standard error of the mean and sensitivity estimates."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from nvccdd.errors import InvalidParameterError

# fewest clusters at which an ADEV point is trusted to resolve a 10 % deviation
MIN_CLUSTERS = 500
DIVERGENCE_THRESHOLD = 0.10


def _series(series) -> np.ndarray:
    y = np.asarray(series, dtype=float).reshape(-1)
    if not np.all(np.isfinite(y)):
        raise InvalidParameterError("series must be finite")
    return y


def _cluster_sizes(ms, n: int) -> np.ndarray:
    m = np.asarray(ms, dtype=float).reshape(-1)
    if m.size == 0 or np.any(m < 1) or np.any(m != np.round(m)):
        raise InvalidParameterError("cluster sizes must be positive integers")
    m = m.astype(int)
    if n < 2 * m.max():
        raise InvalidParameterError(
            f"series of length {n} too short for cluster size {m.max()} (need {2 * m.max()})")
    return m


def log_cluster_sizes(n: int, per_decade: int = 8, min_clusters: int = 2) -> np.ndarray:
    """Roughly log-spaced cluster sizes from 1 to ``n // min_clusters``."""
    top = max(1, n // min_clusters)
    m = np.unique(np.round(np.logspace(0, math.log10(top), max(2, int(per_decade * math.log10(top)) + 1))))
    return m.astype(int)


def allan_deviation(series, cluster_sizes, overlapping: bool = False) -> np.ndarray:
    """Two-sample deviation of ``m``-sample cluster means for each ``m``.

    ``σ(m) = sqrt(½ <(ȳ_{k+1} - ȳ_k)²>)`` over non-overlapping clusters, or over
    all cluster start points when ``overlapping``.
    """
    y = _series(series)
    ms = _cluster_sizes(cluster_sizes, y.size)
    csum = np.concatenate([[0.0], np.cumsum(y)])
    out = np.empty(ms.size)
    for i, m in enumerate(ms):
        if overlapping:
            means = (csum[m:] - csum[:-m]) / m
            d = means[m:] - means[:-m]
        else:
            k = y.size // m
            means = y[: k * m].reshape(k, m).mean(axis=1)
            d = np.diff(means)
        out[i] = math.sqrt(0.5 * float(np.mean(d * d)))
    return out


@dataclass(frozen=True)
class SemScaling:
    taus: np.ndarray  # averaging times, s
    cluster_sizes: np.ndarray
    sem: np.ndarray
    adev: np.ndarray
    clusters: np.ndarray
    divergence_tau: float | None  # first τ with |ADEV - SEM| > 10 % of SEM

    def white_region(self) -> np.ndarray:
        """Mask of averaging times trusted to be white-noise dominated."""
        ok = self.clusters >= MIN_CLUSTERS
        if self.divergence_tau is not None:
            ok &= self.taus < self.divergence_tau
        return ok

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["tau_s", "adev", "sem"])
            for row in zip(self.taus, self.adev, self.sem):
                w.writerow([repr(float(v)) for v in row])


def sem_scaling(series, repetition_period: float = 1.0, cluster_sizes=None,
                min_clusters: int = MIN_CLUSTERS) -> SemScaling:
    """SEM and ADEV versus averaging time ``τ = m · repetition_period``.

    The SEM after averaging ``m`` readings is ``s / √m`` with ``s`` the standard
    deviation of the whole record, which is what the SEM of a growing prefix
    estimates without the prefix-to-prefix scatter of its own ``s``. Divergence is
    only tested where at least ``min_clusters`` clusters enter the ADEV, because
    below that the ADEV's own statistical error approaches the 10 % threshold.
    """
    y = _series(series)
    if y.size < 4:
        raise InvalidParameterError("series must have at least 4 samples")
    if not (math.isfinite(repetition_period) and repetition_period > 0):
        raise InvalidParameterError("repetition_period must be > 0")
    ms = log_cluster_sizes(y.size) if cluster_sizes is None else _cluster_sizes(cluster_sizes, y.size)
    adev = allan_deviation(y, ms)
    s = float(np.std(y, ddof=1))
    sem = s / np.sqrt(ms)
    clusters = y.size // ms
    taus = ms * repetition_period
    div = None
    for tau, a, e, k in zip(taus, adev, sem, clusters):
        if k < min_clusters:
            break
        if e == 0:
            if a != 0:
                div = float(tau)
                break
            continue
        if abs(a - e) / e > DIVERGENCE_THRESHOLD:
            div = float(tau)
            break
    return SemScaling(taus, ms, sem, adev, clusters, div)


@dataclass(frozen=True)
class SensitivityEstimate:
    eta: float  # field units per √Hz
    flagged: bool
    n_points: int
    message: str = ""


def estimate_sensitivity(series, repetition_period: float) -> SensitivityEstimate:
    """``η = median(SEM(τ) · √τ)`` over the white-noise region of ``series``.

    ``series`` must already be in field units. When no white-noise region is
    found the median over all points is returned with ``flagged`` set.
    """
    sc = sem_scaling(series, repetition_period)
    vals = sc.sem * np.sqrt(sc.taus)
    mask = sc.white_region()
    if mask.sum() == 0:
        return SensitivityEstimate(float(np.median(vals)), True, 0,
                                   "no white-noise region detected")
    return SensitivityEstimate(float(np.median(vals[mask])), False, int(mask.sum()))


def loglog_slope(x, y) -> float:
    """Least-squares slope of log y versus log x."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])
