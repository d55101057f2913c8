"""Inhomogeneous ensembles: drive-amplitude spread, detuning broadening and the
¹⁴N hyperfine triplet.

An :class:`Ensemble` is an ordered, immutable set of weighted members. It behaves
as a sequence of :class:`EnsembleMember` but also exposes the member parameters
as arrays so that propagation can be vectorised over members.
"""

from __future__ import annotations

import hashlib
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.special import ndtri

from nvccdd.errors import InvalidParameterError

TWO_PI = 2.0 * math.pi
FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))

# relative ODMR dip amplitudes of the m_I = +1, 0, -1 lines as fitted in the
# characterisation spectrum, ordered from low to high frequency
AS_FITTED_WEIGHTS = tuple(np.array([2.71, 3.35, 5.14]) / 11.20)


@dataclass(frozen=True)
class InhomogeneityModel:
    """Static disorder of the ensemble.

    ``detuning_fwhm`` and ``hyperfine_splitting`` are in Hz (not rad/s). The three
    hyperfine weights belong to the lines at ``-A∥, 0, +A∥``.
    """

    sigma_eps: float = 0.1
    eps_target_coupled: bool = True
    detuning_profile: str = "gaussian"
    detuning_fwhm: float = 415e3
    hyperfine_splitting: float = 2.16e6
    hyperfine_weights: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)

    def __post_init__(self):
        w = tuple(float(x) for x in self.hyperfine_weights)
        object.__setattr__(self, "hyperfine_weights", w)
        object.__setattr__(self, "detuning_profile", self.detuning_profile.lower())
        scalars = (self.sigma_eps, self.detuning_fwhm, self.hyperfine_splitting) + w
        if not all(math.isfinite(v) for v in scalars):
            raise InvalidParameterError("inhomogeneity parameters must be finite")
        if self.sigma_eps < 0 or self.detuning_fwhm < 0 or self.hyperfine_splitting < 0:
            raise InvalidParameterError("widths must be >= 0")
        if len(w) != 3 or min(w) < 0 or abs(sum(w) - 1.0) > 1e-12:
            raise InvalidParameterError("hyperfine_weights must be 3 values >= 0 summing to 1")
        if self.detuning_profile not in ("gaussian", "lorentzian"):
            raise InvalidParameterError("detuning_profile must be 'gaussian' or 'lorentzian'")

    @classmethod
    def homogeneous(cls) -> "InhomogeneityModel":
        return cls(sigma_eps=0.0, detuning_fwhm=0.0, hyperfine_weights=(0.0, 1.0, 0.0))

    @property
    def line_offsets(self) -> np.ndarray:
        """Hyperfine line detunings in rad/s."""
        return TWO_PI * self.hyperfine_splitting * np.array([-1.0, 0.0, 1.0])


@dataclass(frozen=True)
class EnsembleMember:
    delta: float
    eps1: float
    eps2: float
    eps_t: float
    weight: float


class Ensemble(Sequence):
    """Weighted ensemble members stored column-wise."""

    def __init__(self, delta, eps1, eps2, eps_t, weight, normalize: bool | None = True):
        # normalize=None keeps weights as given (used for member slices)
        cols = [np.array(c, dtype=float).reshape(-1) for c in (delta, eps1, eps2, eps_t, weight)]
        n = cols[0].size
        if n == 0 or any(c.size != n for c in cols):
            raise InvalidParameterError("ensemble columns must be non-empty and equally long")
        if not all(np.all(np.isfinite(c)) for c in cols):
            raise InvalidParameterError("ensemble values must be finite")
        if np.any(cols[4] <= 0):
            raise InvalidParameterError("member weights must be > 0")
        if normalize:
            cols[4] = cols[4] / math.fsum(cols[4])
        elif normalize is False and abs(math.fsum(cols[4]) - 1.0) > 1e-10:
            raise InvalidParameterError("member weights must sum to 1")
        for c in cols:
            c.setflags(write=False)
        self.delta, self.eps1, self.eps2, self.eps_t, self.weight = cols

    @classmethod
    def from_members(cls, members) -> "Ensemble":
        if isinstance(members, Ensemble):
            return members
        rows = [(m.delta, m.eps1, m.eps2, m.eps_t, m.weight) for m in members]
        if not rows:
            raise InvalidParameterError("ensemble must not be empty")
        return cls(*zip(*rows), normalize=False)

    @classmethod
    def single(cls, delta: float = 0.0, eps: float = 0.0) -> "Ensemble":
        return cls([delta], [eps], [eps], [eps], [1.0])

    def __len__(self) -> int:
        return self.weight.size

    def __getitem__(self, i):
        if isinstance(i, slice):
            return Ensemble(self.delta[i], self.eps1[i], self.eps2[i], self.eps_t[i],
                            self.weight[i], normalize=None)
        return EnsembleMember(float(self.delta[i]), float(self.eps1[i]), float(self.eps2[i]),
                              float(self.eps_t[i]), float(self.weight[i]))

    def digest(self) -> str:
        """SHA-256 of the member table, for run metadata."""
        h = hashlib.sha256()
        for c in (self.delta, self.eps1, self.eps2, self.eps_t, self.weight):
            h.update(np.ascontiguousarray(c, dtype="<f8").tobytes())
        return h.hexdigest()


def _gauss_hermite(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = hermegauss(n)
    return x, w / w.sum()


def _lorentzian_nodes(n: int, fwhm: float) -> tuple[np.ndarray, np.ndarray]:
    """Tanh-sinh nodes on ±10 FWHM weighted by the Lorentzian density."""
    if n == 1 or fwhm == 0:
        return np.zeros(1), np.ones(1)
    half_range = 10.0 * fwhm
    gamma = 0.5 * fwhm
    tmax = 3.0
    h = 2 * tmax / (n - 1)
    t = np.linspace(-tmax, tmax, n)
    u = 0.5 * math.pi * np.sinh(t)
    x = half_range * np.tanh(u)
    jac = half_range * 0.5 * math.pi * np.cosh(t) / np.cosh(u) ** 2
    pdf = gamma / math.pi / (x * x + gamma * gamma)
    w = h * jac * pdf
    return x, w / w.sum()


def _check_model(model: InhomogeneityModel):
    if not isinstance(model, InhomogeneityModel):
        raise InvalidParameterError("model must be an InhomogeneityModel")


EPS_RULES = ("gauss-hermite", "uniform")
UNIFORM_EPS_HALF_WIDTH = 6.0  # in units of sigma_eps


def _uniform_gaussian(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Trapezoid nodes on ±6 σ weighted by the unit Gaussian density."""
    if n == 1:
        return np.zeros(1), np.ones(1)
    x = np.linspace(-UNIFORM_EPS_HALF_WIDTH, UNIFORM_EPS_HALF_WIDTH, n)
    w = np.exp(-0.5 * x * x)
    w[[0, -1]] *= 0.5
    return x, w / w.sum()


def build_quadrature(model: InhomogeneityModel, n_eps: int = 21, n_delta: int = 15,
                     eps_rule: str = "gauss-hermite") -> Ensemble:
    """Deterministic tensor-product discretisation of the ensemble.

    Gauss-Hermite over ε and over a Gaussian detuning profile; tanh-sinh nodes
    over a Lorentzian profile truncated at ±10 FWHM. Every line of the hyperfine
    triplet with non-zero weight gets its own copy of the detuning grid. Member
    order is (line, ε, δ) with the last index fastest.

    ``eps_rule="uniform"`` replaces the Gauss-Hermite ε nodes by an equispaced
    trapezoid grid on ±6 σ. Under a long drive each member's phase winds as
    roughly Ω₁ t ε, so the ε integrand oscillates faster than any affordable
    Gauss-Hermite rule resolves near the centre; the equispaced grid with a
    few hundred nodes is the better choice for traces longer than about a
    microsecond.
    """
    _check_model(model)
    if n_eps < 1 or n_delta < 1:
        raise InvalidParameterError("n_eps and n_delta must be >= 1")
    if eps_rule not in EPS_RULES:
        raise InvalidParameterError(f"eps_rule must be one of {EPS_RULES}, got {eps_rule!r}")
    if model.sigma_eps == 0:
        xe, we = np.zeros(1), np.ones(1)
    elif eps_rule == "uniform":
        xe, we = _uniform_gaussian(n_eps)
    else:
        xe, we = _gauss_hermite(n_eps)
    eps = model.sigma_eps * xe
    if model.detuning_fwhm == 0:
        xd, wd = np.zeros(1), np.ones(1)
    elif model.detuning_profile == "gaussian":
        xd, wd = _gauss_hermite(n_delta)
        xd = xd * model.detuning_fwhm / FWHM_PER_SIGMA
    else:
        xd, wd = _lorentzian_nodes(n_delta, model.detuning_fwhm)
    xd = TWO_PI * xd

    lines = [(o, w) for o, w in zip(model.line_offsets, model.hyperfine_weights) if w > 0]
    delta, e, weight = [], [], []
    for offset, lw in lines:
        for ei, ew in zip(eps, we):
            delta.append(offset + xd)
            e.append(np.full(xd.size, ei))
            weight.append(lw * ew * wd)
    delta = np.concatenate(delta)
    e = np.concatenate(e)
    weight = np.concatenate(weight)
    eps_t = e if model.eps_target_coupled else np.zeros_like(e)
    return Ensemble(delta, e, e, eps_t, weight)


def _uniform(raw: np.ndarray) -> np.ndarray:
    # 53-bit uniforms strictly inside (0, 1)
    return ((raw >> np.uint64(11)).astype(float) + 0.5) * 2.0 ** -53


def sample_monte_carlo(model: InhomogeneityModel, n: int, seed: int) -> Ensemble:
    """``n`` equal-weight members drawn from a counter-based generator.

    Member ``i`` consumes exactly one Philox4x64 block (counter ``i`` under key
    ``seed``), so a member's values depend only on ``(seed, i)``.
    """
    _check_model(model)
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    if not (0 <= int(seed) < 2 ** 64):
        raise InvalidParameterError("seed must be an unsigned 64-bit integer")
    gen = np.random.Philox(key=int(seed))
    u = _uniform(gen.random_raw((n, 4)))
    cdf = np.cumsum(model.hyperfine_weights)
    line = np.minimum(np.searchsorted(cdf, u[:, 0], side="right"), 2)
    # a zero-weight line can only be hit through rounding of the cumulative sum
    w = np.asarray(model.hyperfine_weights)
    for k in range(3):
        if w[k] == 0:
            line[line == k] = int(np.argmax(w))
    offsets = model.line_offsets[line]
    eps = model.sigma_eps * ndtri(u[:, 1])
    if model.detuning_profile == "gaussian":
        spread = model.detuning_fwhm / FWHM_PER_SIGMA * ndtri(u[:, 2])
    else:
        g = 0.5 * model.detuning_fwhm
        edge = math.atan(10.0 * model.detuning_fwhm / g) if g > 0 else 0.0
        spread = g * np.tan(edge * (2 * u[:, 2] - 1))
    if model.eps_target_coupled:
        eps_t = eps
    else:
        eps_t = np.zeros(n)
    return Ensemble(offsets + TWO_PI * spread, eps, eps, eps_t, np.full(n, 1.0 / n))


def average_traces(member_traces) -> np.ndarray:
    """Weighted mean of ``(weight, trace)`` pairs, accumulated in the given order."""
    items = list(member_traces)
    if not items:
        raise InvalidParameterError("no traces to average")
    shape = np.shape(items[0][1])
    acc = np.zeros(shape)
    total = 0.0
    for w, tr in items:
        tr = np.asarray(tr, dtype=float)
        if tr.shape != shape:
            raise InvalidParameterError("all traces must share the same time grid")
        acc += w * tr
        total += w
    if total <= 0:
        raise InvalidParameterError("weights must sum to a positive value")
    return acc / total


def weighted_mean(weight: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Weighted mean over the last axis of ``values`` (members last)."""
    return values @ weight


def analytic_rabi_decay(theta, sigma_eps: float):
    """``P0 = (1 + cos Θ exp(-(Θσ_ε)²/2)) / 2`` for a Gaussian amplitude spread."""
    if sigma_eps < 0:
        raise InvalidParameterError("sigma_eps must be >= 0")
    theta = np.asarray(theta, dtype=float)
    out = 0.5 * (1.0 + np.cos(theta) * np.exp(-0.5 * (theta * sigma_eps) ** 2))
    return float(out) if out.ndim == 0 else out


def rabi_envelope_time(omega: float, sigma_eps: float) -> float:
    """1/e time ``√2 / (Ω σ_ε)`` of the Gaussian Rabi envelope."""
    if omega <= 0 or sigma_eps < 0:
        raise InvalidParameterError("omega must be > 0 and sigma_eps >= 0")
    if sigma_eps == 0:
        return math.inf
    return math.sqrt(2.0) / (omega * sigma_eps)
