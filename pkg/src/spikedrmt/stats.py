"""Small statistics toolbox: normal law, Kolmogorov-Smirnov tests, moments.

KS p-values use the asymptotic Kolmogorov distribution
Q(t) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 t^2), switching to the Jacobi
theta form for small t where the alternating series converges slowly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import TooFewSamples

KS_TERMS = 100
MIN_KS = 10


@dataclass(frozen=True)
class Sample:
    values: np.ndarray
    sorted_cache: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(v)):
            raise ValueError("sample contains NaN or infinite values")
        v.setflags(write=False)
        s = np.sort(v)
        s.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "sorted_cache", s)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class KsResult:
    d_statistic: float
    p_value: float
    n_eff: float


@dataclass(frozen=True)
class Moments:
    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float
    degenerate: bool = False  # zero variance: higher moments reported as 0


def _as_sample(s) -> Sample:
    return s if isinstance(s, Sample) else Sample(s)


def normal_cdf(x, mean: float = 0.0, variance: float = 1.0):
    if variance <= 0:
        raise ValueError("variance must be positive")
    z = (np.asarray(x, dtype=float) - mean) / math.sqrt(variance)
    out = 0.5 * np.vectorize(math.erfc)(-z / math.sqrt(2.0))
    return float(out) if np.ndim(out) == 0 else out


def normal_ppf(p: float, mean: float = 0.0, variance: float = 1.0) -> float:
    from scipy.special import ndtri
    return float(mean + math.sqrt(variance) * ndtri(p))


def kolmogorov_sf(t: float) -> float:
    """P(sup |B| > t) for the Brownian bridge B."""
    if t <= 0:
        return 1.0
    if t < 1.0:
        # theta-function form: 1 - sqrt(2 pi)/t sum exp(-(2k-1)^2 pi^2 / (8 t^2))
        k = np.arange(1, KS_TERMS + 1)
        cdf = math.sqrt(2 * math.pi) / t * np.sum(np.exp(-((2 * k - 1) ** 2) * math.pi**2 / (8 * t * t)))
        return float(min(1.0, max(0.0, 1.0 - cdf)))
    k = np.arange(1, KS_TERMS + 1)
    val = 2.0 * np.sum((-1.0) ** (k - 1) * np.exp(-2.0 * k * k * t * t))
    return float(min(1.0, max(0.0, val)))


def ks_one_sample(s, cdf: Callable, allow_small: bool = False) -> KsResult:
    """Sup distance between the empirical CDF and ``cdf`` (assumed continuous)."""
    s = _as_sample(s)
    m = len(s)
    if m == 0 or (m < MIN_KS and not allow_small):
        raise TooFewSamples(f"need at least {MIN_KS} values, got {m}")
    x = s.sorted_cache
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, m + 1)
    d = float(max(np.max(i / m - f), np.max(f - (i - 1) / m)))
    p = kolmogorov_sf(math.sqrt(m) * d) if m >= MIN_KS else float("nan")
    return KsResult(d, p, float(m))


def ks_two_sample(a, b) -> KsResult:
    a, b = _as_sample(a), _as_sample(b)
    na, nb = len(a), len(b)
    if min(na, nb) < MIN_KS:
        raise TooFewSamples(f"need at least {MIN_KS} values per sample")
    grid = np.concatenate([a.sorted_cache, b.sorted_cache])
    # right-continuous ECDFs evaluated at every pooled point
    fa = np.searchsorted(a.sorted_cache, grid, side="right") / na
    fb = np.searchsorted(b.sorted_cache, grid, side="right") / nb
    d = float(np.max(np.abs(fa - fb)))
    n_eff = na * nb / (na + nb)
    return KsResult(d, kolmogorov_sf(math.sqrt(n_eff) * d), n_eff)


def moments(s) -> Moments:
    s = _as_sample(s)
    m = len(s)
    if m < 2:
        raise TooFewSamples("moments need at least 2 values")
    v = s.values
    mean = float(np.mean(v))
    c = v - mean
    var = float(np.sum(c * c) / (m - 1))
    m2 = float(np.mean(c * c))
    if m2 == 0.0:
        return Moments(mean, var, 0.0, 0.0, degenerate=True)
    skew = float(np.mean(c**3) / m2**1.5)
    kurt = float(np.mean(c**4) / m2**2 - 3.0) if m >= 4 else 0.0
    return Moments(mean, var, skew, kurt)
