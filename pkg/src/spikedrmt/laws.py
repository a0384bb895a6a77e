"""Limiting spectral measures: semicircle, Marchenko-Pastur, uniform, tables.

Each law knows its support ``[a, b]``, density, distribution function,
quantiles and its Stieltjes transform ``G(z) = int dmu(x) / (z - x)`` with
derivative, evaluated off the support.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsideSupport, QuantileFailure

QUANTILE_TOL = 1e-12


def _check_outside(law: "LimitLaw", z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if np.any((z >= law.a) & (z <= law.b)):
        raise InsideSupport(f"z must lie outside the support [{law.a}, {law.b}]")
    return z


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


@dataclass(frozen=True)
class LimitLaw:
    name: str
    a: float
    b: float

    def stieltjes(self, z):
        raise NotImplementedError

    def stieltjes_prime(self, z):
        raise NotImplementedError

    def edge_values(self) -> tuple[float, float]:
        """One-sided limits ``G(a-)`` and ``G(b+)``, possibly infinite."""
        raise NotImplementedError

    def pdf(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def quantile(self, p):
        """Inverse CDF by bisection on ``(a, b)`` to ``QUANTILE_TOL``."""
        p = np.asarray(p, dtype=float)
        if np.any((p < 0) | (p > 1)):
            raise ValueError("probabilities must lie in [0, 1]")
        lo = np.full(p.shape, self.a)
        hi = np.full(p.shape, self.b)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            below = self.cdf(mid) < p
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.all(hi - lo <= QUANTILE_TOL):
                break
        else:
            raise QuantileFailure(f"CDF inversion for {self.name} did not converge")
        return _scalar(0.5 * (lo + hi))

    def sample(self, size, rng: np.random.Generator):
        return self.quantile(rng.random(size))

    def second_inverse_moment(self, z):
        """``int dmu(x) / (z - x)^2``, i.e. ``-G'(z)``."""
        return -self.stieltjes_prime(z)

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Semicircle(LimitLaw):
    sigma: float = 1.0

    def stieltjes(self, z):
        z = _check_outside(self, z)
        root = np.sqrt(z * z - 4 * self.sigma**2)
        # conjugate form avoids cancellation for large |z|
        return _scalar(2.0 / (z + np.sign(z) * root))

    def stieltjes_prime(self, z):
        z = _check_outside(self, z)
        g = np.asarray(self.stieltjes(z))
        root = np.sqrt(z * z - 4 * self.sigma**2)
        return _scalar(-np.abs(g) / root)

    def edge_values(self):
        return -1.0 / self.sigma, 1.0 / self.sigma

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        s2 = self.sigma**2
        inside = np.clip(4 * s2 - x * x, 0.0, None)
        return _scalar(np.sqrt(inside) / (2 * np.pi * s2))

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), self.a, self.b)
        s = self.sigma
        val = 0.5 + (x * np.sqrt(np.clip(4 * s * s - x * x, 0.0, None))
                     + 4 * s * s * np.arcsin(np.clip(x / (2 * s), -1.0, 1.0))) / (4 * np.pi * s * s)
        return _scalar(np.clip(val, 0.0, 1.0))

    def to_dict(self):
        return {"name": "semicircle", "sigma": self.sigma}


@dataclass(frozen=True)
class MarchenkoPastur(LimitLaw):
    c: float = 0.5

    def _root(self, z):
        return np.sqrt(np.clip((z - self.c - 1) ** 2 - 4 * self.c, 0.0, None))

    def stieltjes(self, z):
        z = _check_outside(self, z)
        s = np.sign(z - self.a)
        return _scalar(2.0 / (z + self.c - 1 + s * self._root(z)))

    def stieltjes_prime(self, z):
        z = _check_outside(self, z)
        s = np.sign(z - self.a)
        g = np.asarray(self.stieltjes(z))
        return _scalar(g * (1 - self.c * g) / (-s * self._root(z)))

    def edge_values(self):
        return 2.0 / (self.a + self.c - 1), 2.0 / (self.b + self.c - 1)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.clip((self.b - x) * (x - self.a), 0.0, None)
        with np.errstate(divide="ignore", invalid="ignore"):
            dens = np.where(inside > 0, np.sqrt(inside) / (2 * np.pi * self.c * x), 0.0)
        return _scalar(dens)

    def cdf(self, x):
        # closed form after x = (1 + c) - 2 sqrt(c) cos(phi)
        c = self.c
        x = np.clip(np.asarray(x, dtype=float), self.a, self.b)
        h = 2 * np.sqrt(c)
        cosphi = np.clip((1 + c - x) / h, -1.0, 1.0)
        phi = np.arccos(cosphi)
        sinphi = np.sin(phi)
        with np.errstate(divide="ignore"):
            half_tan = np.where(1 + cosphi > 0, sinphi / (1 + cosphi), np.inf)
        term = 2 * (1 - c) * np.arctan(np.sqrt(self.b / self.a) * half_tan)
        val = (h * sinphi + (1 + c) * phi - term) / (2 * np.pi * c)
        return _scalar(np.clip(val, 0.0, 1.0))

    def to_dict(self):
        return {"name": "marchenko_pastur", "c": self.c}


@dataclass(frozen=True)
class UniformLaw(LimitLaw):
    def stieltjes(self, z):
        z = _check_outside(self, z)
        return _scalar(np.log((z - self.a) / (z - self.b)) / (self.b - self.a))

    def stieltjes_prime(self, z):
        z = _check_outside(self, z)
        return _scalar((1 / (z - self.a) - 1 / (z - self.b)) / (self.b - self.a))

    def edge_values(self):
        return -np.inf, np.inf

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return _scalar(np.where((x >= self.a) & (x <= self.b), 1 / (self.b - self.a), 0.0))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return _scalar(np.clip((x - self.a) / (self.b - self.a), 0.0, 1.0))

    def quantile(self, p):
        p = np.asarray(p, dtype=float)
        return _scalar(self.a + p * (self.b - self.a))

    def to_dict(self):
        return {"name": "uniform", "lo": self.a, "hi": self.b}


@dataclass(frozen=True)
class TableLaw(LimitLaw):
    """Atomic measure putting mass 1/N on each entry of a sorted table."""

    values: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def stieltjes(self, z):
        z = _check_outside(self, z)
        return _scalar(np.mean(1.0 / (z[..., None] - self.values), axis=-1))

    def stieltjes_prime(self, z):
        z = _check_outside(self, z)
        return _scalar(-np.mean(1.0 / (z[..., None] - self.values) ** 2, axis=-1))

    def edge_values(self):
        return -np.inf, np.inf

    def pdf(self, x):
        raise NotImplementedError("atomic table measures have no density")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return _scalar(np.searchsorted(self.values, x, side="right") / self.values.size)

    def quantile(self, p):
        p = np.asarray(p, dtype=float)
        idx = np.clip(np.ceil(p * self.values.size).astype(int) - 1, 0, self.values.size - 1)
        return _scalar(self.values[idx])

    def to_dict(self):
        return {"name": "custom_table", "values": self.values.tolist()}


def semicircle(sigma: float = 1.0) -> Semicircle:
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return Semicircle("semicircle", -2.0 * sigma, 2.0 * sigma, float(sigma))


def marchenko_pastur(c: float) -> MarchenkoPastur:
    if not 0 < c < 1:
        raise ValueError("Marchenko-Pastur ratio must satisfy 0 < c < 1")
    return MarchenkoPastur("marchenko_pastur", (1 - np.sqrt(c)) ** 2, (1 + np.sqrt(c)) ** 2, float(c))


def uniform(lo: float = 0.0, hi: float = 1.0) -> UniformLaw:
    if not lo < hi:
        raise ValueError("uniform law needs lo < hi")
    return UniformLaw("uniform", float(lo), float(hi))


def custom_table(values) -> TableLaw:
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size == 0 or not np.all(np.isfinite(v)):
        raise ValueError("table must be a non-empty sequence of finite reals")
    v.setflags(write=False)
    return TableLaw("custom_table", float(v[0]), float(v[-1]), v)


def law_from_dict(d: dict) -> LimitLaw:
    name = d.get("name")
    if name == "semicircle":
        return semicircle(d.get("sigma", 1.0))
    if name == "marchenko_pastur":
        return marchenko_pastur(d["c"])
    if name == "uniform":
        return uniform(d.get("lo", 0.0), d.get("hi", 1.0))
    if name == "custom_table":
        return custom_table(d["values"])
    raise ValueError(f"unknown limit law {name!r}")
