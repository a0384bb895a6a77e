"""Matrix ensembles and entry laws.

Dense samplers (``sample_wigner``, ``sample_wishart``) build the matrix
entry by entry.  For the orthogonally/unitarily invariant Gaussian cases the
eigenvalues can also be drawn exactly from the Dumitriu-Edelman tridiagonal
models, which costs O(n) random numbers and one tridiagonal eigensolve.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal

from . import laws
from .laws import LimitLaw
from .linalg import SymmetricMatrix

_SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class EntryLaw:
    name: str
    field: str

    @property
    def variance(self) -> float:
        return 1.0

    @property
    def kappa4(self) -> float:
        return fourth_cumulant(self)

    @property
    def is_gaussian(self) -> bool:
        return self.name.startswith("gaussian")


LAWS = {
    "gaussian_real": EntryLaw("gaussian_real", "real"),
    "gaussian_complex": EntryLaw("gaussian_complex", "complex"),
    "rademacher": EntryLaw("rademacher", "real"),
    "uniform_sym": EntryLaw("uniform_sym", "real"),
}


def entry_law(name: str | EntryLaw) -> EntryLaw:
    if isinstance(name, EntryLaw):
        return name
    try:
        return LAWS[name]
    except KeyError:
        raise ValueError(f"unknown entry law {name!r}; expected one of {sorted(LAWS)}") from None


def fourth_cumulant(law: EntryLaw | str) -> float:
    """E x^4 - 3 for real laws, E|z|^4 - 2 for complex ones."""
    law = entry_law(law)
    return {
        "gaussian_real": 0.0,
        "gaussian_complex": 0.0,
        "rademacher": -2.0,
        # E x^4 = 9/5 for the uniform law on [-sqrt 3, sqrt 3]
        "uniform_sym": 9.0 / 5.0 - 3.0,
    }[law.name]


def sample_entries(law: EntryLaw | str, shape, rng: np.random.Generator) -> np.ndarray:
    law = entry_law(law)
    if law.name == "gaussian_real":
        return rng.standard_normal(shape)
    if law.name == "gaussian_complex":
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    if law.name == "rademacher":
        return rng.choice(np.array([-1.0, 1.0]), size=shape)
    if law.name == "uniform_sym":
        return rng.uniform(-_SQRT3, _SQRT3, size=shape)
    raise AssertionError(law.name)


def diagonal_law(law: EntryLaw | str) -> EntryLaw:
    """Real law used on the Wigner diagonal (same family, variance one)."""
    law = entry_law(law)
    return LAWS["gaussian_real"] if law.name == "gaussian_complex" else law


@dataclass(frozen=True)
class EnsembleSpec:
    """Which unperturbed matrix to draw.

    ``invariant`` applies to Gaussian Wigner matrices: it doubles the real
    diagonal variance so the ensemble is exactly the GOE (the complex
    Gaussian Wigner matrix is already the GUE).
    """

    kind: str
    n: int
    entry_law: EntryLaw = LAWS["gaussian_real"]
    sigma: float = 1.0
    m: int | None = None
    c_ratio: float | None = None
    limit: LimitLaw | None = None
    invariant: bool = False

    def __post_init__(self):
        if self.kind not in ("wigner", "wishart", "iid_diagonal", "quantile_deterministic"):
            raise ValueError(f"unknown ensemble kind {self.kind!r}")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.kind == "wishart":
            if self.c_ratio is None and self.m is None:
                raise ValueError("wishart needs m or c_ratio")
            c = self.c_ratio if self.c_ratio is not None else self.n / self.m
            if not 0 < c < 1:
                raise ValueError("wishart requires 0 < c_ratio < 1")
        if self.kind in ("iid_diagonal", "quantile_deterministic") and self.limit is None:
            raise ValueError(f"{self.kind} needs a limit law")
        if self.invariant and not (self.kind == "wigner" and self.entry_law.is_gaussian):
            raise ValueError("invariant=True only applies to Gaussian Wigner ensembles")

    def wishart_m(self, n: int | None = None) -> int:
        n = self.n if n is None else n
        if self.c_ratio is not None:
            return max(n, int(round(n / self.c_ratio)))
        return self.m

    def limit_law(self) -> LimitLaw:
        if self.kind == "wigner":
            return laws.semicircle(self.sigma)
        if self.kind == "wishart":
            c = self.c_ratio if self.c_ratio is not None else self.n / self.m
            return laws.marchenko_pastur(c)
        return self.limit

    @property
    def is_rotation_invariant(self) -> bool:
        """True when the eigenvector matrix is Haar and independent of the spectrum."""
        if self.kind == "wigner":
            return self.entry_law.is_gaussian and (self.invariant or self.entry_law.field == "complex")
        if self.kind == "wishart":
            return self.entry_law.is_gaussian
        return False

    @property
    def is_diagonal(self) -> bool:
        return self.kind in ("iid_diagonal", "quantile_deterministic")


def sample_wigner(n: int, sigma: float, law: EntryLaw | str, rng: np.random.Generator,
                  invariant: bool = False) -> SymmetricMatrix:
    law = entry_law(law)
    off = sample_entries(law, (n, n), rng)
    diag = sample_entries(diagonal_law(law), n, rng)
    if invariant and law.field == "real":
        diag = diag * np.sqrt(2.0)
    x = np.triu(off, 1)
    x = x + x.conj().T
    x[np.diag_indices(n)] = diag
    return SymmetricMatrix(x * (sigma / np.sqrt(n)))


def sample_wishart(n: int, m: int, law: EntryLaw | str, rng: np.random.Generator) -> SymmetricMatrix:
    if n > m:
        raise ValueError("sample_wishart needs n <= m")
    g = sample_entries(law, (n, m), rng)
    return SymmetricMatrix(g @ g.conj().T / m)


def quantile_spectrum(limit: LimitLaw, n: int) -> np.ndarray:
    """Deterministic spectrum at the midpoint quantiles (i - 1/2)/n."""
    p = (np.arange(1, n + 1) - 0.5) / n
    return np.sort(np.atleast_1d(limit.quantile(p)))


def sample_iid_diagonal(measure: LimitLaw | Callable, n: int, rng: np.random.Generator) -> np.ndarray:
    """Sorted i.i.d. draws; ``measure`` is a LimitLaw or ``sampler(size, rng)``."""
    draw = measure.sample if isinstance(measure, LimitLaw) else measure
    return np.sort(np.asarray(draw(n, rng), dtype=float))


def sample_gaussian_wigner_spectrum(n: int, sigma: float, field: str,
                                    rng: np.random.Generator) -> np.ndarray:
    """Eigenvalues of the GOE (field='real') or GUE, via the Hermite tridiagonal model.

    Scaling matches ``sample_wigner(..., invariant=True)``: off-diagonal
    variance sigma^2/n, diagonal variance 2 sigma^2/n (GOE) or sigma^2/n (GUE).
    """
    beta = 1 if field == "real" else 2
    dof = beta * np.arange(n - 1, 0, -1)
    if beta == 1:
        d = rng.standard_normal(n) * sigma * np.sqrt(2.0 / n)
        e = np.sqrt(rng.chisquare(dof)) * sigma / np.sqrt(n) if n > 1 else np.empty(0)
    else:
        d = rng.standard_normal(n) * sigma / np.sqrt(n)
        e = np.sqrt(rng.chisquare(dof)) * sigma / np.sqrt(2.0 * n) if n > 1 else np.empty(0)
    return np.sort(eigvalsh_tridiagonal(d, e))


def sample_gaussian_wishart_spectrum(n: int, m: int, field: str,
                                     rng: np.random.Generator) -> np.ndarray:
    """Eigenvalues of G G^*/m for Gaussian G (n x m), via the Laguerre bidiagonal model."""
    if n > m:
        raise ValueError("needs n <= m")
    beta = 1 if field == "real" else 2
    scale = 1.0 if beta == 1 else 1.0 / np.sqrt(2.0)
    diag_b = np.sqrt(rng.chisquare(beta * np.arange(m, m - n, -1))) * scale
    sub_b = np.sqrt(rng.chisquare(beta * np.arange(n - 1, 0, -1))) * scale if n > 1 else np.empty(0)
    # B lower bidiagonal; B B^T is tridiagonal
    d = diag_b**2
    d[1:] += sub_b**2
    e = sub_b * diag_b[:-1]
    return np.sort(eigvalsh_tridiagonal(d, e)) / m
