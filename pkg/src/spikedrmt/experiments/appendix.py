"""Monte Carlo checks of the auxiliary probabilistic facts.

quadform_clt: Gaussian limit of quadratic forms in random vectors.
concentration_check: tail decay of <g, A g> around its mean.
gram_convergence: the normalised Gram matrix of r random vectors is
identity plus O(n^{-1/2}).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..ensembles import EntryLaw, entry_law, fourth_cumulant, sample_entries

_CHUNK = 500


@dataclass
class QuadFormResult:
    empirical_variance: float
    predicted_variance: float
    sigma2: float
    omega: float
    samples: np.ndarray


def _quad_forms(A, x: np.ndarray) -> np.ndarray:
    """<x_k, A x_k> for each row x_k; A may be a 1-D diagonal."""
    if np.ndim(A) == 1:
        return np.real(np.sum(np.abs(x) ** 2 * A[None, :], axis=1))
    return np.real(np.einsum("ki,ki->k", x.conj(), x @ A.T))


def quadform_clt(A_builder, law: EntryLaw | str, n: int, trials: int,
                 rng: np.random.Generator) -> QuadFormResult:
    """Variance of sqrt(n) (<u, A u> - Tr A / n) with u = x / sqrt(n)."""
    law = entry_law(law)
    A = A_builder(n) if callable(A_builder) else A_builder
    A = np.asarray(A)
    diag = A if A.ndim == 1 else np.diag(A)
    tr = np.real(np.sum(diag))
    stats = []
    for start in range(0, trials, _CHUNK):
        m = min(_CHUNK, trials - start)
        x = sample_entries(law, (m, n), rng)
        stats.append((_quad_forms(A, x) - tr) / math.sqrt(n))
    s = np.concatenate(stats)
    sigma2 = float(np.sum(np.abs(A) ** 2) / n)
    omega = float(np.sum(np.abs(diag) ** 2) / n)
    base = 2.0 if law.field == "real" else 1.0
    pred = base * sigma2 + fourth_cumulant(law) * omega
    return QuadFormResult(float(np.var(s, ddof=1)), pred, sigma2, omega, s)


@dataclass
class ConcentrationTable:
    deltas: np.ndarray
    exceedance: np.ndarray
    scale_C: float
    fitted_c: float


def concentration_check(A, law: EntryLaw | str, n: int, trials: int, delta_grid,
                        rng: np.random.Generator) -> ConcentrationTable:
    """Empirical P(|<g, A g> - E| > delta) and the largest c with

        P <= 4 exp(-c min(delta / C, delta^2 / C^2)),   C^2 = Tr A A^*,

    holding at every grid point (inf when no exceedances are observed).
    """
    law = entry_law(law)
    A = np.asarray(A)
    deltas = np.asarray(delta_grid, dtype=float)
    diag = A if A.ndim == 1 else np.diag(A)
    mean = float(np.real(np.sum(diag)))
    dev = []
    for start in range(0, trials, _CHUNK):
        m = min(_CHUNK, trials - start)
        x = sample_entries(law, (m, n), rng)
        dev.append(np.abs(_quad_forms(A, x) - mean))
    dev = np.concatenate(dev)
    exc = np.array([np.mean(dev > d) for d in deltas])
    C = float(np.sqrt(np.sum(np.abs(A) ** 2)))
    cs = []
    if C > 0:
        for d, pr in zip(deltas, exc):
            if pr > 0 and d > 0:
                shape = min(d / C, (d / C) ** 2)
                cs.append(-math.log(min(pr / 4, 1.0)) / shape if pr < 4 else 0.0)
    return ConcentrationTable(deltas, exc, C, float(min(cs)) if cs else math.inf)


def gram_convergence(law: EntryLaw | str, n_values, r: int, trials: int,
                     rng: np.random.Generator) -> dict:
    """n -> samples of sqrt(n) max_ij |V_ij - delta_ij|, V = G^* G / n."""
    law = entry_law(law)
    out = {}
    for n in n_values:
        vals = np.empty(trials)
        for t in range(trials):
            g = sample_entries(law, (n, r), rng)
            v = g.conj().T @ g / n
            vals[t] = math.sqrt(n) * np.max(np.abs(v - np.eye(r)))
        out[int(n)] = vals
    return out
