"""Finite-rank random perturbations sum_i theta_i u_i u_i^*.

Two models for the vectors: ``iid`` (u = x / sqrt(n) with i.i.d. entries)
and ``orthonormalised`` (Gram-Schmidt applied to r such vectors).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ensembles import EntryLaw, entry_law, sample_entries
from .errors import DegenerateFamily, DimensionMismatch
from .linalg import OrthonormalizationReport, SymmetricMatrix, gram_schmidt

MODELS = ("iid", "orthonormalised")
MAX_ATTEMPTS = 3


@dataclass(frozen=True)
class PerturbationSpec:
    thetas: tuple
    model: str = "orthonormalised"
    entry_law: EntryLaw = field(default_factory=lambda: entry_law("gaussian_real"))

    def __post_init__(self):
        th = tuple(float(t) for t in np.atleast_1d(np.asarray(self.thetas, dtype=float)))
        if any(t == 0.0 for t in th):
            raise ValueError("theta must be nonzero")
        if not all(np.isfinite(th)):
            raise ValueError("theta must be finite")
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}")
        object.__setattr__(self, "thetas", tuple(sorted(th)))
        object.__setattr__(self, "entry_law", entry_law(self.entry_law))

    @property
    def r(self) -> int:
        return len(self.thetas)

    @property
    def r0(self) -> int:
        return sum(t < 0 for t in self.thetas)


@dataclass(frozen=True)
class SpikeVectors:
    u: np.ndarray  # n x r, column s is u_s
    model: str
    ortho_report: OrthonormalizationReport | None = None

    @property
    def n(self) -> int:
        return self.u.shape[0]

    @property
    def r(self) -> int:
        return self.u.shape[1]


@dataclass(frozen=True)
class LowRankOperator:
    thetas: np.ndarray
    vectors: np.ndarray  # n x r

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def r(self) -> int:
        return self.vectors.shape[1]

    def dense(self) -> np.ndarray:
        v = self.vectors
        return (v * self.thetas[None, :]) @ v.conj().T

    def trace(self) -> float:
        return float(np.sum(self.thetas * np.sum(np.abs(self.vectors) ** 2, axis=0)))


def sample_spikes(n: int, spec: PerturbationSpec, rng: np.random.Generator) -> SpikeVectors:
    r = spec.r
    if r > n:
        raise DegenerateFamily(f"r = {r} exceeds n = {n}")
    if spec.model == "iid":
        x = sample_entries(spec.entry_law, (n, r), rng)
        return SpikeVectors(x / np.sqrt(n), "iid")
    last = None
    for _ in range(MAX_ATTEMPTS):
        raw = sample_entries(spec.entry_law, (n, r), rng)
        try:
            ortho, report = gram_schmidt(raw)
        except DegenerateFamily as exc:
            last = exc
            continue
        return SpikeVectors(ortho, "orthonormalised", report)
    raise DegenerateFamily(f"{MAX_ATTEMPTS} resamples failed: {last}")


def build_deformation(spikes: SpikeVectors, spec: PerturbationSpec) -> LowRankOperator:
    if spikes.r != spec.r:
        raise DimensionMismatch(f"{spikes.r} vectors for {spec.r} thetas")
    return LowRankOperator(np.asarray(spec.thetas, dtype=float), spikes.u)


def apply_deformation(X: SymmetricMatrix, R: LowRankOperator) -> SymmetricMatrix:
    if R.r == 0:
        return X
    if R.n != X.n:
        raise DimensionMismatch(f"matrix is {X.n}x{X.n} but spikes have dimension {R.n}")
    return SymmetricMatrix(X.entries + R.dense())
