"""Seeded, parallel Monte Carlo trials of spiked matrices.

Each trial (n, t) draws from Philox streams keyed by (master_seed, n, t,
purpose), so records are identical whatever the thread count or the order
in which trials finish.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache

import numpy as np
from threadpoolctl import threadpool_limits

from .. import rng as rngmod
from ..ensembles import (EnsembleSpec, quantile_spectrum, sample_gaussian_wigner_spectrum,
                         sample_gaussian_wishart_spectrum, sample_iid_diagonal, sample_entries,
                         sample_wigner, sample_wishart)
from ..errors import InsufficientTracking, SpikedError
from ..linalg import extreme_eigenvalues
from ..perturb import LowRankOperator, PerturbationSpec, apply_deformation, sample_spikes
from ..secular import SecularSystem, deformed_extremes
from ..stieltjes import PredictionReport, predict

SAMPLERS = ("auto", "dense", "spectral")


@dataclass(frozen=True)
class ExperimentConfig:
    ensemble: EnsembleSpec
    perturbation: PerturbationSpec
    n_values: tuple
    trials: int = 500
    master_seed: int = 0
    alpha_prime: float = 0.3
    h3a_alpha: float = 0.2
    track: int = 5
    sampler: str = "auto"

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 < self.h3a_alpha < self.alpha_prime < 1:
            raise ValueError("need 0 < alpha < alpha_prime < 1")
        if self.sampler not in SAMPLERS:
            raise ValueError(f"sampler must be one of {SAMPLERS}")
        if self.track < 1:
            raise ValueError("track must be >= 1")
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))

    def ensemble_at(self, n: int) -> EnsembleSpec:
        return replace(self.ensemble, n=n)

    def prediction(self, n: int | None = None) -> PredictionReport:
        ens = self.ensemble_at(n or self.n_values[0])
        fld = "complex" if "complex" in (ens.entry_law.field, self.perturbation.entry_law.field) else "real"
        return predict(ens.limit_law(), self.perturbation, field=fld, ensemble_kind=ens.kind)

    def resolved_sampler(self) -> str:
        """'diagonal', 'spectral' (tridiagonal spectrum + Haar frame) or 'dense'."""
        ens = self.ensemble
        if ens.is_diagonal:
            return "diagonal"
        spectral_ok = ens.is_rotation_invariant and self.perturbation.entry_law.field in (
            ens.entry_law.field, "real")
        if self.sampler == "spectral" and not spectral_ok:
            raise ValueError("spectral sampling needs a Gaussian invariant ensemble")
        if self.sampler != "auto":
            return self.sampler
        return "spectral" if spectral_ok else "dense"


@dataclass
class TrialRecord:
    trial_id: int
    n: int
    seed_stream_id: str
    sampler: str
    unperturbed_low: list = field(default_factory=list)
    unperturbed_high: list = field(default_factory=list)
    deformed_low: list = field(default_factory=list)
    deformed_high: list = field(default_factory=list)
    gamma: list = field(default_factory=list)
    sticking: dict = field(default_factory=dict)
    error: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrialRecord":
        return cls(**d)


def _haar_frame(n: int, r: int, fld: str, rng: np.random.Generator) -> np.ndarray:
    g = sample_entries("gaussian_complex" if fld == "complex" else "gaussian_real", (n, r), rng)
    q, rr = np.linalg.qr(g)
    d = np.diag(rr)
    return q * (d / np.abs(d))[None, :]


def _spike_factor(u: np.ndarray) -> np.ndarray:
    """Upper-triangular R with u = Q R, so that u^* u = R^* R."""
    if u.shape[1] == 0:
        return np.zeros((0, 0))
    return np.linalg.qr(u, mode="r")


@lru_cache(maxsize=32)
def _quantile_hashable(limit, n: int) -> np.ndarray:
    return quantile_spectrum(limit, n)


def _quantile_cached(limit, n: int) -> np.ndarray:
    try:
        return _quantile_hashable(limit, n)
    except TypeError:  # table laws hold arrays and are not hashable
        return quantile_spectrum(limit, n)


def _dense_extremes(X, k: int):
    if 2 * k <= X.n:
        return extreme_eigenvalues(X, k, k)
    vals = np.linalg.eigvalsh(X.entries)
    return vals[:k], vals[X.n - k:]


def _build_system(cfg: ExperimentConfig, n: int, t: int, sampler: str):
    """Secular system (eigs, weights, thetas) for trial t, or dense (X, R)."""
    ens = cfg.ensemble_at(n)
    spec = cfg.perturbation
    seed = cfg.master_seed
    u = sample_spikes(n, spec, rngmod.stream(seed, n, t, "spikes")).u
    thetas = np.asarray(spec.thetas, dtype=float)
    mrng = rngmod.stream(seed, n, t, "matrix")

    if sampler == "diagonal":
        if ens.kind == "quantile_deterministic":
            eigs = _quantile_cached(ens.limit, n)
        else:
            eigs = sample_iid_diagonal(ens.limit, n, mrng)
        return SecularSystem.from_diagonal(eigs, LowRankOperator(thetas, u)), None

    fld = ens.entry_law.field
    if sampler == "spectral":
        if ens.kind == "wigner":
            eigs = sample_gaussian_wigner_spectrum(n, ens.sigma, fld, mrng)
        else:
            eigs = sample_gaussian_wishart_spectrum(n, ens.wishart_m(n), fld, mrng)
        if spec.r:
            frame = _haar_frame(n, spec.r, fld, rngmod.stream(seed, n, t, "frame"))
            w = (frame @ _spike_factor(u)).T
        else:
            w = np.zeros((0, n))
        return SecularSystem(eigs, w, thetas), None

    if ens.kind == "wigner":
        X = sample_wigner(n, ens.sigma, ens.entry_law, mrng, invariant=ens.invariant)
    elif ens.kind == "wishart":
        X = sample_wishart(n, ens.wishart_m(n), ens.entry_law, mrng)
    else:
        raise ValueError(f"dense sampler does not apply to {ens.kind}")
    return None, (X, LowRankOperator(thetas, u))


def _sticking(lam_low, lam_high, def_low, def_high, r, r0, p_minus, p_plus, n):
    """Window distances (literal index windows) and index-matched distances."""
    k = len(def_low)
    low_win, high_win, low_match, high_match = [], [], [], []
    for i in range(1, k + 1):
        top = i + r - r0  # window 1 <= k <= i + r - r0
        low_win.append(float(np.min(np.abs(def_low[i - 1] - lam_low[:top]))))
        # deformed index m = n - q + 1, window k >= m - r0
        q = i
        depth = q + r0  # entries from the top needed
        high_win.append(float(np.min(np.abs(def_high[-q] - lam_high[len(lam_high) - depth:]))))
    for j in range(1, k - p_minus + 1):
        low_match.append(float(abs(def_low[p_minus + j - 1] - lam_low[j - 1])))
    for j in range(1, k - p_plus + 1):
        high_match.append(float(abs(def_high[-(p_plus + j)] - lam_high[-j])))
    return {"low_window": low_win, "high_window": high_win,
            "low_matched": low_match, "high_matched": high_match}


def run_one(cfg: ExperimentConfig, n: int, t: int, report: PredictionReport) -> TrialRecord:
    sampler = cfg.resolved_sampler()
    rec = TrialRecord(t, n, rngmod.stream_id(cfg.master_seed, n, t), sampler)
    spec = cfg.perturbation
    k = min(cfg.track, n)
    k_x = min(cfg.track + spec.r, n)
    try:
        sys, dense = _build_system(cfg, n, t, sampler)
        if sys is not None:
            lam_low, lam_high = sys.eigs[:k_x].copy(), sys.eigs[n - k_x:].copy()
            def_low, def_high = deformed_extremes(sys, k, k)
        else:
            X, R = dense
            lam_low, lam_high = _dense_extremes(X, k_x)
            def_low, def_high = _dense_extremes(apply_deformation(X, R), k)
    except (SpikedError, np.linalg.LinAlgError) as exc:
        rec.error = f"{type(exc).__name__}: {exc}"
        return rec

    rec.unperturbed_low = [float(x) for x in lam_low]
    rec.unperturbed_high = [float(x) for x in lam_high]
    rec.deformed_low = [float(x) for x in def_low]
    rec.deformed_high = [float(x) for x in def_high]

    p_minus, p_plus = report.p_minus, report.p_plus
    gam = []
    left = [s for s in report.spikes if s.classification == "deviates_left"]
    right = [s for s in report.spikes if s.classification == "deviates_right"]
    if len(left) <= k and len(right) <= k:
        for i, s in enumerate(left):
            gam.append(math.sqrt(n) * (def_low[i] - s.rho))
        for i, s in enumerate(right):
            gam.append(math.sqrt(n) * (def_high[k - len(right) + i] - s.rho))
    rec.gamma = [float(g) for g in gam]
    rec.sticking = _sticking(lam_low, lam_high, def_low, def_high, spec.r, spec.r0, p_minus, p_plus, n)
    return rec


def run_trials(cfg: ExperimentConfig, threads: int = 1) -> list[TrialRecord]:
    """All trials for every n, sorted by (n, trial_id)."""
    threads = (os.cpu_count() or 1) if threads == 0 else max(1, threads)
    jobs = [(n, t) for n in cfg.n_values for t in range(cfg.trials)]
    reports = {n: cfg.prediction(n) for n in cfg.n_values}
    with threadpool_limits(limits=1):
        if threads == 1:
            out = [run_one(cfg, n, t, reports[n]) for n, t in jobs]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                out = list(pool.map(lambda job: run_one(cfg, job[0], job[1], reports[job[0]]), jobs))
    out.sort(key=lambda rec: (rec.n, rec.trial_id))
    return out


# ---------------------------------------------------------------- analysis

@dataclass
class FluctuationSample:
    group_id: int
    alpha: float
    multiplicity: int
    gammas: np.ndarray          # trials x multiplicity, ascending within a trial
    target_variance: float
    standardized: np.ndarray    # gammas / sqrt(target_variance)
    kappa4_addend: float | None = None


def gamma_statistics(records, report: PredictionReport, n: int | None = None) -> list[FluctuationSample]:
    dev = [s for s in report.spikes if s.classification.startswith("deviates")]
    if not dev:
        return []
    recs = [r for r in records if r.error is None and (n is None or r.n == n) and len(r.gamma) == len(dev)]
    order = [s.group_id for s in dev]  # same order as TrialRecord.gamma
    g = np.array([r.gamma for r in recs], dtype=float).reshape(len(recs), len(dev))
    out = []
    for grp_id, grp in enumerate(report.groups):
        cols = [i for i, gid in enumerate(order) if gid == grp_id]
        sp = dev[cols[0]]
        var = sp.gauss_variance
        vals = np.sort(g[:, cols], axis=1)
        out.append(FluctuationSample(grp_id, grp.alpha, grp.multiplicity, vals, var,
                                     vals / math.sqrt(var) if var and var > 0 else vals * np.nan,
                                     sp.kappa4_addend))
    return out


def goe2_gap_mean(scale: float, fld: str, rng: np.random.Generator, samples: int = 200_000) -> float:
    """E(lambda_2 - lambda_1) for scale * GOE(2) (or GUE(2)), by direct 2x2 sampling.

    Diagonal variance 2 (GOE) or 1 (GUE), off-diagonal E|x|^2 = 1.
    """
    if fld == "real":
        a = rng.standard_normal(samples) * math.sqrt(2.0)
        d = rng.standard_normal(samples) * math.sqrt(2.0)
        b2 = rng.standard_normal(samples) ** 2
    else:
        a = rng.standard_normal(samples)
        d = rng.standard_normal(samples)
        b2 = (rng.standard_normal(samples) ** 2 + rng.standard_normal(samples) ** 2) / 2
    m = np.zeros((samples, 2, 2))
    m[:, 0, 0], m[:, 1, 1] = a, d
    m[:, 0, 1] = m[:, 1, 0] = np.sqrt(b2)
    ev = np.linalg.eigvalsh(m)
    return float(scale * np.mean(ev[:, 1] - ev[:, 0]))


@dataclass
class StickingSample:
    side: str
    index: int
    kind: str
    distances: np.ndarray
    threshold: float
    fraction_within: float


def sticking_distances(records, side: str = "high", index: int = 1, kind: str = "window",
                       alpha_prime: float = 0.3, n: int | None = None) -> StickingSample:
    """Distances for the ``index``-th tracked eigenvalue from an edge (1 = extreme)."""
    key = f"{side}_{'window' if kind == 'window' else 'matched'}"
    recs = [r for r in records if r.error is None and (n is None or r.n == n)]
    if not recs:
        raise InsufficientTracking("no successful records")
    ns = {r.n for r in recs}
    if len(ns) != 1:
        raise ValueError("records mix several n; pass n=")
    nn = ns.pop()
    vals = []
    for r in recs:
        arr = r.sticking.get(key, [])
        if index > len(arr):
            raise InsufficientTracking(f"index {index} not tracked on side {side} ({len(arr)} available)")
        vals.append(arr[index - 1])
    d = np.asarray(vals, dtype=float)
    thr = nn ** (-1 + alpha_prime)
    return StickingSample(side, index, kind, d, thr, float(np.mean(d <= thr)))
