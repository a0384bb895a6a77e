"""Stieltjes-transform toolkit and outlier predictions.

Given a limit law with transform G, a spike of strength theta produces an
outlier at rho = G^{-1}(1/theta) whenever 1/theta lies in the range of G
outside the support; otherwise the extreme eigenvalue sticks to the edge.
"""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .errors import NotDeviating, PoleHit
from .laws import (LimitLaw, MarchenkoPastur, Semicircle, TableLaw, UniformLaw,  # noqa: F401
                   custom_table, law_from_dict, marchenko_pastur, semicircle, uniform)
from .linalg import SymmetricMatrix, symmetric_eigh
from .perturb import PerturbationSpec

CRITICAL_TOL = 1e-9
POLE_TOL = 1e-14
BISECTION_STEPS = 200


class CriticalThetaWarning(UserWarning):
    """theta sits on a threshold, where no limit theorem is available."""


def stieltjes_empirical(spectrum, z):
    lam = np.asarray(spectrum, dtype=float)
    zz = np.asarray(z, dtype=float)
    gaps = zz[..., None] - lam
    if np.any(np.abs(gaps) < POLE_TOL * (1 + np.abs(zz[..., None]))):
        raise PoleHit(f"z = {z} coincides with an eigenvalue")
    out = np.mean(1.0 / gaps, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def stieltjes_closed_form(limit: LimitLaw, z):
    return limit.stieltjes(z)


def thresholds(limit: LimitLaw) -> tuple[float, float]:
    g_a, g_b = limit.edge_values()
    theta_low = 0.0 if np.isinf(g_a) else 1.0 / float(g_a)
    theta_high = 0.0 if np.isinf(g_b) else 1.0 / float(g_b)
    return theta_low, theta_high


def is_critical(limit: LimitLaw, theta: float) -> bool:
    lo, hi = thresholds(limit)
    return (hi > 0 and abs(theta - hi) < CRITICAL_TOL) or (lo < 0 and abs(theta - lo) < CRITICAL_TOL)


def _bisect_decreasing(f, lo: float, hi: float) -> float:
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def rho(limit: LimitLaw, theta: float) -> float:
    """Almost-sure limit of the extreme eigenvalue driven by ``theta``."""
    if theta == 0:
        raise ValueError("theta must be nonzero")
    theta_low, theta_high = thresholds(limit)
    if is_critical(limit, theta):
        warnings.warn(f"theta = {theta} is critical", CriticalThetaWarning, stacklevel=2)
        return limit.b if theta > 0 else limit.a
    target = 1.0 / theta
    f = lambda z: limit.stieltjes(z) - target  # noqa: E731
    width = max(1.0, limit.b - limit.a)
    if theta > theta_high and theta > 0:
        step = width
        while f(limit.b + step) > 0:
            step *= 2
        return _bisect_decreasing(f, limit.b, limit.b + step)
    if theta < theta_low and theta < 0:
        step = width
        while f(limit.a - step) < 0:
            step *= 2
        return _bisect_decreasing(f, limit.a - step, limit.a)
    return limit.b if theta > 0 else limit.a


def classify(limit: LimitLaw, theta: float) -> str:
    if is_critical(limit, theta):
        return "critical"
    theta_low, theta_high = thresholds(limit)
    if theta > 0:
        return "deviates_right" if theta > theta_high else "sticks_right"
    return "deviates_left" if theta < theta_low else "sticks_left"


def fluctuation_scale(limit: LimitLaw, alpha: float, model: str) -> float:
    if not classify(limit, alpha).startswith("deviates"):
        raise NotDeviating(f"theta = {alpha} does not produce an outlier")
    z = rho(limit, alpha)
    gp = limit.stieltjes_prime(z)
    if model == "iid":
        c2 = -1.0 / gp
    elif model == "orthonormalised":
        c2 = (-gp - 1.0 / alpha**2) / gp**2
    else:
        raise ValueError(f"unknown model {model!r}")
    return float(np.sqrt(c2))


def kappa4_correction(l_value: float, kappa4: float, g_prime: float) -> float:
    """Extra variance of gamma from non-Gaussian spike entries.

    Linearising G_n(lambda) = 1/theta around rho turns the quadratic-form
    variance kappa4 * l into kappa4 * l / G'(rho)^2 on the eigenvalue scale.
    """
    if g_prime >= 0:
        raise ValueError("G' must be negative off the support")
    if kappa4 == 0 or l_value == 0:
        return 0.0
    return float(l_value * kappa4 / g_prime**2)


def diag_resolvent_stat(X, z: float, model: str, eig=None) -> float:
    """Mean square (iid) or variance (orthonormalised) of the resolvent diagonal.

    ``X`` is a SymmetricMatrix, or a 1-D array holding a diagonal matrix.
    ``eig`` may pass a precomputed ``(values, vectors)`` pair.
    """
    if isinstance(X, SymmetricMatrix) or (eig is not None):
        values, vectors = eig if eig is not None else symmetric_eigh(X)
        gaps = z - values
        if np.any(np.abs(gaps) < POLE_TOL * (1 + abs(z))):
            raise PoleHit(f"z = {z} is an eigenvalue")
        r_diag = (np.abs(vectors) ** 2) @ (1.0 / gaps)
    else:
        d = np.asarray(X, dtype=float)
        gaps = z - d
        if np.any(np.abs(gaps) < POLE_TOL * (1 + abs(z))):
            raise PoleHit(f"z = {z} is an eigenvalue")
        r_diag = 1.0 / gaps
    if model == "iid":
        return float(np.mean(r_diag**2))
    if model == "orthonormalised":
        return float(np.mean((r_diag - r_diag.mean()) ** 2))
    raise ValueError(f"unknown model {model!r}")


def limiting_l(kind: str, model: str, limit: LimitLaw) -> Callable[[float], float]:
    """Deterministic limit of ``diag_resolvent_stat`` for the built-in ensembles.

    Wigner and Wishart resolvents have asymptotically constant diagonal
    (equal to G); diagonal matrices have R_ii = 1/(z - lambda_i).
    """
    if kind in ("wigner", "wishart"):
        if model == "iid":
            return lambda z: limit.stieltjes(z) ** 2
        return lambda z: 0.0
    if model == "iid":
        return lambda z: -limit.stieltjes_prime(z)
    return lambda z: -limit.stieltjes_prime(z) - limit.stieltjes(z) ** 2


@dataclass
class SpikePrediction:
    theta: float
    classification: str
    rho: float
    c_alpha: float | None
    gauss_variance: float | None
    kappa4_addend: float | None
    group_id: int | None


@dataclass
class Group:
    alpha: float
    multiplicity: int
    side: str


@dataclass
class PredictionReport:
    theta_low: float
    theta_high: float
    model: str
    field: str
    kappa4: float
    spikes: list[SpikePrediction]
    groups: list[Group] = field(default_factory=list)
    limit: dict = field(default_factory=dict)

    @property
    def p_minus(self) -> int:
        return sum(s.classification == "deviates_left" for s in self.spikes)

    @property
    def p_plus(self) -> int:
        return sum(s.classification == "deviates_right" for s in self.spikes)

    @property
    def any_critical(self) -> bool:
        return any(s.classification == "critical" for s in self.spikes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["p_minus"] = self.p_minus
        d["p_plus"] = self.p_plus
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PredictionReport":
        return cls(
            theta_low=d["theta_low"], theta_high=d["theta_high"], model=d["model"],
            field=d["field"], kappa4=d["kappa4"],
            spikes=[SpikePrediction(**s) for s in d["spikes"]],
            groups=[Group(**g) for g in d["groups"]],
            limit=d.get("limit", {}),
        )


def predict(limit: LimitLaw, spec: PerturbationSpec, *, field: str | None = None,
            l_func: Callable[[float], float] | None = None,
            ensemble_kind: str | None = None) -> PredictionReport:
    """Per-spike outlier predictions.

    The kappa4 addend needs l(rho); it is taken from ``l_func`` or, failing
    that, from the deterministic limit for ``ensemble_kind``.  When neither is
    available and kappa4 != 0 the addend is left as None.
    """
    field = field or spec.entry_law.field
    k4 = spec.entry_law.kappa4
    if l_func is None and ensemble_kind is not None:
        l_func = limiting_l(ensemble_kind, spec.model, limit)
    theta_low, theta_high = thresholds(limit)

    deviating = sorted({t for t in spec.thetas if classify(limit, t).startswith("deviates")})
    group_index = {t: j for j, t in enumerate(deviating)}
    groups = [Group(t, sum(s == t for s in spec.thetas), "right" if t > 0 else "left")
              for t in deviating]

    spikes = []
    for t in spec.thetas:
        cls_ = classify(limit, t)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", CriticalThetaWarning)
            z = rho(limit, t)
        if not cls_.startswith("deviates"):
            spikes.append(SpikePrediction(t, cls_, z, None, None, None, None))
            continue
        c = fluctuation_scale(limit, t, spec.model)
        base = (2.0 if field == "real" else 1.0) * c * c
        if k4 == 0:
            addend = 0.0
        elif l_func is not None:
            addend = kappa4_correction(l_func(z), k4, limit.stieltjes_prime(z))
        else:
            addend = None
        # the addend can cancel the base exactly (e.g. +-1 entries on a diagonal X)
        var = max(0.0, base + (addend or 0.0))
        spikes.append(SpikePrediction(t, cls_, z, c, var, addend, group_index[t]))
    return PredictionReport(theta_low, theta_high, spec.model, field, k4, spikes, groups,
                            limit.to_dict())
