"""Checkers for the spectral hypotheses on the unperturbed matrix.

H2: sqrt(n) (G_n(z) - G(z)) -> 0 off the support.
H3a: edge sums of inverse gaps, excluding the m_n = ceil(n^alpha) + p - 1
eigenvalues nearest to the edge, behave like the limit transform and grow slower than
n^2 (squared gaps) and n^4 (fourth powers).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..laws import LimitLaw
from ..stieltjes import stieltjes_empirical, thresholds

H2_TOL = 0.05
ETA_MIN = 0.05
SUM1_SLACK = 0.05


@dataclass
class H2Report:
    rows: list            # (n, z, replicates, rms of sqrt(n) * deviation)
    verdicts: dict        # z -> bool
    tolerance: float
    passes: bool

    def to_dict(self) -> dict:
        return {"rows": [list(r) for r in self.rows], "verdicts": {str(k): v for k, v in self.verdicts.items()},
                "tolerance": self.tolerance, "passes": self.passes}


def check_h2(spectra: dict, limit: LimitLaw, z_points, tol: float = H2_TOL) -> H2Report:
    """Decay verdict for sqrt(n) |G_n(z) - G(z)| across increasing n.

    ``spectra`` maps n to one spectrum or a list of replicate spectra; the
    per-n statistic is the root mean square over replicates.  A z passes when
    the value at the largest n is below half the value at the smallest n, or
    when every value is below ``tol``.
    """
    z_points = [float(z) for z in np.atleast_1d(z_points)]
    for z in z_points:
        if limit.a - 0.1 < z < limit.b + 0.1:
            raise ValueError(f"z = {z} is within 0.1 of the support")
    ns = sorted(spectra)
    rows, verdicts = [], {}
    for z in z_points:
        g = limit.stieltjes(z)
        series = []
        for n in ns:
            reps = spectra[n]
            if np.ndim(reps[0]) == 0:
                reps = [reps]
            devs = [math.sqrt(len(s)) * (stieltjes_empirical(s, z) - g) for s in reps]
            val = float(np.sqrt(np.mean(np.square(devs))))
            series.append(val)
            rows.append((n, z, len(reps), val))
        decays = len(series) > 1 and series[-1] < series[0] / 2
        verdicts[z] = bool(decays or all(v < tol for v in series))
    return H2Report(rows, verdicts, tol, all(verdicts.values()))


@dataclass
class H3aReport:
    n: int
    p: int
    alpha: float
    side: str
    m_n: int
    sum1: float
    sum2: float
    sum4: float
    eta2_hat: float
    eta4_hat: float
    passes: dict = field(default_factory=dict)

    @property
    def all_pass(self) -> bool:
        return all(self.passes.values())

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["all_pass"] = self.all_pass
        return d


def check_h3a(spectrum, p: int, alpha: float, side: str, limit: LimitLaw) -> H3aReport:
    lam = np.sort(np.asarray(spectrum, dtype=float))
    n = lam.size
    # the excluded block must reach past lambda_p, else the sums hit a zero gap;
    # ceil(n^alpha) + p - 1 is still O(n^alpha) and equals ceil(n^alpha) for p = 1
    m_n = math.ceil(n**alpha) + p - 1
    if not m_n < n - 1:
        raise ValueError("need p + ceil(n^alpha) < n")
    if side == "a":
        gaps = lam[p - 1] - lam[m_n:]          # lambda_p - lambda_i, i > m_n
    elif side == "b":
        gaps = lam[n - p] - lam[::-1][m_n:]    # lambda_{n-p+1} - lambda_{n-i+1}
    else:
        raise ValueError("side must be 'a' or 'b'")
    with np.errstate(divide="ignore"):
        inv = 1.0 / gaps
    if np.any(gaps == 0):
        s1, s2, s4 = float("nan"), float("inf"), float("inf")
    else:
        s1 = float(np.sum(inv) / n)
        s2 = float(np.sum(inv**2))
        s4 = float(np.sum(inv**4))
    logn = math.log(n)
    eta2 = 2 - math.log(s2) / logn if np.isfinite(s2) and s2 > 0 else (-math.inf if s2 > 0 else math.inf)
    eta4 = 4 - math.log(s4) / logn if np.isfinite(s4) and s4 > 0 else (-math.inf if s4 > 0 else math.inf)
    theta_low, theta_high = thresholds(limit)
    if side == "a":
        bound = 1 / theta_low if theta_low != 0 else -math.inf
        ok1 = bool(np.isfinite(s1) and s1 >= bound - SUM1_SLACK)
    else:
        bound = 1 / theta_high if theta_high != 0 else math.inf
        ok1 = bool(np.isfinite(s1) and s1 <= bound + SUM1_SLACK)
    passes = {"sum1": ok1, "sum2": bool(eta2 >= ETA_MIN), "sum4": bool(eta4 >= ETA_MIN)}
    return H3aReport(n, p, alpha, side, m_n, s1, s2, s4, eta2, eta4, passes)
