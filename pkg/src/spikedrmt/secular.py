"""Deformed eigenvalues from the resolvent determinant.

Write X = Q diag(lam) Q^* and w_s = Q^* u_s.  Off the spectrum of X, z is an
eigenvalue of X + sum theta_s u_s u_s^* iff det M(z) = 0 with

    M(z)[s, t] = sum_l conj(w_s[l]) w_t[l] / (z - lam_l) - delta_st / theta_s.

Rank one reduces to a scalar secular equation with one root between any two
consecutive poles.  For rank r the number of deformed eigenvalues above z is

    #{lam_l > z} + n_+(M(z)) - r_0

(Haynsworth inertia additivity applied to the bordered matrix), which gives a
bisection for any individual eigenvalue without scanning for sign changes.
"""
from __future__ import annotations

from dataclasses import dataclass

import warnings

import numpy as np
import scipy.linalg

from .errors import BracketFailure, PoleHit, WindowTouchesSpectrum
from .linalg import SymmetricMatrix, extreme_eigenvalues, symmetric_eigh, symmetric_eigvalsh
from .perturb import LowRankOperator, apply_deformation

DEFLATION_TOL = 1e-14
COALESCE_TOL = 1e-12
ROOT_TOL = 1e-13
POLE_TOL = 1e-14
NEWTON_STEPS = 3
GRID_STEP = 1e-3
_CHUNK = 256


@dataclass(frozen=True)
class SecularSystem:
    eigs: np.ndarray      # sorted spectrum of X
    weights: np.ndarray   # r x n, weights[s, l] = (Q^* u_s)_l
    thetas: np.ndarray

    def __post_init__(self):
        eigs = np.asarray(self.eigs, dtype=float)
        w = np.atleast_2d(np.asarray(self.weights))
        th = np.atleast_1d(np.asarray(self.thetas, dtype=float))
        if np.any(np.diff(eigs) < 0):
            raise ValueError("eigs must be sorted ascending")
        if w.shape != (th.size, eigs.size) and not (th.size == 0 and w.size == 0):
            raise ValueError(f"weights shape {w.shape} does not match r={th.size}, n={eigs.size}")
        object.__setattr__(self, "eigs", eigs)
        object.__setattr__(self, "weights", w.reshape(th.size, eigs.size))
        object.__setattr__(self, "thetas", th)

    @property
    def n(self) -> int:
        return self.eigs.size

    @property
    def r(self) -> int:
        return self.thetas.size

    @property
    def r0(self) -> int:
        return int(np.sum(self.thetas < 0))

    @classmethod
    def from_matrix(cls, X: SymmetricMatrix, R: LowRankOperator, eig=None) -> "SecularSystem":
        values, vectors = eig if eig is not None else symmetric_eigh(X)
        return cls(values, (vectors.conj().T @ R.vectors).T, R.thetas)

    @classmethod
    def from_diagonal(cls, diag, R: LowRankOperator) -> "SecularSystem":
        d = np.asarray(diag, dtype=float)
        order = np.argsort(d, kind="stable")
        return cls(d[order], R.vectors[order].T, R.thetas)


@dataclass(frozen=True)
class DeformedSpectrum:
    values: np.ndarray
    method: str


def _check_pole(sys: SecularSystem, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    gaps = z[..., None] - sys.eigs
    if np.any(np.abs(gaps) < POLE_TOL * (1 + np.abs(z[..., None]))):
        raise PoleHit(f"z = {z} coincides with an eigenvalue of X")
    return gaps


def _resolvent_batch(sys: SecularSystem, gaps: np.ndarray) -> np.ndarray:
    """M(z) for a batch of gap rows z - eigs, shape (..., r, r)."""
    w = sys.weights
    scaled = w[None, :, :] / gaps.reshape(-1, 1, sys.n)
    m = np.einsum("sl,gtl->gst", w.conj(), scaled)
    m = m - np.diag(1.0 / sys.thetas)[None]
    return m.reshape(gaps.shape[:-1] + (sys.r, sys.r))


def resolvent_matrix(sys: SecularSystem, z: float) -> np.ndarray:
    gaps = _check_pole(sys, z)
    m = _resolvent_batch(sys, gaps)
    return m if np.iscomplexobj(m) else m.real


def secular_value(sys: SecularSystem, z: float) -> float:
    m = resolvent_matrix(sys, z)
    with warnings.catch_warnings():
        # an exactly singular M just means z is a deformed eigenvalue
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(m)
    sign = (-1.0) ** np.sum(piv != np.arange(piv.size))
    return float(np.real(sign * np.prod(np.diag(lu))))


def det_identity_residual(X, V, D, z: float) -> float:
    """Relative gap between both sides of

        det(z - X - V D V^*) = det(z - X) det(D) det(D^{-1} - V^* (z - X)^{-1} V).
    """
    x = X.entries if isinstance(X, SymmetricMatrix) else np.asarray(X)
    v = np.atleast_2d(np.asarray(V))
    if v.shape[0] != x.shape[0]:
        v = v.T
    d = np.atleast_2d(np.diag(D)) if np.ndim(D) == 1 else np.asarray(D)
    eye = np.eye(x.shape[0])
    zx = z * eye - x
    lhs = np.linalg.det(zx - v @ d @ v.conj().T)
    inner = np.linalg.inv(d) - v.conj().T @ np.linalg.solve(zx, v)
    rhs = np.linalg.det(zx) * np.linalg.det(d) * np.linalg.det(inner)
    return float(abs(lhs - rhs) / max(1.0, abs(lhs)))


# ---------------------------------------------------------------- rank one

def _deflate(d: np.ndarray, zeta: np.ndarray):
    """Split into (poles, pole weights, pass-through eigenvalues)."""
    total = zeta.sum()
    keep = zeta >= DEFLATION_TOL * total if total > 0 else np.zeros(d.size, bool)
    passthrough = [d[~keep]]
    dk, zk = d[keep], zeta[keep]
    if dk.size == 0:
        return dk, zk, np.concatenate(passthrough)
    starts = np.r_[True, np.diff(dk) > COALESCE_TOL * (1 + np.abs(dk[1:]))]
    gid = np.cumsum(starts) - 1
    poles = dk[starts]
    pw = np.bincount(gid, weights=zk)
    passthrough.append(dk[~starts])
    return poles, pw, np.concatenate(passthrough)


def _roots_positive(poles, pw, theta, idx) -> np.ndarray:
    """Roots number ``idx`` (0-based, ascending) of sum pw/(x - poles) = 1/theta, theta > 0."""
    K = poles.size
    idx = np.asarray(idx, dtype=int)
    out = np.empty(idx.size)
    inv_theta = 1.0 / theta
    for start in range(0, idx.size, _CHUNK):
        j = idx[start:start + _CHUNK]
        last = j == K - 1
        left = poles[j]
        right = np.where(last, poles[-1] + theta * pw.sum(), poles[np.minimum(j + 1, K - 1)])
        mid = 0.5 * (left + right)
        g_mid = (pw[None, :] / (mid[:, None] - poles[None, :])).sum(axis=1) - inv_theta
        upper = g_mid > 0  # decreasing, so the root lies in (mid, right)
        from_right = upper & ~last
        origin = np.where(from_right, right, left)
        lo = np.where(upper, mid, left) - origin
        hi = np.where(upper, right, mid) - origin
        if np.any(hi <= lo):
            raise BracketFailure("empty secular bracket")
        # shifted coordinates: tau = x - origin, so the nearest pole sits exactly at 0
        delta = poles[None, :] - origin[:, None]

        def g(tau):
            return (pw[None, :] / (tau[:, None] - delta)).sum(axis=1) - inv_theta

        for _ in range(200):
            width = hi - lo
            if np.all(width <= ROOT_TOL * (1 + np.abs(origin + lo))):
                break
            t = 0.5 * (lo + hi)
            pos = g(t) > 0
            lo = np.where(pos, t, lo)
            hi = np.where(pos, hi, t)
        tau = 0.5 * (lo + hi)
        for _ in range(NEWTON_STEPS):
            inv = 1.0 / (tau[:, None] - delta)
            val = (pw[None, :] * inv).sum(axis=1) - inv_theta
            der = -(pw[None, :] * inv * inv).sum(axis=1)
            step = np.where(der != 0, val / np.where(der != 0, der, 1.0), 0.0)
            cand = tau - step
            ok = np.isfinite(cand) & (cand >= lo) & (cand <= hi)
            tau = np.where(ok, cand, tau)
        out[start:start + _CHUNK] = origin + tau
    return out


def _rank_one_parts(eigs, zeta, theta, k_low=None, k_high=None):
    """Roots and pass-through values for theta > 0; partial when k's given."""
    poles, pw, passthrough = _deflate(eigs, zeta)
    K = poles.size
    if k_low is None and k_high is None:
        idx = np.arange(K)
    else:
        lo = np.arange(min(k_low or 0, K))
        hi = np.arange(K - min(k_high or 0, K), K)
        idx = np.union1d(lo, hi)
    roots = _roots_positive(poles, pw, theta, idx) if K else np.empty(0)
    return roots, passthrough


def solve_rank_one(sys: SecularSystem) -> DeformedSpectrum:
    if sys.r != 1:
        raise ValueError("solve_rank_one needs r = 1")
    theta = float(sys.thetas[0])
    zeta = np.abs(sys.weights[0]) ** 2
    if theta > 0:
        roots, rest = _rank_one_parts(sys.eigs, zeta, theta)
        vals = np.concatenate([roots, rest])
    else:
        # X + theta u u^* = -((-X) + |theta| u u^*)
        roots, rest = _rank_one_parts(-sys.eigs[::-1], zeta[::-1], -theta)
        vals = -np.concatenate([roots, rest])
    return DeformedSpectrum(np.sort(vals), "secular_rank1")


def rank_one_extremes(sys: SecularSystem, k_low: int, k_high: int):
    """The k_low smallest and k_high largest deformed eigenvalues (rank one)."""
    theta = float(sys.thetas[0])
    zeta = np.abs(sys.weights[0]) ** 2
    if theta > 0:
        roots, rest = _rank_one_parts(sys.eigs, zeta, theta, k_low, k_high)
        vals = np.sort(np.concatenate([roots, rest]))
    else:
        roots, rest = _rank_one_parts(-sys.eigs[::-1], zeta[::-1], -theta, k_high, k_low)
        vals = np.sort(-np.concatenate([roots, rest]))
    return vals[:k_low], vals[vals.size - k_high:]


# ---------------------------------------------------------------- rank r

def count_above(sys: SecularSystem, z) -> np.ndarray:
    """Number of deformed eigenvalues strictly greater than each z."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    gaps = z[:, None] - sys.eigs[None, :]
    tiny = POLE_TOL * (1 + np.abs(z[:, None]))
    # nudge off exact poles; the count is locally constant there
    gaps = np.where(np.abs(gaps) < tiny, np.where(gaps < 0, -tiny, tiny), gaps)
    above_x = np.sum(gaps < 0, axis=1)
    if sys.r == 0:
        return above_x
    m = _resolvent_batch(sys, gaps)
    ev = np.linalg.eigvalsh(m)
    return above_x + np.sum(ev > 0, axis=1) - sys.r0


def _spread(sys: SecularSystem) -> float:
    return float(np.sum(np.abs(sys.thetas) * np.sum(np.abs(sys.weights) ** 2, axis=1)))


def eigenvalues_by_index(sys: SecularSystem, indices) -> np.ndarray:
    """Deformed eigenvalues with the given 0-based ascending indices, by inertia bisection."""
    idx = np.asarray(indices, dtype=int)
    n = sys.n
    pad = _spread(sys) + 1.0
    lo = np.full(idx.size, sys.eigs[0] - pad)
    hi = np.full(idx.size, sys.eigs[-1] + pad)
    need = n - idx  # z < value  <=>  count_above(z) >= n - idx
    for _ in range(200):
        if np.all(hi - lo <= ROOT_TOL * (1 + np.maximum(np.abs(lo), np.abs(hi)))):
            break
        mid = 0.5 * (lo + hi)
        below = count_above(sys, mid) >= need
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def deformed_extremes(sys: SecularSystem, k_low: int, k_high: int):
    if sys.r == 0:
        return sys.eigs[:k_low].copy(), sys.eigs[sys.n - k_high:].copy()
    if sys.r == 1:
        return rank_one_extremes(sys, k_low, k_high)
    idx = np.r_[np.arange(k_low), np.arange(sys.n - k_high, sys.n)]
    vals = eigenvalues_by_index(sys, idx)
    return vals[:k_low], vals[k_low:]


def solve_outliers_rank_r(sys: SecularSystem, search_window) -> np.ndarray:
    """All deformed eigenvalues inside a window that avoids the spectrum of X.

    Sign changes of det M on a grid of spacing 1e-3 are refined by bisection.
    Cells hiding an even number of roots (close pairs) are detected with the
    inertia count and resolved by inertia bisection.
    """
    lo, hi = float(search_window[0]), float(search_window[1])
    if not lo < hi:
        raise ValueError("empty window")
    if hi >= sys.eigs[0] and lo <= sys.eigs[-1]:
        raise WindowTouchesSpectrum(f"[{lo}, {hi}] meets [{sys.eigs[0]}, {sys.eigs[-1]}]")
    grid = np.linspace(lo, hi, max(2, int(np.ceil((hi - lo) / GRID_STEP)) + 1))
    dets = np.real(np.linalg.det(_resolvent_batch(sys, grid[:, None] - sys.eigs[None, :])))
    counts = count_above(sys, grid)
    roots = []
    for k in range(grid.size - 1):
        inside = counts[k] - counts[k + 1]
        if inside == 0:
            continue
        if inside == 1 and np.sign(dets[k]) != np.sign(dets[k + 1]):
            a, b, fa = grid[k], grid[k + 1], dets[k]
            for _ in range(200):
                m = 0.5 * (a + b)
                if m <= a or m >= b:
                    break
                fm = secular_value(sys, m)
                if np.sign(fm) == np.sign(fa):
                    a, fa = m, fm
                else:
                    b = m
            roots.append(0.5 * (a + b))
        else:
            first = sys.n - counts[k]
            roots.extend(eigenvalues_by_index(sys, np.arange(first, first + inside)))
    return np.sort(np.asarray(roots, dtype=float))


def deformed_spectrum_dense(X: SymmetricMatrix, R: LowRankOperator) -> DeformedSpectrum:
    return DeformedSpectrum(symmetric_eigvalsh(apply_deformation(X, R)), "dense")


def deformed_extremes_dense(X: SymmetricMatrix, R: LowRankOperator, k_low: int, k_high: int):
    return extreme_eigenvalues(apply_deformation(X, R), k_low, k_high)
