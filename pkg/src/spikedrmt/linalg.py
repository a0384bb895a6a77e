"""Dense Hermitian eigensolvers and Gram-Schmidt orthonormalisation.

The heavy lifting is delegated to LAPACK through scipy (``syevd``/``heevd``
for full decompositions, ``syevr`` for index subsets), which performs the
usual Householder tridiagonalisation followed by an implicitly shifted
iteration / relatively robust representations.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DegenerateFamily, NonConvergence

GRAM_MINOR_TOL = 1e-12


@dataclass(frozen=True)
class SymmetricMatrix:
    """Real symmetric or complex Hermitian matrix, upper triangle authoritative."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
        if not np.iscomplexobj(a):
            a = a.astype(float, copy=False)
        upper = np.triu(a, 1)
        full = upper + upper.conj().T
        diag = np.real(np.diag(a)) if np.iscomplexobj(a) else np.diag(a)
        full[np.diag_indices_from(full)] = diag
        full.setflags(write=False)
        object.__setattr__(self, "entries", full)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def scalar_field(self) -> str:
        return "complex" if np.iscomplexobj(self.entries) else "real"

    def max_norm(self) -> float:
        return float(np.max(np.abs(self.entries)))


@dataclass(frozen=True)
class OrthonormalizationReport:
    v_gram: np.ndarray
    w_coeffs: np.ndarray
    min_gram_det: float


def _as_matrix(X) -> np.ndarray:
    return X.entries if isinstance(X, SymmetricMatrix) else SymmetricMatrix(X).entries


def symmetric_eigh(X) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors as columns."""
    a = _as_matrix(X)
    try:
        values, vectors = scipy.linalg.eigh(a, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(str(exc)) from exc
    return values, vectors


def symmetric_eigvalsh(X) -> np.ndarray:
    a = _as_matrix(X)
    try:
        return scipy.linalg.eigh(a, eigvals_only=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(str(exc)) from exc


def extreme_eigenvalues(X, k_low: int, k_high: int) -> tuple[np.ndarray, np.ndarray]:
    """The ``k_low`` smallest and ``k_high`` largest eigenvalues, each ascending.

    Only the requested index ranges are computed after a single reduction
    to tridiagonal form per call.
    """
    a = _as_matrix(X)
    n = a.shape[0]
    if k_low < 0 or k_high < 0 or k_low + k_high > n:
        raise ValueError(f"k_low + k_high must be <= n = {n}")
    try:
        low = (scipy.linalg.eigh(a, eigvals_only=True, subset_by_index=[0, k_low - 1])
               if k_low else np.empty(0))
        high = (scipy.linalg.eigh(a, eigvals_only=True, subset_by_index=[n - k_high, n - 1])
                if k_high else np.empty(0))
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(str(exc)) from exc
    return low, high


def gram_schmidt(raw) -> tuple[np.ndarray, OrthonormalizationReport]:
    """Orthonormalise the columns of ``raw`` (shape n x r) in order.

    Returns the orthonormal columns and the report holding the normalised
    Gram matrix ``V = G^* G / n`` and the unit lower-triangular ``W`` with
    ``G W^T`` having orthogonal columns.
    """
    g = np.asarray(raw)
    if g.ndim == 1:
        g = g[:, None]
    n, r = g.shape
    if r > n:
        raise DegenerateFamily(f"cannot orthonormalise {r} vectors in dimension {n}")
    if r == 0:
        empty = np.empty((0, 0))
        return g.copy(), OrthonormalizationReport(empty, empty, 1.0)

    v_gram = g.conj().T @ g / n
    q, rr = np.linalg.qr(g)
    diag = np.diag(rr)
    # minors of V are products of squared pivots of R
    minors = np.cumprod(np.abs(diag) ** 2 / n)
    min_minor = float(np.min(minors))
    if not np.all(np.isfinite(minors)) or min_minor < GRAM_MINOR_TOL:
        raise DegenerateFamily(f"leading Gram minor {min_minor:.3e} below {GRAM_MINOR_TOL}")
    phase = diag / np.abs(diag)
    ortho = q * phase[None, :]
    rr = rr * phase.conj()[:, None]
    # columns of G @ inv(R) @ diag(R) are the unnormalised Gram-Schmidt vectors
    m = scipy.linalg.solve_triangular(rr, np.diag(np.diag(rr)))
    w_coeffs = m.T
    return ortho, OrthonormalizationReport(v_gram, w_coeffs, min_minor)
