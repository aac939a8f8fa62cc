"""Pearson correlation between feature columns."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CorrelationMatrix:
    """Symmetric correlation matrix ``rho`` with a mask of non-constant
    columns. Entries touching a constant column are 0 off the diagonal."""

    rho: np.ndarray
    valid: np.ndarray

    @property
    def p(self) -> int:
        return self.rho.shape[0]

    def to_text(self, delimiter: str = ",") -> str:
        return "\n".join(delimiter.join(repr(float(v)) for v in row) for row in self.rho) + "\n"


def pearson(a, b) -> float:
    """Sample correlation of two vectors; 0 when either one is constant."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.shape[0] < 2:
        raise ValueError("need at least two observations")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        return 0.0
    da = a - a.mean()
    db = b - b.mean()
    da /= np.max(np.abs(da))
    db /= np.max(np.abs(db))
    r = float(np.dot(da, db) / math.sqrt(np.dot(da, da) * np.dot(db, db)))
    return min(1.0, max(-1.0, r))


def correlation_matrix(X_sub) -> CorrelationMatrix:
    """All pairwise column correlations of an ``m x p`` matrix (two-pass:
    center, then one Gram product)."""
    X = np.asarray(X_sub, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError(f"need an m x p matrix with m >= 2, got shape {X.shape}")
    Xc = X - X.mean(axis=0)
    # rescale before squaring so tiny spreads do not underflow
    scale = np.max(np.abs(Xc), axis=0)
    valid = (np.ptp(X, axis=0) > 0) & (scale > 0)
    scale[~valid] = 1.0
    Xc /= scale
    norms = np.sqrt(np.einsum("ij,ij->j", Xc, Xc))
    norms[~valid] = 1.0
    Xc /= norms
    rho = Xc.T @ Xc
    np.clip(rho, -1.0, 1.0, out=rho)
    rho[~valid, :] = 0.0
    rho[:, ~valid] = 0.0
    # mirror the upper triangle so symmetry is exact
    iu = np.triu_indices(rho.shape[0], 1)
    rho.T[iu] = rho[iu]
    np.fill_diagonal(rho, 1.0)
    rho.setflags(write=False)
    return CorrelationMatrix(rho, valid)
