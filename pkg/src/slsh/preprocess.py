"""Standardization and PCA projection fitted on learning data.

The canonical chain is: fit per-component mean/std on the learning set,
standardize, then project onto the leading principal directions whose
cumulative eigenvalue mass strictly exceeds the requested contribution
ratio. Query and test data are always transformed with the statistics
fitted on the learning data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import LabeledDataset
from .errors import (
    DegenerateDataError,
    InsufficientDataError,
    ShapeError,
    ValidationError,
)

# Eigenvalues below this fraction of the total mass count as zero when the
# numerical rank is needed (ratio = 1.0 retains exactly the rank).
_RANK_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Per-component affine transform to zero mean and unit deviation."""

    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        means = np.array(self.means, dtype=np.float64)
        stds = np.array(self.stds, dtype=np.float64)
        if means.ndim != 1 or stds.shape != means.shape:
            raise ShapeError("means and stds must be 1-D arrays of equal length")
        if np.any(stds < 0):
            raise ValidationError("standard deviations cannot be negative")
        means.setflags(write=False)
        stds.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stds", stds)


@dataclass(frozen=True, eq=False)
class PcaProjection:
    """Orthonormal principal directions (rows) with their eigenvalues."""

    basis: np.ndarray
    eigenvalues: np.ndarray
    contribution_ratio: float

    def __post_init__(self):
        basis = np.array(self.basis, dtype=np.float64)
        eigenvalues = np.array(self.eigenvalues, dtype=np.float64)
        if basis.ndim != 2 or basis.shape[0] < 1:
            raise ShapeError("basis must be a non-empty 2-D array of direction rows")
        if eigenvalues.shape != (basis.shape[0],):
            raise ShapeError("one eigenvalue per basis row is required")
        if np.any(eigenvalues < 0):
            raise ValidationError("eigenvalues must be non-negative")
        if np.any(np.diff(eigenvalues) > 0):
            raise ValidationError("eigenvalues must be non-increasing")
        if not 0.0 < self.contribution_ratio <= 1.0:
            raise ValidationError("contribution_ratio must lie in (0, 1]")
        basis.setflags(write=False)
        eigenvalues.setflags(write=False)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "eigenvalues", eigenvalues)

    @property
    def n_components(self) -> int:
        return self.basis.shape[0]

    @property
    def n_dims(self) -> int:
        return self.basis.shape[1]


def fit_standardizer(data: LabeledDataset) -> Standardizer:
    """Fit per-component sample means and population standard deviations."""
    if data.n_rows < 2:
        raise InsufficientDataError("standardization needs at least 2 rows")
    means = data.vectors.mean(axis=0)
    stds = data.vectors.std(axis=0)
    # A truly constant column must get sigma = 0 even when an inexact mean
    # leaves rounding noise in the computed deviation.
    constant = np.ptp(data.vectors, axis=0) == 0
    stds = np.where(constant, 0.0, stds)
    return Standardizer(means, stds)


def apply_standardizer(s: Standardizer, data: LabeledDataset) -> LabeledDataset:
    """Map each component to (x - mean) / std; zero-std components map to 0."""
    if data.n_dims != s.means.shape[0]:
        raise ShapeError(
            f"standardizer was fitted on {s.means.shape[0]} dims, "
            f"data has {data.n_dims}"
        )
    degenerate = s.stds == 0
    safe = np.where(degenerate, 1.0, s.stds)
    z = (data.vectors - s.means) / safe
    if degenerate.any():
        z[:, degenerate] = 0.0
    return LabeledDataset(z, data.labels)


def fit_pca(data: LabeledDataset, ratio: float) -> PcaProjection:
    """Eigendecompose the covariance and keep the leading directions.

    Retains the smallest number of directions whose cumulative eigenvalue
    mass strictly exceeds `ratio` of the total. `ratio = 1.0` retains the
    numerical rank of the covariance. Covariance uses the population
    convention (divide by n), which only rescales eigenvalues uniformly.
    """
    if not 0.0 < ratio <= 1.0:
        raise ValidationError("ratio must lie in (0, 1]")
    if data.n_rows < 2:
        raise InsufficientDataError("covariance needs at least 2 rows")
    x = data.vectors
    centered = x - x.mean(axis=0)
    cov = (centered.T @ centered) / x.shape[0]
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(-vals, kind="stable")
    vals = np.maximum(vals[order], 0.0)
    directions = vecs[:, order].T
    total = float(vals.sum())
    if total <= 0.0:
        raise DegenerateDataError("data has no variance to decompose")
    cumulative = np.cumsum(vals)
    rank = int(np.count_nonzero(vals > total * _RANK_EPS))
    if ratio >= 1.0:
        k = rank
    else:
        above = cumulative > ratio * total
        k = int(np.argmax(above)) + 1 if above.any() else rank
    k = max(k, 1)
    achieved = min(float(cumulative[k - 1] / total), 1.0)
    return PcaProjection(np.ascontiguousarray(directions[:k]), vals[:k], achieved)


def project(p: PcaProjection, data: LabeledDataset) -> LabeledDataset:
    """Project rows onto the principal directions, keeping labels."""
    if data.n_dims != p.n_dims:
        raise ShapeError(
            f"projection expects {p.n_dims}-dim rows, data has {data.n_dims}"
        )
    return LabeledDataset(data.vectors @ p.basis.T, data.labels)
