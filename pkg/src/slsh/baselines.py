"""Comparison schemes: plain random projection and principal-direction codes.

`lsh_model` is the no-learning reference: exactly `bits` random hyperplanes,
all retained with unit importance. `pcah_model` uses the top principal
directions of the learning data as hyperplane normals, thresholding at zero
on mean-centered data; it structurally cannot produce more bits than the
data has dimensions.
"""

from __future__ import annotations

import numpy as np

from .dataset import LabeledDataset
from .errors import CapabilityError, InsufficientDataError, ValidationError
from .hashing import HyperplanePool, generate_pool
from .trainer import PoolRef, TrainedModel


def _identity_selection(pool: HyperplanePool, seed: int) -> TrainedModel:
    bits = pool.pool_size
    return TrainedModel(
        selected=np.arange(bits, dtype=np.int64),
        omega=np.ones(bits, dtype=np.float64),
        pool_ref=PoolRef(seed=seed, pool_size=bits, n_dims=pool.n_dims),
        iterations=0,
        seed=seed,
    )


def lsh_model(n_dims: int, bits: int, seed: int) -> tuple[HyperplanePool, TrainedModel]:
    """Pool of exactly `bits` random hyperplanes, identity selection."""
    pool = generate_pool(n_dims, bits, seed)
    return pool, _identity_selection(pool, seed)


def pcah_model(data: LabeledDataset, bits: int) -> tuple[HyperplanePool, TrainedModel]:
    """Top `bits` principal directions of `data` as hyperplane normals."""
    if bits < 1:
        raise ValidationError("bits must be at least 1")
    if bits > data.n_dims:
        raise CapabilityError(
            f"principal-direction hashing cannot produce more bits ({bits}) "
            f"than the data dimension ({data.n_dims})"
        )
    if data.n_rows < 2:
        raise InsufficientDataError("covariance needs at least 2 rows")
    x = data.vectors
    centered = x - x.mean(axis=0)
    cov = (centered.T @ centered) / x.shape[0]
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(-vals, kind="stable")
    normals = np.ascontiguousarray(vecs[:, order].T[:bits])
    pool = HyperplanePool(normals, seed=0)
    return pool, _identity_selection(pool, seed=0)
