"""Margin-driven importance learning over candidate hyperplane pools.

Hyperplanes are over-generated (pool width B~ well above the target bit
count B), every vector is encoded once against the full pool, and a
per-hyperplane importance weight is learned in code space. The weighted
Hamming distance between codes a and b is

    d(a, b) = sqrt(sum over differing bit positions of omega_i^2),

i.e. the Euclidean metric on {0,1}^B~ with per-axis scales |omega_i|.
For a sample x, `nearhit` is the closest same-label code and `nearmiss`
the closest different-label code, both excluding x itself. The learning
objective is the summed margin

    e(omega) = sum_x 0.5 * (d(x, nearmiss(x)) - d(x, nearhit(x)))

over samples that have both neighbors, and it is maximized by stochastic
ascent: a random sample is drawn, its neighbors found under the current
weights, and each component updated by

    omega_i += 0.5 * (z_miss_i / d_miss - z_hit_i / d_hit) * omega_i

where z is the bitwise difference to the respective neighbor. A term whose
distance is zero contributes nothing (a coincident neighbor carries no
splitting signal). Weights may turn negative; distances use omega^2 and the
final selection takes the top B by absolute value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateDataError,
    InsufficientDataError,
    ShapeError,
    ValidationError,
)
from .hashing import BitCode, codes_to_bit_matrix

# Consecutive ineligible draws tolerated before the sampler gives up.
_MAX_RESAMPLES = 100


@dataclass(frozen=True)
class TrainConfig:
    """Training knobs: pool width B~, retained bits B, update count, seed."""

    pool_size: int = 10_000
    target_bits: int = 1_024
    iterations: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.pool_size < 1 or self.target_bits < 1:
            raise ValidationError("pool_size and target_bits must be at least 1")
        if self.target_bits > self.pool_size:
            raise ValidationError("target_bits cannot exceed pool_size")
        if self.iterations < 0:
            raise ValidationError("iterations cannot be negative")


@dataclass(frozen=True)
class PoolRef:
    """Provenance of the pool the weights were learned against."""

    seed: int
    pool_size: int
    n_dims: int


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """Learned selection: indices ordered by descending |omega|."""

    selected: np.ndarray
    omega: np.ndarray
    pool_ref: PoolRef | None
    iterations: int
    seed: int

    def __post_init__(self):
        selected = np.array(self.selected, dtype=np.int64)
        omega = np.array(self.omega, dtype=np.float64)
        if selected.ndim != 1 or omega.ndim != 1:
            raise ShapeError("selected and omega must be 1-D arrays")
        if np.unique(selected).size != selected.size:
            raise ValidationError("selected indices must be unique")
        selected.setflags(write=False)
        omega.setflags(write=False)
        object.__setattr__(self, "selected", selected)
        object.__setattr__(self, "omega", omega)


def _as_omega(omega, length: int) -> np.ndarray:
    omega = np.asarray(omega, dtype=np.float64)
    if omega.ndim != 1 or omega.shape[0] != length:
        raise ShapeError(f"omega must have one weight per bit ({length})")
    return omega


def _bits_float(codes) -> np.ndarray:
    return codes_to_bit_matrix(codes).astype(np.float64)


def _sq_dists_to_all(g: np.ndarray, w2: np.ndarray, x: int) -> np.ndarray:
    """Squared weighted distances from row x to every row of g.

    Uses d^2(x, j) = s_j + s_x - 2 * sum_i w2_i g_x_i g_j_i with
    s = g @ w2, which for 0/1 entries equals the sum of w2 over differing
    bits. Clamped at zero against rounding.
    """
    s = g @ w2
    cross = g @ (w2 * g[x])
    return np.maximum(s + s[x] - 2.0 * cross, 0.0)


def _nearest(d2: np.ndarray, candidates: np.ndarray) -> int | None:
    if not candidates.any():
        return None
    masked = np.where(candidates, d2, np.inf)
    return int(np.argmin(masked))  # first minimum, so ties pick the lowest index


def weighted_hamming(a: BitCode, b: BitCode, omega) -> float:
    """Weighted Hamming distance: sqrt of sum of omega^2 over differing bits."""
    if a.length != b.length:
        raise ShapeError("codes must have equal lengths")
    omega = _as_omega(omega, a.length)
    differ = a.to_bits() != b.to_bits()
    return float(np.sqrt(np.sum(np.square(omega)[differ])))


def nearhit(x_index: int, codes, labels, omega) -> int | None:
    """Index of the closest same-label code, excluding x; None if absent.

    Ties break toward the smallest index.
    """
    return _scan_neighbor(x_index, codes, labels, omega, same_label=True)


def nearmiss(x_index: int, codes, labels, omega) -> int | None:
    """Index of the closest different-label code; None if all labels match x's."""
    return _scan_neighbor(x_index, codes, labels, omega, same_label=False)


def _scan_neighbor(x_index, codes, labels, omega, same_label: bool) -> int | None:
    g = _bits_float(codes)
    labels = np.asarray(labels)
    if labels.shape[0] != g.shape[0]:
        raise ShapeError("one label per code is required")
    if not 0 <= x_index < g.shape[0]:
        raise ValidationError(f"row index {x_index} out of range")
    omega = _as_omega(omega, g.shape[1])
    d2 = _sq_dists_to_all(g, np.square(omega), x_index)
    mask = (labels == labels[x_index]) if same_label else (labels != labels[x_index])
    mask = mask.copy()
    mask[x_index] = False
    return _nearest(d2, mask)


def margin_term(x: BitCode, hit: BitCode, miss: BitCode, omega) -> float:
    """Half the gap between the nearmiss and nearhit weighted distances."""
    return 0.5 * (weighted_hamming(x, miss, omega) - weighted_hamming(x, hit, omega))


def _hit_miss_minima(g, labels, w2):
    """Per-row squared distances to the nearest same/different-label row."""
    n = g.shape[0]
    s = g @ w2
    gram = (g * w2) @ g.T
    d2 = np.maximum(s[:, None] + s[None, :] - 2.0 * gram, 0.0)
    np.fill_diagonal(d2, np.inf)
    hit_min = np.full(n, np.inf)
    miss_min = np.full(n, np.inf)
    for lab in np.unique(labels):
        idx = np.flatnonzero(labels == lab)
        rest = np.flatnonzero(labels != lab)
        if idx.size >= 2:
            hit_min[idx] = d2[np.ix_(idx, idx)].min(axis=1)
        if rest.size:
            miss_min[idx] = d2[np.ix_(idx, rest)].min(axis=1)
    return hit_min, miss_min


def objective(codes, labels, omega) -> float:
    """Summed margin e(omega) over rows that have both neighbor kinds.

    Rows lacking a same-label partner or a different-label row are skipped;
    if no row qualifies the dataset cannot express the objective at all.
    """
    g = _bits_float(codes)
    labels = np.asarray(labels)
    if labels.shape[0] != g.shape[0]:
        raise ShapeError("one label per code is required")
    omega = _as_omega(omega, g.shape[1])
    hit_min, miss_min = _hit_miss_minima(g, labels, np.square(omega))
    eligible = np.isfinite(hit_min) & np.isfinite(miss_min)
    if not eligible.any():
        raise DegenerateDataError("no row has both a nearhit and a nearmiss")
    return float(0.5 * (np.sqrt(miss_min[eligible]) - np.sqrt(hit_min[eligible])).sum())


def importance_update(x: BitCode, hit: BitCode, miss: BitCode, omega) -> np.ndarray:
    """Per-component importance delta for one sampled point.

    Returns delta_i = 0.5 * (z_miss_i / d_miss - z_hit_i / d_hit) * omega_i
    where z marks bits on which x differs from the respective neighbor.
    Either fraction is dropped when its distance is zero; the caller applies
    omega + delta.
    """
    if not (x.length == hit.length == miss.length):
        raise ShapeError("codes must have equal lengths")
    omega = _as_omega(omega, x.length)
    x_bits = x.to_bits()
    z_hit = (x_bits != hit.to_bits()).astype(np.float64)
    z_miss = (x_bits != miss.to_bits()).astype(np.float64)
    d_hit = weighted_hamming(x, hit, omega)
    d_miss = weighted_hamming(x, miss, omega)
    pull = np.zeros_like(omega)
    if d_miss > 0.0:
        pull += z_miss / d_miss
    if d_hit > 0.0:
        pull -= z_hit / d_hit
    return 0.5 * pull * omega


def select_top(omega, b: int) -> np.ndarray:
    """The b indices of largest |omega|, descending, ties by lower index."""
    omega = np.asarray(omega, dtype=np.float64)
    if omega.ndim != 1:
        raise ShapeError("omega must be 1-D")
    if not 1 <= b <= omega.shape[0]:
        raise ValidationError(f"cannot select {b} of {omega.shape[0]} weights")
    order = np.argsort(-np.abs(omega), kind="stable")
    return order[:b].astype(np.int64)


def train(codes, labels, config: TrainConfig, pool_ref: PoolRef | None = None) -> TrainedModel:
    """Run stochastic margin ascent and select the top-B hyperplanes.

    Weights start at 1. Each step draws a row uniformly at random; rows
    whose label has no partner or no outsider are redrawn without spending
    the iteration budget (bounded, so a sampler stuck on ineligible rows
    fails loudly instead of spinning). The step computes the row's nearhit
    and nearmiss under the current weights and applies the importance
    update. Deterministic for a fixed config seed.
    """
    g = _bits_float(codes)
    n, width = g.shape
    labels = np.asarray(labels)
    if labels.shape[0] != n:
        raise ShapeError("one label per code is required")
    if n < 2:
        raise InsufficientDataError("training needs at least 2 rows")
    if width != config.pool_size:
        raise ValidationError(
            f"codes are {width} bits wide but config.pool_size is {config.pool_size}"
        )

    _, inverse, counts = np.unique(labels, return_inverse=True, return_counts=True)
    row_counts = counts[inverse]
    eligible = (row_counts >= 2) & (row_counts < n)
    if not eligible.any():
        raise DegenerateDataError("no row has both a nearhit and a nearmiss")

    omega = np.ones(width, dtype=np.float64)
    rng = np.random.default_rng(config.seed)
    applied = 0
    rejected_in_row = 0
    while applied < config.iterations:
        x = int(rng.integers(n))
        if not eligible[x]:
            rejected_in_row += 1
            if rejected_in_row >= _MAX_RESAMPLES:
                raise DegenerateDataError(
                    f"sampler rejected {_MAX_RESAMPLES} consecutive rows "
                    "without an eligible neighbor pair"
                )
            continue
        rejected_in_row = 0

        w2 = np.square(omega)
        d2 = _sq_dists_to_all(g, w2, x)
        same = labels == labels[x]
        masked_hit = np.where(same, d2, np.inf)
        masked_hit[x] = np.inf
        hit = int(np.argmin(masked_hit))
        miss = int(np.argmin(np.where(same, np.inf, d2)))

        d_hit = float(np.sqrt(d2[hit]))
        d_miss = float(np.sqrt(d2[miss]))
        pull = np.zeros(width, dtype=np.float64)
        if d_miss > 0.0:
            pull += (g[x] != g[miss]).astype(np.float64) / d_miss
        if d_hit > 0.0:
            pull -= (g[x] != g[hit]).astype(np.float64) / d_hit
        omega += 0.5 * pull * omega
        applied += 1

    return TrainedModel(
        selected=select_top(omega, config.target_bits),
        omega=omega,
        pool_ref=pool_ref,
        iterations=config.iterations,
        seed=config.seed,
    )
