"""Labeled feature-vector datasets: ingestion, synthetic generation, splitting.

On-disk formats:

* CSV: UTF-8, comma separated, no header unless skipped explicitly, one
  integer label column (writers always put the label last).
* Raw: flat little-endian IEEE-754 single-precision vectors, row-major,
  with a sidecar text file holding one integer label per line.

All datasets are immutable after construction and safe to share across
threads. Internal arithmetic is double precision regardless of the source
format.
"""

from __future__ import annotations

import gzip
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InsufficientDataError, ParseError, ShapeError, ValidationError


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """A matrix of real feature vectors with one integer label per row."""

    vectors: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        vectors = np.array(self.vectors, dtype=np.float64)
        labels = np.asarray(self.labels)
        if vectors.ndim != 2:
            raise ShapeError("vectors must be a 2-D array")
        if vectors.shape[0] < 1 or vectors.shape[1] < 1:
            raise ValidationError("dataset needs at least one row and one dimension")
        if not np.all(np.isfinite(vectors)):
            raise ValidationError("dataset contains non-finite values")
        if labels.ndim != 1 or labels.shape[0] != vectors.shape[0]:
            raise ShapeError("labels must be a 1-D array with one entry per row")
        if labels.dtype.kind not in "iu":
            raise ValidationError("labels must be integers")
        labels = np.array(labels, dtype=np.int64)
        vectors.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "labels", labels)

    @property
    def n_rows(self) -> int:
        return self.vectors.shape[0]

    @property
    def n_dims(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class DataSplit:
    """Learning / test (database) / query partition of a corpus.

    The three members must be pairwise disjoint as row collections. The
    splitter below guarantees that; when assembling a split from separately
    loaded files, disjointness is the caller's responsibility (it cannot be
    checked by value, since distinct rows may legitimately share values).
    """

    learning: LabeledDataset
    test: LabeledDataset
    query: LabeledDataset


def load_csv(path, label_column: int, has_header: bool = False) -> LabeledDataset:
    """Load a delimited dataset, taking labels from the given column index."""
    rows: list[list[float]] = []
    labels: list[int] = []
    n_cols: int | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if has_header and lineno == 1:
                continue
            line = raw.strip()
            if not line:
                continue
            cells = line.split(",")
            if n_cols is None:
                n_cols = len(cells)
                if n_cols < 2:
                    raise ValidationError(
                        f"{path}: need at least one feature column besides the label"
                    )
                if not 0 <= label_column < n_cols:
                    raise ValidationError(
                        f"label column {label_column} out of range for a "
                        f"{n_cols}-column file"
                    )
            elif len(cells) != n_cols:
                raise ParseError(
                    f"{path}: line {lineno}: expected {n_cols} columns, "
                    f"got {len(cells)}"
                )
            features = []
            for col, cell in enumerate(cells):
                if col == label_column:
                    try:
                        labels.append(int(cell))
                    except ValueError:
                        raise ParseError(
                            f"{path}: line {lineno}: bad label {cell!r}"
                        ) from None
                    continue
                try:
                    value = float(cell)
                except ValueError:
                    raise ParseError(
                        f"{path}: line {lineno}: bad value {cell!r}"
                    ) from None
                if not math.isfinite(value):
                    raise ValidationError(
                        f"{path}: line {lineno}: non-finite value {cell!r}"
                    )
                features.append(value)
            rows.append(features)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return LabeledDataset(np.array(rows, dtype=np.float64), np.array(labels, dtype=np.int64))


def save_csv(data: LabeledDataset, path) -> None:
    """Write a dataset as CSV with the label in the last column.

    Float fields use repr, so a load/save/load cycle is value identical.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for row, label in zip(data.vectors, data.labels):
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write(f",{int(label)}\n")


def _read_label_lines(path) -> list[int]:
    labels: list[int] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                labels.append(int(line))
            except ValueError:
                raise ParseError(f"{path}: line {lineno}: bad label {line!r}") from None
    return labels


def load_raw(path, n_dims: int, labels_path) -> LabeledDataset:
    """Load float32 row-major vectors plus a sidecar label file."""
    if n_dims < 1:
        raise ValidationError("n_dims must be at least 1")
    blob = Path(path).read_bytes()
    row_bytes = 4 * n_dims
    if len(blob) == 0 or len(blob) % row_bytes != 0:
        raise ValidationError(
            f"{path}: size {len(blob)} is not a positive multiple of "
            f"{row_bytes} bytes ({n_dims} float32 per row)"
        )
    vectors = np.frombuffer(blob, dtype="<f4").reshape(-1, n_dims).astype(np.float64)
    labels = _read_label_lines(labels_path)
    if len(labels) != vectors.shape[0]:
        raise ValidationError(
            f"{labels_path}: {len(labels)} labels for {vectors.shape[0]} vectors"
        )
    return LabeledDataset(vectors, np.array(labels, dtype=np.int64))


def save_raw(data: LabeledDataset, path, labels_path) -> None:
    """Write vectors as packed little-endian float32 plus a label sidecar."""
    Path(path).write_bytes(np.ascontiguousarray(data.vectors.astype("<f4")).tobytes())
    with open(labels_path, "w", encoding="utf-8") as fh:
        for label in data.labels:
            fh.write(f"{int(label)}\n")


def gen_synthetic(
    n_labels: int,
    per_label: int,
    n_dims: int,
    cluster_sigma: float,
    seed: int,
) -> LabeledDataset:
    """Generate labeled Gaussian clusters for desk-scale experiments.

    Cluster centers are drawn uniformly from [-1, 1]^n_dims, then each
    center receives `per_label` isotropic Gaussian points of standard
    deviation `cluster_sigma`. Output is a pure function of the arguments.
    """
    if min(n_labels, per_label, n_dims) < 1:
        raise ValidationError("n_labels, per_label and n_dims must all be at least 1")
    if not cluster_sigma > 0:
        raise ValidationError("cluster_sigma must be positive")
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-1.0, 1.0, size=(n_labels, n_dims))
    noise = rng.normal(0.0, cluster_sigma, size=(n_labels * per_label, n_dims))
    vectors = np.repeat(centers, per_label, axis=0) + noise
    labels = np.repeat(np.arange(n_labels, dtype=np.int64), per_label)
    return LabeledDataset(vectors, labels)


def split_dataset(data: LabeledDataset, fractions, seed: int) -> DataSplit:
    """Shuffle rows by seed and partition into learning/test/query parts.

    `fractions` gives the three part sizes in that order and must sum to 1.
    Part row counts are rounded half-up; every part must end up non-empty.
    """
    fr = [float(f) for f in fractions]
    if len(fr) != 3:
        raise ValidationError("exactly three split fractions are required")
    if abs(sum(fr) - 1.0) > 1e-9:
        raise ValidationError("split fractions must sum to 1")
    n = data.n_rows
    n_learn = int(math.floor(fr[0] * n + 0.5))
    n_test = int(math.floor(fr[1] * n + 0.5))
    n_query = n - n_learn - n_test
    if min(n_learn, n_test, n_query) < 1:
        raise ValidationError("every split part needs at least one row")
    perm = np.random.default_rng(seed).permutation(n)

    def pick(idx):
        return LabeledDataset(data.vectors[idx], data.labels[idx])

    return DataSplit(
        learning=pick(perm[:n_learn]),
        test=pick(perm[n_learn : n_learn + n_test]),
        query=pick(perm[n_learn + n_test :]),
    )


def _open_maybe_gzip(path):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_idx(path, expected_code: int) -> np.ndarray:
    with _open_maybe_gzip(path) as fh:
        header = fh.read(4)
        if len(header) != 4:
            raise ParseError(f"{path}: truncated IDX header")
        magic = struct.unpack(">I", header)[0]
        if magic != expected_code:
            raise ParseError(f"{path}: bad IDX magic {magic:#x}")
        ndim = magic & 0xFF
        dims = struct.unpack(f">{ndim}I", fh.read(4 * ndim))
        payload = fh.read()
    count = int(np.prod(dims))
    if len(payload) != count:
        raise ParseError(f"{path}: expected {count} bytes of data, got {len(payload)}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(dims)


def load_idx(images_path, labels_path) -> LabeledDataset:
    """Load an IDX ubyte image/label pair (optionally gzipped) as a dataset.

    Images are flattened row-major to one vector per sample.
    """
    images = _read_idx(images_path, expected_code=0x00000803)
    labels = _read_idx(labels_path, expected_code=0x00000801)
    if images.shape[0] != labels.shape[0]:
        raise ValidationError(
            f"{images_path}: {images.shape[0]} images for {labels.shape[0]} labels"
        )
    if images.shape[0] < 1:
        raise InsufficientDataError(f"{images_path}: empty IDX file")
    vectors = images.reshape(images.shape[0], -1).astype(np.float64)
    return LabeledDataset(vectors, labels.astype(np.int64))
