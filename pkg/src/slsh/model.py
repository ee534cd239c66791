"""Full pipeline artifacts and their binary persistence.

A model bundles everything needed to reproduce codes for new data: the
fitted standardizer, the PCA projection, the hyperplane pool, the learned
importance weights, and the ordered selection. Files are a single
self-describing little-endian container (magic ``SLSH1``) of
length-prefixed sections; numeric fields round-trip bit-exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baselines import lsh_model, pcah_model
from .dataset import LabeledDataset
from .errors import CapabilityError, ValidationError
from .hashing import BitCode, HyperplanePool, encode_batch, generate_pool, restrict_pool
from .preprocess import (
    PcaProjection,
    Standardizer,
    apply_standardizer,
    fit_pca,
    fit_standardizer,
    project,
)
from .trainer import PoolRef, TrainConfig, train

SCHEMES = ("slsh", "lsh", "pcah")

_MAGIC = b"SLSH1"
_VERSION = 1
_SECTION_TAGS = (b"META", b"PREP", b"POOL", b"TRAN")


@dataclass(frozen=True, eq=False)
class Model:
    """A trained encoder: preprocessing chain plus selected hyperplanes."""

    scheme: str
    standardizer: Standardizer
    pca: PcaProjection
    pool: HyperplanePool
    omega: np.ndarray
    selected: np.ndarray
    iterations: int
    train_seed: int
    requested_ratio: float

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValidationError(f"unknown scheme {self.scheme!r}")
        omega = np.array(self.omega, dtype=np.float64)
        selected = np.array(self.selected, dtype=np.int64)
        omega.setflags(write=False)
        selected.setflags(write=False)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "selected", selected)

    @property
    def max_bits(self) -> int:
        return int(self.selected.shape[0])

    def transform(self, data: LabeledDataset) -> LabeledDataset:
        """Replay the stored standardization and projection."""
        return project(self.pca, apply_standardizer(self.standardizer, data))

    def selected_pool(self, bits: int | None = None) -> HyperplanePool:
        """The retained hyperplanes, optionally truncated to a width prefix."""
        if bits is None:
            bits = self.max_bits
        if bits < 1:
            raise ValidationError("bits must be at least 1")
        if bits > self.max_bits:
            raise CapabilityError(
                f"model retains {self.max_bits} hyperplanes; cannot encode "
                f"{bits} bits"
            )
        return restrict_pool(self.pool, self.selected[:bits])

    def encode_dataset(self, data: LabeledDataset, bits: int | None = None) -> list[BitCode]:
        """Transform then encode rows with the selection prefix."""
        return encode_batch(self.selected_pool(bits), self.transform(data))


def _preprocess(data: LabeledDataset, pca_ratio: float):
    standardizer = fit_standardizer(data)
    standardized = apply_standardizer(standardizer, data)
    pca = fit_pca(standardized, pca_ratio)
    return standardizer, pca, project(pca, standardized)


def fit_slsh(
    data: LabeledDataset,
    pool_size: int = 10_000,
    target_bits: int = 1_024,
    iterations: int = 10_000,
    pca_ratio: float = 0.8,
    seed: int = 0,
) -> Model:
    """Standardize, project, over-generate hyperplanes, learn the selection."""
    standardizer, pca, projected = _preprocess(data, pca_ratio)
    pool = generate_pool(pca.n_components, pool_size, seed)
    codes = encode_batch(pool, projected)
    # Row sampling gets its own stream, offset from the pool stream.
    config = TrainConfig(
        pool_size=pool_size,
        target_bits=target_bits,
        iterations=iterations,
        seed=seed + 1,
    )
    ref = PoolRef(seed=seed, pool_size=pool_size, n_dims=pca.n_components)
    trained = train(codes, projected.labels, config, pool_ref=ref)
    return Model(
        scheme="slsh",
        standardizer=standardizer,
        pca=pca,
        pool=pool,
        omega=trained.omega,
        selected=trained.selected,
        iterations=trained.iterations,
        train_seed=trained.seed,
        requested_ratio=pca_ratio,
    )


def fit_lsh(
    data: LabeledDataset, bits: int, pca_ratio: float = 0.8, seed: int = 0
) -> Model:
    """Standardize, project, and keep exactly `bits` random hyperplanes."""
    standardizer, pca, _ = _preprocess(data, pca_ratio)
    pool, trained = lsh_model(pca.n_components, bits, seed)
    return Model(
        scheme="lsh",
        standardizer=standardizer,
        pca=pca,
        pool=pool,
        omega=trained.omega,
        selected=trained.selected,
        iterations=0,
        train_seed=seed,
        requested_ratio=pca_ratio,
    )


def fit_pcah(data: LabeledDataset, bits: int, pca_ratio: float = 0.8) -> Model:
    """Standardize, project, then hash with the projected data's principal axes."""
    standardizer, pca, projected = _preprocess(data, pca_ratio)
    pool, trained = pcah_model(projected, bits)
    return Model(
        scheme="pcah",
        standardizer=standardizer,
        pca=pca,
        pool=pool,
        omega=trained.omega,
        selected=trained.selected,
        iterations=0,
        train_seed=0,
        requested_ratio=pca_ratio,
    )


def _f64_bytes(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


def _section(tag: bytes, payload: bytes) -> bytes:
    return tag + struct.pack("<Q", len(payload)) + payload


class _Cursor:
    """Sequential reader with hard bounds checking."""

    def __init__(self, blob: bytes, context: str):
        self.blob = blob
        self.pos = 0
        self.context = context

    def take(self, count: int) -> bytes:
        if self.pos + count > len(self.blob):
            raise ValidationError(f"{self.context}: truncated model file")
        out = self.blob[self.pos : self.pos + count]
        self.pos += count
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self, dtype: str, count: int) -> np.ndarray:
        itemsize = np.dtype(dtype).itemsize
        return np.frombuffer(self.take(count * itemsize), dtype=dtype).copy()

    def done(self):
        if self.pos != len(self.blob):
            raise ValidationError(f"{self.context}: trailing bytes in section")


def save_model(model: Model, path) -> None:
    """Serialize a model to the SLSH1 container format."""
    scheme_bytes = model.scheme.encode("utf-8")
    meta = struct.pack("<H", len(scheme_bytes)) + scheme_bytes
    meta += struct.pack("<d", model.requested_ratio)

    n_dims = model.standardizer.means.shape[0]
    k = model.pca.n_components
    prep = struct.pack("<I", n_dims)
    prep += _f64_bytes(model.standardizer.means)
    prep += _f64_bytes(model.standardizer.stds)
    prep += struct.pack("<I", k)
    prep += _f64_bytes(model.pca.basis)
    prep += _f64_bytes(model.pca.eigenvalues)
    prep += struct.pack("<d", model.pca.contribution_ratio)

    pool = struct.pack(
        "<qII", model.pool.seed, model.pool.pool_size, model.pool.n_dims
    )
    pool += _f64_bytes(model.pool.w)

    tran = struct.pack("<I", model.omega.shape[0])
    tran += _f64_bytes(model.omega)
    tran += struct.pack("<I", model.selected.shape[0])
    tran += np.ascontiguousarray(model.selected, dtype="<u4").tobytes()
    tran += struct.pack("<Qq", model.iterations, model.train_seed)

    blob = _MAGIC + struct.pack("<H", _VERSION)
    for tag, payload in zip(_SECTION_TAGS, (meta, prep, pool, tran)):
        blob += _section(tag, payload)
    Path(path).write_bytes(blob)


def load_model(path) -> Model:
    """Read a model written by save_model; rejects foreign or newer files."""
    blob = Path(path).read_bytes()
    head = len(_MAGIC) + 2
    if len(blob) < head or not blob.startswith(_MAGIC):
        raise ValidationError(f"{path}: not a model file")
    (version,) = struct.unpack("<H", blob[len(_MAGIC) : head])
    if version != _VERSION:
        raise ValidationError(
            f"{path}: unsupported model file version {version} (expected {_VERSION})"
        )

    sections: dict[bytes, bytes] = {}
    pos = head
    while pos < len(blob):
        if pos + 12 > len(blob):
            raise ValidationError(f"{path}: truncated section header")
        tag = blob[pos : pos + 4]
        (size,) = struct.unpack("<Q", blob[pos + 4 : pos + 12])
        pos += 12
        if pos + size > len(blob):
            raise ValidationError(f"{path}: truncated section {tag!r}")
        if tag not in _SECTION_TAGS:
            raise ValidationError(f"{path}: unknown section {tag!r}")
        sections[tag] = blob[pos : pos + size]
        pos += size
    missing = [t for t in _SECTION_TAGS if t not in sections]
    if missing:
        raise ValidationError(f"{path}: missing sections {missing}")

    cur = _Cursor(sections[b"META"], f"{path}: META")
    (scheme_len,) = cur.unpack("<H")
    scheme = cur.take(scheme_len).decode("utf-8")
    (requested_ratio,) = cur.unpack("<d")
    cur.done()

    cur = _Cursor(sections[b"PREP"], f"{path}: PREP")
    (n_dims,) = cur.unpack("<I")
    means = cur.array("<f8", n_dims)
    stds = cur.array("<f8", n_dims)
    (k,) = cur.unpack("<I")
    basis = cur.array("<f8", k * n_dims).reshape(k, n_dims)
    eigenvalues = cur.array("<f8", k)
    (achieved,) = cur.unpack("<d")
    cur.done()

    cur = _Cursor(sections[b"POOL"], f"{path}: POOL")
    pool_seed, pool_size, pool_dims = cur.unpack("<qII")
    rows = cur.array("<f8", pool_size * pool_dims).reshape(pool_size, pool_dims)
    cur.done()

    cur = _Cursor(sections[b"TRAN"], f"{path}: TRAN")
    (omega_len,) = cur.unpack("<I")
    omega = cur.array("<f8", omega_len)
    (n_selected,) = cur.unpack("<I")
    selected = cur.array("<u4", n_selected).astype(np.int64)
    iterations, train_seed = cur.unpack("<Qq")
    cur.done()

    return Model(
        scheme=scheme,
        standardizer=Standardizer(means, stds),
        pca=PcaProjection(basis, eigenvalues, achieved),
        pool=HyperplanePool(rows, seed=pool_seed),
        omega=omega,
        selected=selected,
        iterations=int(iterations),
        train_seed=int(train_seed),
        requested_ratio=float(requested_ratio),
    )
