"""Random hyperplane pools and packed binary codes.

A pool is a matrix of hyperplane normal vectors through the origin. A
vector is encoded by the signs of its inner products with the normals:
bit i is 1 when the product is strictly positive and 0 otherwise (so an
exact zero encodes as 0). Rows are deliberately not normalized; the sign
is invariant under positive scaling of either operand.

Bit layout: codes are packed into 64-bit words, little-endian bit order
within each word (bit i lives at word i // 64, position i % 64). Bits past
the code length in the last word are always zero. Code-dump files store
these words little-endian, `ceil(length / 64)` words per code, with the
code count and bit length in the header.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import LabeledDataset
from .errors import ShapeError, ValidationError

_WORD_BITS = 64
_CODES_MAGIC = b"SLSHC"
_CODES_VERSION = 1


def _n_words(length: int) -> int:
    return (length + _WORD_BITS - 1) // _WORD_BITS


def pack_bit_matrix(bits: np.ndarray) -> np.ndarray:
    """Pack an (n, length) 0/1 matrix into (n, n_words) uint64 words."""
    bits = np.asarray(bits)
    if bits.ndim != 2:
        raise ShapeError("expected a 2-D bit matrix")
    n, length = bits.shape
    padded = np.zeros((n, _n_words(length) * _WORD_BITS), dtype=np.uint8)
    padded[:, :length] = bits.astype(np.uint8)
    packed = np.packbits(padded, axis=1, bitorder="little")
    return np.ascontiguousarray(packed).view(np.uint64)


def unpack_word_matrix(words: np.ndarray, length: int) -> np.ndarray:
    """Inverse of pack_bit_matrix: (n, n_words) words -> (n, length) uint8."""
    words = np.ascontiguousarray(words, dtype=np.uint64)
    raw = words.view(np.uint8).reshape(words.shape[0], -1)
    return np.unpackbits(raw, axis=1, bitorder="little")[:, :length]


@dataclass(frozen=True, eq=False)
class BitCode:
    """A packed array of bits produced by thresholding pool projections."""

    words: np.ndarray
    length: int

    def __post_init__(self):
        words = np.ascontiguousarray(self.words, dtype=np.uint64)
        if self.length < 1:
            raise ValidationError("a bit code needs at least one bit")
        if words.ndim != 1 or words.shape[0] != _n_words(self.length):
            raise ShapeError(
                f"{self.length}-bit code needs {_n_words(self.length)} words, "
                f"got shape {words.shape}"
            )
        tail = self.length % _WORD_BITS
        if tail and (words[-1] >> np.uint64(tail)) != 0:
            raise ValidationError("bits beyond the code length must be zero")
        words.setflags(write=False)
        object.__setattr__(self, "words", words)

    @classmethod
    def from_bits(cls, bits) -> "BitCode":
        bits = np.asarray(bits)
        if bits.ndim != 1:
            raise ShapeError("expected a 1-D bit array")
        return cls(pack_bit_matrix(bits[None, :])[0], bits.shape[0])

    def to_bits(self) -> np.ndarray:
        return unpack_word_matrix(self.words[None, :], self.length)[0]

    def __eq__(self, other):
        if not isinstance(other, BitCode):
            return NotImplemented
        return self.length == other.length and bool(np.array_equal(self.words, other.words))


@dataclass(frozen=True, eq=False)
class HyperplanePool:
    """Rows are hyperplane normal vectors; `seed` records provenance."""

    w: np.ndarray
    seed: int

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
            raise ShapeError("pool must be a non-empty 2-D matrix")
        if not np.all(np.isfinite(w)):
            raise ValidationError("pool contains non-finite entries")
        if np.any(~w.any(axis=1)):
            raise ValidationError("every hyperplane normal must be nonzero")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def pool_size(self) -> int:
        return self.w.shape[0]

    @property
    def n_dims(self) -> int:
        return self.w.shape[1]


def generate_pool(n_dims: int, pool_size: int, seed: int) -> HyperplanePool:
    """Draw a pool of i.i.d. standard Gaussian normal vectors.

    Gaussian entries induce the same hyperplane distribution as
    uniform-on-sphere rows (rotational invariance) and the encoding only
    looks at signs, so no normalization is applied.
    """
    if n_dims < 1 or pool_size < 1:
        raise ValidationError("n_dims and pool_size must be at least 1")
    w = np.random.default_rng(seed).standard_normal((pool_size, n_dims))
    return HyperplanePool(w, seed)


def encode(pool: HyperplanePool, x) -> BitCode:
    """Encode one vector: bit i = 1 iff pool row i dot x > 0."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != pool.n_dims:
        raise ShapeError(f"expected a {pool.n_dims}-dim vector, got shape {x.shape}")
    return BitCode.from_bits(pool.w @ x > 0)


def encode_batch(pool: HyperplanePool, data) -> list[BitCode]:
    """Encode dataset rows (or a raw 2-D array) in order."""
    vectors = data.vectors if isinstance(data, LabeledDataset) else np.asarray(data, dtype=np.float64)
    if vectors.ndim != 2 or (vectors.shape[0] > 0 and vectors.shape[1] != pool.n_dims):
        raise ShapeError(
            f"expected rows of dimension {pool.n_dims}, got shape {vectors.shape}"
        )
    if vectors.shape[0] == 0:
        return []
    bits = vectors @ pool.w.T > 0
    words = pack_bit_matrix(bits)
    words.setflags(write=False)
    return [BitCode(words[i], pool.pool_size) for i in range(words.shape[0])]


def restrict_pool(pool: HyperplanePool, indices) -> HyperplanePool:
    """New pool holding the given rows, in the given order."""
    indices = np.asarray(indices)
    if indices.ndim != 1 or indices.size < 1:
        raise ValidationError("indices must be a non-empty 1-D sequence")
    if indices.dtype.kind not in "iu":
        raise ValidationError("indices must be integers")
    if indices.min() < 0 or indices.max() >= pool.pool_size:
        raise ValidationError("pool index out of range")
    if np.unique(indices).size != indices.size:
        raise ValidationError("pool indices must be unique")
    return HyperplanePool(pool.w[indices], seed=pool.seed)


def codes_to_words(codes) -> tuple[np.ndarray, int]:
    """Stack codes into an (n, n_words) word matrix; lengths must agree."""
    codes = list(codes)
    if not codes:
        raise ValidationError("expected at least one code")
    length = codes[0].length
    for c in codes[1:]:
        if c.length != length:
            raise ShapeError("all codes must have the same length")
    return np.vstack([c.words for c in codes]), length


def codes_to_bit_matrix(codes) -> np.ndarray:
    """Unpack codes into an (n, length) uint8 matrix, order preserved."""
    words, length = codes_to_words(codes)
    return unpack_word_matrix(words, length)


def hamming_distance(a: BitCode, b: BitCode) -> int:
    """Plain Hamming distance via popcount over packed words."""
    if a.length != b.length:
        raise ShapeError("codes must have equal lengths")
    return int(np.bitwise_count(a.words ^ b.words).sum())


def hamming_distance_ref(a: BitCode, b: BitCode) -> int:
    """Bit-by-bit scalar reference, kept to cross-check the packed path."""
    if a.length != b.length:
        raise ShapeError("codes must have equal lengths")
    return sum(1 for x, y in zip(a.to_bits(), b.to_bits()) if x != y)


def save_codes(codes, path) -> None:
    """Write a code dump: header (count, bit length) then packed words."""
    codes = list(codes)
    if codes:
        words, length = codes_to_words(codes)
        payload = np.ascontiguousarray(words, dtype="<u8").tobytes()
    else:
        length = 0
        payload = b""
    header = _CODES_MAGIC + struct.pack("<HQQ", _CODES_VERSION, len(codes), length)
    Path(path).write_bytes(header + payload)


def load_codes(path) -> list[BitCode]:
    """Read a code dump written by save_codes."""
    blob = Path(path).read_bytes()
    head = len(_CODES_MAGIC) + struct.calcsize("<HQQ")
    if len(blob) < head or not blob.startswith(_CODES_MAGIC):
        raise ValidationError(f"{path}: not a code dump file")
    version, count, length = struct.unpack("<HQQ", blob[len(_CODES_MAGIC) : head])
    if version != _CODES_VERSION:
        raise ValidationError(
            f"{path}: unsupported code dump version {version} "
            f"(expected {_CODES_VERSION})"
        )
    if count == 0:
        if len(blob) != head:
            raise ValidationError(f"{path}: trailing bytes after empty dump")
        return []
    n_words = _n_words(length)
    expected = head + count * n_words * 8
    if len(blob) != expected:
        raise ValidationError(f"{path}: expected {expected} bytes, got {len(blob)}")
    words = np.frombuffer(blob, dtype="<u8", offset=head).reshape(count, n_words)
    words = np.ascontiguousarray(words).view(np.uint64)
    words.setflags(write=False)
    return [BitCode(words[i], length) for i in range(count)]
