"""Hamming search over code databases and the retrieval metric suite.

Search always uses the plain (unweighted) Hamming distance over packed
words: the learned importance weights exist to pick hyperplanes, not to
reweight query-time distances. Rankings sort by ascending distance with
ties broken by ascending database index. Per-query work is independent;
the `SLSH_THREADS` environment variable caps the fan-out (0 or unset means
automatic), and results do not depend on the thread count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dataset import DataSplit, LabeledDataset
from .errors import CapabilityError, ShapeError, ValidationError
from .hashing import BitCode, codes_to_words, encode_batch


@dataclass(frozen=True, eq=False)
class SearchResult:
    """Ranked database indices with their (non-decreasing) Hamming distances."""

    indices: np.ndarray
    distances: np.ndarray


@dataclass(frozen=True)
class MetricReport:
    """Retrieval quality for one scheme at one bit width."""

    bits: int
    acquisition: float
    precision: float
    recall: float
    error_rate: float


@dataclass(frozen=True)
class CurveCell:
    """One curve entry; either a report or a recorded per-cell failure."""

    scheme: str
    bits: int
    report: MetricReport | None = None
    error: str | None = None


@dataclass(frozen=True)
class ErrorTally:
    """Error-rate breakdown: failures overall and those with no label in the db."""

    errors: int
    label_absent: int
    queries: int

    @property
    def rate(self) -> float:
        return self.errors / self.queries


def max_threads() -> int:
    """Worker cap from SLSH_THREADS (0 or unset picks a small automatic cap)."""
    raw = os.environ.get("SLSH_THREADS", "0").strip() or "0"
    try:
        value = int(raw)
    except ValueError:
        raise ValidationError(f"SLSH_THREADS must be an integer, got {raw!r}") from None
    if value < 0:
        raise ValidationError("SLSH_THREADS cannot be negative")
    if value == 0:
        return min(8, os.cpu_count() or 1)
    return value


def retrieve_count_for(acquisition: float, db_size: int) -> int:
    """Rows to retrieve for an acquisition fraction: round half up, floor 1."""
    if not 0.0 < acquisition <= 1.0:
        raise ValidationError("acquisition must lie in (0, 1]")
    if db_size < 1:
        raise ValidationError("db_size must be at least 1")
    count = int(math.floor(acquisition * db_size + 0.5))
    return max(1, min(count, db_size))


def search(query: BitCode, db, retrieve_count: int) -> SearchResult:
    """The retrieve_count nearest database codes by plain Hamming distance."""
    words, length = codes_to_words(db)
    if query.length != length:
        raise ShapeError("query and database codes must have equal lengths")
    if not 1 <= retrieve_count <= words.shape[0]:
        raise ValidationError(
            f"retrieve_count must lie in [1, {words.shape[0]}], got {retrieve_count}"
        )
    distances = np.bitwise_count(words ^ query.words).sum(axis=1, dtype=np.int64)
    order = np.argsort(distances, kind="stable")[:retrieve_count]
    return SearchResult(indices=order, distances=distances[order])


def precision_recall(result: SearchResult, query_label, db_labels) -> tuple[float, float]:
    """Precision and recall of a ranked retrieval against the database labels.

    Recall is 0 when the query's label does not occur in the database.
    """
    db_labels = np.asarray(db_labels)
    if result.indices.size and result.indices.max() >= db_labels.shape[0]:
        raise ValidationError("db_labels does not cover the ranked indices")
    hits = int(np.count_nonzero(db_labels[result.indices] == query_label))
    precision = hits / result.indices.size
    total_same = int(np.count_nonzero(db_labels == query_label))
    recall = hits / total_same if total_same else 0.0
    return precision, recall


def _topk_hit_counts(db_words, db_labels, q_words, q_labels, k: int) -> np.ndarray:
    """Per query: how many of the k nearest database rows share its label."""
    n_queries = q_words.shape[0]

    def scan(span):
        lo, hi = span
        out = np.empty(hi - lo, dtype=np.int64)
        for pos, qi in enumerate(range(lo, hi)):
            d = np.bitwise_count(db_words ^ q_words[qi]).sum(axis=1, dtype=np.int64)
            top = np.argsort(d, kind="stable")[:k]
            out[pos] = np.count_nonzero(db_labels[top] == q_labels[qi])
        return out

    workers = min(max_threads(), n_queries)
    if workers <= 1:
        return scan((0, n_queries))
    bounds = np.linspace(0, n_queries, workers + 1, dtype=int)
    spans = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if a < b]
    with ThreadPoolExecutor(max_workers=len(spans)) as pool:
        chunks = list(pool.map(scan, spans))
    return np.concatenate(chunks)


def _batch_stats(query_codes, query_labels, db_codes, db_labels, acquisition: float):
    q_words, q_len = codes_to_words(query_codes)
    db_words, db_len = codes_to_words(db_codes)
    if q_len != db_len:
        raise ShapeError("query and database codes must have equal lengths")
    q_labels = np.asarray(query_labels)
    db_labels = np.asarray(db_labels)
    if q_labels.shape[0] != q_words.shape[0] or db_labels.shape[0] != db_words.shape[0]:
        raise ShapeError("one label per code is required")
    k = retrieve_count_for(acquisition, db_words.shape[0])
    hits = _topk_hit_counts(db_words, db_labels, q_words, q_labels, k)
    same_in_db = np.array(
        [np.count_nonzero(db_labels == lab) for lab in q_labels], dtype=np.int64
    )
    precision = hits / k
    recall = np.where(same_in_db > 0, hits / np.maximum(same_in_db, 1), 0.0)
    return precision, recall, hits, same_in_db


def mean_precision_recall(
    query_codes, query_labels, db_codes, db_labels, acquisition: float
) -> tuple[float, float]:
    """Arithmetic mean of per-query precision and recall at one acquisition."""
    precision, recall, _, _ = _batch_stats(
        query_codes, query_labels, db_codes, db_labels, acquisition
    )
    return float(precision.mean()), float(recall.mean())


def error_counts(
    query_codes, query_labels, db_codes, db_labels, acquisition: float
) -> ErrorTally:
    """Count queries whose retrieved set holds no same-label row.

    Queries whose label never occurs in the database are errors by
    construction and are tallied separately as well.
    """
    if len(query_codes) < 1:
        raise ValidationError("at least one query is required")
    _, _, hits, same_in_db = _batch_stats(
        query_codes, query_labels, db_codes, db_labels, acquisition
    )
    return ErrorTally(
        errors=int(np.count_nonzero(hits == 0)),
        label_absent=int(np.count_nonzero(same_in_db == 0)),
        queries=len(query_codes),
    )


def error_rate(
    query_codes, query_labels, db_codes, db_labels, acquisition: float
) -> float:
    """Fraction of queries retrieving no same-label row at the acquisition."""
    return error_counts(
        query_codes, query_labels, db_codes, db_labels, acquisition
    ).rate


def curve_on(
    models, bit_widths, db_data: LabeledDataset, query_data: LabeledDataset,
    acquisition: float,
) -> list[CurveCell]:
    """Evaluate (scheme, model) pairs over bit widths against a database.

    Each model's stored preprocessing is replayed on both sets; at each
    width the model's selection prefix is encoded and scored. A width
    beyond a model's capacity is recorded as a per-cell error and the run
    continues.
    """
    widths = [int(b) for b in bit_widths]
    if not widths or min(widths) < 1:
        raise ValidationError("bit widths must be positive")
    if not 0.0 < acquisition <= 1.0:
        raise ValidationError("acquisition must lie in (0, 1]")
    cells: list[CurveCell] = []
    for scheme, model in models:
        db_proj = model.transform(db_data)
        q_proj = model.transform(query_data)
        for bits in widths:
            try:
                pool = model.selected_pool(bits)
            except CapabilityError as exc:
                cells.append(CurveCell(scheme=scheme, bits=bits, error=str(exc)))
                continue
            db_codes = encode_batch(pool, db_proj)
            q_codes = encode_batch(pool, q_proj)
            precision, recall, hits, _ = _batch_stats(
                q_codes, q_proj.labels, db_codes, db_proj.labels, acquisition
            )
            report = MetricReport(
                bits=bits,
                acquisition=acquisition,
                precision=float(precision.mean()),
                recall=float(recall.mean()),
                error_rate=float(np.count_nonzero(hits == 0) / hits.shape[0]),
            )
            cells.append(CurveCell(scheme=scheme, bits=bits, report=report))
    return cells


def curve(models, bit_widths, split: DataSplit, acquisition: float) -> list[CurveCell]:
    """Curve over a standard split: test rows form the database, query rows probe it."""
    return curve_on(models, bit_widths, split.test, split.query, acquisition)
