"""Measurement tools: edit distance, similarity-by-distance tables,
average precision / MAP, word difference vectors and 2-D projection.

Word labels are compared case-folded everywhere (relevance judgments,
per-word means, similarity grouping).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .data import Dataset, SegmentRecord
from .errors import DataError, DimensionError
from .retrieval import EmbeddingArchive, RankedResult


def phoneme_edit_distance(p: Sequence[str], q: Sequence[str]) -> int:
    """Levenshtein distance with unit insert/delete/substitute costs."""
    prev = list(range(len(q) + 1))
    for i, a in enumerate(p, start=1):
        cur = [i] + [0] * len(q)
        for j, b in enumerate(q, start=1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a != b))
        prev = cur
    return prev[len(q)]


@dataclass
class SimilarityBucket:
    """One edit-distance bucket: label, pair count, mean cosine similarity."""

    label: str
    pair_count: int
    mean_cosine: float


def similarity_table(
    archive: EmbeddingArchive,
    dataset: Dataset | Sequence[SegmentRecord],
    max_bucket: int = 5,
) -> list[SimilarityBucket]:
    """Mean cosine over all unordered entry pairs, bucketed by edit distance.

    Distances >= ``max_bucket`` fall into the top bucket labeled
    ``"{max_bucket}+"``.  Buckets with no pairs report mean NaN.
    """
    if max_bucket < 1:
        raise ValueError(f"max_bucket must be >= 1, got {max_bucket}")
    records = dataset.records if isinstance(dataset, Dataset) else list(dataset)
    phonemes: dict[str, tuple[str, ...]] = {}
    for rec in records:
        if rec.phonemes is not None:
            phonemes[rec.id] = tuple(rec.phonemes)
    ids = []
    seqs = []
    vecs = []
    for seg_id, _word, vec in archive.entries:
        if seg_id not in phonemes:
            rec_ids = {rec.id for rec in records}
            if seg_id not in rec_ids:
                raise DataError(f"record '{seg_id}' missing from the dataset")
            raise DataError(f"record '{seg_id}' has no phoneme sequence")
        ids.append(seg_id)
        seqs.append(phonemes[seg_id])
        vecs.append(vec)

    mat = np.stack(vecs)
    norms = np.linalg.norm(mat, axis=1)
    safe = np.where(norms == 0.0, 1.0, norms)
    unit = mat / safe[:, None]  # zero-norm rows stay zero => cosine 0
    sims = unit @ unit.T

    dist_cache: dict[tuple[tuple[str, ...], tuple[str, ...]], int] = {}

    def cached_distance(pa, pb):
        key = (pa, pb) if pa <= pb else (pb, pa)
        if key not in dist_cache:
            dist_cache[key] = phoneme_edit_distance(key[0], key[1])
        return dist_cache[key]

    n = len(ids)
    sums = [0.0] * (max_bucket + 1)
    counts = [0] * (max_bucket + 1)
    for i in range(n):
        for j in range(i + 1, n):
            bucket = min(cached_distance(seqs[i], seqs[j]), max_bucket)
            sums[bucket] += float(sims[i, j])
            counts[bucket] += 1

    rows = []
    for bucket in range(max_bucket + 1):
        label = str(bucket) if bucket < max_bucket else f"{max_bucket}+"
        mean = sums[bucket] / counts[bucket] if counts[bucket] else float("nan")
        rows.append(SimilarityBucket(label=label, pair_count=counts[bucket], mean_cosine=mean))
    return rows


def average_precision(ranked: RankedResult, relevant_ids: set[str]) -> float:
    """AP = (1/|R|) * sum of precision@k at each relevant rank k."""
    if not relevant_ids:
        raise ValueError("average precision is undefined for an empty relevant set")
    universe = {seg_id for seg_id, _ in ranked}
    missing = set(relevant_ids) - universe
    if missing:
        raise DataError(f"relevant ids missing from the ranking: {sorted(missing)}")
    hits = 0
    total = 0.0
    for k, (seg_id, _score) in enumerate(ranked, start=1):
        if seg_id in relevant_ids:
            hits += 1
            total += hits / k
    return total / len(relevant_ids)


@dataclass
class QueryResult:
    query_id: str
    word: str
    num_relevant: int
    ap: float | None  # None when the query had no relevant counterpart


@dataclass
class MapReport:
    mean_ap: float | None  # None when no query was scorable
    rows: list[QueryResult]
    num_excluded: int


def mean_average_precision(
    ranker: Callable[[SegmentRecord], RankedResult],
    records: Sequence[SegmentRecord],
) -> MapReport:
    """Every record queries once (self excluded by the ranker); relevance is
    a case-folded word match.  Queries with no relevant counterpart are
    excluded from the mean and counted."""
    records = list(records)
    if not records:
        raise DataError("MAP requires a non-empty record set")
    rows: list[QueryResult] = []
    aps: list[float] = []
    excluded = 0
    for rec in records:
        folded = rec.word.casefold()
        relevant = {
            other.id
            for other in records
            if other.id != rec.id and other.word.casefold() == folded
        }
        if not relevant:
            excluded += 1
            rows.append(QueryResult(rec.id, rec.word, 0, None))
            continue
        ap = average_precision(ranker(rec), relevant)
        rows.append(QueryResult(rec.id, rec.word, len(relevant), ap))
        aps.append(ap)
    mean = sum(aps) / len(aps) if aps else None
    return MapReport(mean_ap=mean, rows=rows, num_excluded=excluded)


@dataclass
class WordMeanEmbedding:
    word: str
    mean: np.ndarray
    token_count: int


def word_mean_embeddings(archive: EmbeddingArchive) -> dict[str, WordMeanEmbedding]:
    """Mean embedding per case-folded word label."""
    sums: dict[str, np.ndarray] = {}
    counts: dict[str, int] = {}
    for _seg_id, word, vec in archive.entries:
        folded = word.casefold()
        if folded not in sums:
            sums[folded] = np.zeros(archive.dim)
            counts[folded] = 0
        sums[folded] += vec
        counts[folded] += 1
    return {
        w: WordMeanEmbedding(word=w, mean=sums[w] / counts[w], token_count=counts[w])
        for w in sums
    }


def word_difference_vectors(
    archive: EmbeddingArchive, word_pairs: Sequence[tuple[str, str]]
) -> list[np.ndarray]:
    """Per-pair differences of word-mean embeddings."""
    means = word_mean_embeddings(archive)
    diffs = []
    for w1, w2 in word_pairs:
        for w in (w1, w2):
            if w.casefold() not in means:
                raise DataError(f"word '{w}' not present in the archive")
        diffs.append(means[w1.casefold()].mean - means[w2.casefold()].mean)
    return diffs


_POWER_ITER_CAP = 1000
_POWER_ITER_TOL = 1e-10
_POWER_ITER_SEED = 7


def _dominant_eigenvector(cov: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, float]:
    d = cov.shape[0]
    v = rng.standard_normal(d)
    v /= np.linalg.norm(v)
    for _ in range(_POWER_ITER_CAP):
        w = cov @ v
        norm = float(np.linalg.norm(w))
        if norm < 1e-300:
            break  # (near-)zero matrix: any direction works, data projects to 0
        w /= norm
        if float(np.linalg.norm(w - v)) < _POWER_ITER_TOL:
            v = w
            break
        v = w
    lam = float(v @ cov @ v)
    return v, lam


def project_2d(vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Center and project onto the top-2 principal components.

    Power iteration with deflation (cap 1000 iterations, tolerance 1e-10,
    seeded start).  Component signs are fixed so each component's
    largest-magnitude loading is positive.
    """
    vecs = [np.asarray(v, dtype=np.float64) for v in vectors]
    if len(vecs) < 2:
        raise ValueError("projection needs at least 2 vectors")
    width = vecs[0].shape
    for v in vecs:
        if v.shape != width or v.ndim != 1:
            raise DimensionError("all vectors must share one width")
    x = np.stack(vecs)
    xc = x - x.mean(axis=0)
    cov = xc.T @ xc
    rng = np.random.default_rng(_POWER_ITER_SEED)

    v1, lam1 = _dominant_eigenvector(cov, rng)
    v2, _ = _dominant_eigenvector(cov - lam1 * np.outer(v1, v1), rng)
    # orthogonalize; degenerate spectra leave a zero second component
    v2 = v2 - (v1 @ v2) * v1
    n2 = float(np.linalg.norm(v2))
    v2 = v2 / n2 if n2 > 1e-12 else np.zeros_like(v2)

    comps = []
    for v in (v1, v2):
        j = int(np.argmax(np.abs(v)))
        comps.append(-v if v[j] < 0 else v)
    return xc @ np.column_stack(comps)


def write_similarity_table(rows: Sequence[SimilarityBucket], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["edit_distance", "pair_count", "mean_cosine"])
        for row in rows:
            writer.writerow([row.label, row.pair_count, repr(float(row.mean_cosine))])


def write_map_report(rows: Sequence[QueryResult], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["query_id", "word", "num_relevant", "ap"])
        for row in rows:
            ap = "" if row.ap is None else repr(float(row.ap))
            writer.writerow([row.query_id, row.word, row.num_relevant, ap])


def write_comparison(results: Sequence[tuple[str, float | None]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", "map"])
        for method, value in results:
            writer.writerow([method, "" if value is None else repr(float(value))])


def write_diff_vectors(
    pairs: Sequence[tuple[str, str]],
    diffs: Sequence[np.ndarray],
    projections: np.ndarray,
    path: str | Path,
) -> None:
    dim = diffs[0].shape[0]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["pair"] + [f"dx{i}" for i in range(dim)] + ["proj_x", "proj_y"])
        for (w1, w2), diff, proj in zip(pairs, diffs, projections):
            writer.writerow(
                [f"{w1}:{w2}"]
                + [repr(float(v)) for v in diff]
                + [repr(float(proj[0])), repr(float(proj[1]))]
            )
