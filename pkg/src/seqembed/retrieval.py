"""Query-by-example retrieval: archive building, cosine scoring, ranking.

Archives hold one fixed-width vector per segment, built off-line by any
segment-to-vector encoder (trained model or naive baseline).  Queries are
scored against every entry by cosine similarity and returned in descending
score order with an ascending-id tie break; an optional id is excluded so
a query drawn from the archive never retrieves itself.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .baselines import dtw_distance
from .data import Dataset, SegmentRecord
from .errors import DataError, DimensionError

RankedResult = list[tuple[str, float]]


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    """u.v / (|u||v|); defined as 0 when either norm is zero."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise DimensionError(f"vector shapes differ: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(u @ v) / (nu * nv)


@dataclass
class EmbeddingArchive:
    """Off-line encoded segments: (id, word, vector) entries of one width."""

    entries: list[tuple[str, str, np.ndarray]]
    dim: int

    def __post_init__(self):
        seen: set[str] = set()
        for seg_id, _word, vec in self.entries:
            if seg_id in seen:
                raise DataError(f"duplicate archive id '{seg_id}'")
            seen.add(seg_id)
            if vec.shape != (self.dim,):
                raise DimensionError(
                    f"archive entry '{seg_id}' has shape {vec.shape}, expected ({self.dim},)"
                )
            if not np.isfinite(vec).all():
                raise DataError(f"archive entry '{seg_id}' contains non-finite values")
        self._by_id = {seg_id: (word, vec) for seg_id, word, vec in self.entries}

    def __len__(self) -> int:
        return len(self.entries)

    def vector(self, seg_id: str) -> np.ndarray:
        if seg_id not in self._by_id:
            raise DataError(f"unknown archive id '{seg_id}'")
        return self._by_id[seg_id][1]

    def word(self, seg_id: str) -> str:
        if seg_id not in self._by_id:
            raise DataError(f"unknown archive id '{seg_id}'")
        return self._by_id[seg_id][0]


def build_archive(
    encoder: Callable[[np.ndarray], np.ndarray],
    dataset: Dataset | Sequence[SegmentRecord],
) -> EmbeddingArchive:
    """Encode every record with ``encoder``; entry order follows record order."""
    records = dataset.records if isinstance(dataset, Dataset) else list(dataset)
    if not records:
        raise DataError("cannot build an archive from zero records")
    entries: list[tuple[str, str, np.ndarray]] = []
    dim = None
    for rec in records:
        try:
            vec = np.asarray(encoder(rec.features), dtype=np.float64)
        except Exception as exc:
            raise DataError(f"encoding failed for record '{rec.id}': {exc}") from exc
        if vec.ndim != 1:
            raise DimensionError(
                f"encoder returned shape {vec.shape} for record '{rec.id}', expected a vector"
            )
        if dim is None:
            dim = vec.shape[0]
        entries.append((rec.id, rec.word, vec))
    return EmbeddingArchive(entries=entries, dim=dim)


def rank(
    query_vector: np.ndarray,
    archive: EmbeddingArchive,
    exclude_id: str | None = None,
    top_k: int | None = None,
) -> RankedResult:
    """Cosine-score all non-excluded entries, sort by (-score, id)."""
    q = np.asarray(query_vector, dtype=np.float64)
    if q.shape != (archive.dim,):
        raise DimensionError(f"query width {q.shape} does not match archive dim {archive.dim}")
    if top_k is not None and top_k < 1:
        raise ValueError(f"top_k must be >= 1, got {top_k}")
    scored = [
        (seg_id, cosine_similarity(q, vec))
        for seg_id, _word, vec in archive.entries
        if seg_id != exclude_id
    ]
    scored.sort(key=lambda item: (-item[1], item[0]))
    if top_k is not None:
        scored = scored[:top_k]
    return scored


def rank_dtw(
    query: np.ndarray,
    dataset: Dataset | Sequence[SegmentRecord],
    exclude_id: str | None = None,
    top_k: int | None = None,
    normalize: bool = False,
) -> RankedResult:
    """Rank segments by negated DTW distance to the query sequence."""
    records = dataset.records if isinstance(dataset, Dataset) else list(dataset)
    if top_k is not None and top_k < 1:
        raise ValueError(f"top_k must be >= 1, got {top_k}")
    scored = [
        (rec.id, -dtw_distance(query, rec.features, normalize=normalize))
        for rec in records
        if rec.id != exclude_id
    ]
    scored.sort(key=lambda item: (-item[1], item[0]))
    if top_k is not None:
        scored = scored[:top_k]
    return scored


def save_archive(archive: EmbeddingArchive, path: str | Path) -> None:
    """CSV with header id,word,z0,...,z{d-1}; floats keep round-trip precision."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "word"] + [f"z{i}" for i in range(archive.dim)])
        for seg_id, word, vec in archive.entries:
            writer.writerow([seg_id, word] + [repr(float(v)) for v in vec])


def load_archive(path: str | Path) -> EmbeddingArchive:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"archive not found: {path}")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty archive file") from None
        if len(header) < 3 or header[:2] != ["id", "word"]:
            raise DataError(f"{path}: unexpected archive header {header!r}")
        dim = len(header) - 2
        entries = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != dim + 2:
                raise DimensionError(f"{path}: line {lineno} has {len(row)} fields, expected {dim + 2}")
            try:
                vec = np.array([float(v) for v in row[2:]], dtype=np.float64)
            except ValueError as exc:
                raise DataError(f"{path}: line {lineno}: non-numeric embedding value") from exc
            entries.append((row[0], row[1], vec))
    if not entries:
        raise DataError(f"{path}: archive contains no entries")
    return EmbeddingArchive(entries=entries, dim=dim)
