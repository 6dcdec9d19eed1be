"""Dataset ingestion, validation, and synthetic corpus generation.

A dataset on disk is a JSON-lines manifest plus one feature file per
segment.  Feature files are CSV (one frame per row, auditable) or an
optional packed binary alternative: a little-endian int32 (T, D) header
followed by T*D little-endian float32 values, selected by the ``.bin``
suffix.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, DimensionError, GenerationError

SPLITS = ("train", "test")
BINARY_SUFFIX = ".bin"

# Chance that a new synthetic word is a single-edit variant of an earlier
# one rather than a fresh uniform draw.  Desk-scale corpora need pairs at
# small phoneme edit distances, which uniform strings almost never produce.
_MUTATE_PROB = 0.5


def validate_frames(frames: np.ndarray, what: str = "feature sequence") -> np.ndarray:
    """Coerce to a float64 T x D array and enforce the type invariants."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] < 1 or frames.shape[1] < 1:
        raise DimensionError(
            f"{what}: expected a T x D array with T >= 1, got shape {frames.shape}"
        )
    if not np.isfinite(frames).all():
        raise DataError(f"{what}: contains non-finite values")
    return frames


@dataclass
class SegmentRecord:
    """One segment: features plus identity metadata."""

    id: str
    word: str
    phonemes: list[str] | None
    split: str
    features: np.ndarray

    def __post_init__(self):
        if self.split not in SPLITS:
            raise DataError(
                f"record '{self.id}': split must be one of {SPLITS}, got '{self.split}'"
            )
        if self.phonemes is not None and len(self.phonemes) == 0:
            raise DataError(f"record '{self.id}': phonemes, when present, must be non-empty")
        self.features = validate_frames(self.features, f"record '{self.id}'")

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_frames(self) -> int:
        return self.features.shape[0]


@dataclass
class Dataset:
    """Ordered segment records sharing one feature dimensionality."""

    records: list[SegmentRecord]
    dim: int

    def __post_init__(self):
        seen: set[str] = set()
        for rec in self.records:
            if rec.id in seen:
                raise DataError(f"duplicate record id '{rec.id}'")
            seen.add(rec.id)
            if rec.dim != self.dim:
                raise DimensionError(
                    f"record '{rec.id}' has {rec.dim} feature dims, dataset expects {self.dim}"
                )

    @classmethod
    def from_records(cls, records: list[SegmentRecord]) -> "Dataset":
        if not records:
            raise DataError("dataset contains no records")
        return cls(records=records, dim=records[0].dim)

    def subset(self, split: str) -> list[SegmentRecord]:
        return [rec for rec in self.records if rec.split == split]

    def by_id(self) -> dict[str, SegmentRecord]:
        return {rec.id: rec for rec in self.records}


def _read_csv_features(path: Path) -> np.ndarray:
    rows: list[list[float]] = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            try:
                vals = [float(p) for p in parts]
            except ValueError as exc:
                raise DataError(f"{path}: row {lineno}: non-numeric value") from exc
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise DimensionError(
                    f"{path}: row {lineno} has width {len(vals)}, expected {width}"
                )
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: empty feature file")
    return validate_frames(np.array(rows, dtype=np.float64), str(path))


def _read_binary_features(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    if len(raw) < 8:
        raise DataError(f"{path}: truncated header")
    t, d = struct.unpack("<ii", raw[:8])
    if t < 1 or d < 1:
        raise DataError(f"{path}: invalid header (T={t}, D={d})")
    expected = 8 + 4 * t * d
    if len(raw) != expected:
        raise DataError(f"{path}: expected {expected} bytes, found {len(raw)}")
    frames = np.frombuffer(raw, dtype="<f4", offset=8).astype(np.float64).reshape(t, d)
    return validate_frames(frames, str(path))


def load_feature_file(path: str | Path) -> np.ndarray:
    path = Path(path)
    if path.suffix == BINARY_SUFFIX:
        return _read_binary_features(path)
    return _read_csv_features(path)


def write_feature_csv(path: str | Path, frames: np.ndarray) -> None:
    frames = validate_frames(frames)
    with open(path, "w", encoding="utf-8") as fh:
        for row in frames:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")


def write_feature_bin(path: str | Path, frames: np.ndarray) -> None:
    frames = validate_frames(frames)
    t, d = frames.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<ii", t, d))
        fh.write(frames.astype("<f4").tobytes())


def parse_manifest(path: str | Path) -> Dataset:
    """Load a JSON-lines manifest; record order is file order."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"manifest not found: {path}")
    base = path.parent
    records: list[SegmentRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: line {lineno}: invalid JSON") from exc
            try:
                rec_id = obj["id"]
                word = obj["word"]
                split = obj["split"]
                feat_rel = obj["features"]
            except KeyError as exc:
                raise DataError(f"{path}: line {lineno}: missing field {exc}") from exc
            phonemes = obj.get("phonemes")
            feat_path = base / feat_rel
            if not feat_path.is_file():
                raise DataError(f"record '{rec_id}': feature file not found: {feat_path}")
            features = load_feature_file(feat_path)
            records.append(
                SegmentRecord(
                    id=rec_id,
                    word=word,
                    phonemes=list(phonemes) if phonemes is not None else None,
                    split=split,
                    features=features,
                )
            )
    return Dataset.from_records(records)


def write_manifest(
    dataset: Dataset,
    manifest_path: str | Path,
    fmt: str = "csv",
    features_dirname: str = "features",
) -> Path:
    """Write the manifest and one feature file per record next to it."""
    if fmt not in ("csv", "bin"):
        raise ValueError(f"unknown feature format '{fmt}'")
    manifest_path = Path(manifest_path)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    feat_dir = manifest_path.parent / features_dirname
    feat_dir.mkdir(parents=True, exist_ok=True)
    suffix = ".csv" if fmt == "csv" else BINARY_SUFFIX
    lines = []
    for rec in dataset.records:
        rel = f"{features_dirname}/{rec.id}{suffix}"
        target = manifest_path.parent / rel
        if fmt == "csv":
            write_feature_csv(target, rec.features)
        else:
            write_feature_bin(target, rec.features)
        obj: dict = {"id": rec.id, "word": rec.word}
        if rec.phonemes is not None:
            obj["phonemes"] = rec.phonemes
        obj["split"] = rec.split
        obj["features"] = rel
        lines.append(json.dumps(obj))
    with open(manifest_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")
    return manifest_path


def _random_word(rng, alphabet_size, kmin, kmax) -> tuple[int, ...]:
    k = int(rng.integers(kmin, kmax + 1))
    return tuple(int(v) for v in rng.integers(0, alphabet_size, size=k))


def _mutate_word(rng, word, alphabet_size, kmin, kmax) -> tuple[int, ...]:
    ops = ["sub"]
    if len(word) > kmin:
        ops.append("del")
    if len(word) < kmax:
        ops.append("ins")
    op = ops[int(rng.integers(0, len(ops)))]
    pos = int(rng.integers(0, len(word)))
    sym = int(rng.integers(0, alphabet_size))
    if op == "sub":
        return word[:pos] + (sym,) + word[pos + 1 :]
    if op == "del":
        return word[:pos] + word[pos + 1 :]
    return word[:pos] + (sym,) + word[pos:]


def _draw_distinct_words(rng, alphabet_size, num_words, kmin, kmax) -> list[tuple[int, ...]]:
    words: list[tuple[int, ...]] = []
    seen: set[tuple[int, ...]] = set()
    budget = 1000 * num_words + 1000
    while len(words) < num_words:
        budget -= 1
        if budget <= 0:
            raise GenerationError("could not draw enough distinct phoneme strings")
        if words and rng.random() < _MUTATE_PROB:
            base = words[int(rng.integers(0, len(words)))]
            cand = _mutate_word(rng, base, alphabet_size, kmin, kmax)
        else:
            cand = _random_word(rng, alphabet_size, kmin, kmax)
        if cand in seen:
            continue
        seen.add(cand)
        words.append(cand)
    return words


def generate_synthetic(
    alphabet_size: int,
    num_words: int,
    tokens_per_word: int,
    phonemes_per_word_range: tuple[int, int],
    dim: int,
    frames_per_phoneme_range: tuple[int, int],
    noise_sigma: float,
    seed: int,
) -> Dataset:
    """Generate a phoneme-string corpus with known ground-truth structure.

    Each alphabet symbol gets a fixed D-dim prototype (components uniform in
    [-1, 1]).  Words are distinct symbol strings; about half are single-edit
    variants of earlier words so that small edit distances are represented.
    Each token renders each phoneme as L frames (L uniform in
    ``frames_per_phoneme_range``) of prototype plus N(0, noise_sigma^2)
    noise.  Tokens with index < ceil(tokens_per_word / 2) go to the train
    split, the rest to test.  Fully deterministic for a fixed seed.
    """
    if alphabet_size < 2:
        raise GenerationError(f"alphabet_size must be >= 2, got {alphabet_size}")
    if num_words < 1 or tokens_per_word < 1 or dim < 1:
        raise GenerationError("num_words, tokens_per_word and dim must all be >= 1")
    kmin, kmax = phonemes_per_word_range
    fmin, fmax = frames_per_phoneme_range
    if not (1 <= kmin <= kmax) or not (1 <= fmin <= fmax):
        raise GenerationError("ranges must be non-empty with min >= 1")
    if noise_sigma < 0:
        raise GenerationError(f"noise_sigma must be >= 0, got {noise_sigma}")
    available = sum(alphabet_size**k for k in range(kmin, kmax + 1))
    if num_words > available:
        raise GenerationError(
            f"cannot draw {num_words} distinct words: only {available} strings exist"
        )

    rng = np.random.default_rng(seed)
    prototypes = rng.uniform(-1.0, 1.0, size=(alphabet_size, dim))
    words = _draw_distinct_words(rng, alphabet_size, num_words, kmin, kmax)

    train_tokens = (tokens_per_word + 1) // 2
    records: list[SegmentRecord] = []
    for wi, word in enumerate(words):
        label = f"w{wi:03d}"
        phonemes = [f"p{s:02d}" for s in word]
        for tj in range(tokens_per_word):
            blocks = []
            for s in word:
                length = int(rng.integers(fmin, fmax + 1))
                noise = rng.normal(0.0, noise_sigma, size=(length, dim))
                blocks.append(prototypes[s] + noise)
            records.append(
                SegmentRecord(
                    id=f"{label}_t{tj:02d}",
                    word=label,
                    phonemes=phonemes,
                    split="train" if tj < train_tokens else "test",
                    features=np.concatenate(blocks, axis=0),
                )
            )
    return Dataset.from_records(records)
