"""Shared test helpers: finite-difference checking and fixture builders."""
from __future__ import annotations

import numpy as np

from seqembed.data import SegmentRecord


def finite_difference(loss_fn, arr: np.ndarray, eps: float = 1e-4) -> np.ndarray:
    """Central finite differences of a scalar loss w.r.t. one array, in place."""
    grad = np.zeros_like(arr)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + eps
        plus = loss_fn()
        flat[k] = orig - eps
        minus = loss_fn()
        flat[k] = orig
        gflat[k] = (plus - minus) / (2.0 * eps)
    return grad


def assert_grads_close(
    analytic: np.ndarray,
    numeric: np.ndarray,
    rel: float = 1e-4,
    floor: float = 1e-6,
    label: str = "",
) -> None:
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    err = np.abs(analytic - numeric)
    tol = np.maximum(floor, rel * np.maximum(np.abs(analytic), np.abs(numeric)))
    bad = err > tol
    assert not bad.any(), (
        f"{label}: {int(bad.sum())} gradient entries outside tolerance; "
        f"worst err {err.max():.3e} vs tol {tol[np.unravel_index(err.argmax(), err.shape)]:.3e}"
    )


def make_records(feature_arrays, words=None, splits=None, phonemes=None):
    """Build SegmentRecords r0, r1, ... from raw arrays."""
    n = len(feature_arrays)
    words = words if words is not None else [f"word{i}" for i in range(n)]
    splits = splits if splits is not None else ["test"] * n
    phonemes = phonemes if phonemes is not None else [None] * n
    return [
        SegmentRecord(
            id=f"r{i}",
            word=words[i],
            phonemes=phonemes[i],
            split=splits[i],
            features=np.asarray(feature_arrays[i], dtype=np.float64),
        )
        for i in range(n)
    ]
