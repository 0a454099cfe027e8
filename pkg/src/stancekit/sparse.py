"""Sparse count vectors used as classifier inputs.

A feature vector is a sorted list of (index, count) pairs over some
integer feature space (token ids or Brown cluster ids).  Indices are
strictly increasing and counts are positive integers; dot products are
summed in ascending index order so results are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class SparseFeatureVector:
    indices: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        cnt = np.asarray(self.counts, dtype=np.int64)
        if idx.ndim != 1 or cnt.ndim != 1 or idx.shape != cnt.shape:
            raise ValueError("indices and counts must be 1-d arrays of equal length")
        if idx.size:
            if np.any(np.diff(idx) <= 0):
                raise ValueError("feature indices must be strictly increasing")
            if idx[0] < 0:
                raise ValueError("feature indices must be non-negative")
            if np.any(cnt < 1):
                raise ValueError("feature counts must be >= 1")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "counts", cnt)

    @classmethod
    def from_pairs(cls, pairs) -> "SparseFeatureVector":
        pairs = sorted(pairs)
        idx = np.array([i for i, _ in pairs], dtype=np.int64)
        cnt = np.array([c for _, c in pairs], dtype=np.int64)
        return cls(idx, cnt)

    @classmethod
    def from_counts(cls, counts: dict) -> "SparseFeatureVector":
        return cls.from_pairs([(i, c) for i, c in counts.items() if c])

    @classmethod
    def from_dense(cls, values) -> "SparseFeatureVector":
        values = np.asarray(values)
        (nz,) = np.nonzero(values)
        return cls(nz.astype(np.int64), values[nz].astype(np.int64))

    @classmethod
    def empty(cls) -> "SparseFeatureVector":
        return cls(np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64))

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def max_index(self) -> int:
        return int(self.indices[-1]) if self.indices.size else -1

    def to_dense(self, width: int) -> np.ndarray:
        out = np.zeros(width, dtype=np.float64)
        out[self.indices] = self.counts
        return out

    def pairs(self):
        return list(zip(self.indices.tolist(), self.counts.tolist()))


def sparse_dot(a: SparseFeatureVector, b: SparseFeatureVector) -> float:
    """Dot product over the union of nonzero indices, ascending index order."""
    ia, ib = a.indices, b.indices
    if ia.size == 0 or ib.size == 0:
        return 0.0
    shared, pa, pb = np.intersect1d(ia, ib, assume_unique=True, return_indices=True)
    if shared.size == 0:
        return 0.0
    total = 0.0
    ca, cb = a.counts, b.counts
    for k in range(shared.size):
        total += float(ca[pa[k]]) * float(cb[pb[k]])
    return total


def stack_csr(vectors, width: int | None = None) -> sp.csr_matrix:
    """Assemble feature vectors into one CSR matrix (rows follow input order)."""
    if width is None:
        width = max((v.max_index() for v in vectors), default=-1) + 1
    width = max(width, 1)
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    for i, v in enumerate(vectors):
        indptr[i + 1] = indptr[i] + v.nnz
    indices = np.concatenate([v.indices for v in vectors]) if vectors else np.empty(0, np.int64)
    data = (
        np.concatenate([v.counts for v in vectors]).astype(np.float64)
        if vectors
        else np.empty(0, np.float64)
    )
    mat = sp.csr_matrix((data, indices, indptr), shape=(len(vectors), width))
    mat.sort_indices()
    return mat
