"""k-mer counting, k-mer distance and k-mer rank.

The distance between two sequences X (length n) and Y (length m) is

    F(X, Y) = sum_i min(c_i^X, c_i^Y) / (min(n, m) - k + 1)
    d(X, Y) = -ln(delta + F(X, Y))

and the rank of a sequence against a pool is the mean distance to every
pool member, itself included.  ``kmer_distance``/``kmer_rank`` are the
direct, one-pair-at-a-time definitions; ``distance_matrix`` computes whole
blocks of distances at once and is what the pipeline uses.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence as _Seq

import numpy as np

from ._meter import add_kmer_evals
from .seqcore import Sequence

DEFAULT_K = 5
DEFAULT_DELTA = 0.02


MAX_K = 9  # base-128 codes of k bytes must fit in int64


@dataclass(frozen=True)
class KmerParams:
    k: int = DEFAULT_K
    delta: float = DEFAULT_DELTA

    def __post_init__(self) -> None:
        if not 1 <= self.k <= MAX_K:
            raise ValueError(f"k must be in [1, {MAX_K}], got {self.k}")
        if not 0 < self.delta <= 0.1:
            raise ValueError(f"delta must be in (0, 0.1], got {self.delta}")


@dataclass(frozen=True)
class KmerVector:
    k: int
    counts: dict[str, int]
    seq_len: int

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def count_kmers(seq: Sequence | str, k: int) -> KmerVector:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    s = seq.residues if isinstance(seq, Sequence) else seq
    counts = Counter(s[i : i + k] for i in range(len(s) - k + 1))
    return KmerVector(k, dict(counts), len(s))


def common_fraction(x: KmerVector, y: KmerVector) -> float:
    if x.k != y.k:
        raise ValueError(f"mismatched k-mer lengths {x.k} and {y.k}")
    denom = min(x.seq_len, y.seq_len) - x.k + 1
    if denom <= 0:
        return 0.0
    if len(x.counts) > len(y.counts):
        x, y = y, x
    shared = sum(min(c, y.counts.get(w, 0)) for w, c in x.counts.items())
    return shared / denom


def kmer_distance(x: KmerVector, y: KmerVector, params: KmerParams) -> float:
    if x.k != params.k or y.k != params.k:
        raise ValueError(f"k-mer vectors built with k={x.k}/{y.k}, params say k={params.k}")
    return -math.log(params.delta + common_fraction(x, y))


def kmer_rank(i: int, pool: _Seq[KmerVector], params: KmerParams) -> float:
    if not pool:
        raise ValueError("k-mer rank needs a non-empty pool")
    x = pool[i]
    return sum(kmer_distance(x, y, params) for y in pool) / len(pool)


def rank_against_sample(seq: KmerVector, sample: _Seq[KmerVector], params: KmerParams) -> float:
    if not sample:
        raise ValueError("k-mer rank needs a non-empty sample")
    return sum(kmer_distance(seq, s, params) for s in sample) / len(sample)


# -- block computation -------------------------------------------------------


def _encode_kmers(residues: str, k: int) -> np.ndarray:
    """Integer code per k-mer occurrence: base-128 digits of the ASCII bytes."""
    if k > MAX_K:
        raise ValueError(f"k must be <= {MAX_K} for block distance computation")
    raw = np.frombuffer(residues.encode("ascii"), dtype=np.uint8).astype(np.int64)
    n = len(raw) - k + 1
    if n <= 0:
        return np.empty(0, dtype=np.int64)
    code = np.zeros(n, dtype=np.int64)
    for j in range(k):
        code = code * 128 + raw[j : j + n]
    return code


def _count_table(seqs: _Seq[Sequence], k: int, vocab: np.ndarray) -> np.ndarray:
    """Dense (len(seqs) x len(vocab)) occurrence counts restricted to *vocab*."""
    table = np.zeros((len(seqs), len(vocab)), dtype=np.float64)
    for row, s in enumerate(seqs):
        codes = _encode_kmers(s.residues, k)
        if not len(codes) or not len(vocab):
            continue
        pos = np.searchsorted(vocab, codes)
        pos = np.clip(pos, 0, len(vocab) - 1)
        hit = vocab[pos] == codes
        np.add.at(table[row], pos[hit], 1.0)
    return table


def _shared_counts(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """sum_v min(a[i, v], b[j, v]) for all i, j.

    Uses min(x, y) = sum_{t >= 1} [x >= t][y >= t] for non-negative integers,
    which turns the min-sum into a few matrix products.
    """
    out = np.zeros((a.shape[0], b.shape[0]))
    if a.size == 0 or b.size == 0:
        return out
    top = int(min(a.max(), b.max()))
    for t in range(1, top + 1):
        out += (a >= t).astype(np.float64) @ (b >= t).astype(np.float64).T
    return out


def cross_distances(
    rows: _Seq[Sequence], cols: _Seq[Sequence], params: KmerParams
) -> np.ndarray:
    """k-mer distance for every (rows[i], cols[j]) pair."""
    k = params.k
    add_kmer_evals(len(rows) * len(cols))
    row_sets = [np.unique(_encode_kmers(s.residues, k)) for s in rows]
    col_sets = [np.unique(_encode_kmers(s.residues, k)) for s in cols]
    empty = np.empty(0, dtype=np.int64)
    in_rows = np.unique(np.concatenate(row_sets)) if row_sets else empty
    in_cols = np.unique(np.concatenate(col_sets)) if col_sets else empty
    vocab = np.intersect1d(in_rows, in_cols)
    shared = _shared_counts(_count_table(rows, k, vocab), _count_table(cols, k, vocab))
    n = np.array([len(s) for s in rows])
    m = np.array([len(s) for s in cols])
    denom = np.minimum.outer(n, m) - k + 1
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(denom > 0, shared / np.maximum(denom, 1), 0.0)
    return -np.log(params.delta + frac)


def distance_matrix(seqs: _Seq[Sequence], params: KmerParams) -> np.ndarray:
    """All-pairs k-mer distances within one pool (self distances on the diagonal)."""
    return cross_distances(seqs, seqs, params)


def pool_ranks(seqs: _Seq[Sequence], params: KmerParams) -> np.ndarray:
    """k-mer rank of every member of *seqs* against the pool *seqs*."""
    if not seqs:
        raise ValueError("k-mer rank needs a non-empty pool")
    return distance_matrix(seqs, params).mean(axis=1)


def sample_ranks(seqs: _Seq[Sequence], sample: _Seq[Sequence], params: KmerParams) -> np.ndarray:
    """k-mer rank of every member of *seqs* against *sample*."""
    if not sample:
        raise ValueError("k-mer rank needs a non-empty sample")
    return cross_distances(seqs, sample, params).mean(axis=1)
