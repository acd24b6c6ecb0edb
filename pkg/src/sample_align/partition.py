"""Regular-sampling decomposition of ranked sequences into p buckets.

Each worker sorts its sequences by k-mer rank and contributes p-1 evenly
spaced samples; the root sorts the p(p-1) gathered ranks Y_1..Y_{p(p-1)}
and takes Y_{p/2}, Y_{p+p/2}, ... as the p-1 bucket boundaries.  With
distinct keys this bounds every bucket by 2N/p.

Ranks tie easily (unrelated sequences all sit at -ln(delta)), so sequences
are ordered by the key (rank, id) throughout and pivots carry the id of the
sample they came from.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass
from typing import Sequence as _Seq, Union

Key = tuple[float, str]


@dataclass(frozen=True)
class RankedSeq:
    id: str
    rank: float
    home_worker: int = 0

    def __post_init__(self) -> None:
        if self.rank != self.rank or self.rank in (float("inf"), float("-inf")):
            raise ValueError(f"rank of {self.id!r} is not finite")

    @property
    def key(self) -> Key:
        return (self.rank, self.id)


@dataclass(frozen=True)
class PivotSet:
    pivots: tuple[float, ...]
    tiebreak: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if list(self.pivots) != sorted(self.pivots):
            raise ValueError("pivots must be non-decreasing")
        if self.tiebreak is not None and len(self.tiebreak) != len(self.pivots):
            raise ValueError("one tie-break id per pivot")

    @property
    def p(self) -> int:
        return len(self.pivots) + 1

    def keys(self) -> list:
        if self.tiebreak is None:
            return list(self.pivots)
        return list(zip(self.pivots, self.tiebreak))


@dataclass(frozen=True)
class WorkerPlan:
    buckets: tuple[tuple[str, ...], ...]

    @property
    def counts(self) -> list[int]:
        return [len(b) for b in self.buckets]

    def bucket_of(self) -> dict[str, int]:
        return {sid: i for i, b in enumerate(self.buckets) for sid in b}


def sort_ranked(ranked: _Seq[RankedSeq]) -> list[RankedSeq]:
    return sorted(ranked, key=lambda r: r.key)


def sample_positions(n: int, count: int) -> list[int]:
    if count < 1:
        raise ValueError("sample count must be >= 1")
    if count > n:
        raise ValueError(f"cannot take {count} samples from {n} items")
    if count == n:
        return list(range(n))
    return [(j + 1) * n // (count + 1) for j in range(count)]


def choose_local_samples(ranked: _Seq[RankedSeq], count: int) -> list[str]:
    """Ids of *count* evenly spaced members of a rank-sorted list, ends excluded."""
    if any(a.rank > b.rank for a, b in zip(ranked, ranked[1:])):
        raise ValueError("ranked list must be sorted by rank")
    return [ranked[i].id for i in sample_positions(len(ranked), count)]


def pivot_indices(n_samples: int, p: int) -> list[int]:
    """0-based positions of the p-1 pivots in a sorted sample of size n_samples.

    For the regular case n_samples == p(p-1) these are the 1-based
    floor(p/2) + j*p; other sample sizes use the same relative spacing.
    """
    if p < 2:
        raise ValueError("need p >= 2 for pivots")
    if n_samples == p * (p - 1):
        return [p // 2 + j * p - 1 for j in range(p - 1)]
    idx = [int((j + 0.5) * n_samples / (p - 1)) - 1 for j in range(p - 1)]
    return [min(max(i, 0), n_samples - 1) for i in idx]


def select_pivots(
    sample_ranks: _Seq[Union[float, Key]], p: int, *, strict: bool = True
) -> PivotSet:
    """Pick p-1 pivots from the gathered regular sample.

    *sample_ranks* holds plain ranks or (rank, id) keys.  With
    ``strict=True`` exactly p(p-1) samples are required.
    """
    if p < 2:
        raise ValueError("need p >= 2 for pivots")
    if strict and len(sample_ranks) != p * (p - 1):
        raise ValueError(f"expected {p * (p - 1)} sample ranks for p={p}, got {len(sample_ranks)}")
    if not sample_ranks:
        raise ValueError("no sample ranks")
    ys = sorted(sample_ranks)
    chosen = [ys[i] for i in pivot_indices(len(ys), p)]
    if isinstance(chosen[0], tuple):
        return PivotSet(tuple(c[0] for c in chosen), tuple(c[1] for c in chosen))
    return PivotSet(tuple(float(c) for c in chosen))


def bucket_index(r: RankedSeq, pivots: PivotSet) -> int:
    """Smallest i with key <= pivot_i; past the last pivot -> p-1."""
    key = r.rank if pivots.tiebreak is None else r.key
    return bisect_left(pivots.keys(), key)


def assign_buckets(ranked: _Seq[RankedSeq], pivots: PivotSet) -> WorkerPlan:
    keys = pivots.keys()
    buckets: list[list[str]] = [[] for _ in range(pivots.p)]
    for r in ranked:
        key = r.rank if pivots.tiebreak is None else r.key
        buckets[bisect_left(keys, key)].append(r.id)
    return WorkerPlan(tuple(tuple(b) for b in buckets))


def regular_sample_partition(
    local_lists: _Seq[_Seq[RankedSeq]], p: int
) -> tuple[PivotSet, WorkerPlan]:
    """Whole regular-sampling round on in-memory lists (used by tests and inspection)."""
    gathered: list[Key] = []
    for lst in local_lists:
        srt = sort_ranked(lst)
        if srt:
            chosen = set(choose_local_samples(srt, min(p - 1, len(srt))))
            gathered.extend(r.key for r in srt if r.id in chosen)
    pivots = select_pivots(gathered, p, strict=False)
    everything = [r for lst in local_lists for r in lst]
    return pivots, assign_buckets(everything, pivots)
