"""Alignment accuracy against a reference, and the sum-of-pairs score.

Pairs and columns are compared in residue coordinates (index of the residue
in its ungapped sequence), so the two alignments may differ in width.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import _dp
from .pairwise import GapModel, SubstitutionModel, encode_rows
from .seqcore import GAP, Alignment, AlignmentError, degap

Pair = tuple[str, int, str, int]


@dataclass(frozen=True)
class PairSet:
    pairs: frozenset[Pair]

    def __len__(self) -> int:
        return len(self.pairs)

    def __contains__(self, item) -> bool:
        return item in self.pairs

    def __and__(self, other: PairSet) -> PairSet:
        return PairSet(self.pairs & other.pairs)


def _residue_index(aln: Alignment) -> tuple[list[str], np.ndarray]:
    """Ids sorted, plus (rows x cols) residue index per cell, -1 for gaps."""
    ids = sorted(aln.ids)
    d = aln.as_dict()
    if not ids:
        return ids, np.zeros((0, 0), dtype=np.int64)
    raw = np.array([np.frombuffer(d[i].encode("ascii"), dtype=np.uint8) for i in ids])
    filled = raw != ord(GAP)
    idx = np.cumsum(filled, axis=1) - 1
    return ids, np.where(filled, idx, -1)


def _pair_codes(aln: Alignment) -> np.ndarray:
    """Aligned residue pairs as sorted unique int64 codes (fast path for scoring)."""
    ids, idx = _residue_index(aln)
    if len(ids) < 2:
        return np.empty(0, dtype=np.int64)
    base = int(idx.max()) + 1
    out = []
    for r, s in combinations(range(len(ids)), 2):
        both = (idx[r] >= 0) & (idx[s] >= 0)
        a = idx[r][both]
        b = idx[s][both]
        pair_id = r * len(ids) + s
        out.append((pair_id * base + a) * base + b)
    return np.unique(np.concatenate(out)) if out else np.empty(0, dtype=np.int64)


def aligned_pairs(aln: Alignment) -> PairSet:
    """Every (id_a, i, id_b, j) with residue i of a and j of b in one column, id_a < id_b."""
    ids, idx = _residue_index(aln)
    pairs = set()
    for r, s in combinations(range(len(ids)), 2):
        both = (idx[r] >= 0) & (idx[s] >= 0)
        for a, b in zip(idx[r][both].tolist(), idx[s][both].tolist()):
            pairs.add((ids[r], a, ids[s], b))
    return PairSet(frozenset(pairs))


def _check_same(test: Alignment, ref: Alignment) -> None:
    t = {i: degap(r) for i, r in test.rows}
    f = {i: degap(r) for i, r in ref.rows}
    if set(t) != set(f):
        missing = sorted(set(f) - set(t))
        extra = sorted(set(t) - set(f))
        raise AlignmentError(f"test and reference ids differ (missing {missing}, unexpected {extra})")
    for i in f:
        if t[i] != f[i]:
            raise AlignmentError(f"sequence {i!r} differs between test and reference")


def _counts(test: Alignment, ref: Alignment) -> tuple[int, int, int]:
    _check_same(test, ref)
    pt = _pair_codes(test)
    pr = _pair_codes(ref)
    common = len(np.intersect1d(pt, pr, assume_unique=True))
    return common, len(pt), len(pr)


def q_score(test: Alignment, ref: Alignment) -> float:
    """Share of reference residue pairs that *test* also aligns."""
    common, _, n_ref = _counts(test, ref)
    return 1.0 if n_ref == 0 else common / n_ref


def modeler_score(test: Alignment, ref: Alignment) -> float:
    """Share of *test*'s residue pairs that the reference also aligns."""
    common, n_test, _ = _counts(test, ref)
    return 1.0 if n_test == 0 else common / n_test


def pair_counts(test: Alignment, ref: Alignment) -> tuple[int, int, int]:
    """(shared pairs, pairs in test, pairs in ref)."""
    return _counts(test, ref)


def _column_signatures(aln: Alignment) -> list[tuple[tuple[str, int], ...]]:
    ids, idx = _residue_index(aln)
    sigs = []
    for c in range(idx.shape[1] if idx.size else 0):
        col = tuple((ids[r], int(idx[r, c])) for r in range(len(ids)) if idx[r, c] >= 0)
        if col:
            sigs.append(col)
    return sigs


def tc_score(test: Alignment, ref: Alignment) -> float:
    """Share of non-empty reference columns that appear in *test* with exactly the same residues."""
    _check_same(test, ref)
    ref_cols = _column_signatures(ref)
    if not ref_cols:
        return 1.0
    test_cols = set(_column_signatures(test))
    return sum(c in test_cols for c in ref_cols) / len(ref_cols)


def sp_score(
    aln: Alignment,
    model: SubstitutionModel,
    gaps: GapModel = GapModel(),
    *,
    terminal_gaps: bool = True,
) -> float:
    """Sum over row pairs of the pairwise alignment score each pair inherits.

    Columns where both rows are gapped are skipped; each maximal run of one
    row's residues against gaps costs ``open + length * extend``.  With
    ``terminal_gaps=False`` runs touching either end are free.
    """
    if len(aln) < 2:
        return 0.0
    codes = encode_rows(aln, model.alphabet)
    gap_code = model.alphabet.size
    S = np.ascontiguousarray(model.scores, dtype=np.float64)
    total = 0.0
    for r, s in combinations(range(len(codes)), 2):
        total += _dp.pair_projection_score(
            np.ascontiguousarray(codes[r]),
            np.ascontiguousarray(codes[s]),
            gap_code,
            S,
            float(gaps.open),
            float(gaps.extend),
            terminal_gaps,
        )
    return float(total)
