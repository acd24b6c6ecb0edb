"""Synthetic protein families with a known true alignment.

A random root sequence is evolved down a balanced binary tree.  Along each
branch every site mutates with probability ``1 - (1 - sub_rate)**scale``
(uniformly to another residue), and indel events start at a site with the
analogous indel probability, half insertions and half deletions, with
geometric lengths.  Every residue carries the id of the true-alignment
column it descends from; inserted residues get fresh columns placed right
after the column of the residue preceding them, so all leaves agree on the
column order.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .seqcore import ALPHABETS, GAP, Alignment, Sequence

Residues = list[tuple[int, int]]  # (column id, letter index)


@dataclass(frozen=True)
class EvolveParams:
    root_len: int = 100
    n_seqs: int = 16
    sub_rate: float = 0.1
    indel_rate: float = 0.01
    mean_indel_len: float = 2.0
    tree_depth_scale: float = 1.0
    seed: int = 0
    alphabet: str = "protein"

    def __post_init__(self) -> None:
        if self.root_len < 1:
            raise ValueError("root_len must be >= 1")
        if self.n_seqs < 1:
            raise ValueError("n_seqs must be >= 1")
        for name in ("sub_rate", "indel_rate"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must be in [0, 1), got {v}")
        if self.mean_indel_len < 1.0:
            raise ValueError("mean_indel_len must be >= 1")
        if self.tree_depth_scale < 0:
            raise ValueError("tree_depth_scale must be >= 0")
        if self.alphabet not in ALPHABETS:
            raise ValueError(f"unknown alphabet {self.alphabet!r}")

    def branch_prob(self, rate: float) -> float:
        return 1.0 - (1.0 - rate) ** self.tree_depth_scale


class _Columns:
    """Global left-to-right order of true-alignment columns."""

    def __init__(self, n: int) -> None:
        self.order = list(range(n))
        self.next_id = n

    def insert_after(self, anchor: int | None, count: int) -> list[int]:
        new = list(range(self.next_id, self.next_id + count))
        self.next_id += count
        at = 0 if anchor is None else self.order.index(anchor) + 1
        self.order[at:at] = new
        return new


def _evolve(seq: Residues, params: EvolveParams, cols: _Columns, rng: np.random.Generator, size: int) -> Residues:
    p_sub = params.branch_prob(params.sub_rate)
    p_indel = params.branch_prob(params.indel_rate)
    geo = 1.0 / params.mean_indel_len
    out: Residues = []
    for col, letter in seq:
        if rng.random() < p_sub:
            letter = (letter + int(rng.integers(1, size))) % size
        out.append((col, letter))
    i = 0
    while i <= len(out):
        if rng.random() < p_indel:
            length = int(rng.geometric(geo))
            if rng.random() < 0.5:
                anchor = out[i - 1][0] if i > 0 else None
                new = cols.insert_after(anchor, length)
                out[i:i] = [(c, int(rng.integers(size))) for c in new]
                i += length
            elif i < len(out):
                # never delete the last remaining residues
                length = min(length, len(out) - i, len(out) - 1)
                del out[i : i + length]
        i += 1
    return out


def _evolve_branch(seq: Residues, params: EvolveParams, scale: float, cols: _Columns, rng, size: int) -> Residues:
    if scale == params.tree_depth_scale:
        return _evolve(seq, params, cols, rng, size)
    return _evolve(seq, replace(params, tree_depth_scale=scale), cols, rng, size)


def _grow(root: Residues, n: int, params: EvolveParams, cols: _Columns, rng, size: int) -> list[Residues]:
    """Leaves of a balanced binary tree with *n* leaves hanging from *root*."""
    leaves: list[Residues] = []
    stack = [(root, n)]  # left subtree is expanded first
    while stack:
        seq, m = stack.pop()
        if m == 1:
            leaves.append(seq)
            continue
        left = _evolve(seq, params, cols, rng, size)
        right = _evolve(seq, params, cols, rng, size)
        stack.append((right, m // 2))
        stack.append((left, m - m // 2))
    return leaves


def _to_alignment(leaves: list[Residues], ids: list[str], cols: _Columns, letters: str) -> Alignment:
    position = {c: j for j, c in enumerate(cols.order)}
    grid = np.full((len(leaves), len(cols.order)), ord(GAP), dtype=np.uint8)
    for r, leaf in enumerate(leaves):
        for c, x in leaf:
            grid[r, position[c]] = ord(letters[x])
    grid = grid[:, (grid != ord(GAP)).any(axis=0)]
    return Alignment(tuple((sid, g.tobytes().decode("ascii")) for sid, g in zip(ids, grid)))


def _random_root(params: EvolveParams, rng, size: int) -> Residues:
    return [(c, int(x)) for c, x in enumerate(rng.integers(size, size=params.root_len))]


def generate(params: EvolveParams) -> tuple[list[Sequence], Alignment]:
    """Evolve a family; returns the leaf sequences and their true alignment."""
    rng = np.random.default_rng(params.seed)
    letters = ALPHABETS[params.alphabet].symbols
    size = len(letters)
    cols = _Columns(params.root_len)
    leaves = _grow(_random_root(params, rng, size), params.n_seqs, params, cols, rng, size)
    width = len(str(params.n_seqs - 1))
    aln = _to_alignment(leaves, [f"s{i:0{width}d}" for i in range(params.n_seqs)], cols, letters)
    return aln.sequences(), aln


def generate_clustered(
    params: EvolveParams,
    n_clusters: int,
    *,
    stem_scale: float | None = None,
    scales: list[float] | None = None,
) -> tuple[list[Sequence], Alignment, list[int]]:
    """A family made of *n_clusters* clades of near-equal size.

    Each clade ancestor descends from the common root along a stem of depth
    *stem_scale* (default: twice ``params.tree_depth_scale``); clade c then
    grows a balanced subtree at depth scale ``scales[c]`` (default: evenly
    spread from 0.5x to 2x ``params.tree_depth_scale``), so clades differ in
    internal divergence.  ``params.n_seqs`` is the total.  Returns the
    sequences (ids ``c<k>_s<i>``), their true alignment and the clade label
    of each sequence.
    """
    if not 1 <= n_clusters <= params.n_seqs:
        raise ValueError("need 1 <= n_clusters <= n_seqs")
    base = params.tree_depth_scale
    if stem_scale is None:
        stem_scale = 2.0 * base
    if scales is None:
        scales = [float(x) for x in np.linspace(0.5, 2.0, n_clusters) * base] if n_clusters > 1 else [base]
    if len(scales) != n_clusters:
        raise ValueError("one scale per cluster")
    rng = np.random.default_rng(params.seed)
    letters = ALPHABETS[params.alphabet].symbols
    size = len(letters)
    cols = _Columns(params.root_len)
    root = _random_root(params, rng, size)
    leaves: list[Residues] = []
    ids: list[str] = []
    labels: list[int] = []
    for c in range(n_clusters):
        n = params.n_seqs // n_clusters + (c < params.n_seqs % n_clusters)
        clade_root = _evolve_branch(root, params, stem_scale, cols, rng, size)
        clade = _grow(clade_root, n, replace(params, tree_depth_scale=scales[c]), cols, rng, size)
        width = len(str(n - 1))
        leaves.extend(clade)
        ids.extend(f"c{c}_s{i:0{width}d}" for i in range(n))
        labels.extend([c] * n)
    aln = _to_alignment(leaves, ids, cols, letters)
    return aln.sequences(), aln, labels
