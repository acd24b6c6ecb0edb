"""Sequential progressive aligner: UPGMA guide tree + profile-profile merges.

This is what every worker runs on its own subset.  Anything with an
``align(seqs) -> Alignment`` method can stand in for it, including an
external program wrapped by :class:`ExternalAligner`.
"""

from __future__ import annotations

import logging
import shlex
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence as _Seq

import numpy as np

from .kmer import KmerParams, distance_matrix
from .pairwise import GapModel, SubstitutionModel, align_profiles, apply_script, profile_of
from .seqcore import (
    PROTEIN,
    Alignment,
    Alphabet,
    DataError,
    Sequence,
    check_alignment,
    parse_fasta,
    write_fasta,
)

log = logging.getLogger(__name__)


class ExternalAlignerError(RuntimeError):
    pass


@dataclass(frozen=True)
class GuideTree:
    """Binary guide tree; leaves carry ``id``, internal nodes two children."""

    height: float = 0.0
    id: str | None = None
    left: GuideTree | None = None
    right: GuideTree | None = None
    leaves: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.id is not None:
            object.__setattr__(self, "leaves", (self.id,))
        elif self.left is not None and self.right is not None:
            object.__setattr__(self, "leaves", self.left.leaves + self.right.leaves)
        else:
            raise ValueError("guide tree node needs an id or two children")

    @property
    def is_leaf(self) -> bool:
        return self.id is not None

    @property
    def label(self) -> str:
        return min(self.leaves)

    def postorder(self):
        stack = [(self, False)]
        while stack:
            node, seen = stack.pop()
            if node.is_leaf or seen:
                yield node
            else:
                stack.append((node, True))
                stack.append((node.right, False))
                stack.append((node.left, False))

    def newick(self) -> str:
        if self.is_leaf:
            return self.id
        return f"({self.left.newick()},{self.right.newick()}):{self.height:.6g}"


def upgma(ids: _Seq[str], dist: np.ndarray) -> GuideTree:
    """Average-linkage clustering.

    Among equally close cluster pairs the one with the lexicographically
    smallest (min label, max label) merges first, a cluster's label being
    its smallest leaf id.
    """
    n = len(ids)
    if n == 0:
        raise ValueError("cannot build a guide tree from zero sequences")
    nodes: list[GuideTree | None] = [GuideTree(id=i) for i in ids]
    sizes = np.ones(n)
    d = np.array(dist, dtype=np.float64, copy=True)
    np.fill_diagonal(d, np.inf)
    active = np.ones(n, dtype=bool)
    for _ in range(n - 1):
        best = d.min()
        ii, jj = np.nonzero(d == best)
        if len(ii) == 1:
            i, j = int(ii[0]), int(jj[0])
        else:
            cands = [
                (min(nodes[a].label, nodes[b].label), max(nodes[a].label, nodes[b].label), a, b)
                for a, b in zip(ii.tolist(), jj.tolist())
                if a < b
            ]
            _, _, i, j = min(cands)
        a, b = nodes[i], nodes[j]
        if b.label < a.label:
            a, b = b, a
        merged = GuideTree(height=best / 2.0, left=a, right=b)
        row = (sizes[i] * d[i] + sizes[j] * d[j]) / (sizes[i] + sizes[j])
        keep, drop = min(i, j), max(i, j)
        d[keep, :] = row
        d[:, keep] = row
        d[drop, :] = np.inf
        d[:, drop] = np.inf
        d[keep, keep] = np.inf
        sizes[keep] += sizes[drop]
        active[drop] = False
        nodes[keep] = merged
        nodes[drop] = None
    return nodes[int(np.argmax(active))]


def build_guide_tree(seqs: _Seq[Sequence], params: KmerParams = KmerParams()) -> GuideTree:
    if not seqs:
        raise ValueError("cannot build a guide tree from zero sequences")
    if len(seqs) == 1:
        return GuideTree(id=seqs[0].id)
    return upgma([s.id for s in seqs], distance_matrix(seqs, params))


def progressive_align(
    seqs: _Seq[Sequence],
    tree: GuideTree,
    model: SubstitutionModel,
    gaps: GapModel = GapModel(),
) -> Alignment:
    """Merge alignments bottom-up along *tree*; rows come back in input order."""
    by_id = {s.id: s for s in seqs}
    if sorted(by_id) != sorted(tree.leaves) or len(by_id) != len(seqs):
        raise ValueError("guide tree leaves do not match the sequence ids")
    alphabet = model.alphabet
    done: dict[int, Alignment] = {}
    for node in tree.postorder():
        if node.is_leaf:
            done[id(node)] = Alignment.single(by_id[node.id])
            continue
        a = done.pop(id(node.left))
        b = done.pop(id(node.right))
        script, _ = align_profiles(profile_of(a, alphabet), profile_of(b, alphabet), model, gaps)
        done[id(node)] = apply_script(script, a, b)
    return done[id(tree)].reorder([s.id for s in seqs])


class Aligner(Protocol):
    def align(self, seqs: _Seq[Sequence]) -> Alignment: ...


@dataclass(frozen=True)
class BuiltinAligner:
    model: SubstitutionModel
    gaps: GapModel = GapModel()
    kmer: KmerParams = KmerParams()

    def align(self, seqs: _Seq[Sequence]) -> Alignment:
        tree = build_guide_tree(seqs, self.kmer)
        return progressive_align(seqs, tree, self.model, self.gaps)


@dataclass(frozen=True)
class ExternalAligner:
    command: str
    alphabet: Alphabet = PROTEIN
    timeout: float | None = None

    def align(self, seqs: _Seq[Sequence]) -> Alignment:
        return external_align(seqs, self.command, self.alphabet, timeout=self.timeout)


def external_align(
    seqs: _Seq[Sequence],
    command: str,
    alphabet: Alphabet = PROTEIN,
    *,
    timeout: float | None = None,
) -> Alignment:
    """Run an external MSA program and validate what it returns.

    *command* is split shell-style.  ``{in}`` in it is replaced by the path
    of a FASTA file holding *seqs*, otherwise the FASTA goes to stdin;
    ``{out}`` is replaced by a path the program must write aligned FASTA
    to, otherwise aligned FASTA is read from stdout.
    """
    fasta = write_fasta(seqs)
    with tempfile.TemporaryDirectory(prefix="sample_align_") as tmp:
        in_path = Path(tmp) / "in.fa"
        out_path = Path(tmp) / "out.afa"
        in_path.write_text(fasta)
        args = [
            tok.replace("{in}", str(in_path)).replace("{out}", str(out_path))
            for tok in shlex.split(command)
        ]
        if not args:
            raise ExternalAlignerError("empty aligner command")
        log.debug("running external aligner: %s", args)
        try:
            proc = subprocess.run(
                args,
                input=None if "{in}" in command else fasta.encode(),
                capture_output=True,
                timeout=timeout,
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise ExternalAlignerError(f"could not run {args[0]!r}: {exc}") from exc
        if proc.returncode != 0:
            tail = proc.stderr.decode(errors="replace").strip()[-400:]
            raise ExternalAlignerError(f"{args[0]!r} exited with status {proc.returncode}: {tail}")
        raw = out_path.read_bytes() if "{out}" in command else proc.stdout
    try:
        aln = parse_fasta(raw, alphabet, gapped=True)
        check_alignment(aln, seqs)
    except DataError as exc:
        raise ExternalAlignerError(f"external aligner output rejected: {exc}") from exc
    return aln.reorder([s.id for s in seqs])
