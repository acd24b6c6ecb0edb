"""Local/global ancestors, fine-tuning against the global ancestor, and gluing.

A worker's local ancestor is the frequency profile of its alignment plus a
consensus sequence (most frequent residue per column, majority-gap columns
left out).  The root aligns the consensi into the global ancestor; each
worker aligns its profile to that ancestor, which puts every worker's
columns into one shared coordinate frame, and the root glues the results.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence as _Seq

import numpy as np

from .pairwise import (
    EditScript,
    GapModel,
    Op,
    Profile,
    ScriptError,
    SubstitutionModel,
    align_profiles,
    apply_script,
    profile_of,
    regap,
)
from .seqcore import GAP, PROTEIN, Alignment, Alphabet, DataError, Sequence

MAJORITY_GAP = 0.5


@dataclass(frozen=True)
class AncestorProfile:
    profile: Profile
    consensus: Sequence
    source_worker: int = 0
    kept_columns: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if len(self.kept_columns) != len(self.consensus.residues):
            raise ValueError("consensus length must equal the number of kept columns")


def extract_ancestor(
    local: Alignment, alphabet: Alphabet = PROTEIN, source_worker: int = 0
) -> AncestorProfile:
    if not local.rows:
        raise DataError("cannot extract an ancestor from an empty alignment")
    prof = profile_of(local, alphabet)
    kept = np.flatnonzero(prof.gap <= MAJORITY_GAP)
    if not len(kept):
        raise DataError(f"worker {source_worker}: every column is majority-gap, no consensus")
    # argmax returns the first maximum, i.e. alphabet order breaks ties
    best = prof.freqs[kept].argmax(axis=1)
    consensus = "".join(alphabet.letters[i] for i in best)
    return AncestorProfile(
        prof,
        Sequence(f"ancestor{source_worker}", consensus),
        source_worker,
        tuple(int(c) for c in kept),
    )


def build_global_ancestor(
    locals_: _Seq[AncestorProfile],
    model: SubstitutionModel,
    gaps: GapModel = GapModel(),
) -> tuple[Alignment, Profile]:
    """Align the local consensi, adding them one at a time in bucket order."""
    if not locals_:
        raise ValueError("need at least one local ancestor")
    ordered = sorted(locals_, key=lambda a: a.source_worker)
    aln = Alignment.single(ordered[0].consensus)
    for anc in ordered[1:]:
        nxt = Alignment.single(anc.consensus)
        script, _ = align_profiles(
            profile_of(aln, model.alphabet), profile_of(nxt, model.alphabet), model, gaps
        )
        aln = apply_script(script, aln, nxt)
    return aln, profile_of(aln, model.alphabet)


def fine_tune(
    local: Alignment,
    global_ancestor: Profile,
    model: SubstitutionModel,
    gaps: GapModel = GapModel(),
) -> tuple[Alignment, EditScript]:
    """Align a worker's alignment to the global ancestor.

    Returns the worker's rows widened with gap columns where the ancestor
    has columns the worker lacks (INS_B), and the script, whose A side is
    the worker and B side the ancestor.
    """
    script, _ = align_profiles(profile_of(local, model.alphabet), global_ancestor, model, gaps)
    tuned = regap(local, script.codes() != Op.INS_B)
    return tuned, script


@dataclass(frozen=True)
class GlueFrame:
    ancestor_cols: int
    scripts: tuple[EditScript, ...]

    def __post_init__(self) -> None:
        for w, s in enumerate(self.scripts):
            if s.len_b != self.ancestor_cols:
                raise ScriptError(
                    f"worker {w}: script covers {s.len_b} ancestor columns, frame has {self.ancestor_cols}"
                )

    def insertions(self) -> np.ndarray:
        """(workers x ancestor_cols+1) count of worker columns before each ancestor column."""
        tally = np.zeros((len(self.scripts), self.ancestor_cols + 1), dtype=np.int64)
        for w, script in enumerate(self.scripts):
            g = 0
            for op in script.ops:
                if op == Op.INS_A:
                    tally[w, g] += 1
                else:
                    g += 1
        return tally

    @property
    def width(self) -> int:
        return self.ancestor_cols + int(self.insertions().sum())

    def column_maps(self) -> list[np.ndarray]:
        """For each worker, the output column of each of its tuned columns."""
        tally = self.insertions()
        per_gap = tally.sum(axis=0)
        # start of the insertion region in front of ancestor column g
        region = np.concatenate([[0], np.cumsum(per_gap[:-1] + 1)])
        before = np.cumsum(tally, axis=0) - tally  # insertions of earlier workers at g
        maps = []
        for w, script in enumerate(self.scripts):
            cols = np.empty(len(script), dtype=np.int64)
            g = 0
            used = 0
            for t, op in enumerate(script.ops):
                if op == Op.INS_A:
                    cols[t] = region[g] + before[w, g] + used
                    used += 1
                else:
                    cols[t] = region[g] + per_gap[g]
                    g += 1
                    used = 0
            maps.append(cols)
        return maps


def glue(frame: GlueFrame, tuned: _Seq[Alignment]) -> Alignment:
    """Merge fine-tuned worker alignments into one alignment on the ancestor frame.

    Worker insertions falling between the same two ancestor columns are laid
    side by side in worker order; other workers get gaps there.
    """
    if len(tuned) != len(frame.scripts):
        raise ScriptError(f"{len(tuned)} alignments for {len(frame.scripts)} scripts")
    width = frame.width
    rows: list[tuple[str, str]] = []
    for w, (aln, cols) in enumerate(zip(tuned, frame.column_maps())):
        if aln.n_cols != len(cols):
            raise ScriptError(f"worker {w}: alignment has {aln.n_cols} columns, script {len(cols)}")
        if not aln.rows:
            continue
        raw = np.array([np.frombuffer(r.encode("ascii"), dtype=np.uint8) for _, r in aln.rows])
        out = np.full((raw.shape[0], width), ord(GAP), dtype=np.uint8)
        out[:, cols] = raw
        rows.extend((sid, row.tobytes().decode("ascii")) for (sid, _), row in zip(aln.rows, out))
    return Alignment(tuple(rows))
