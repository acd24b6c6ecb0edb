"""Sequence and alignment types, plus FASTA reading and writing."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence as _Seq

import numpy as np

GAP = "-"
FASTA_WIDTH = 60


class DataError(ValueError):
    """Malformed input data: bad FASTA, broken alignment invariants."""


class FastaError(DataError):
    pass


class AlignmentError(DataError):
    pass


@dataclass(frozen=True)
class Alphabet:
    """Ordered residue symbols, optionally with a trailing wildcard.

    The wildcard (when set) is encoded as the last index and scores 0
    against everything.
    """

    symbols: str
    wildcard: str | None = None
    gap_char: str = field(default=GAP, init=False)

    def __post_init__(self) -> None:
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError(f"duplicate symbols in alphabet {self.symbols!r}")
        if len(self.symbols) < 2:
            raise ValueError("alphabet needs at least two symbols")
        if GAP in self.symbols or self.wildcard == GAP:
            raise ValueError("gap character cannot be a residue symbol")
        if self.wildcard is not None and (
            len(self.wildcard) != 1 or self.wildcard in self.symbols
        ):
            raise ValueError(f"bad wildcard {self.wildcard!r}")
        lut = np.full(256, -1, dtype=np.int16)
        for i, c in enumerate(self.letters):
            lut[ord(c)] = i
        object.__setattr__(self, "_lut", lut)

    @property
    def letters(self) -> str:
        return self.symbols + (self.wildcard or "")

    @property
    def size(self) -> int:
        """Number of encoded residue states (wildcard included)."""
        return len(self.letters)

    def with_wildcard(self, char: str = "X") -> Alphabet:
        return Alphabet(self.symbols, wildcard=char)

    def __contains__(self, ch: str) -> bool:
        return ch in self.letters

    def encode(self, text: str) -> np.ndarray:
        """Residue string -> int codes; gaps map to ``size``."""
        raw = np.frombuffer(text.encode("ascii"), dtype=np.uint8)
        codes = self._lut[raw]
        gaps = raw == ord(GAP)
        codes = np.where(gaps, self.size, codes)
        if (codes < 0).any():
            bad = text[int(np.argmax(codes < 0))]
            raise DataError(f"character {bad!r} not in alphabet")
        return codes.astype(np.int64)


PROTEIN = Alphabet("ARNDCQEGHILKMFPSTWYV")
DNA = Alphabet("ACGT")

ALPHABETS = {"protein": PROTEIN, "dna": DNA}


@dataclass(frozen=True)
class Sequence:
    id: str
    residues: str

    def __post_init__(self) -> None:
        if not self.id:
            raise DataError("sequence id must be non-empty")
        if not self.residues:
            raise DataError(f"empty sequence {self.id!r}")
        if GAP in self.residues:
            raise DataError(f"sequence {self.id!r} contains gap characters")

    def __len__(self) -> int:
        return len(self.residues)


@dataclass(frozen=True)
class Alignment:
    """Equal-length gapped rows keyed by sequence id.

    Construction checks the shape invariants (equal row length, unique ids).
    Checking that rows degap to particular inputs needs those inputs; see
    :func:`check_alignment`.
    """

    rows: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        rows = tuple((str(i), str(r)) for i, r in self.rows)
        object.__setattr__(self, "rows", rows)
        if rows:
            width = len(rows[0][1])
            for sid, row in rows:
                if len(row) != width:
                    raise AlignmentError(
                        f"ragged alignment: row {sid!r} has {len(row)} columns, expected {width}"
                    )
        ids = [sid for sid, _ in rows]
        if len(set(ids)) != len(ids):
            dup = next(i for i in ids if ids.count(i) > 1)
            raise AlignmentError(f"duplicate id {dup!r} in alignment")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> Alignment:
        return cls(tuple(pairs))

    @classmethod
    def single(cls, seq: Sequence) -> Alignment:
        return cls(((seq.id, seq.residues),))

    @property
    def n_cols(self) -> int:
        return len(self.rows[0][1]) if self.rows else 0

    @property
    def depth(self) -> int:
        return len(self.rows)

    @property
    def ids(self) -> list[str]:
        return [sid for sid, _ in self.rows]

    def __len__(self) -> int:
        return len(self.rows)

    def row(self, sid: str) -> str:
        for i, r in self.rows:
            if i == sid:
                return r
        raise KeyError(sid)

    def as_dict(self) -> dict[str, str]:
        return dict(self.rows)

    def reorder(self, ids: _Seq[str]) -> Alignment:
        d = self.as_dict()
        return Alignment(tuple((i, d[i]) for i in ids))

    def sequences(self) -> list[Sequence]:
        return [Sequence(i, degap(r)) for i, r in self.rows]

    def drop_empty_columns(self) -> Alignment:
        if not self.rows:
            return self
        arr = np.array([np.frombuffer(r.encode("ascii"), dtype=np.uint8) for _, r in self.rows])
        keep = (arr != ord(GAP)).any(axis=0)
        if keep.all():
            return self
        arr = arr[:, keep]
        return Alignment(tuple((sid, row.tobytes().decode("ascii")) for (sid, _), row in zip(self.rows, arr)))


def degap(row: str) -> str:
    return row.replace(GAP, "")


def check_alignment(aln: Alignment, seqs: Iterable[Sequence]) -> None:
    """Raise AlignmentError unless *aln* holds exactly *seqs*, each degapping to itself."""
    expected = {s.id: s.residues for s in seqs}
    got = aln.as_dict()
    for sid in expected:
        if sid not in got:
            raise AlignmentError(f"missing id {sid!r} in alignment")
    for sid, row in got.items():
        if sid not in expected:
            raise AlignmentError(f"unexpected id {sid!r} in alignment")
        if degap(row) != expected[sid]:
            raise AlignmentError(f"row {sid!r} does not degap to its input sequence")


def _ambiguous(ch: str) -> bool:
    return ch.isascii() and ch.isalpha()


def parse_fasta(
    text: str | bytes,
    alphabet: Alphabet = PROTEIN,
    *,
    gapped: bool = False,
) -> list[Sequence] | Alignment:
    """Parse FASTA text.

    With ``gapped=False`` (the default) returns a list of Sequence; with
    ``gapped=True`` gap characters are allowed and an Alignment is returned.
    Residues are uppercased.  If the alphabet has a wildcard, letters outside
    the alphabet are mapped to it; otherwise they are rejected.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FastaError(f"input is not UTF-8: {exc}") from None

    records: list[tuple[str, list[str], int]] = []
    seen: set[str] = set()
    allowed = set(alphabet.letters) | ({GAP} if gapped else set())
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith(">"):
            tokens = line[1:].split()
            if not tokens:
                raise FastaError(f"line {lineno}: header without an id")
            sid = tokens[0]
            if sid in seen:
                raise FastaError(f"line {lineno}: duplicate id {sid!r}")
            seen.add(sid)
            records.append((sid, [], lineno))
            continue
        if not records:
            raise FastaError(f"line {lineno}: sequence data before the first header")
        body = "".join(line.split()).upper()
        bad = [c for c in body if c not in allowed]
        if bad:
            if alphabet.wildcard and all(_ambiguous(c) for c in bad):
                body = "".join(c if c in allowed else alphabet.wildcard for c in body)
            else:
                raise FastaError(f"line {lineno}: character {bad[0]!r} not in alphabet")
        records[-1][1].append(body)

    out = []
    for sid, chunks, lineno in records:
        body = "".join(chunks)
        if not degap(body):
            raise FastaError(f"line {lineno}: empty record {sid!r}")
        out.append((sid, body))
    if gapped:
        return Alignment(tuple(out))
    return [Sequence(sid, body) for sid, body in out]


def read_fasta(path, alphabet: Alphabet = PROTEIN, *, gapped: bool = False):
    with open(path, "rb") as fh:
        return parse_fasta(fh.read(), alphabet, gapped=gapped)


def write_fasta(records: Alignment | Iterable[Sequence], width: int = FASTA_WIDTH) -> str:
    """Format an Alignment (gapped) or plain sequences as FASTA text."""
    if isinstance(records, Alignment):
        pairs = records.rows
    else:
        pairs = [(s.id, s.residues) for s in records]
    lines = []
    for sid, body in pairs:
        lines.append(f">{sid}")
        lines.extend(body[i : i + width] for i in range(0, len(body), width))
    return "".join(line + "\n" for line in lines)
