"""Global pairwise and profile-profile alignment with affine gaps.

Residue pairs are scored from a log-odds substitution table; profile columns
are scored with the profile sum-of-pairs (PSP) function

    PSP(x, y) = sum_i sum_j f_i^x * f_j^y * score[i][j]

where f are residue frequencies of each column (gap frequencies take no part
in the sum).  A gap against a profile column costs the usual affine penalty
multiplied by the residue mass (1 - gap frequency) of that column, so
opening a gap opposite an already gappy column is cheap.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence as _Seq

import numpy as np

from . import _dp
from ._meter import add_cells
from .seqcore import GAP, PROTEIN, Alignment, Alphabet, AlignmentError, DataError, Sequence

DEFAULT_GAP_OPEN = -3.0
DEFAULT_GAP_EXTEND = -0.5
MODEL_NAMES = ("pam200", "vtml240", "unit")


class Op(enum.IntEnum):
    MATCH = _dp.MATCH
    INS_A = _dp.INS_A  # column of A against a gap in B
    INS_B = _dp.INS_B  # column of B against a gap in A


class ScriptError(ValueError):
    pass


@dataclass(frozen=True)
class EditScript:
    ops: tuple[Op, ...]

    @classmethod
    def from_codes(cls, codes: Iterable[int]) -> EditScript:
        return cls(tuple(Op(int(c)) for c in codes))

    @classmethod
    def parse(cls, text: str) -> EditScript:
        """Build from a string over M/A/B, e.g. ``"MMAB"``."""
        table = {"M": Op.MATCH, "A": Op.INS_A, "B": Op.INS_B}
        return cls(tuple(table[c] for c in text))

    def __str__(self) -> str:
        return "".join("MAB"[op] for op in self.ops)

    def __len__(self) -> int:
        return len(self.ops)

    def __iter__(self):
        return iter(self.ops)

    @property
    def len_a(self) -> int:
        return sum(op != Op.INS_B for op in self.ops)

    @property
    def len_b(self) -> int:
        return sum(op != Op.INS_A for op in self.ops)

    def codes(self) -> np.ndarray:
        return np.fromiter((int(o) for o in self.ops), dtype=np.int8, count=len(self.ops))


@dataclass(frozen=True)
class GapModel:
    open: float = DEFAULT_GAP_OPEN
    extend: float = DEFAULT_GAP_EXTEND

    def __post_init__(self) -> None:
        if self.open > 0 or self.extend > 0:
            raise ValueError("gap penalties must be <= 0")

    def cost(self, length: int) -> float:
        return self.open + length * self.extend if length else 0.0


@dataclass(frozen=True, eq=False)
class SubstitutionModel:
    """Log-odds table over ``alphabet.symbols`` (c x c) plus background."""

    name: str
    alphabet: Alphabet
    matrix: np.ndarray
    background: np.ndarray

    def __post_init__(self) -> None:
        c = len(self.alphabet.symbols)
        mat = np.asarray(self.matrix, dtype=np.float64)
        bg = np.asarray(self.background, dtype=np.float64)
        if mat.shape != (c, c):
            raise ValueError(f"matrix shape {mat.shape} does not match alphabet size {c}")
        if not np.array_equal(mat, mat.T):
            raise ValueError(f"substitution matrix {self.name!r} is not symmetric")
        if bg.shape != (c,) or abs(bg.sum() - 1.0) > 1e-9 or (bg < 0).any():
            raise ValueError(f"background of {self.name!r} must be {c} probabilities summing to 1")
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "background", bg)
        padded = np.zeros((self.alphabet.size, self.alphabet.size))
        padded[:c, :c] = mat
        object.__setattr__(self, "scores", padded)

    def score(self, a: str, b: str) -> float:
        letters = self.alphabet.letters
        return float(self.scores[letters.index(a), letters.index(b)])

    def with_alphabet(self, alphabet: Alphabet) -> SubstitutionModel:
        """Same table on an alphabet that differs only by its wildcard."""
        if alphabet.symbols != self.alphabet.symbols:
            raise ValueError("alphabet symbols differ from the model's")
        return SubstitutionModel(self.name, alphabet, self.matrix, self.background)


def parse_matrix(text: str, name: str, alphabet: Alphabet | None = None) -> SubstitutionModel:
    """Read a whitespace-separated log-odds table.

    Format: a header row of residue letters, then one row of reals per
    letter (an optional leading row label is allowed).  ``#`` starts a
    comment; a ``# background: p1 p2 ...`` comment supplies background
    probabilities in header order, otherwise the background is uniform.
    Rows are re-ordered to *alphabet* when given.
    """
    header: list[str] | None = None
    rows: list[list[float]] = []
    background = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.lower().startswith("background:"):
                background = [float(x) for x in body.split(":", 1)[1].split()]
            continue
        tokens = line.split()
        if header is None:
            header = [t.upper() for t in tokens]
            continue
        if tokens[0].upper() in header and len(tokens) == len(header) + 1:
            tokens = tokens[1:]
        rows.append([float(t) for t in tokens])
    if header is None or len(rows) != len(header) or any(len(r) != len(header) for r in rows):
        raise DataError(f"matrix {name!r}: expected a header and {len(header or [])} square rows")
    mat = np.array(rows)
    bg = np.full(len(header), 1.0 / len(header)) if background is None else np.array(background)
    if len(bg) != len(header):
        raise DataError(f"matrix {name!r}: background has {len(bg)} entries")
    bg = bg / bg.sum()
    if alphabet is None:
        alphabet = Alphabet("".join(header))
    try:
        idx = [header.index(c) for c in alphabet.symbols]
    except ValueError:
        raise DataError(f"matrix {name!r} does not cover alphabet {alphabet.symbols!r}") from None
    return SubstitutionModel(name, alphabet, mat[np.ix_(idx, idx)], bg[idx] / bg[idx].sum())


def load_matrix(path: str | Path, alphabet: Alphabet | None = None) -> SubstitutionModel:
    path = Path(path)
    return parse_matrix(path.read_text(), path.stem, alphabet)


def unit_model(alphabet: Alphabet, match: float = 2.0, mismatch: float = -1.0) -> SubstitutionModel:
    c = len(alphabet.symbols)
    mat = np.full((c, c), mismatch)
    np.fill_diagonal(mat, match)
    return SubstitutionModel("unit", alphabet, mat, np.full(c, 1.0 / c))


@lru_cache(maxsize=None)
def _bundled(name: str) -> str:
    return resources.files("sample_align").joinpath("data", f"{name}.txt").read_text()


def get_model(name: str, alphabet: Alphabet = PROTEIN) -> SubstitutionModel:
    """Bundled model by name: ``pam200``, ``vtml240`` or ``unit``."""
    name = name.lower()
    if name == "unit":
        return unit_model(alphabet)
    if name not in MODEL_NAMES:
        raise ValueError(f"unknown substitution model {name!r}; choose from {', '.join(MODEL_NAMES)}")
    base = Alphabet(alphabet.symbols)
    model = parse_matrix(_bundled(name), name, base)
    return model if alphabet == base else model.with_alphabet(alphabet)


# -- profiles ----------------------------------------------------------------


@dataclass(frozen=True)
class ProfileColumn:
    freqs: tuple[float, ...]
    gap_freq: float


@dataclass(frozen=True, eq=False)
class Profile:
    """Per-column residue frequencies (n_cols x alphabet.size) and gap frequencies."""

    freqs: np.ndarray
    gap: np.ndarray
    depth: int

    def __post_init__(self) -> None:
        if self.depth < 1:
            raise ValueError("profile depth must be >= 1")
        if len(self.gap) == 0 or self.freqs.shape[0] != len(self.gap):
            raise ValueError("profile needs at least one column")

    def __len__(self) -> int:
        return len(self.gap)

    @property
    def columns(self) -> list[ProfileColumn]:
        return [ProfileColumn(tuple(map(float, f)), float(g)) for f, g in zip(self.freqs, self.gap)]

    def column(self, i: int) -> ProfileColumn:
        return ProfileColumn(tuple(map(float, self.freqs[i])), float(self.gap[i]))


def encode_rows(aln: Alignment, alphabet: Alphabet) -> np.ndarray:
    """(depth x n_cols) residue codes; gaps become ``alphabet.size``."""
    if not aln.rows:
        return np.zeros((0, 0), dtype=np.int64)
    return np.vstack([alphabet.encode(r) for _, r in aln.rows])


def profile_of(aln: Alignment, alphabet: Alphabet = PROTEIN) -> Profile:
    codes = encode_rows(aln, alphabet)
    depth, ncols = codes.shape
    counts = np.zeros((ncols, alphabet.size + 1))
    cols = np.broadcast_to(np.arange(ncols), codes.shape)
    np.add.at(counts, (cols.ravel(), codes.ravel()), 1.0)
    counts /= depth
    return Profile(counts[:, :-1].copy(), counts[:, -1].copy(), depth)


def sequence_profile(seq: Sequence, alphabet: Alphabet = PROTEIN) -> Profile:
    return profile_of(Alignment.single(seq), alphabet)


def psp_score(x: ProfileColumn, y: ProfileColumn, model: SubstitutionModel) -> float:
    fx = np.asarray(x.freqs)
    fy = np.asarray(y.freqs)
    s = model.scores
    return float(sum(fx[i] * fy[j] * s[i, j] for i in range(len(fx)) for j in range(len(fy))))


def psp_matrix(x: Profile, y: Profile, model: SubstitutionModel) -> np.ndarray:
    """PSP score for every column pair of two profiles."""
    return x.freqs @ model.scores @ y.freqs.T


def _run(S: np.ndarray, scale_a: np.ndarray, scale_b: np.ndarray, gaps: GapModel):
    add_cells(S.shape[0] * S.shape[1])
    ops, score = _dp.global_affine(
        np.ascontiguousarray(S, dtype=np.float64),
        np.ascontiguousarray(scale_a, dtype=np.float64),
        np.ascontiguousarray(scale_b, dtype=np.float64),
        float(gaps.open),
        float(gaps.extend),
    )
    return EditScript.from_codes(ops), float(score)


def align_pair(
    a: Sequence | str,
    b: Sequence | str,
    model: SubstitutionModel,
    gaps: GapModel = GapModel(),
) -> tuple[EditScript, float]:
    """Optimal global alignment of two residue strings under affine gaps."""
    ra = a.residues if isinstance(a, Sequence) else a
    rb = b.residues if isinstance(b, Sequence) else b
    if not ra or not rb:
        raise ValueError("align_pair needs two non-empty sequences")
    ca = model.alphabet.encode(ra)
    cb = model.alphabet.encode(rb)
    if (ca == model.alphabet.size).any() or (cb == model.alphabet.size).any():
        raise ValueError("align_pair takes ungapped sequences")
    S = model.scores[np.ix_(ca, cb)]
    return _run(S, np.ones(len(ca)), np.ones(len(cb)), gaps)


def align_profiles(
    x: Profile, y: Profile, model: SubstitutionModel, gaps: GapModel = GapModel()
) -> tuple[EditScript, float]:
    """Optimal global column alignment of two profiles.

    Matched columns score by PSP; a run of columns of one profile placed
    against gaps costs ``(open + extend) * r`` for its first column and
    ``extend * r`` for each later one, r being each column's residue mass.
    """
    if len(x) == 0 or len(y) == 0:
        raise ValueError("align_profiles needs two non-empty profiles")
    return _run(psp_matrix(x, y, model), 1.0 - x.gap, 1.0 - y.gap, gaps)


def score_script(
    script: EditScript, x: Profile, y: Profile, model: SubstitutionModel, gaps: GapModel = GapModel()
) -> float:
    """Objective value of a given script, evaluated op by op.

    This is the function the DP maximises, written out directly; tests use
    it to score exhaustively enumerated scripts.
    """
    _check_script(script, len(x), len(y))
    total = 0.0
    i = j = 0
    prev = None
    for op in script.ops:
        if op == Op.MATCH:
            total += psp_score(x.column(i), y.column(j), model)
            i += 1
            j += 1
        elif op == Op.INS_A:
            r = 1.0 - float(x.gap[i])
            total += (gaps.extend if prev == Op.INS_A else gaps.open + gaps.extend) * r
            i += 1
        else:
            r = 1.0 - float(y.gap[j])
            total += (gaps.extend if prev == Op.INS_B else gaps.open + gaps.extend) * r
            j += 1
        prev = op
    return total


def _check_script(script: EditScript, len_a: int, len_b: int) -> None:
    if script.len_a != len_a or script.len_b != len_b:
        raise ScriptError(
            f"script covers {script.len_a} x {script.len_b} columns, alignments have {len_a} x {len_b}"
        )


def apply_script(script: EditScript, a: Alignment, b: Alignment) -> Alignment:
    """Merge two alignments column-wise as directed by *script*.

    Rows of *a* come first; each INS_A adds a gap column to *b*'s rows and
    each INS_B a gap column to *a*'s rows.
    """
    _check_script(script, a.n_cols, b.n_cols)
    codes = script.codes()
    rows_a = _expand(a, codes != Op.INS_B)
    rows_b = _expand(b, codes != Op.INS_A)
    return Alignment(tuple(rows_a) + tuple(rows_b))


def _expand(aln: Alignment, present: np.ndarray) -> list[tuple[str, str]]:
    if not aln.rows:
        return []
    if present.all():
        return list(aln.rows)
    raw = np.array([np.frombuffer(r.encode("ascii"), dtype=np.uint8) for _, r in aln.rows])
    out = np.full((raw.shape[0], len(present)), ord(GAP), dtype=np.uint8)
    out[:, present] = raw
    return [(sid, row.tobytes().decode("ascii")) for (sid, _), row in zip(aln.rows, out)]


def regap(aln: Alignment, present: _Seq[bool]) -> Alignment:
    """Spread *aln*'s columns over the positions where *present* is true."""
    present = np.asarray(present, dtype=bool)
    if int(present.sum()) != aln.n_cols:
        raise ScriptError("mask does not match alignment width")
    return Alignment(tuple(_expand(aln, present)))


def script_to_rows(script: EditScript, a: str, b: str) -> tuple[str, str]:
    """Render a pairwise script over two residue strings as gapped rows."""
    pa, pb = Alignment((("a", a),)), Alignment((("b", b),))
    merged = apply_script(script, pa, pb)
    return merged.rows[0][1], merged.rows[1][1]

