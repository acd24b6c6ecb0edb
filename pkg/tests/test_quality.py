from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from sample_align.pairwise import GapModel, get_model, unit_model
from sample_align.progressive import BuiltinAligner
from sample_align.quality import (
    aligned_pairs,
    modeler_score,
    pair_counts,
    q_score,
    sp_score,
    tc_score,
)
from sample_align.seqcore import DNA, PROTEIN, Alignment, AlignmentError
from sample_align.synth import EvolveParams, generate

UNIT = unit_model(PROTEIN)
GAPS = GapModel(-3.0, -0.5)


def aln(*rows: str) -> Alignment:
    return Alignment(tuple((f"r{i}", r) for i, r in enumerate(rows)))


def named(**rows: str) -> Alignment:
    return Alignment(tuple(rows.items()))


def test_aligned_pairs_examples():
    assert aligned_pairs(aln("AC", "AC")).pairs == {("r0", 0, "r1", 0), ("r0", 1, "r1", 1)}
    assert len(aligned_pairs(aln("A-", "-A"))) == 0
    assert aligned_pairs(aln("A-C", "ADC")).pairs == {("r0", 0, "r1", 0), ("r0", 1, "r1", 2)}


def test_aligned_pairs_use_sorted_ids():
    pairs = aligned_pairs(named(z="AC", a="AC"))
    assert all(p[0] == "a" and p[2] == "z" for p in pairs.pairs)


def test_q_score_examples():
    ref = aln("ACD", "ACD")
    assert q_score(ref, ref) == 1.0
    test = aln("A-CD", "AC-D")
    assert q_score(test, ref) == pytest.approx(2 / 3, abs=1e-4)
    assert modeler_score(test, ref) == 1.0
    nothing = aln("ACD---", "---ACD")
    assert q_score(nothing, ref) == 0.0


def test_tc_score_examples():
    ref = aln("ACDE", "ACDE")
    assert tc_score(ref, ref) == 1.0
    assert tc_score(aln("AC-DE", "ACD-E"), ref) == 0.75
    # an all-gap reference column does not count
    assert tc_score(ref, aln("AC-DE", "AC-DE")) == 1.0


def test_modeler_examples():
    ref = named(x="AC", y="AC", z="A-")
    test = named(x="AC", y="AC", z="-A")
    assert pair_counts(test, ref) == (2, 4, 4)
    assert modeler_score(test, ref) == 0.5
    subset = named(x="AC-", y="A-C", z="A--")
    assert modeler_score(subset, ref) == 1.0 and q_score(subset, ref) == 0.75


def test_no_pairs_conventions():
    single = aln("ACD")
    assert q_score(single, single) == modeler_score(single, single) == 1.0
    apart = aln("A-", "-C")
    assert modeler_score(apart, apart) == 1.0


def test_mismatch_errors():
    ref = named(a="ACD", b="AC-")
    with pytest.raises(AlignmentError, match="ids differ"):
        q_score(named(a="ACD", c="AC-"), ref)
    with pytest.raises(AlignmentError, match="differs"):
        tc_score(named(a="ACD", b="-AD"), ref)
    with pytest.raises(AlignmentError):
        modeler_score(named(a="ACD"), ref)


def naive_sp(a: Alignment, score, gap_open: float, gap_extend: float, terminal: bool = True) -> float:
    """Row-pair projection scored column by column, written from the definition."""
    total = 0.0
    rows = [r for _, r in a.rows]
    for i in range(len(rows)):
        for j in range(i + 1, len(rows)):
            cols = [(x, y) for x, y in zip(rows[i], rows[j]) if not (x == "-" and y == "-")]
            prev = None
            runs = []
            for t, (x, y) in enumerate(cols):
                if x != "-" and y != "-":
                    total += score(x, y)
                    prev = None
                    continue
                kind = "x" if y == "-" else "y"
                if kind == prev:
                    runs[-1][1] += 1
                    runs[-1][3] = t
                else:
                    runs.append([kind, 1, t, t])
                prev = kind
            for _, length, start, end in runs:
                if not terminal and (start == 0 or end == len(cols) - 1):
                    continue
                total += gap_open + length * gap_extend
    return total


def test_sp_examples():
    assert sp_score(aln("ACD"), UNIT, GAPS) == 0.0
    assert sp_score(aln("AA", "AA"), UNIT, GAPS) == 4.0
    assert sp_score(aln("A-", "AC"), UNIT, GAPS) == -1.5
    assert sp_score(aln("A-", "AC"), UNIT, GAPS, terminal_gaps=False) == 2.0
    # double-gap columns are invisible to the pair
    assert sp_score(aln("A--C", "A-GC"), UNIT, GAPS) == 2 + 2 - 3.5


def test_sp_matches_naive_projection():
    rng = random.Random(4)
    model = get_model("vtml240")
    for _ in range(200):
        depth = rng.randint(1, 4)
        width = rng.randint(1, 9)
        rows = ["".join(rng.choice("ACDW--") for _ in range(width)) for _ in range(depth)]
        a = aln(*rows)
        g = GapModel(-rng.choice([0.0, 3.0, 10.0]), -rng.choice([0.0, 0.5, 1.0]))
        for terminal in (True, False):
            expect = naive_sp(a, model.score, g.open, g.extend, terminal)
            assert sp_score(a, model, g, terminal_gaps=terminal) == pytest.approx(expect, abs=1e-9)


def _realigned(seed: int) -> tuple[Alignment, Alignment]:
    seqs, ref = generate(EvolveParams(root_len=30, n_seqs=5, sub_rate=0.2, indel_rate=0.03, seed=seed))
    test = BuiltinAligner(get_model("vtml240")).align(seqs)
    return test, ref


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_scores_bounded_and_cross_identity(seed):
    test, ref = _realigned(seed)
    q, tc, m = q_score(test, ref), tc_score(test, ref), modeler_score(test, ref)
    assert 0.0 <= q <= 1.0 and 0.0 <= tc <= 1.0 and 0.0 <= m <= 1.0
    common, n_test, n_ref = pair_counts(test, ref)
    assert q == common / n_ref and m == common / n_test
    assert Fraction(common, n_ref) * n_ref == Fraction(common, n_test) * n_test == common
    slow = aligned_pairs(test) & aligned_pairs(ref)
    assert len(slow) == common
    assert len(aligned_pairs(test)) == n_test and len(aligned_pairs(ref)) == n_ref


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_reference_scores_itself_perfectly(seed):
    _, ref = _realigned(seed)
    assert q_score(ref, ref) == tc_score(ref, ref) == modeler_score(ref, ref) == 1.0


def test_width_independence():
    ref = aln("AC", "AC")
    padded = aln("A-C-", "A-C-")
    assert q_score(padded, ref) == tc_score(padded, ref) == 1.0


def test_dna_sp():
    model = unit_model(DNA)
    assert sp_score(aln("ACGT", "ACGA"), model, GAPS) == 2 * 3 - 1
