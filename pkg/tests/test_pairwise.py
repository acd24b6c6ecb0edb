from __future__ import annotations

import itertools
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import all_scripts, best_pair_score, column_profile, profile_script_score
from sample_align._meter import WorkMeter
from sample_align.pairwise import (
    EditScript,
    GapModel,
    Op,
    ScriptError,
    align_pair,
    align_profiles,
    apply_script,
    get_model,
    parse_matrix,
    profile_of,
    psp_matrix,
    psp_score,
    regap,
    score_script,
    sequence_profile,
    unit_model,
)
from sample_align.seqcore import DNA, PROTEIN, Alignment, DataError, Sequence, degap

UNIT = unit_model(DNA)
GAPS = GapModel(-3.0, -0.5)


def unit_score(x: str, y: str) -> float:
    return 2.0 if x == y else -1.0


def test_align_identical_pair():
    script, score = align_pair("AA", "AA", UNIT, GAPS)
    assert str(script) == "MM" and score == 4.0


def test_align_pair_needs_residues():
    with pytest.raises(ValueError):
        align_pair("A", "", UNIT, GAPS)


def test_align_pair_gap_placement():
    # ACD vs AD under a match-favoring model: the C sits opposite a gap
    model = unit_model(PROTEIN)
    script, score = align_pair("ACD", "AD", model, GAPS)
    assert str(script) == "MAM"
    assert score == 2 + 2 - 3.5


def test_align_pair_exhaustive_short():
    for n, m in itertools.product(range(1, 4), repeat=2):
        for a in itertools.product("ACGT", repeat=n):
            for b in itertools.product("ACGT", repeat=m):
                a_, b_ = "".join(a), "".join(b)
                _, score = align_pair(a_, b_, UNIT, GAPS)
                assert score == best_pair_score(a_, b_, unit_score, -3.0, -0.5), (a_, b_)


def test_align_pair_random_longer_with_other_gaps():
    rng = random.Random(7)
    for _ in range(300):
        a = "".join(rng.choice("ACGT") for _ in range(rng.randint(1, 6)))
        b = "".join(rng.choice("ACGT") for _ in range(rng.randint(1, 6)))
        gaps = GapModel(-rng.choice([0.0, 1.0, 2.0, 5.0]), -rng.choice([0.0, 0.5, 1.0]))
        script, score = align_pair(a, b, UNIT, gaps)
        assert score == best_pair_score(a, b, unit_score, gaps.open, gaps.extend)
        assert score == score_script(script, sequence_profile(Sequence("a", a), DNA), sequence_profile(Sequence("b", b), DNA), UNIT, gaps)


def test_tie_break_prefers_match_then_ins_a():
    # with free gaps every script scores the same on mismatching residues; priority decides
    script, _ = align_pair("A", "C", unit_model(DNA, 2.0, 0.0), GapModel(0.0, 0.0))
    assert str(script) == "M"
    # mismatch -1 loses to two free gaps; the traceback starts at the end and
    # prefers INS_A there, so the A column is consumed last
    script, _ = align_pair("A", "C", UNIT, GapModel(0.0, 0.0))
    assert str(script) == "BA"


def test_psp_examples():
    model = get_model("pam200")
    a = profile_of(Alignment((("x", "A"),)))
    assert psp_score(a.column(0), a.column(0), model) == model.score("A", "A")
    gap_col = profile_of(Alignment((("x", "A-"), ("y", "A-"), ("z", "AC")))).column(1)
    assert gap_col.gap_freq == pytest.approx(2 / 3)
    allgap = profile_of(Alignment((("x", "A-"), ("y", "AC")))).column(0)
    assert psp_score(allgap, allgap, model) == model.score("A", "A")
    mixed = profile_of(Alignment((("x", "A"), ("y", "C")))).column(0)
    assert psp_score(mixed, a.column(0), model) == pytest.approx(
        0.5 * model.score("A", "A") + 0.5 * model.score("C", "A")
    )


def test_psp_pure_gap_column_scores_zero():
    from sample_align.pairwise import ProfileColumn

    model = get_model("vtml240")
    gap = ProfileColumn((0.0,) * 20, 1.0)
    a = profile_of(Alignment((("x", "W"),))).column(0)
    assert psp_score(gap, a, model) == 0.0


def test_profile_of_examples():
    prof = profile_of(Alignment((("a", "A-"), ("b", "AC"))))
    a, c = PROTEIN.letters.index("A"), PROTEIN.letters.index("C")
    assert prof.freqs[0, a] == 1.0 and prof.gap[0] == 0.0
    assert prof.freqs[1, c] == 0.5 and prof.gap[1] == 0.5
    single = profile_of(Alignment((("a", "AC"),)))
    assert single.gap.tolist() == [0.0, 0.0] and single.depth == 1
    padded = profile_of(Alignment((("a", "A-"), ("b", "C-"))))
    assert padded.gap[1] == 1.0
    np.testing.assert_allclose(prof.freqs.sum(axis=1) + prof.gap, 1.0)


def test_align_profiles_identity_is_all_match():
    for name in ("pam200", "vtml240"):
        model = get_model(name)
        x = profile_of(Alignment((("a", "ACD"),)))
        script, score = align_profiles(x, x, model, GAPS)
        assert str(script) == "MMM"
        assert score == pytest.approx(sum(psp_score(c, c, model) for c in x.columns))


def test_align_profiles_ac_vs_c():
    model = unit_model(PROTEIN)
    x = profile_of(Alignment((("a", "AC"),)))
    y = profile_of(Alignment((("b", "C"),)))
    script, score = align_profiles(x, y, model, GAPS)
    assert str(script) == "AM"
    fx, gx = column_profile(["AC"], PROTEIN.letters)
    fy, gy = column_profile(["C"], PROTEIN.letters)
    best = max(profile_script_score(s, fx, gx, fy, gy, model.matrix, -3.0, -0.5) for s in all_scripts(2, 1))
    assert score == pytest.approx(best, abs=1e-12)


def _random_alignment(rng: random.Random, depth: int, width: int, letters: str, prefix: str) -> Alignment:
    rows = []
    for r in range(depth):
        row = [rng.choice(letters + "--") for _ in range(width)]
        if all(c == "-" for c in row):
            row[0] = letters[0]
        rows.append((f"{prefix}{r}", "".join(row)))
    return Alignment(tuple(rows))


def test_align_profiles_matches_enumeration():
    rng = random.Random(11)
    model = get_model("pam200", PROTEIN)
    letters = "ACDWKL"
    for _ in range(150):
        a = _random_alignment(rng, rng.randint(1, 3), rng.randint(1, 4), letters, "a")
        b = _random_alignment(rng, rng.randint(1, 3), rng.randint(1, 4), letters, "b")
        x, y = profile_of(a), profile_of(b)
        script, score = align_profiles(x, y, model, GAPS)
        fx, gx = column_profile([r for _, r in a.rows], PROTEIN.letters)
        fy, gy = column_profile([r for _, r in b.rows], PROTEIN.letters)
        scores = [profile_script_score(s, fx, gx, fy, gy, model.matrix, -3.0, -0.5) for s in all_scripts(a.n_cols, b.n_cols)]
        assert score == pytest.approx(max(scores), abs=1e-9)
        assert score_script(script, x, y, model, GAPS) == pytest.approx(score, abs=1e-9)


def test_apply_script_concatenates_on_all_match():
    a = Alignment((("a", "AC"),))
    b = Alignment((("b", "GT"), ("c", "G-")))
    merged = apply_script(EditScript.parse("MM"), a, b)
    assert merged.rows == (("a", "AC"), ("b", "GT"), ("c", "G-"))


def test_apply_script_inconsistent():
    a = Alignment((("a", "A"),))
    b = Alignment((("b", "C"),))
    with pytest.raises(ScriptError):
        apply_script(EditScript.parse("AM"), a, b)


def test_apply_script_inserts_gap_columns():
    a = Alignment((("a", "AC"),))
    b = Alignment((("b", "G"),))
    merged = apply_script(EditScript.parse("AM"), a, b)
    assert merged.rows == (("a", "AC"), ("b", "-G"))
    merged = apply_script(EditScript.parse("BAA"), a, b)
    assert merged.rows == (("a", "-AC"), ("b", "G--"))


@settings(max_examples=100)
@given(st.data())
def test_apply_script_preserves_rows(data):
    rng = random.Random(data.draw(st.integers(0, 10**6)))
    a = _random_alignment(rng, rng.randint(1, 3), rng.randint(1, 6), "ACGT", "a")
    b = _random_alignment(rng, rng.randint(1, 3), rng.randint(1, 6), "ACGT", "b")
    script = EditScript.parse(data.draw(st.sampled_from(all_scripts(a.n_cols, b.n_cols))))
    merged = apply_script(script, a, b)
    assert merged.depth == a.depth + b.depth
    for sid, row in a.rows + b.rows:
        assert degap(merged.row(sid)) == degap(row)


def test_regap():
    aln = Alignment((("a", "AC"),))
    assert regap(aln, [True, False, True]).rows == (("a", "A-C"),)
    with pytest.raises(ScriptError):
        regap(aln, [True, False])


def test_edit_script_roundtrip():
    s = EditScript.parse("MABM")
    assert str(s) == "MABM" and s.len_a == 3 and s.len_b == 3
    assert EditScript.from_codes(s.codes()) == s
    assert s.ops[1] is Op.INS_A


def test_bundled_models():
    for name in ("pam200", "vtml240"):
        m = get_model(name)
        assert np.array_equal(m.matrix, m.matrix.T)
        assert abs(m.background.sum() - 1) < 1e-9
        # self-substitution of tryptophan dominates; W/C are the rarest, most conserved residues
        assert m.score("W", "W") == m.matrix.max()
        assert all(m.score(x, x) > 0 for x in PROTEIN.symbols)
    # PAM200 ships in nats: the integer third-bit table times ln(2)/3
    pam = get_model("pam200").matrix / (np.log(2) / 3)
    np.testing.assert_allclose(pam, np.round(pam), atol=1e-3)
    assert round(pam[0, 0]) == 3 and round(pam[17, 17]) == 18
    with pytest.raises(ValueError):
        get_model("blosum62")


def test_wildcard_scores_zero():
    model = get_model("pam200", PROTEIN.with_wildcard("X"))
    assert model.score("X", "A") == 0.0 and model.score("X", "X") == 0.0


def test_parse_matrix_format():
    text = "# comment\n# background: 0.5 0.5\n   A  C\nA  1 -1\nC -1  2\n"
    m = parse_matrix(text, "tiny")
    assert m.alphabet.symbols == "AC" and m.score("C", "C") == 2.0
    assert m.background.tolist() == [0.5, 0.5]
    with pytest.raises(DataError):
        parse_matrix("A C\n1 2\n", "bad")
    with pytest.raises(ValueError, match="symmetric"):
        parse_matrix("A C\n1 2\n3 1\n", "asym")


def test_gap_model_validation():
    with pytest.raises(ValueError):
        GapModel(1.0, -0.5)
    assert GapModel(-3, -0.5).cost(2) == -4.0 and GapModel().cost(0) == 0.0


def test_cells_are_counted():
    with WorkMeter() as m:
        align_pair("ACGT", "ACG", UNIT, GAPS)
    assert m.dp_cells == 12


def test_psp_matrix_matches_scalar():
    rng = random.Random(3)
    model = get_model("vtml240")
    a = profile_of(_random_alignment(rng, 3, 5, "ACDEFGHIKLMNPQRSTVWY", "a"))
    b = profile_of(_random_alignment(rng, 2, 4, "ACDEFGHIKLMNPQRSTVWY", "b"))
    M = psp_matrix(a, b, model)
    for i in range(len(a)):
        for j in range(len(b)):
            assert M[i, j] == pytest.approx(psp_score(a.column(i), b.column(j), model), abs=1e-12)
            assert psp_score(a.column(i), b.column(j), model) == pytest.approx(psp_score(b.column(j), a.column(i), model))


def test_determinism():
    rng = random.Random(5)
    a = "".join(rng.choice(PROTEIN.symbols) for _ in range(60))
    b = "".join(rng.choice(PROTEIN.symbols) for _ in range(55))
    model = get_model("vtml240")
    assert align_pair(a, b, model) == align_pair(a, b, model)
