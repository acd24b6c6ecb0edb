"""Regenerate the bundled substitution tables in src/sample_align/data/.

Needs the ``scoring-matrices`` package at build time only::

    pip install scoring-matrices
    python scripts/build_matrices.py

pam200.txt
    The NCBI PAM200 table (integer scores in ln(2)/3 units) rescaled to
    natural-log log-odds.  The background is Dayhoff's amino-acid
    composition, the source data of the PAM family.

vtml240.txt
    No published VTML240 table is available offline, so this one is
    extrapolated from VTML160: recover the implied background and joint
    probabilities, take the 1.5th power of the conditional substitution
    matrix (time-reversible, so via a symmetric eigendecomposition) and
    convert back to log-odds.  Re-running the same procedure from VTML80 to
    VTML160 reproduces every published VTML160 score within one integer unit.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.optimize import brentq, nnls
from scoring_matrices import ScoringMatrix

LETTERS = "ARNDCQEGHILKMFPSTWYV"
DAYHOFF_FREQS = [
    0.087, 0.041, 0.040, 0.047, 0.033, 0.038, 0.050, 0.089, 0.034, 0.037,
    0.085, 0.081, 0.015, 0.040, 0.051, 0.070, 0.058, 0.010, 0.030, 0.065,
]
OUT = Path(__file__).resolve().parents[1] / "src" / "sample_align" / "data"


def load(name: str) -> np.ndarray:
    m = ScoringMatrix.from_name(name)
    a = np.array(list(m), dtype=float)
    idx = [m.alphabet.index(c) for c in LETTERS]
    return a[np.ix_(idx, idx)]


def implied_background(scores: np.ndarray, lam: float) -> np.ndarray:
    return nnls(np.exp(lam * scores), np.ones(len(scores)))[0]


def implied_scale(scores: np.ndarray) -> tuple[float, np.ndarray]:
    lam = brentq(lambda x: implied_background(scores, x).sum() - 1.0, 0.02, 3.0)
    p = implied_background(scores, lam)
    return lam, p / p.sum()


def joint(scores: np.ndarray, lam: float, p: np.ndarray) -> np.ndarray:
    j = p[:, None] * p[None, :] * np.exp(lam * scores)
    j = (j + j.T) / 2
    return j / j.sum()


def extrapolate(scores: np.ndarray, factor: float) -> tuple[np.ndarray, np.ndarray]:
    lam, p = implied_scale(scores)
    j = joint(scores, lam, p)
    p = j.sum(axis=1)
    d = np.sqrt(p)
    w, v = np.linalg.eigh(j / d[:, None] / d[None, :])
    w = np.clip(w, 1e-12, None)
    cond = ((v * w**factor) @ v.T) * d[None, :] / d[:, None]
    jt = p[:, None] * cond
    jt = (jt + jt.T) / 2
    return np.log(jt / (p[:, None] * p[None, :])), p


def write_table(path: Path, title: str, scores: np.ndarray, background: np.ndarray) -> None:
    lines = [f"# {title}", "# natural-log log-odds scores"]
    lines.append("# background: " + " ".join(f"{x:.6f}" for x in background / background.sum()))
    lines.append("   " + "  ".join(f"{c:>7}" for c in LETTERS))
    for c, row in zip(LETTERS, scores):
        lines.append(c + "  " + "  ".join(f"{x:7.4f}" for x in row))
    path.write_text("\n".join(lines) + "\n")


def main() -> None:
    pam = load("PAM200")
    scale = np.log(2) / 3
    bg = np.array(DAYHOFF_FREQS)
    write_table(OUT / "pam200.txt", "PAM200 (NCBI), rescaled from ln(2)/3 units", pam * scale, bg)

    vt, bg = extrapolate(load("VTML160"), 240 / 160)
    write_table(OUT / "vtml240.txt", "VTML240, extrapolated from VTML160", vt, bg)


if __name__ == "__main__":
    main()
