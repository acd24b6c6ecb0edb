"""Per-context work counters (DP cells, k-mer distance evaluations).

Kernels call :func:`add_cells` / :func:`add_kmer_evals`; a caller that wants
the totals wraps the work in ``with WorkMeter() as m``.  Counters are held
in a ContextVar, so meters opened in different threads never mix.
"""

from __future__ import annotations

from contextvars import ContextVar
from dataclasses import dataclass

_active: ContextVar[tuple["WorkMeter", ...]] = ContextVar("sample_align_meters", default=())


@dataclass
class WorkMeter:
    dp_cells: int = 0
    kmer_evals: int = 0

    def __enter__(self) -> "WorkMeter":
        self._token = _active.set(_active.get() + (self,))
        return self

    def __exit__(self, *exc) -> None:
        _active.reset(self._token)


def add_cells(n: int) -> None:
    for m in _active.get():
        m.dp_cells += int(n)


def add_kmer_evals(n: int) -> None:
    for m in _active.get():
        m.kmer_evals += int(n)
