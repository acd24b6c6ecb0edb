"""The decomposed alignment pipeline over p logical workers.

Workers hold private state and exchange data only through :class:`Channel`,
which serializes every message, logs its size and round, and hands the
decoded copy to the receiver.  Execution proceeds in supersteps: every
worker runs the step function on its own state and inbox, then the channel
delivers the outgoing messages.  Worker 0 doubles as the root.

Stages, in order:

    local_rank    rank against the local pool, sort, pick samples, send them to all
    global_rank   rank against the gathered sample, send regular-sample ranks to root
    pivots        root picks p-1 pivots and broadcasts them
    redistribute  each worker ships sequences to the bucket owner
    align         each worker aligns its bucket
    ancestor      local consensus to root; root aligns them, broadcasts the result
    fine_tune     each worker aligns its profile to the global ancestor, sends to root
    glue          root merges everything into one alignment
"""

from __future__ import annotations

import json
import logging
import socket
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence as _Seq

from ._meter import WorkMeter
from .ancestor import GlueFrame, build_global_ancestor, extract_ancestor, fine_tune, glue
from .kmer import KmerParams, pool_ranks, sample_ranks
from .pairwise import EditScript, GapModel, SubstitutionModel, get_model, profile_of
from .partition import (
    PivotSet,
    RankedSeq,
    WorkerPlan,
    assign_buckets,
    choose_local_samples,
    select_pivots,
    sort_ranked,
)
from .progressive import Aligner, BuiltinAligner, ExternalAligner
from .seqcore import ALPHABETS, Alignment, Alphabet, Sequence

log = logging.getLogger(__name__)

ROOT = 0

SAMPLE_SEQS = "SAMPLE_SEQS"
SAMPLE_RANKS = "SAMPLE_RANKS"
PIVOTS = "PIVOTS"
SEQ_BATCH = "SEQ_BATCH"
LOCAL_ANCESTOR = "LOCAL_ANCESTOR"
GLOBAL_ANCESTOR = "GLOBAL_ANCESTOR"
TUNED_ALIGNMENT = "TUNED_ALIGNMENT"

ROUND_OF = {
    SAMPLE_SEQS: "round1",
    SAMPLE_RANKS: "round1",
    PIVOTS: "round1",
    SEQ_BATCH: "round2",
    LOCAL_ANCESTOR: "ancestor",
    GLOBAL_ANCESTOR: "ancestor",
    TUNED_ALIGNMENT: "glue",
}

STAGES = (
    "local_rank",
    "global_rank",
    "pivots",
    "redistribute",
    "align",
    "ancestor",
    "global_ancestor",
    "fine_tune",
    "glue",
)

EXECUTORS = ("serial", "threads")
TRANSPORTS = ("memory", "socket")


class PipelineError(RuntimeError):
    pass


@dataclass(frozen=True)
class RunConfig:
    p: int = 1
    k: int = 5
    delta: float = 0.02
    sample_k: int | None = None  # per-worker global-sample size; None means p-1 (at least 1)
    gap_open: float = -3.0
    gap_extend: float = -0.5
    matrix: str = "vtml240"
    alphabet: str = "protein"
    seed: int = 0
    aligner: str = "builtin"  # or "cmd:<command template>"
    executor: str = "serial"
    transport: str = "memory"

    def __post_init__(self) -> None:
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if self.sample_k is not None and self.sample_k < 1:
            raise ValueError(f"sample_k must be >= 1, got {self.sample_k}")
        if self.alphabet not in ALPHABETS:
            raise ValueError(f"unknown alphabet {self.alphabet!r}")
        if self.executor not in EXECUTORS:
            raise ValueError(f"executor must be one of {EXECUTORS}")
        if self.transport not in TRANSPORTS:
            raise ValueError(f"transport must be one of {TRANSPORTS}")
        if self.aligner != "builtin" and not self.aligner.startswith("cmd:"):
            raise ValueError("aligner must be 'builtin' or 'cmd:<command>'")
        KmerParams(self.k, self.delta)
        GapModel(self.gap_open, self.gap_extend)

    @property
    def samples_per_worker(self) -> int:
        return self.sample_k if self.sample_k is not None else max(1, self.p - 1)

    @property
    def kmer(self) -> KmerParams:
        return KmerParams(self.k, self.delta)

    @property
    def gaps(self) -> GapModel:
        return GapModel(self.gap_open, self.gap_extend)

    def model(self) -> SubstitutionModel:
        return get_model(self.matrix, ALPHABETS[self.alphabet])

    def make_aligner(self, model: SubstitutionModel | None = None) -> Aligner:
        if self.aligner == "builtin":
            return BuiltinAligner(model or self.model(), self.gaps, self.kmer)
        return ExternalAligner(self.aligner[4:], ALPHABETS[self.alphabet])


# -- accounting ----------------------------------------------------------------


@dataclass(frozen=True)
class MessageRecord:
    src: int
    dst: int
    kind: str
    round: str
    stage: str
    bytes: int


@dataclass
class StageCost:
    dp_cells: int = 0
    kmer_evals: int = 0
    wall_ms: float = 0.0


@dataclass
class CostLedger:
    p: int
    costs: dict[tuple[str, int], StageCost] = field(default_factory=dict)
    messages: list[MessageRecord] = field(default_factory=list)

    def charge(self, stage: str, worker: int, meter: WorkMeter, wall_ms: float) -> None:
        c = self.costs.setdefault((stage, worker), StageCost())
        c.dp_cells += meter.dp_cells
        c.kmer_evals += meter.kmer_evals
        c.wall_ms += wall_ms

    def total(self, attr: str, stage: str | None = None) -> int | float:
        return sum(getattr(c, attr) for (s, _), c in self.costs.items() if stage in (None, s))

    def bytes_sent(self, *, stage: str | None = None, round: str | None = None, worker: int | None = None) -> int:
        return sum(
            m.bytes
            for m in self.messages
            if stage in (None, m.stage) and round in (None, m.round) and worker in (None, m.src)
        )


def ledger_report(ledger: CostLedger) -> str:
    """CSV with one row per (stage, worker) in pipeline order."""
    lines = ["stage,worker,dp_cells,kmer_evals,bytes_sent,wall_ms"]
    order = {s: i for i, s in enumerate(STAGES)}
    for (stage, w) in sorted(ledger.costs, key=lambda sw: (order.get(sw[0], len(order)), sw[1])):
        c = ledger.costs[(stage, w)]
        sent = ledger.bytes_sent(stage=stage, worker=w)
        lines.append(f"{stage},{w},{c.dp_cells},{c.kmer_evals},{sent},{c.wall_ms:.3f}")
    return "\n".join(lines) + "\n"


# -- channel -------------------------------------------------------------------


def encode_payload(payload: Any) -> bytes:
    return json.dumps(payload, separators=(",", ":")).encode("utf-8")


def _socket_carry(data: bytes) -> bytes:
    """Push bytes through a local socket pair and read them back."""
    a, b = socket.socketpair()
    try:
        sender = threading.Thread(target=lambda: (a.sendall(data), a.shutdown(socket.SHUT_WR)))
        sender.start()
        chunks = []
        while True:
            chunk = b.recv(1 << 16)
            if not chunk:
                break
            chunks.append(chunk)
        sender.join()
    finally:
        a.close()
        b.close()
    return b"".join(chunks)


@dataclass(frozen=True)
class Message:
    src: int
    dst: int
    kind: str
    payload: Any


class Channel:
    """Serializing mailbox shared by the workers; the only path between them."""

    def __init__(self, p: int, ledger: CostLedger, transport: str = "memory") -> None:
        self.p = p
        self.ledger = ledger
        self.transport = transport
        self._inboxes: list[list[Message]] = [[] for _ in range(p)]

    def deliver(self, stage: str, outgoing: _Seq[_Seq[Message]]) -> None:
        # sender order, then send order: delivery is deterministic whatever the schedule
        for src, batch in enumerate(outgoing):
            for msg in batch:
                if msg.src != src or not 0 <= msg.dst < self.p:
                    raise PipelineError(f"bad message route {msg.src}->{msg.dst}")
                data = encode_payload(msg.payload)
                if msg.dst != src:
                    if self.transport == "socket":
                        data = _socket_carry(data)
                    self.ledger.messages.append(
                        MessageRecord(src, msg.dst, msg.kind, ROUND_OF[msg.kind], stage, len(data))
                    )
                self._inboxes[msg.dst].append(Message(src, msg.dst, msg.kind, json.loads(data)))

    def take(self, worker: int) -> list[Message]:
        box, self._inboxes[worker] = self._inboxes[worker], []
        return box


# -- workers -------------------------------------------------------------------


@dataclass
class WorkerState:
    wid: int
    seqs: list[Sequence]
    local_ranks: dict[str, float] = field(default_factory=dict)
    global_ranks: dict[str, float] = field(default_factory=dict)
    sample_ids: list[str] = field(default_factory=list)
    regular_sample: list[tuple[float, str]] = field(default_factory=list)
    pivots: PivotSet | None = None
    bucket: list[Sequence] = field(default_factory=list)
    bucket_ranks: dict[str, float] = field(default_factory=dict)
    alignment: Alignment | None = None
    ancestor_rows: list[tuple[str, str]] | None = None
    # root only
    gathered_samples: list[tuple[float, str]] = field(default_factory=list)
    tuned: dict[int, tuple[Alignment, EditScript]] = field(default_factory=dict)
    result: Alignment | None = None


@dataclass(frozen=True)
class _Ctx:
    p: int
    config: RunConfig
    model: SubstitutionModel
    alphabet: Alphabet
    aligner: Aligner


Step = Callable[[WorkerState, list[Message], _Ctx], list[Message]]


def _step_local_rank(w: WorkerState, inbox: list[Message], ctx: _Ctx) -> list[Message]:
    ranks = pool_ranks(w.seqs, ctx.config.kmer)
    w.local_ranks = {s.id: float(r) for s, r in zip(w.seqs, ranks)}
    srt = sort_ranked([RankedSeq(s.id, w.local_ranks[s.id], w.wid) for s in w.seqs])
    count = min(ctx.config.samples_per_worker, len(srt))
    w.sample_ids = choose_local_samples(srt, count)
    by_id = {s.id: s for s in w.seqs}
    payload = [[sid, by_id[sid].residues] for sid in w.sample_ids]
    return [Message(w.wid, dst, SAMPLE_SEQS, payload) for dst in range(ctx.p)]


def _step_global_rank(w: WorkerState, inbox: list[Message], ctx: _Ctx) -> list[Message]:
    sample = [Sequence(sid, res) for m in inbox if m.kind == SAMPLE_SEQS for sid, res in m.payload]
    ranks = sample_ranks(w.seqs, sample, ctx.config.kmer)
    w.global_ranks = {s.id: float(r) for s, r in zip(w.seqs, ranks)}
    srt = sort_ranked([RankedSeq(s.id, w.global_ranks[s.id], w.wid) for s in w.seqs])
    chosen = set(choose_local_samples(srt, min(ctx.p - 1, len(srt))))
    w.regular_sample = [r.key for r in srt if r.id in chosen]
    return [Message(w.wid, ROOT, SAMPLE_RANKS, [list(k) for k in w.regular_sample])]


def _step_pivots(w: WorkerState, inbox: list[Message], ctx: _Ctx) -> list[Message]:
    if w.wid != ROOT:
        return []
    w.gathered_samples = [(r, sid) for m in inbox if m.kind == SAMPLE_RANKS for r, sid in m.payload]
    piv = select_pivots(w.gathered_samples, ctx.p, strict=len(w.gathered_samples) == ctx.p * (ctx.p - 1))
    tiebreak = None if piv.tiebreak is None else list(piv.tiebreak)
    payload = {"pivots": list(piv.pivots), "tiebreak": tiebreak}
    return [Message(w.wid, dst, PIVOTS, payload) for dst in range(ctx.p)]


def _step_redistribute(w: WorkerState, inbox: list[Message], ctx: _Ctx) -> list[Message]:
    (msg,) = [m for m in inbox if m.kind == PIVOTS]
    tiebreak = msg.payload["tiebreak"]
    w.pivots = PivotSet(tuple(msg.payload["pivots"]), None if tiebreak is None else tuple(tiebreak))
    ranked = [RankedSeq(s.id, w.global_ranks[s.id], w.wid) for s in w.seqs]
    plan = assign_buckets(ranked, w.pivots)
    by_id = {s.id: s for s in w.seqs}
    out = []
    for dst, ids in enumerate(plan.buckets):
        if ids:
            batch = [[sid, by_id[sid].residues, w.global_ranks[sid]] for sid in ids]
            out.append(Message(w.wid, dst, SEQ_BATCH, batch))
    return out


def _step_align(w: WorkerState, inbox: list[Message], ctx: _Ctx) -> list[Message]:
    got = [tuple(rec) for m in inbox if m.kind == SEQ_BATCH for rec in m.payload]
    got.sort(key=lambda rec: (rec[2], rec[0]))
    w.bucket = [Sequence(sid, res) for sid, res, _ in got]
    w.bucket_ranks = {sid: r for sid, _, r in got}
    if w.bucket:
        w.alignment = ctx.aligner.align(w.bucket)
    return []


def _step_ancestor(w: WorkerState, inbox: list[Message], ctx: _Ctx) -> list[Message]:
    if w.alignment is None:
        return []  # empty bucket: nothing to contribute
    anc = extract_ancestor(w.alignment, ctx.alphabet, w.wid)
    return [Message(w.wid, ROOT, LOCAL_ANCESTOR, anc.consensus.residues)]


def _step_global_ancestor(w: WorkerState, inbox: list[Message], ctx: _Ctx) -> list[Message]:
    if w.wid != ROOT:
        return []
    locals_ = []
    for m in inbox:
        if m.kind == LOCAL_ANCESTOR:
            aln = Alignment.single(Sequence(f"ancestor{m.src}", m.payload))
            locals_.append(extract_ancestor(aln, ctx.alphabet, m.src))
    anc_aln, _ = build_global_ancestor(locals_, ctx.model, ctx.config.gaps)
    payload = [list(r) for r in anc_aln.rows]
    return [Message(w.wid, dst, GLOBAL_ANCESTOR, payload) for dst in range(ctx.p)]


def _step_fine_tune(w: WorkerState, inbox: list[Message], ctx: _Ctx) -> list[Message]:
    (msg,) = [m for m in inbox if m.kind == GLOBAL_ANCESTOR]
    w.ancestor_rows = [tuple(r) for r in msg.payload]
    if w.alignment is None:
        return []
    ancestor = profile_of(Alignment(tuple(w.ancestor_rows)), ctx.alphabet)
    tuned, script = fine_tune(w.alignment, ancestor, ctx.model, ctx.config.gaps)
    payload = {"rows": [list(r) for r in tuned.rows], "script": str(script)}
    return [Message(w.wid, ROOT, TUNED_ALIGNMENT, payload)]


def _step_glue(w: WorkerState, inbox: list[Message], ctx: _Ctx) -> list[Message]:
    if w.wid != ROOT:
        return []
    parts = sorted((m.src, m.payload) for m in inbox if m.kind == TUNED_ALIGNMENT)
    scripts = tuple(EditScript.parse(pl["script"]) for _, pl in parts)
    tuned = [Alignment(tuple(tuple(r) for r in pl["rows"])) for _, pl in parts]
    frame = GlueFrame(Alignment(tuple(w.ancestor_rows)).n_cols, scripts)
    w.result = glue(frame, tuned)
    return []


STEPS: dict[str, Step] = {
    "local_rank": _step_local_rank,
    "global_rank": _step_global_rank,
    "pivots": _step_pivots,
    "redistribute": _step_redistribute,
    "align": _step_align,
    "ancestor": _step_ancestor,
    "global_ancestor": _step_global_ancestor,
    "fine_tune": _step_fine_tune,
    "glue": _step_glue,
}
ROOT_ONLY = {"pivots", "global_ancestor", "glue"}


class _Machine:
    def __init__(self, seqs: _Seq[Sequence], config: RunConfig) -> None:
        p = config.p
        if not seqs:
            raise ValueError("need at least one sequence")
        if p > 1 and len(seqs) < p:
            raise ValueError(f"{len(seqs)} sequences cannot feed {p} workers")
        ids = [s.id for s in seqs]
        if len(set(ids)) != len(ids):
            raise ValueError("sequence ids must be unique")
        alphabet = ALPHABETS[config.alphabet]
        model = config.model()
        self.config = config
        self.ctx = _Ctx(p, config, model, alphabet, config.make_aligner(model))
        self.ledger = CostLedger(p)
        self.channel = Channel(p, self.ledger, config.transport)
        # round-robin initial placement
        self.workers = [WorkerState(w, list(seqs[w::p])) for w in range(p)]

    def superstep(self, stage: str) -> None:
        step = STEPS[stage]
        inboxes = [self.channel.take(w.wid) for w in self.workers]
        active = [ROOT] if stage in ROOT_ONLY else range(len(self.workers))

        def run_one(wid: int):
            with WorkMeter() as meter:
                t0 = time.perf_counter()
                out = step(self.workers[wid], inboxes[wid], self.ctx)
                ms = (time.perf_counter() - t0) * 1000.0
            return wid, out, meter, ms

        if self.config.executor == "threads" and len(active) > 1:
            with ThreadPoolExecutor(max_workers=len(active)) as pool:
                results = list(pool.map(run_one, active))
        else:
            results = [run_one(wid) for wid in active]
        outgoing: list[list[Message]] = [[] for _ in self.workers]
        for wid, out, meter, ms in results:
            self.ledger.charge(stage, wid, meter, ms)
            outgoing[wid] = out
        self.channel.deliver(stage, outgoing)
        log.debug("stage %s done", stage)


def _run_single(seqs: _Seq[Sequence], config: RunConfig) -> tuple[Alignment, CostLedger]:
    """p = 1: rank the whole pool (for accounting), then align directly."""
    ledger = CostLedger(1)
    model = config.model()
    for stage, fn in (
        ("local_rank", lambda: pool_ranks(seqs, config.kmer)),
        ("align", lambda: config.make_aligner(model).align(seqs)),
    ):
        with WorkMeter() as meter:
            t0 = time.perf_counter()
            out = fn()
            ledger.charge(stage, ROOT, meter, (time.perf_counter() - t0) * 1000.0)
    return out, ledger


def run_pipeline(seqs: _Seq[Sequence], config: RunConfig = RunConfig()) -> tuple[Alignment, CostLedger]:
    """Align *seqs* on ``config.p`` logical workers; returns the alignment and its cost ledger."""
    seqs = list(seqs)
    if not seqs:
        raise ValueError("need at least one sequence")
    if config.p == 1:
        return _run_single(seqs, config)
    m = _Machine(seqs, config)
    for stage in STAGES:
        m.superstep(stage)
    result = m.workers[ROOT].result
    assert result is not None
    return result.drop_empty_columns().reorder([s.id for s in seqs]), m.ledger


@dataclass(frozen=True)
class PartitionTrace:
    """Everything the ranking and bucketing rounds computed, for inspection."""

    local_ranks: dict[str, float]
    global_sample: tuple[str, ...]
    global_ranks: dict[str, float]
    regular_samples: tuple[tuple[float, str], ...]
    pivots: PivotSet
    plan: WorkerPlan
    ledger: CostLedger


def partition_trace(seqs: _Seq[Sequence], config: RunConfig) -> PartitionTrace:
    """Run only the ranking, pivot and redistribution rounds (p >= 2)."""
    if config.p < 2:
        raise ValueError("partition_trace needs p >= 2")
    m = _Machine(list(seqs), config)
    for stage in ("local_rank", "global_rank", "pivots", "redistribute"):
        m.superstep(stage)
    ws = m.workers
    buckets: list[list[str]] = [[] for _ in ws]
    for w in ws:
        plan = assign_buckets([RankedSeq(s.id, w.global_ranks[s.id], w.wid) for s in w.seqs], w.pivots)
        for b, ids in enumerate(plan.buckets):
            buckets[b].extend(ids)
    return PartitionTrace(
        local_ranks={k: v for w in ws for k, v in w.local_ranks.items()},
        global_sample=tuple(sid for w in ws for sid in w.sample_ids),
        global_ranks={k: v for w in ws for k, v in w.global_ranks.items()},
        regular_samples=tuple(sorted(ws[ROOT].gathered_samples)),
        pivots=ws[ROOT].pivots,
        plan=WorkerPlan(tuple(tuple(b) for b in buckets)),
        ledger=m.ledger,
    )


def centralized_ranks(seqs: _Seq[Sequence], params: KmerParams = KmerParams()) -> dict[str, float]:
    """Rank of every sequence against the whole input, as a single process would compute it."""
    return {s.id: float(r) for s, r in zip(seqs, pool_ranks(list(seqs), params))}

