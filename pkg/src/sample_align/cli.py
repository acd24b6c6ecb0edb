"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 bad input data, 3 external aligner
failure.  Option values can also come from a ``key=value`` file given with
``--config``; explicit flags win over the file, the file over defaults.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
import time
from pathlib import Path
from typing import Sequence as _Seq

from .pairwise import MODEL_NAMES, GapModel, get_model
from .progressive import ExternalAlignerError
from .quality import modeler_score, q_score, sp_score, tc_score
from .runtime import RunConfig, ledger_report, partition_trace, run_pipeline
from .seqcore import ALPHABETS, DataError, read_fasta, write_fasta
from .synth import EvolveParams, generate

log = logging.getLogger("sample_align")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_EXTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _worker_list(text: str) -> list[int]:
    try:
        ps = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {text!r}")
    if not ps or any(p < 1 for p in ps):
        raise argparse.ArgumentTypeError("worker counts must be positive")
    return ps


def _add_run_options(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--kmer", type=int, default=5, help="k-mer word length")
    sp.add_argument("--delta", type=float, default=0.02, help="k-mer distance offset")
    sp.add_argument("--sample-k", type=int, default=None, help="global-sample size per worker (default p-1)")
    sp.add_argument("--matrix", choices=MODEL_NAMES, default="vtml240")
    sp.add_argument("--gap-open", type=float, default=-3.0)
    sp.add_argument("--gap-extend", type=float, default=-0.5)
    sp.add_argument("--alphabet", choices=sorted(ALPHABETS), default="protein")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--aligner", default="builtin", help="'builtin' or 'cmd:<command>' ({in}/{out} optional)")
    sp.add_argument("--executor", choices=("serial", "threads"), default="serial")
    sp.add_argument("--transport", choices=("memory", "socket"), default="memory")


def _add_synth_options(sp: argparse.ArgumentParser, group=None) -> None:
    g = group or sp
    g.add_argument("--n-seqs", type=int, default=None if group else 16)
    sp.add_argument("--root-len", type=int, default=100)
    sp.add_argument("--sub-rate", type=float, default=0.03)
    sp.add_argument("--indel-rate", type=float, default=0.003)
    sp.add_argument("--mean-indel-len", type=float, default=2.0)
    sp.add_argument("--depth-scale", type=float, default=1.0)


def build_parser() -> _Parser:
    parser = _Parser(prog="sample-align", description="Distributed-style multiple sequence alignment.")
    parser.add_argument("--config", help="key=value file supplying option defaults")
    verb = parser.add_mutually_exclusive_group()
    verb.add_argument("-v", "--verbose", action="store_true")
    verb.add_argument("-q", "--quiet", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("align", help="align a FASTA file")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out", help="aligned FASTA output (default stdout)")
    sp.add_argument("--ledger", help="write the per-stage cost ledger CSV here")
    sp.add_argument("--workers", "-p", type=int, default=1)
    _add_run_options(sp)

    sp = sub.add_parser("score", help="score an alignment against a reference")
    sp.add_argument("--test", required=True)
    sp.add_argument("--ref", required=True)
    sp.add_argument("--matrix", choices=MODEL_NAMES, default="vtml240")
    sp.add_argument("--gap-open", type=float, default=-3.0)
    sp.add_argument("--gap-extend", type=float, default=-0.5)
    sp.add_argument("--alphabet", choices=sorted(ALPHABETS), default="protein")
    sp.add_argument("--no-terminal-gaps", action="store_true", help="do not charge end gaps in SP")

    sp = sub.add_parser("synth", help="generate a synthetic family and its true alignment")
    sp.add_argument("--out", required=True, help="unaligned FASTA")
    sp.add_argument("--ref-out", required=True, help="true alignment, aligned FASTA")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--alphabet", choices=sorted(ALPHABETS), default="protein")
    _add_synth_options(sp)

    sp = sub.add_parser("bench", help="run the pipeline over a sweep of worker counts")
    src = sp.add_mutually_exclusive_group()
    src.add_argument("--in", dest="input", help="FASTA input (otherwise a synthetic family)")
    _add_synth_options(sp, src)
    sp.add_argument("--ref", help="reference alignment for --quality when using --in")
    sp.add_argument("--workers", type=_worker_list, default=[1, 2, 4, 8], help="e.g. 1,2,4")
    sp.add_argument("--quality", action="store_true", help="add q and tc columns")
    sp.add_argument("--out", help="CSV output (default stdout)")
    _add_run_options(sp)

    sp = sub.add_parser("partition-inspect", help="dump ranks, samples, pivots and buckets as CSV")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--workers", "-p", type=int, default=4)
    sp.add_argument("--out", help="CSV output (default stdout)")
    _add_run_options(sp)
    return parser


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._subparsers._group_actions:  # argparse keeps no public handle
        if name in action.choices:
            return action.choices[name]
    raise KeyError(name)


def _read_config(path: str) -> dict[str, str]:
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key=value")
        key, value = (x.strip() for x in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _apply_config(parser: argparse.ArgumentParser, command: str, config: dict[str, str]) -> None:
    sp = _subparser(parser, command)
    actions = {a.dest: a for a in sp._actions}
    defaults = {}
    for key, raw in config.items():
        dest = "input" if key == "in" else key
        action = actions.get(dest)
        if action is None or dest in ("help", "config"):
            raise UsageError(f"config key {key!r} is not an option of {command!r}")
        if isinstance(action, argparse._StoreTrueAction):
            value = raw.lower() in ("1", "true", "yes", "on")
        else:
            try:
                value = action.type(raw) if action.type else raw
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"config key {key!r}: {exc}")
            if action.choices is not None and value not in action.choices:
                raise UsageError(f"config key {key!r}: {value!r} not in {sorted(action.choices)}")
        defaults[dest] = value
    sp.set_defaults(**defaults)
    for a in sp._actions:
        if a.dest in defaults:
            a.required = False


def _run_config(args, p: int) -> RunConfig:
    return RunConfig(
        p=p,
        k=args.kmer,
        delta=args.delta,
        sample_k=args.sample_k,
        gap_open=args.gap_open,
        gap_extend=args.gap_extend,
        matrix=args.matrix,
        alphabet=args.alphabet,
        seed=args.seed,
        aligner=args.aligner,
        executor=args.executor,
        transport=args.transport,
    )


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _csv(rows: list[list], header: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def cmd_align(args) -> int:
    seqs = read_fasta(args.input, ALPHABETS[args.alphabet])
    aln, ledger = run_pipeline(seqs, _run_config(args, args.workers))
    _emit(write_fasta(aln), args.out)
    if args.ledger:
        Path(args.ledger).write_text(ledger_report(ledger))
    log.info("aligned %d sequences into %d columns on %d workers", len(aln), aln.n_cols, args.workers)
    return EXIT_OK


def cmd_score(args) -> int:
    alphabet = ALPHABETS[args.alphabet]
    test = read_fasta(args.test, alphabet, gapped=True)
    ref = read_fasta(args.ref, alphabet, gapped=True)
    model = get_model(args.matrix, alphabet)
    sp = sp_score(test, model, GapModel(args.gap_open, args.gap_extend), terminal_gaps=not args.no_terminal_gaps)
    row = [_fmt(q_score(test, ref)), _fmt(tc_score(test, ref)), _fmt(modeler_score(test, ref)), _fmt(sp)]
    sys.stdout.write(_csv([row], ["q", "tc", "modeler", "sp"]))
    return EXIT_OK


def _evolve_params(args, n_default: int = 16) -> EvolveParams:
    return EvolveParams(
        root_len=args.root_len,
        n_seqs=args.n_seqs if args.n_seqs is not None else n_default,
        sub_rate=args.sub_rate,
        indel_rate=args.indel_rate,
        mean_indel_len=args.mean_indel_len,
        tree_depth_scale=args.depth_scale,
        seed=args.seed,
        alphabet=args.alphabet,
    )


def cmd_synth(args) -> int:
    seqs, ref = generate(_evolve_params(args))
    Path(args.out).write_text(write_fasta(seqs))
    Path(args.ref_out).write_text(write_fasta(ref))
    return EXIT_OK


def cmd_bench(args) -> int:
    alphabet = ALPHABETS[args.alphabet]
    if args.input:
        seqs = read_fasta(args.input, alphabet)
        if args.quality and not args.ref:
            raise UsageError("--quality with --in needs --ref")
        ref = read_fasta(args.ref, alphabet, gapped=True) if args.ref else None
    else:
        seqs, ref = generate(_evolve_params(args, n_default=256))
    header = ["p", "n_seqs", "dp_cells", "kmer_evals", "bytes", "wall_ms"]
    if args.quality:
        header += ["q", "tc"]
    rows = []
    for p in args.workers:
        t0 = time.perf_counter()
        aln, ledger = run_pipeline(seqs, _run_config(args, p))
        wall = (time.perf_counter() - t0) * 1000.0
        row = [p, len(seqs), ledger.total("dp_cells"), ledger.total("kmer_evals"), ledger.bytes_sent(), f"{wall:.1f}"]
        if args.quality:
            row += [_fmt(q_score(aln, ref)), _fmt(tc_score(aln, ref))]
        rows.append(row)
        log.info("p=%d done in %.0f ms", p, wall)
    _emit(_csv(rows, header), args.out)
    return EXIT_OK


def cmd_partition_inspect(args) -> int:
    seqs = read_fasta(args.input, ALPHABETS[args.alphabet])
    if args.workers < 2:
        raise UsageError("partition-inspect needs --workers >= 2")
    tr = partition_trace(seqs, _run_config(args, args.workers))
    p = args.workers
    bucket = tr.plan.bucket_of()
    sampled = set(tr.global_sample)
    regular = {sid for _, sid in tr.regular_samples}
    rows = []
    for i, s in enumerate(seqs):
        flags = "".join(["g" if s.id in sampled else "", "r" if s.id in regular else ""])
        rows.append(
            ["seq", s.id, i % p, _fmt(tr.local_ranks[s.id]), _fmt(tr.global_ranks[s.id]), bucket[s.id], flags]
        )
    tiebreak = tr.pivots.tiebreak or ("",) * len(tr.pivots.pivots)
    for j, (v, sid) in enumerate(zip(tr.pivots.pivots, tiebreak)):
        rows.append(["pivot", sid, "", "", _fmt(v), j, ""])
    for b, n in enumerate(tr.plan.counts):
        rows.append(["bucket", "", "", "", "", b, n])
    header = ["kind", "id", "home_worker", "local_rank", "global_rank", "bucket", "info"]
    _emit(_csv(rows, header), args.out)
    return EXIT_OK


COMMANDS = {
    "align": cmd_align,
    "score": cmd_score,
    "synth": cmd_synth,
    "bench": cmd_bench,
    "partition-inspect": cmd_partition_inspect,
}


def main(argv: _Seq[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        pre = argparse.ArgumentParser(add_help=False)
        pre.add_argument("--config")
        known, rest = pre.parse_known_args(argv)
        command = next((a for a in rest if a in COMMANDS), None)
        if known.config and command:
            _apply_config(parser, command, _read_config(known.config))
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except OSError as exc:
        print(f"sample-align: cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE

    level = logging.DEBUG if args.verbose else logging.ERROR if args.quiet else logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"sample-align {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ExternalAlignerError as exc:
        print(f"sample-align: external aligner failed: {exc}", file=sys.stderr)
        return EXIT_EXTERNAL
    except (DataError, OSError) as exc:
        print(f"sample-align: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"sample-align: invalid setting: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
