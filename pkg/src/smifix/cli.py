"""Batch command-line front end.

Subcommands operate line-by-line over a corpus: ``correct`` repairs strings,
``classify`` buckets them by first error, ``metrics`` scores predictions,
``selfies`` round-trips through the grammar codec, and ``mutate`` corrupts a
valid corpus deterministically. Records are emitted as TSV or JSONL in input
order regardless of parallelism; outputs are byte-identical across runs for
identical inputs, flags and seed.

Exit codes: 0 on success, 1 when any empty-sentinel record was produced,
2 on usage or I/O errors.
"""

from __future__ import annotations

import argparse
import json
import multiprocessing
import sys
from collections import Counter
from typing import Callable, Iterable, TextIO

from .kekulize import kekulize
from .metrics import compute_metrics, load_patterns
from .parser import classify_error, parse_lenient
from .pipeline import correct_smiles, mutate_smiles
from .selfies import decode_string, encode, tokenize_selfies
from .valence import DEFAULT_TABLE, ValenceTable
from .writer import canonical_smiles

_WORKER_CONFIG: dict = {}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except BrokenPipeError:
        return 0
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smifix",
        description="Correct, classify and score molecular line notation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_io(p: argparse.ArgumentParser, with_seed: bool = False) -> None:
        p.add_argument("--input", default=None, help="input path (default: stdin)")
        p.add_argument("--output", default=None, help="output path (default: stdout)")
        p.add_argument("--format", choices=("tsv", "jsonl"), default="tsv")
        p.add_argument("--jobs", type=int, default=1, metavar="N")
        p.add_argument("--valence-table", default=None, metavar="PATH")
        p.add_argument("--verbose", action="store_true")
        if with_seed:
            p.add_argument("--seed", type=int, default=0, metavar="N")

    p_correct = sub.add_parser("correct", help="repair invalid strings")
    add_io(p_correct)
    p_correct.set_defaults(handler=_cmd_correct)

    p_classify = sub.add_parser("classify", help="first-error classification")
    add_io(p_classify)
    p_classify.set_defaults(handler=_cmd_classify)

    p_metrics = sub.add_parser("metrics", help="score a prediction corpus")
    p_metrics.add_argument("predictions", help="predictions file, one per line")
    p_metrics.add_argument("--references", default=None, metavar="PATH")
    p_metrics.add_argument("--patterns", default=None, metavar="PATH")
    p_metrics.add_argument("--output", default=None)
    p_metrics.add_argument("--valence-table", default=None, metavar="PATH")
    p_metrics.set_defaults(handler=_cmd_metrics)

    p_selfies = sub.add_parser("selfies", help="grammar-codec round trips")
    p_selfies.add_argument("mode", choices=("encode", "decode", "edit"))
    add_io(p_selfies)
    p_selfies.set_defaults(handler=_cmd_selfies)

    p_mutate = sub.add_parser("mutate", help="corrupt a valid corpus")
    add_io(p_mutate, with_seed=True)
    p_mutate.set_defaults(handler=_cmd_mutate)

    return parser


def _load_table(args: argparse.Namespace) -> ValenceTable:
    path = getattr(args, "valence_table", None)
    if path is None:
        return DEFAULT_TABLE
    return ValenceTable.from_json_file(path)


def _read_lines(path: str | None) -> list[str]:
    if path is None:
        return [line.rstrip("\n") for line in sys.stdin]
    with open(path, "r", encoding="utf-8") as handle:
        return [line.rstrip("\n") for line in handle]


def _open_output(path: str | None) -> TextIO:
    if path is None:
        return sys.stdout
    return open(path, "w", encoding="utf-8")


def _map_lines(
    worker: Callable[[str], object],
    lines: list[str],
    jobs: int,
    config: dict,
) -> Iterable[object]:
    """Order-preserving map, optionally across processes."""
    if jobs <= 1 or len(lines) < 2:
        _init_worker(config)
        yield from map(worker, lines)
        return
    context = multiprocessing.get_context("fork")
    pool = context.Pool(jobs, initializer=_init_worker, initargs=(config,))
    chunk = max(1, len(lines) // (jobs * 8))
    try:
        yield from pool.imap(worker, lines, chunksize=chunk)
        pool.close()
        pool.join()
    finally:
        pool.terminate()


def _init_worker(config: dict) -> None:
    _WORKER_CONFIG.clear()
    _WORKER_CONFIG.update(config)
    path = config.get("valence_table")
    _WORKER_CONFIG["table"] = (
        ValenceTable.from_json_file(path) if path else DEFAULT_TABLE
    )


def _worker_table() -> ValenceTable:
    return _WORKER_CONFIG.get("table", DEFAULT_TABLE)


def _correct_line(line: str) -> dict:
    report = correct_smiles(line, _worker_table())
    record = {
        "input": report.input,
        "output": report.output,
        "was_already_valid": report.was_already_valid,
        "changed": report.changed,
        "sentinel": report.is_sentinel,
        "error_classes": report.error_classes(),
    }
    if _WORKER_CONFIG.get("verbose"):
        record["intermediate_selfies"] = report.intermediate_selfies
    return record


def _classify_line(line: str) -> dict:
    return {
        "input": line,
        "error_class": classify_error(line, _worker_table()).value,
    }


def _selfies_encode_line(line: str) -> dict:
    table = _worker_table()
    result = parse_lenient(line, table)
    kekulized, _ = kekulize(result.graph, table)
    symbols = encode(kekulized, ranks=list(range(len(kekulized))))
    return {"input": line, "output": "".join(s.raw for s in symbols)}


def _selfies_decode_line(line: str) -> dict:
    table = _worker_table()
    result = decode_string(line, table)
    output = canonical_smiles(result.graph) if len(result.graph) else ""
    return {"input": line, "output": output, "sentinel": output == ""}


def _selfies_edit_line(line: str) -> dict:
    kept = [lex for lex, ok in tokenize_selfies(line) if ok]
    return {"input": line, "output": "".join(kept)}


def _mutate_line(line: str) -> dict:
    return {
        "input": line,
        "output": mutate_smiles(line, _WORKER_CONFIG.get("seed", 0)),
    }


_CORRECT_COLUMNS = ("input", "output", "flags", "error_classes")


def _format_correct(record: dict, fmt: str, verbose: bool) -> str:
    if fmt == "jsonl":
        return json.dumps(record, ensure_ascii=False)
    flags = []
    if record["was_already_valid"]:
        flags.append("already_valid")
    if record["changed"]:
        flags.append("changed")
    if record["sentinel"]:
        flags.append("sentinel")
    columns = [
        record["input"],
        record["output"],
        ";".join(flags),
        ";".join(record["error_classes"]),
    ]
    if verbose:
        columns.append(record.get("intermediate_selfies", ""))
    return "\t".join(columns)


def _format_pair(record: dict, fmt: str) -> str:
    if fmt == "jsonl":
        return json.dumps(record, ensure_ascii=False)
    keys = [k for k in record if k != "input"]
    return "\t".join([record["input"]] + [str(record[k]) for k in keys])


def _cmd_correct(args: argparse.Namespace) -> int:
    _load_table(args)  # validate early; workers reload from path
    lines = _read_lines(args.input)
    config = {"valence_table": args.valence_table, "verbose": args.verbose}
    out = _open_output(args.output)
    sentinel_seen = False
    try:
        for record in _map_lines(_correct_line, lines, args.jobs, config):
            assert isinstance(record, dict)
            sentinel_seen = sentinel_seen or record["sentinel"]
            print(_format_correct(record, args.format, args.verbose), file=out)
    finally:
        if out is not sys.stdout:
            out.close()
    return 1 if sentinel_seen else 0


def _cmd_classify(args: argparse.Namespace) -> int:
    _load_table(args)
    lines = _read_lines(args.input)
    config = {"valence_table": args.valence_table}
    out = _open_output(args.output)
    counts: Counter[str] = Counter()
    try:
        for record in _map_lines(_classify_line, lines, args.jobs, config):
            assert isinstance(record, dict)
            counts[record["error_class"]] += 1
            print(_format_pair(record, args.format), file=out)
    finally:
        if out is not sys.stdout:
            out.close()
    total = sum(counts.values())
    summary = {
        "total": total,
        "counts": dict(sorted(counts.items())),
        "fractions": {
            name: count / total for name, count in sorted(counts.items())
        }
        if total
        else {},
    }
    print(json.dumps(summary, ensure_ascii=False), file=sys.stderr)
    return 0


def _cmd_metrics(args: argparse.Namespace) -> int:
    table = _load_table(args)
    predictions = _read_lines(args.predictions)
    references = (
        _read_lines(args.references) if args.references is not None else None
    )
    patterns = load_patterns(args.patterns, table) if args.patterns else None
    report = compute_metrics(predictions, references, table, patterns)
    out = _open_output(args.output)
    try:
        print(json.dumps(report.as_dict(), ensure_ascii=False), file=out)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _cmd_selfies(args: argparse.Namespace) -> int:
    _load_table(args)
    worker = {
        "encode": _selfies_encode_line,
        "decode": _selfies_decode_line,
        "edit": _selfies_edit_line,
    }[args.mode]
    lines = _read_lines(args.input)
    config = {"valence_table": args.valence_table}
    out = _open_output(args.output)
    sentinel_seen = False
    try:
        for record in _map_lines(worker, lines, args.jobs, config):
            assert isinstance(record, dict)
            sentinel_seen = sentinel_seen or record.get("sentinel", False)
            print(_format_pair(record, args.format), file=out)
    finally:
        if out is not sys.stdout:
            out.close()
    return 1 if sentinel_seen else 0


def _cmd_mutate(args: argparse.Namespace) -> int:
    _load_table(args)
    lines = _read_lines(args.input)
    config = {"valence_table": args.valence_table, "seed": args.seed}
    out = _open_output(args.output)
    try:
        for record in _map_lines(_mutate_line, lines, args.jobs, config):
            assert isinstance(record, dict)
            print(_format_pair(record, args.format), file=out)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
