"""Command-line entry point: train / sweep / encode / decode / stats / analyze.

JSON results go to stdout, logs to stderr, so subcommands compose in
pipelines. Every subcommand is deterministic for fixed inputs, flags, and
seed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from . import __version__
from .analysis import (
    ConllFormatError,
    build_report,
    canonical_json,
    fragmentation_error_correlation,
    parse_conll,
    segmentation_stats,
    with_predictions,
)
from .corpus import (
    CorpusError,
    NormalizationConfig,
    WordFrequencyTable,
    build_frequency_table,
    iter_tagged_lines,
    iter_text_lines,
    language_distribution,
)
from .segmenter import (
    MODEL_FORMAT_VERSION,
    ModelFormatError,
    SubwordModel,
    decode,
    encode,
    fragmentation,
    load_model,
    save_model,
)
from .trainer import TrainerConfig, TrainerError, train

logger = logging.getLogger(__name__)

THREADS_ENV_VAR = "SUBWORDLAB_THREADS"


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV_VAR, "1")))
    except ValueError:
        return 1


def iter_input_sentences(path: str | Path) -> Iterator[str]:
    """Sentences from a text file, a directory of *.txt files, or a 2-column TSV."""
    path = Path(path)
    if path.is_dir() or path.suffix == ".tsv":
        for _, sentence in iter_tagged_lines(path):
            yield sentence
        return
    yield from iter_text_lines(path)


def _normalization_from_args(args: argparse.Namespace) -> NormalizationConfig:
    return NormalizationConfig(
        form=None if args.norm_form == "none" else args.norm_form,
        lowercase=args.lowercase,
        collapse_whitespace=not args.no_collapse_whitespace,
    )


def _trainer_config(args: argparse.Namespace, target: int) -> TrainerConfig:
    return TrainerConfig(
        target_vocab_size=target,
        seed_size=args.seed_size,
        max_piece_length=args.max_piece_len,
        shrink_factor=args.shrink_factor,
        em_iterations_per_round=args.em_iters,
        character_coverage=args.char_coverage,
    )


def _build_table(args: argparse.Namespace) -> WordFrequencyTable:
    return build_frequency_table(
        iter_input_sentences(args.input),
        _normalization_from_args(args),
        max_sentences=args.sample,
        sample_seed=args.seed,
    )


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _trainer_config(args, args.vocab_size)
    table = _build_table(args)
    model = train(table, cfg, threads=args.threads)
    save_model(model, args.output)
    logger.info("wrote %s (vocab=%d)", args.output, model.vocab_size)
    return 0


def mean_fragmentation(table: WordFrequencyTable, model: SubwordModel) -> float:
    """Frequency-weighted mean piece count per corpus word."""
    total = sum(
        freq * fragmentation(word, model) for word, freq in table.entries.items()
    )
    return total / table.total_words


def run_sweep(
    table: WordFrequencyTable,
    sizes: Sequence[int],
    base: TrainerConfig,
    output_dir: str | Path,
    threads: int = 1,
) -> dict:
    """Train one model per size on the shared table; write models plus sweep.json.

    The frequency table is built (and sampled) once by the caller, so the
    final vocabulary size is the only varying factor. A failure aborts the
    sweep but keeps models already written.
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    results = []
    for size in sizes:
        cfg = dataclasses.replace(base, target_vocab_size=size)
        model = train(table, cfg, threads=threads)
        name = f"model-{size}.tsv"
        save_model(model, output_dir / name)
        results.append(
            {
                "vocab_size": model.vocab_size,
                "model_file": name,
                "mean_fragmentation": mean_fragmentation(table, model),
            }
        )
        logger.info("trained %s", name)
    summary = {"sizes": list(sizes), "results": results}
    payload = canonical_json(summary)
    (output_dir / "sweep.json").write_text(payload + "\n", encoding="utf-8")
    return summary


def cmd_sweep(args: argparse.Namespace) -> int:
    base = _trainer_config(args, max(args.sizes))
    table = _build_table(args)
    summary = run_sweep(table, args.sizes, base, args.output_dir, threads=args.threads)
    print(canonical_json(summary))
    return 0


def _input_lines(path: str) -> Iterator[str]:
    if path == "-":
        for line in sys.stdin:
            yield line.rstrip("\r\n")
        return
    yield from iter_text_lines(path)


def cmd_encode(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    for line in _input_lines(args.input):
        enc = encode(line, model)
        if args.format == "pieces":
            print(" ".join(enc.pieces))
        elif args.format == "ids":
            print(" ".join(str(i) for i in enc.ids))
        else:
            print(
                json.dumps(
                    {
                        "pieces": enc.pieces,
                        "ids": enc.ids,
                        "word_boundaries": [list(b) for b in enc.word_boundaries],
                    },
                    ensure_ascii=False,
                )
            )
    return 0


def cmd_decode(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    for lineno, line in enumerate(_input_lines(args.input), start=1):
        try:
            ids = [int(token) for token in line.split()]
            print(decode(ids, model))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    path = Path(args.input)
    total_chars = 0

    def tagged() -> Iterator[tuple[str, str]]:
        nonlocal total_chars
        if path.is_dir() or path.suffix == ".tsv":
            pairs: Iterable[tuple[str, str]] = iter_tagged_lines(path)
        else:
            tag = args.languages or path.stem
            pairs = ((tag, line) for line in iter_text_lines(path))
        for tag, sentence in pairs:
            total_chars += sum(len(w) for w in sentence.split())
            yield tag, sentence

    distribution = language_distribution(tagged())
    print(
        canonical_json(
            {
                "per_language": distribution.per_language,
                "total_words": distribution.total,
                "total_chars": total_chars,
            }
        )
    )
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    gold = parse_conll(args.conll, args.token_col, args.label_col)
    sentences = gold
    if args.pred:
        pred = parse_conll(args.pred, args.token_col, args.label_col)
        sentences = with_predictions(gold, pred)
    reports = []
    for model_path in args.model:
        model = load_model(model_path)
        stats = segmentation_stats(sentences, model)
        correlation = None
        if args.pred:
            correlation = fragmentation_error_correlation(sentences, model, args.unit)
        reports.append(
            build_report(stats, correlation, {"vocab_size": model.vocab_size})
        )
    reports.sort(key=lambda r: r["model"]["vocab_size"])
    print(canonical_json(reports[0] if len(reports) == 1 else reports))
    return 0


def _add_normalization_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--norm-form", choices=["NFC", "NFKC", "none"], default="NFKC",
        help="Unicode normalization form (default NFKC)",
    )
    parser.add_argument("--lowercase", action="store_true", help="lowercase the text")
    parser.add_argument(
        "--no-collapse-whitespace", action="store_true",
        help="keep whitespace runs instead of collapsing to single spaces",
    )


def _add_trainer_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed-size", type=int, default=None,
                        help="seed candidate pool size (default 25 x target)")
    parser.add_argument("--shrink-factor", type=float, default=0.75)
    parser.add_argument("--em-iters", type=int, default=2)
    parser.add_argument("--char-coverage", type=float, default=0.9995)
    parser.add_argument("--max-piece-len", type=int, default=16)
    parser.add_argument("--sample", type=int, default=None,
                        help="reservoir-sample this many sentences before counting")
    parser.add_argument("--seed", type=int, default=0, help="sampling seed")
    _add_normalization_flags(parser)


def _add_threads_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--threads", type=int, default=_default_threads(),
        help=f"worker cap (default ${THREADS_ENV_VAR} or 1); results do not depend on it",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="subwordlab",
        description="Train fixed-size unigram subword vocabularies, segment text, "
        "and analyze segmentation impact on labeled data.",
    )
    parser.add_argument(
        "--version", action="version",
        version=f"subwordlab {__version__} (model format {MODEL_FORMAT_VERSION})",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a vocabulary of an exact size")
    p_train.add_argument("--input", required=True)
    p_train.add_argument("--vocab-size", type=int, required=True)
    p_train.add_argument("--output", required=True)
    _add_trainer_flags(p_train)
    _add_threads_flag(p_train)
    p_train.set_defaults(func=cmd_train)

    p_sweep = sub.add_parser("sweep", help="train several sizes on one sampled table")
    p_sweep.add_argument("--input", required=True)
    p_sweep.add_argument("--sizes", required=True,
                         help="comma-separated target sizes, strictly increasing")
    p_sweep.add_argument("--output-dir", required=True)
    _add_trainer_flags(p_sweep)
    _add_threads_flag(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_encode = sub.add_parser("encode", help="segment text line by line")
    p_encode.add_argument("--model", required=True)
    p_encode.add_argument("--input", required=True, help="text file, or - for stdin")
    p_encode.add_argument("--format", choices=["pieces", "ids", "json"], default="pieces")
    p_encode.set_defaults(func=cmd_encode)

    p_decode = sub.add_parser("decode", help="decode space-separated ids line by line")
    p_decode.add_argument("--model", required=True)
    p_decode.add_argument("--input", required=True, help="id file, or - for stdin")
    p_decode.set_defaults(func=cmd_decode)

    p_stats = sub.add_parser("stats", help="corpus word counts per language")
    p_stats.add_argument("--input", required=True,
                         help="text file, directory of <lang>.txt, or lang/sentence TSV")
    p_stats.add_argument("--languages", default=None,
                         help="language tag for plain text input (default: file stem)")
    p_stats.set_defaults(func=cmd_stats)

    p_analyze = sub.add_parser("analyze", help="segmentation impact on labeled data")
    p_analyze.add_argument("--model", action="append", required=True,
                           help="model file; repeat to compare several")
    p_analyze.add_argument("--conll", required=True, help="gold CoNLL-format file")
    p_analyze.add_argument("--pred", default=None, help="parallel predictions file")
    p_analyze.add_argument("--unit", choices=["token", "entity"], default="token")
    p_analyze.add_argument("--token-col", type=int, default=0)
    p_analyze.add_argument("--label-col", type=int, default=-1)
    p_analyze.set_defaults(func=cmd_analyze)
    return parser


def _parse_sizes(parser: argparse.ArgumentParser, raw: str) -> list[int]:
    try:
        sizes = [int(s) for s in raw.split(",") if s.strip()]
    except ValueError:
        parser.error(f"--sizes must be comma-separated integers, got {raw!r}")
    if not sizes:
        parser.error("--sizes is empty")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        parser.error(f"--sizes must be strictly increasing, got {raw!r}")
    return sizes


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    if args.command == "sweep":
        args.sizes = _parse_sizes(parser, args.sizes)
    if getattr(args, "threads", None) is not None and args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except (CorpusError, TrainerError, ModelFormatError, ConllFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
