"""Command-line entry points.

Machine-readable records go to stdout as JSON lines; logging goes to
stderr. Exit codes: 0 success, 2 configuration error, 3 stage failure,
4 unanswerable question in batch mode.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from . import corpus as corpus_mod
from .kb import expand_predicates, load_kb, write_expansion
from .pipeline import (
    ConfigError,
    OnlineSession,
    PipelineConfig,
    StageError,
    build_entity_index,
    config_from_values,
    corpus_seed_entities,
    load_config,
    run_offline,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE = 3
EXIT_UNANSWERED = 4

_CONFIG_FLAGS: list[tuple[str, type]] = [
    ("kb", Path), ("entities", Path), ("isa", Path), ("corpus", Path),
    ("predicate-categories", Path), ("context-weights", Path), ("fixture-overrides", Path),
    ("index", Path), ("expansion", Path), ("model", Path), ("report", Path),
    ("observations", Path),
    ("k", int), ("name-symbol", str), ("em-max-iters", int), ("em-epsilon", float),
    ("max-question-len", int), ("max-mention-span", int), ("max-value-span", int),
]


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="key = value settings file")
    for name, typ in _CONFIG_FLAGS:
        parser.add_argument(f"--{name}", type=typ, default=None)
    for name in ("name-restriction", "refine"):
        group = parser.add_mutually_exclusive_group()
        dest = name.replace("-", "_")
        group.add_argument(f"--{name}", dest=dest, action="store_true", default=None)
        group.add_argument(f"--no-{name}", dest=dest, action="store_false", default=None)


def _resolve_config(args: argparse.Namespace) -> PipelineConfig:
    overrides = {
        name.replace("-", "_"): getattr(args, name.replace("-", "_"))
        for name, _ in _CONFIG_FLAGS
    }
    overrides["name_restriction"] = args.name_restriction
    overrides["refine"] = args.refine
    if args.config is not None:
        return load_config(args.config, overrides)
    return config_from_values(overrides)


def _emit(record: dict) -> None:
    sys.stdout.write(json.dumps(record, sort_keys=True) + "\n")
    sys.stdout.flush()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="factqa",
        description="Template-based factoid QA over a tab-separated triple store.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-index", help="build and save the entity index")
    _add_config_flags(p)

    p = sub.add_parser("expand", help="expand predicate paths from corpus entities")
    _add_config_flags(p)

    p = sub.add_parser("learn", help="extract observations and fit the model")
    _add_config_flags(p)

    p = sub.add_parser("pipeline", help="run the whole offline flow")
    _add_config_flags(p)

    p = sub.add_parser("answer", help="answer one or more questions")
    _add_config_flags(p)
    p.add_argument("question", nargs="+")

    p = sub.add_parser("decompose", help="decompose a question without answering")
    _add_config_flags(p)
    p.add_argument("question", nargs="+")

    p = sub.add_parser("repl", help="answer questions from stdin, one per line")
    _add_config_flags(p)

    return parser


def _cmd_build_index(config: PipelineConfig) -> int:
    config.require("kb", "entities", "index")
    kb = load_kb(config.kb)
    from .pipeline import load_entity_dictionary

    index, _ = build_entity_index(kb, load_entity_dictionary(config.entities))
    config.index.parent.mkdir(parents=True, exist_ok=True)
    index.save(config.index)
    _emit({"index": str(config.index), "items": len(index)})
    return EXIT_OK


def _cmd_expand(config: PipelineConfig) -> int:
    config.require("kb", "entities", "corpus", "expansion")
    kb = load_kb(config.kb)
    from .pipeline import load_entity_dictionary

    index, _ = build_entity_index(kb, load_entity_dictionary(config.entities))
    pairs = corpus_mod.load_corpus(config.corpus)
    seeds = corpus_seed_entities(kb, index, pairs, config.max_mention_span)
    paths = expand_predicates(
        kb, seeds, config.k,
        name_restriction=config.name_restriction, name_symbol=config.name_symbol,
    )
    config.expansion.parent.mkdir(parents=True, exist_ok=True)
    with open(config.expansion, "w", encoding="utf-8") as fp:
        count = write_expansion(paths, fp)
    _emit({"expansion": str(config.expansion), "seeds": len(seeds), "paths": count})
    return EXIT_OK


def _cmd_offline(config: PipelineConfig) -> int:
    report = run_offline(config)
    _emit(report)
    return EXIT_OK


def _cmd_answer(config: PipelineConfig, questions: list[str]) -> int:
    session = OnlineSession(config)
    unanswered = False
    for question in questions:
        record = session.answer_record(question)
        _emit(record)
        if record.get("answer") is None:
            unanswered = True
    return EXIT_UNANSWERED if unanswered else EXIT_OK


def _cmd_decompose(config: PipelineConfig, questions: list[str]) -> int:
    session = OnlineSession(config)
    for question in questions:
        _emit(session.decompose_record(question))
    return EXIT_OK


def _cmd_repl(config: PipelineConfig) -> int:
    session = OnlineSession(config)
    for line in sys.stdin:
        question = line.strip()
        if not question:
            continue
        _emit(session.answer_record(question))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = _resolve_config(args)
        if args.command == "build-index":
            return _cmd_build_index(config)
        if args.command == "expand":
            return _cmd_expand(config)
        if args.command in ("learn", "pipeline"):
            return _cmd_offline(config)
        if args.command == "answer":
            return _cmd_answer(config, args.question)
        if args.command == "decompose":
            return _cmd_decompose(config, args.question)
        if args.command == "repl":
            return _cmd_repl(config)
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigError as exc:
        logging.getLogger("factqa").error("%s", exc)
        return EXIT_CONFIG
    except StageError as exc:
        logging.getLogger("factqa").error("%s", exc)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
