"""Offline and online orchestration over flat-file artifacts.

The offline flow builds the entity index, expands predicate paths from the
entities mentioned in the corpus, extracts observations, and runs the
learner; all artifacts are staged to temporary files and renamed into
place only when every stage has succeeded, so a failed run leaves nothing
behind. The online flow loads those artifacts and answers questions,
decomposing the ones that are not directly answerable.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, fields
from pathlib import Path

from . import corpus as corpus_mod
from .concepts import ConceptGraph
from .corpus import (
    EntityValueExtractor,
    QaPair,
    corpus_stats,
    kb_mentions,
    normalize_text,
    tokenize,
    write_observations,
)
from .decompose import Decomposer, PatternIndex, QuestionTooLongError
from .engine import AnswerEngine
from .hasharray import StaticHashArray
from .kb import KnowledgeBase, expand_predicates, expansion_map, load_kb, write_expansion
from .learn import PredicateModel, TrainingSet, learn

log = logging.getLogger("factqa")


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage!r} failed: {message}")
        self.stage = stage


@dataclass
class PipelineConfig:
    # inputs
    kb: Path | None = None
    entities: Path | None = None
    isa: Path | None = None
    corpus: Path | None = None
    predicate_categories: Path | None = None
    context_weights: Path | None = None
    fixture_overrides: Path | None = None
    # artifacts
    index: Path | None = None
    expansion: Path | None = None
    model: Path | None = None
    report: Path | None = None
    observations: Path | None = None
    # knobs
    k: int = 3
    name_restriction: bool = True
    name_symbol: str = "name"
    em_max_iters: int = 100
    em_epsilon: float = 1e-6
    refine: bool | None = None  # None: refine iff predicate categories supplied
    max_question_len: int = 23
    max_mention_span: int = 5
    max_value_span: int = 5

    def resolved_refine(self) -> bool:
        if self.refine is None:
            return self.predicate_categories is not None
        return self.refine

    def require(self, *names: str) -> None:
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise ConfigError("missing required settings: " + ", ".join(sorted(missing)))
        unreadable = [
            str(getattr(self, n))
            for n in names
            if n in _INPUT_FIELDS and not Path(getattr(self, n)).is_file()
        ]
        if unreadable:
            raise ConfigError("unreadable input files: " + ", ".join(unreadable))


_PATH_FIELDS = {
    "kb", "entities", "isa", "corpus", "predicate_categories", "context_weights",
    "fixture_overrides", "index", "expansion", "model", "report", "observations",
}
_INPUT_FIELDS = {
    "kb", "entities", "isa", "corpus", "predicate_categories", "context_weights",
    "fixture_overrides",
}
_BOOL_FIELDS = {"name_restriction", "refine"}
_INT_FIELDS = {"k", "em_max_iters", "max_question_len", "max_mention_span", "max_value_span"}
_FLOAT_FIELDS = {"em_epsilon"}


def _parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {value!r}")


def load_config(path: str | Path, overrides: dict[str, object] | None = None) -> PipelineConfig:
    """Read a ``key = value`` config file; later ``overrides`` win.

    Relative paths are resolved against the config file's directory.
    """
    path = Path(path)
    base = path.parent
    values: dict[str, object] = {}
    known = {f.name for f in fields(PipelineConfig)}
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if key not in known:
            raise ConfigError(f"{path}:{lineno}: unknown setting {key!r}")
        values[key] = _coerce(key, value, base)
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    return PipelineConfig(**values)


def config_from_values(values: dict[str, object]) -> PipelineConfig:
    return PipelineConfig(**{k: v for k, v in values.items() if v is not None})


def _coerce(key: str, value: str, base: Path) -> object:
    if key in _PATH_FIELDS:
        p = Path(value)
        return p if p.is_absolute() else base / p
    if key in _BOOL_FIELDS:
        return _parse_bool(value)
    if key in _INT_FIELDS:
        return int(value)
    if key in _FLOAT_FIELDS:
        return float(value)
    return value


def load_entity_dictionary(path: str | Path) -> list[tuple[str, str]]:
    """TSV ``id<TAB>surface`` rows, order preserved (first surface of an
    id is its canonical one)."""
    rows: list[tuple[str, str]] = []
    with open(path, encoding="utf-8") as fp:
        for lineno, raw in enumerate(fp, 1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not all(parts):
                raise ValueError(f"{path}:{lineno}: expected 'id<TAB>surface'")
            rows.append((parts[0], parts[1]))
    return rows


def build_entity_index(
    kb: KnowledgeBase, dictionary: list[tuple[str, str]]
) -> tuple[StaticHashArray, dict[str, str]]:
    """Index normalized surfaces to KB node ids; returns the index and the
    canonical surface per node. Surfaces naming unknown nodes are skipped."""
    entries: list[tuple[str, int]] = []
    canonical: dict[str, str] = {}
    skipped = 0
    for node, surface in dictionary:
        if node not in kb.nodes:
            skipped += 1
            continue
        key = normalize_text(surface)
        if not key:
            skipped += 1
            continue
        entries.append((key, kb.node_id(node)))
        canonical.setdefault(node, surface)
    if skipped:
        log.warning("entity dictionary: skipped %d rows naming unknown nodes", skipped)
    return StaticHashArray.build(entries), canonical


def corpus_seed_entities(
    kb: KnowledgeBase,
    index: StaticHashArray,
    pairs: list[QaPair],
    max_mention_span: int,
) -> set[str]:
    """Entities mentioned in at least one corpus question."""
    seeds: set[str] = set()
    for question in {p.question for p in pairs}:
        for _, entity in kb_mentions(kb, index, question, max_mention_span):
            seeds.add(entity)
    return seeds


class _Staged:
    """Write artifacts to temp files; commit renames them into place."""

    def __init__(self) -> None:
        self.pending: list[tuple[Path, Path]] = []

    def path_for(self, final: Path) -> Path:
        final = Path(final)
        final.parent.mkdir(parents=True, exist_ok=True)
        tmp = final.with_name(final.name + ".tmp")
        self.pending.append((tmp, final))
        return tmp

    def commit(self) -> None:
        for tmp, final in self.pending:
            os.replace(tmp, final)
        self.pending.clear()

    def abort(self) -> None:
        for tmp, _ in self.pending:
            try:
                tmp.unlink()
            except FileNotFoundError:
                pass
        self.pending.clear()


def run_offline(config: PipelineConfig) -> dict:
    """Index build, expansion, extraction, learning; atomic artifact writes."""
    config.require("kb", "entities", "isa", "corpus", "index", "expansion", "model", "report")
    staged = _Staged()
    stage = "load"
    try:
        kb = load_kb(config.kb)
        dictionary = load_entity_dictionary(config.entities)
        concepts = ConceptGraph.load(config.isa, config.context_weights, config.fixture_overrides)
        pairs = corpus_mod.load_corpus(config.corpus)
        pred_cats = (
            corpus_mod.load_predicate_categories(config.predicate_categories)
            if config.predicate_categories
            else {}
        )

        stage = "build-index"
        index, _ = build_entity_index(kb, dictionary)
        index.save(staged.path_for(config.index))
        log.info("built entity index: %d items", len(index))

        stage = "expand"
        seeds = corpus_seed_entities(kb, index, pairs, config.max_mention_span)
        paths = expand_predicates(
            kb,
            seeds,
            config.k,
            name_restriction=config.name_restriction,
            name_symbol=config.name_symbol,
        )
        with open(staged.path_for(config.expansion), "w", encoding="utf-8") as fp:
            write_expansion(paths, fp)
        log.info("expanded %d seed entities into %d paths", len(seeds), len(paths))

        stage = "extract"
        stats = corpus_stats(pairs)
        extractor = EntityValueExtractor(
            kb,
            index,
            k=config.k,
            name_restriction=config.name_restriction,
            name_symbol=config.name_symbol,
            predicate_categories=pred_cats,
            max_mention_span=config.max_mention_span,
            max_value_span=config.max_value_span,
            expansion=expansion_map(paths),
        )
        training = TrainingSet.build(pairs, extractor, stats, concepts, config.resolved_refine())
        if not len(training):
            raise StageError("extract", "no observations extracted")
        if config.observations:
            with open(staged.path_for(config.observations), "w", encoding="utf-8") as fp:
                write_observations(training.observations, fp)
        log.info("extracted %d observations from %d pairs", len(training), len(pairs))

        stage = "learn"
        result = learn(training, config.em_max_iters, config.em_epsilon)
        result.model.save(staged.path_for(config.model))
        report = {
            "triples": len(kb),
            "entities": len(kb.entities),
            "index_items": len(index),
            "expansion_paths": len(paths),
            "qa_pairs": len(pairs),
            "observations": len(training),
            "templates": len(result.model),
            "iterations": result.iterations,
            "final_log_likelihood": result.final_log_likelihood,
            "dropped_observations": result.dropped_observations,
        }
        with open(staged.path_for(config.report), "w", encoding="utf-8") as fp:
            json.dump(report, fp, indent=2, sort_keys=True)
            fp.write("\n")
    except StageError:
        staged.abort()
        raise
    except Exception as exc:
        staged.abort()
        raise StageError(stage, str(exc)) from exc
    staged.commit()
    return report


class OnlineSession:
    """Loaded artifacts plus the answering and decomposition machinery."""

    def __init__(self, config: PipelineConfig):
        config.require("kb", "entities", "isa", "corpus", "index", "model")
        missing = [
            str(p) for p in (config.index, config.model) if p is not None and not p.is_file()
        ]
        if missing:
            raise ConfigError("missing artifacts (run the offline flow first): " + ", ".join(missing))
        self.config = config
        self.kb = load_kb(config.kb)
        self.index = StaticHashArray.load(config.index)
        self.concepts = ConceptGraph.load(
            config.isa, config.context_weights, config.fixture_overrides
        )
        self.model = PredicateModel.load(config.model)
        dictionary = load_entity_dictionary(config.entities)
        surfaces: dict[str, str] = {}
        for node, surface in dictionary:
            surfaces.setdefault(node, surface)
        self.engine = AnswerEngine(
            self.kb,
            self.index,
            self.concepts,
            self.model,
            surfaces,
            max_mention_span=config.max_mention_span,
        )
        pairs = corpus_mod.load_corpus(config.corpus)
        patterns = PatternIndex.build(pairs, self.kb, self.index, config.max_mention_span)
        self.decomposer = Decomposer(
            self.kb,
            self.index,
            self.concepts,
            self.model,
            patterns,
            max_mention_span=config.max_mention_span,
            max_question_len=config.max_question_len,
        )

    def answer_record(self, question: str) -> dict:
        """Answer one question, decomposing when it is not primitive."""
        tokens = tokenize(question)
        record: dict = {"question": question}
        if tokens and not self.decomposer.is_primitive(tokens):
            try:
                decomposition = self.decomposer.decompose(tokens)
            except QuestionTooLongError as exc:
                record.update(answer=None, probability=0.0, reason=str(exc))
                return record
            if decomposition.score > 0 and len(decomposition.sequence) > 1:
                record["decomposition"] = {
                    "sequence": decomposition.texts,
                    "score": decomposition.score,
                }
                result = self.engine.answer_sequence(decomposition.sequence)
                if result.value is None:
                    record.update(
                        answer=None,
                        probability=0.0,
                        reason=f"unanswerable at step {result.failed_index}",
                        steps=result.steps,
                    )
                else:
                    record.update(
                        answer=result.value,
                        probability=result.probability,
                        steps=result.steps,
                    )
                return record
        top, dist = self.engine.answer(tokens)
        if top is None:
            record.update(answer=None, probability=0.0, reason=dist.reason)
            return record
        value, probability = top
        trace = dist.traces.get(value)
        record.update(answer=value, probability=probability)
        if trace is not None:
            record["trace"] = {
                "entity": trace.entity,
                "template": trace.template,
                "predicate_path": list(trace.path),
            }
        return record

    def decompose_record(self, question: str) -> dict:
        tokens = tokenize(question)
        try:
            decomposition = self.decomposer.decompose(tokens)
        except QuestionTooLongError as exc:
            return {"question": question, "sequence": [], "score": 0.0,
                    "primitive_flags": [], "reason": str(exc)}
        flags = [
            "$e" not in part and self.decomposer.is_primitive(part)
            for part in decomposition.sequence
        ]
        return {
            "question": question,
            "sequence": decomposition.texts,
            "score": decomposition.score,
            "primitive_flags": flags,
        }
