"""QA corpus ingestion and the distributions grounded in it.

Covers tokenization, corpus statistics, joint entity and value extraction
with category refinement, and construction of the weighted observation set
that drives offline learning.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable

from .hasharray import StaticHashArray, find_mentions
from .kb import KnowledgeBase, PredicatePath, NAME_PREDICATE

Tokens = tuple[str, ...]

CATEGORY_DATE = "date"
CATEGORY_NUMBER = "number"
CATEGORY_PERSON = "person"
CATEGORY_LOCATION = "location"
CATEGORY_DESCRIPTION = "description"
CATEGORY_OTHER = "other"
CATEGORIES = frozenset(
    {CATEGORY_DATE, CATEGORY_NUMBER, CATEGORY_PERSON, CATEGORY_LOCATION,
     CATEGORY_DESCRIPTION, CATEGORY_OTHER}
)

_PUNCT = string.punctuation


def tokenize(text: str) -> Tokens:
    """Lowercase, split on whitespace, strip leading/trailing ASCII punctuation.

    Digits and interior punctuation (e.g. the apostrophe in a possessive)
    survive; tokens that were pure punctuation are dropped.
    """
    out = []
    for raw in text.lower().split():
        tok = raw.strip(_PUNCT)
        if tok:
            out.append(tok)
    return tuple(out)


def lookup_token(token: str) -> str:
    """Normalization applied to a token before probing the entity index.

    Strips a trailing possessive clitic so a span like ``barack obama's``
    still matches the indexed surface ``barack obama``.
    """
    if token.endswith("'s"):
        return token[:-2]
    if token.endswith("'"):
        return token[:-1]
    return token


def lookup_tokens(tokens: Iterable[str]) -> Tokens:
    return tuple(lookup_token(t) for t in tokens)


def normalize_text(text: str) -> str:
    return " ".join(tokenize(text))


def question_category(tokens: Tokens) -> str:
    """Coarse expected-answer type from the question's wh-words."""
    if not tokens:
        return CATEGORY_DESCRIPTION
    first = tokens[0]
    if first == "when" or (first == "what" and len(tokens) > 1 and tokens[1] == "year"):
        return CATEGORY_DATE
    if first == "how" and len(tokens) > 1 and tokens[1] in ("many", "much", "long"):
        return CATEGORY_NUMBER
    if first in ("who", "whom", "whose"):
        return CATEGORY_PERSON
    if first == "where":
        return CATEGORY_LOCATION
    return CATEGORY_DESCRIPTION


def load_predicate_categories(source: str | Path | IO[str]) -> dict[str, str]:
    """TSV ``predicate<TAB>category``; unknown category names are rejected."""
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fp:
            return load_predicate_categories(fp)
    table: dict[str, str] = {}
    for lineno, raw in enumerate(source, 1):
        line = raw.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 2:
            raise ValueError(f"line {lineno}: expected 2 tab-separated fields")
        predicate, category = fields
        if category not in CATEGORIES:
            raise ValueError(f"line {lineno}: unknown category {category!r}")
        table[predicate] = category
    return table


@dataclass(frozen=True)
class QaPair:
    question: Tokens
    answer: Tokens
    frequency: int = 1


def load_corpus(source: str | Path | IO[str]) -> list[QaPair]:
    """JSON-lines corpus: {"question": ..., "answer": ..., "count": n}.

    Identical (question, answer) pairs merge, summing counts; order of
    first occurrence is preserved.
    """
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fp:
            return load_corpus(fp)
    counts: dict[tuple[Tokens, Tokens], int] = {}
    for lineno, raw in enumerate(source, 1):
        line = raw.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {lineno}: invalid JSON ({exc})") from exc
        try:
            question = tokenize(record["question"])
            answer = tokenize(record["answer"])
            count = int(record.get("count", 1))
        except KeyError as exc:
            raise ValueError(f"line {lineno}: missing field {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise ValueError(f"line {lineno}: bad record ({exc})") from exc
        if count < 1:
            raise ValueError(f"line {lineno}: count must be >= 1")
        key = (question, answer)
        counts[key] = counts.get(key, 0) + count
    return [QaPair(q, a, n) for (q, a), n in counts.items()]


@dataclass
class CorpusStats:
    """P(q) over distinct questions and P(a|q) per pair, from frequencies."""

    question_probs: dict[Tokens, float]
    answer_probs: dict[tuple[Tokens, Tokens], float]

    def p_q(self, question: Tokens) -> float:
        return self.question_probs.get(question, 0.0)

    def p_a(self, question: Tokens, answer: Tokens) -> float:
        return self.answer_probs.get((question, answer), 0.0)


def corpus_stats(corpus: Iterable[QaPair]) -> CorpusStats:
    pairs = list(corpus)
    if not pairs:
        raise ValueError("empty corpus")
    per_question: dict[Tokens, int] = {}
    per_pair: dict[tuple[Tokens, Tokens], int] = {}
    for pair in pairs:
        per_question[pair.question] = per_question.get(pair.question, 0) + pair.frequency
        key = (pair.question, pair.answer)
        per_pair[key] = per_pair.get(key, 0) + pair.frequency
    total = sum(per_question.values())
    question_probs = {q: n / total for q, n in per_question.items()}
    answer_probs = {(q, a): n / per_question[q] for (q, a), n in per_pair.items()}
    return CorpusStats(question_probs, answer_probs)


@dataclass(frozen=True)
class Observation:
    """One (question, entity, value) training triple with its corpus mass."""

    question: Tokens
    entity: str
    value: str
    weight: float


def kb_mentions(
    kb: KnowledgeBase, index: StaticHashArray, tokens: Tokens, max_span: int = 5
) -> list[tuple[tuple[int, int], str]]:
    """Entity mentions in a token sequence, KB-verified.

    Greedy longest-match spans via the entity index; payloads that do not
    name a KB entity (possible fingerprint false positives) are dropped.
    Returns one (span, entity) per distinct entity, first span wins.
    """
    out: list[tuple[tuple[int, int], str]] = []
    seen: set[str] = set()
    for span, payloads in find_mentions(index, lookup_tokens(tokens), max_span):
        for payload in payloads:
            if not kb.has_node_id(payload):
                continue
            node = kb.node_name(payload)
            if kb.is_entity(node) and node not in seen:
                seen.add(node)
                out.append((span, node))
    return out


class EntityValueExtractor:
    """Joint entity and value extraction against a KB and entity index.

    A pair (e, v) is extracted when e is mentioned in the question, v is a
    token span of the answer naming a KB node, and some predicate path of
    length <= k connects them. Refinement keeps only pairs whose value
    category (from the connecting path's final predicate) matches the
    question category.
    """

    def __init__(
        self,
        kb: KnowledgeBase,
        index: StaticHashArray,
        *,
        k: int = 3,
        name_restriction: bool = True,
        name_symbol: str = NAME_PREDICATE,
        predicate_categories: dict[str, str] | None = None,
        max_mention_span: int = 5,
        max_value_span: int = 5,
        expansion: dict[tuple[str, str], list[PredicatePath]] | None = None,
    ):
        self.kb = kb
        self.index = index
        self.k = k
        self.name_restriction = name_restriction
        self.name_symbol = name_symbol
        self.predicate_categories = predicate_categories or {}
        self.max_mention_span = max_mention_span
        self.max_value_span = max_value_span
        self._expansion = expansion
        # built up front so instances stay read-only under concurrent use
        table: dict[str, list[str]] = {}
        for node in kb.nodes:
            table.setdefault(normalize_text(node), []).append(node)
        self._nodes_by_text = {text: tuple(sorted(ns)) for text, ns in table.items()}

    def mention_entities(self, tokens: Tokens) -> list[tuple[tuple[int, int], str]]:
        return kb_mentions(self.kb, self.index, tokens, self.max_mention_span)

    def candidate_values(self, answer: Tokens) -> set[str]:
        """KB nodes named by some contiguous answer span.

        A span matches a node either by normalized node text or through
        the entity index (so multi-word entity values resolve too).
        """
        by_text = self._nodes_by_text
        found: set[str] = set()
        n = len(answer)
        for i in range(n):
            for j in range(i + 1, min(n, i + self.max_value_span) + 1):
                text = " ".join(answer[i:j])
                found.update(by_text.get(text, ()))
                for payload in self.index.lookup(text):
                    if self.kb.has_node_id(payload):
                        found.add(self.kb.node_name(payload))
        return {v for v in found if v in self.kb.nodes}

    def connecting_paths(self, entity: str, value: str) -> list[PredicatePath]:
        if self._expansion is not None:
            return self._expansion.get((entity, value), [])
        return self.kb.predicates_between(
            entity,
            value,
            self.k,
            name_restriction=self.name_restriction,
            name_symbol=self.name_symbol,
        )

    def path_category(self, path: PredicatePath) -> str:
        return self.predicate_categories.get(path[-1], CATEGORY_OTHER)

    def extract(self, pair: QaPair, refine: bool = True) -> set[tuple[str, str]]:
        """Candidate (entity, value) pairs for one QA pair."""
        pairs: set[tuple[str, str]] = set()
        mentions = self.mention_entities(pair.question)
        if not mentions:
            return pairs
        values = self.candidate_values(pair.answer)
        qcat = question_category(pair.question)
        for _, entity in mentions:
            for value in values:
                paths = self.connecting_paths(entity, value)
                if not paths:
                    continue
                if refine and not any(self.path_category(p) == qcat for p in paths):
                    continue
                pairs.add((entity, value))
        return pairs


def entity_value_distribution(pairs: Iterable[tuple[str, str]]) -> dict[tuple[str, str], float]:
    """Uniform P(e, v | q, a) over the extracted pair set."""
    members = sorted(set(pairs))
    if not members:
        return {}
    share = 1.0 / len(members)
    return {pair: share for pair in members}


def entity_distribution(
    ev_pairs: Iterable[tuple[str, str]],
    mentions: Iterable[tuple[tuple[int, int], str]] = (),
) -> dict[str, float]:
    """Uniform P(e | q) over entities in the pair set.

    With an empty pair set, falls back to uniform probability over the
    supplied index mentions (the online rule).
    """
    entities = sorted({e for e, _ in ev_pairs})
    if not entities:
        entities = sorted({e for _, e in mentions})
    if not entities:
        return {}
    share = 1.0 / len(entities)
    return {e: share for e in entities}


def build_observations(
    corpus: Iterable[QaPair],
    extractor: EntityValueExtractor,
    stats: CorpusStats,
    refine: bool = True,
) -> list[Observation]:
    """One observation per (pair, extracted (e, v)).

    The weight is P(e, v | q, a) * P(a | q) * P(q); doubling every corpus
    frequency leaves weights unchanged since all three factors are
    normalized.
    """
    observations: list[Observation] = []
    for pair in corpus:
        extracted = sorted(extractor.extract(pair, refine=refine))
        if not extracted:
            continue
        mass = (1.0 / len(extracted)) * stats.p_a(pair.question, pair.answer) * stats.p_q(pair.question)
        for entity, value in extracted:
            observations.append(Observation(pair.question, entity, value, mass))
    return observations


def write_observations(observations: Iterable[Observation], fp: IO[str]) -> None:
    """Debug dump: ``question<TAB>entity<TAB>value<TAB>weight``."""
    for obs in observations:
        fp.write(f"{' '.join(obs.question)}\t{obs.entity}\t{obs.value}\t{obs.weight!r}\n")
