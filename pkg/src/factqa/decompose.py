"""Complex-question decomposition.

A complex question is split into a chain of answerable one-entity
questions: the head carries the entity, every later element carries a
``$e`` slot for the previous answer. Pattern validity is estimated from
the QA corpus (how often a pattern arises from replacing a true entity
mention versus any span at all), and the optimal chain is found by
dynamic programming over substrings in ascending length, validated here
against an exhaustive search on short questions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .concepts import ConceptGraph, derive_templates
from .corpus import QaPair, Tokens, kb_mentions, lookup_tokens
from .hasharray import StaticHashArray
from .kb import KnowledgeBase
from .learn import PredicateModel

SLOT = "$e"

DEFAULT_MAX_QUESTION_LEN = 23
BRUTE_FORCE_LIMIT = 8


class QuestionTooLongError(ValueError):
    def __init__(self, length: int, limit: int):
        super().__init__(f"question has {length} tokens, limit is {limit}")
        self.length = length
        self.limit = limit


@dataclass
class Decomposition:
    """Question chain with its validity score.

    ``sequence[0]`` is the head question; later elements contain the
    ``$e`` slot. A score of zero means no valid decomposition was found
    and the sequence is the question itself.
    """

    sequence: list[Tokens]
    score: float

    @property
    def texts(self) -> list[str]:
        return [" ".join(part) for part in self.sequence]


def mention_spans(
    kb: KnowledgeBase, index: StaticHashArray, tokens: Tokens, max_span: int = 5
) -> set[tuple[int, int]]:
    """Every span (not just greedy matches) whose text names a KB entity."""
    probe = lookup_tokens(tokens)
    spans: set[tuple[int, int]] = set()
    n = len(tokens)
    for i in range(n):
        for j in range(i + 1, min(n, i + max_span) + 1):
            for payload in index.lookup(" ".join(probe[i:j])):
                if kb.has_node_id(payload) and kb.is_entity(kb.node_name(payload)):
                    spans.add((i, j))
                    break
    return spans


class PatternIndex:
    """Precomputed per-pattern match counts over the corpus.

    For each corpus question and each contiguous span, the span is
    replaced by the slot token to form a pattern. f_o counts questions
    (frequency-weighted) matching the pattern under any substitution;
    f_v counts those where some generating span is an entity mention.
    """

    def __init__(self, f_o: dict[Tokens, int], f_v: dict[Tokens, int]):
        self.f_o = f_o
        self.f_v = f_v

    @classmethod
    def build(
        cls,
        corpus: Iterable[QaPair],
        kb: KnowledgeBase,
        index: StaticHashArray,
        max_mention_span: int = 5,
    ) -> "PatternIndex":
        freq: dict[Tokens, int] = {}
        for pair in corpus:
            freq[pair.question] = freq.get(pair.question, 0) + pair.frequency
        f_o: dict[Tokens, int] = {}
        f_v: dict[Tokens, int] = {}
        for question, n in freq.items():
            valid_spans = mention_spans(kb, index, question, max_mention_span)
            patterns: set[Tokens] = set()
            valid_patterns: set[Tokens] = set()
            size = len(question)
            for i in range(size):
                for j in range(i + 1, size + 1):
                    pattern = question[:i] + (SLOT,) + question[j:]
                    if len(pattern) < 2:
                        continue  # a bare slot is not a pattern
                    patterns.add(pattern)
                    if (i, j) in valid_spans:
                        valid_patterns.add(pattern)
            for pattern in patterns:
                f_o[pattern] = f_o.get(pattern, 0) + n
            for pattern in valid_patterns:
                f_v[pattern] = f_v.get(pattern, 0) + n
        return cls(f_o, f_v)

    def validity(self, pattern: Tokens) -> tuple[int, int, float]:
        """(f_v, f_o, f_v / f_o); probability is zero when f_o is zero."""
        f_o = self.f_o.get(pattern, 0)
        f_v = self.f_v.get(pattern, 0)
        return f_v, f_o, (f_v / f_o if f_o else 0.0)


class Decomposer:
    """Dynamic-programming decomposition against a pattern index and model."""

    def __init__(
        self,
        kb: KnowledgeBase,
        index: StaticHashArray,
        concepts: ConceptGraph,
        model: PredicateModel,
        patterns: PatternIndex,
        *,
        max_mention_span: int = 5,
        max_question_len: int = DEFAULT_MAX_QUESTION_LEN,
    ):
        self.kb = kb
        self.index = index
        self.concepts = concepts
        self.model = model
        self.patterns = patterns
        self.max_mention_span = max_mention_span
        self.max_question_len = max_question_len

    def is_primitive(self, tokens: Tokens) -> bool:
        """A directly answerable question: exactly one entity mention and
        at least one derivable template the model has a row for."""
        mentions = kb_mentions(self.kb, self.index, tokens, self.max_mention_span)
        if len({span for span, _ in mentions}) != 1:
            return False
        for span, entity in mentions:
            concept_dist = self.concepts.question_concepts(tokens, entity, span)
            for template in derive_templates(tokens, span, concept_dist):
                if template.text in self.model:
                    return True
        return False

    def _inner_spans(self, size: int) -> list[tuple[int, int]]:
        # Proper substrings, longest first, then leftmost: the update uses a
        # strict improvement so this order is the tie-break.
        spans = []
        for length in range(size - 1, 0, -1):
            for start in range(0, size - length + 1):
                spans.append((start, start + length))
        return spans

    def decompose(self, tokens: Tokens) -> Decomposition:
        """Best-scoring chain via DP over substrings in ascending length."""
        question = tuple(tokens)
        if len(question) > self.max_question_len:
            raise QuestionTooLongError(len(question), self.max_question_len)
        if not question:
            return Decomposition([()], 0.0)
        best: dict[Tokens, tuple[float, tuple[Tokens, ...]]] = {}
        n = len(question)
        for length in range(1, n + 1):
            for start in range(0, n - length + 1):
                sub = question[start : start + length]
                if sub in best:
                    continue
                best[sub] = self._best_for(sub, best)
        score, sequence = best[question]
        return Decomposition(list(sequence), score)

    def _best_for(
        self, sub: Tokens, best: dict[Tokens, tuple[float, tuple[Tokens, ...]]]
    ) -> tuple[float, tuple[Tokens, ...]]:
        score = 1.0 if self.is_primitive(sub) else 0.0
        sequence: tuple[Tokens, ...] = (sub,)
        for a, b in self._inner_spans(len(sub)):
            pattern = sub[:a] + (SLOT,) + sub[b:]
            p_pattern = self.patterns.validity(pattern)[2]
            if p_pattern <= 0:
                continue
            inner_score, inner_seq = best[sub[a:b]]
            candidate = p_pattern * inner_score
            if candidate > score:
                score = candidate
                sequence = inner_seq + (pattern,)
        return score, sequence

    def decompose_bruteforce(self, tokens: Tokens) -> Decomposition:
        """Exhaustive recursive enumeration; testing oracle for the DP."""
        question = tuple(tokens)
        if len(question) > BRUTE_FORCE_LIMIT:
            raise QuestionTooLongError(len(question), BRUTE_FORCE_LIMIT)

        def recurse(sub: Tokens) -> tuple[float, tuple[Tokens, ...]]:
            score = 1.0 if self.is_primitive(sub) else 0.0
            sequence: tuple[Tokens, ...] = (sub,)
            for a, b in self._inner_spans(len(sub)):
                pattern = sub[:a] + (SLOT,) + sub[b:]
                p_pattern = self.patterns.validity(pattern)[2]
                if p_pattern <= 0:
                    continue
                inner_score, inner_seq = recurse(sub[a:b])
                candidate = p_pattern * inner_score
                if candidate > score:
                    score = candidate
                    sequence = inner_seq + (pattern,)
            return score, sequence

        if not question:
            return Decomposition([()], 0.0)
        score, sequence = recurse(question)
        return Decomposition(list(sequence), score)
