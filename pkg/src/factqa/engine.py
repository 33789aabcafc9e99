"""Online probabilistic inference: from a question to a value distribution.

Enumeration follows the chain question -> entity -> template -> path ->
value, skipping any branch whose factor is zero, and normalizes at the
end. Everything operates on immutable stores, so concurrent queries are
safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import fsum

from .concepts import ConceptGraph, derive_templates
from .corpus import Tokens, kb_mentions, tokenize
from .hasharray import StaticHashArray
from .kb import KnowledgeBase, PredicatePath
from .learn import PredicateModel

REASON_NO_ENTITY = "no entity"
REASON_NO_TEMPLATE = "no template"
REASON_NO_VALUE = "no value"

SEQUENCE_SLOT = "$e"


@dataclass(frozen=True)
class Trace:
    """Best-scoring explanation of a value: which entity, template and
    path produced its largest raw mass."""

    entity: str
    template: str
    path: PredicatePath
    mass: float


@dataclass
class AnswerDistribution:
    entries: dict[str, float]
    traces: dict[str, Trace] = field(default_factory=dict)
    reason: str | None = None
    enumerations: int = 0

    def top(self) -> tuple[str, float] | None:
        """Argmax value; ties break on the lexicographically smaller value."""
        if not self.entries:
            return None
        value = min(self.entries, key=lambda v: (-self.entries[v], v))
        return value, self.entries[value]


@dataclass
class SequenceResult:
    value: str | None
    probability: float
    failed_index: int | None
    steps: list[dict]


class AnswerEngine:
    """Answers tokenized questions against loaded artifacts."""

    def __init__(
        self,
        kb: KnowledgeBase,
        index: StaticHashArray,
        concepts: ConceptGraph,
        model: PredicateModel,
        surfaces: dict[str, str] | None = None,
        *,
        max_mention_span: int = 5,
    ):
        self.kb = kb
        self.index = index
        self.concepts = concepts
        self.model = model
        self.surfaces = surfaces or {}
        self.max_mention_span = max_mention_span

    def surface(self, node: str) -> str:
        """Canonical surface string for substitution; falls back to the
        node id itself."""
        return self.surfaces.get(node, node)

    def answer_distribution(self, tokens: Tokens) -> AnswerDistribution:
        mentions = kb_mentions(self.kb, self.index, tokens, self.max_mention_span)
        if not mentions:
            return AnswerDistribution({}, reason=REASON_NO_ENTITY)
        p_entity = 1.0 / len(mentions)
        masses: dict[str, list[float]] = {}
        traces: dict[str, Trace] = {}
        supported = False
        enumerations = 0
        for span, entity in mentions:
            concept_dist = self.concepts.question_concepts(tokens, entity, span)
            templates = derive_templates(tokens, span, concept_dist)
            for template, p_template in sorted(
                templates.items(), key=lambda kv: kv[0].text
            ):
                row = self.model.row(template.text)
                if not row or p_template <= 0:
                    continue
                supported = True
                for path in sorted(row):
                    theta = row[path]
                    if theta <= 0:
                        continue
                    for value, p_value in self.kb.value_distribution(entity, path).items():
                        enumerations += 1
                        mass = p_entity * p_template * theta * p_value
                        if mass <= 0:
                            continue
                        masses.setdefault(value, []).append(mass)
                        best = traces.get(value)
                        if best is None or mass > best.mass:
                            traces[value] = Trace(entity, template.text, path, mass)
        if not supported:
            return AnswerDistribution({}, reason=REASON_NO_TEMPLATE, enumerations=enumerations)
        if not masses:
            return AnswerDistribution({}, reason=REASON_NO_VALUE, enumerations=enumerations)
        raw = {value: fsum(terms) for value, terms in masses.items()}
        total = fsum(raw.values())
        entries = {value: m / total for value, m in sorted(raw.items())}
        return AnswerDistribution(entries, traces, enumerations=enumerations)

    def answer(self, tokens: Tokens) -> tuple[tuple[str, float] | None, AnswerDistribution]:
        dist = self.answer_distribution(tokens)
        return dist.top(), dist

    def answer_sequence(self, sequence: list[Tokens]) -> SequenceResult:
        """Answer a decomposed question chain by substitution.

        The first element is answered directly; each later element carries
        a ``$e`` slot that receives the previous answer's surface form.
        Aborts, reporting the failing index, when any step yields nothing.
        """
        if not sequence:
            return SequenceResult(None, 0.0, 0, [])
        steps: list[dict] = []
        current_value: str | None = None
        probability = 0.0
        for i, element in enumerate(sequence):
            if i == 0:
                question = tuple(element)
            else:
                substitution = tokenize(self.surface(current_value))
                question = _substitute(tuple(element), substitution)
            top, dist = self.answer(question)
            if top is None:
                steps.append({"question": " ".join(question), "reason": dist.reason})
                return SequenceResult(None, 0.0, i, steps)
            current_value, probability = top
            steps.append(
                {
                    "question": " ".join(question),
                    "answer": current_value,
                    "probability": probability,
                }
            )
        return SequenceResult(current_value, probability, None, steps)


def _substitute(pattern: Tokens, replacement: Tokens) -> Tokens:
    if pattern.count(SEQUENCE_SLOT) != 1:
        raise ValueError(f"pattern must contain {SEQUENCE_SLOT!r} exactly once: {pattern}")
    i = pattern.index(SEQUENCE_SLOT)
    return pattern[:i] + replacement + pattern[i + 1 :]
