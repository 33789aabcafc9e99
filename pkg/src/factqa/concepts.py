"""isA taxonomy: concept priors, context-aware reweighting, template derivation."""

from __future__ import annotations

from dataclasses import dataclass
from math import fsum
from pathlib import Path
from typing import IO, Iterable

PLACEHOLDER_MARK = "$"
FALLBACK_CONCEPT = "entity"


@dataclass(frozen=True)
class Template:
    """A question with exactly one entity mention replaced by a concept slot."""

    tokens: tuple[str, ...]
    concept: str

    def __post_init__(self) -> None:
        slot = PLACEHOLDER_MARK + self.concept
        if self.tokens.count(slot) != 1:
            raise ValueError(f"template must contain the placeholder {slot!r} exactly once")

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


def _read_tsv(source: str | Path | IO[str], n_fields: int) -> list[tuple[str, ...]]:
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fp:
            return _read_tsv(fp, n_fields)
    rows = []
    for lineno, raw in enumerate(source, 1):
        line = raw.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != n_fields:
            raise ValueError(f"line {lineno}: expected {n_fields} tab-separated fields")
        rows.append(tuple(fields))
    return rows


class ConceptGraph:
    """Weighted entity -> concept edges plus optional context machinery.

    ``context_weights`` maps (concept, token) to a non-negative boost used
    by :meth:`conceptualize`. ``overrides`` pins an exact concept
    distribution to a full question string and wins over any computation,
    which keeps worked examples reproducible bit for bit.
    """

    def __init__(
        self,
        edges: Iterable[tuple[str, str, float]] = (),
        context_weights: dict[tuple[str, str], float] | None = None,
        overrides: dict[str, dict[str, float]] | None = None,
    ):
        table: dict[str, dict[str, float]] = {}
        for entity, concept, weight in edges:
            if weight <= 0:
                raise ValueError(f"isA edge weight must be positive: ({entity}, {concept})")
            row = table.setdefault(entity, {})
            row[concept] = row.get(concept, 0.0) + float(weight)
        self._edges = table
        self.context_weights = dict(context_weights or {})
        self.overrides = {q: dict(d) for q, d in (overrides or {}).items()}

    @classmethod
    def load(
        cls,
        isa_path: str | Path,
        context_weights_path: str | Path | None = None,
        overrides_path: str | Path | None = None,
    ) -> "ConceptGraph":
        from .corpus import normalize_text

        edges = [(e, c, float(w)) for e, c, w in _read_tsv(isa_path, 3)]
        weights = None
        if context_weights_path is not None:
            weights = {(c, tok): float(w) for c, tok, w in _read_tsv(context_weights_path, 3)}
        overrides: dict[str, dict[str, float]] | None = None
        if overrides_path is not None:
            overrides = {}
            for question, concept, prob in _read_tsv(overrides_path, 3):
                # keys are stored in tokenized form so any surface spelling
                # of the question matches at lookup time
                overrides.setdefault(normalize_text(question), {})[concept] = float(prob)
        return cls(edges, weights, overrides)

    def concept_prior(self, entity: str) -> dict[str, float]:
        """isA edge weights of the entity, normalized; empty if it has none."""
        row = self._edges.get(entity)
        if not row:
            return {}
        total = fsum(row.values())
        return {c: w / total for c, w in sorted(row.items())}

    def conceptualize(
        self,
        tokens: Iterable[str],
        entity: str,
        context_weights: dict[tuple[str, str], float] | None = None,
        mention: tuple[int, int] | None = None,
    ) -> dict[str, float]:
        """Prior reweighted by question context.

        P(c | q, e) is proportional to P(c | e) * (1 + sum of the
        context weights of tokens outside the mention span). With no
        context weights this reduces to the prior exactly.
        """
        prior = self.concept_prior(entity)
        if not prior:
            return {}
        weights = self.context_weights if context_weights is None else context_weights
        toks = list(tokens)
        if mention is not None:
            start, end = mention
            toks = toks[:start] + toks[end:]
        scores = {
            c: p * (1.0 + fsum(weights.get((c, tok), 0.0) for tok in toks))
            for c, p in prior.items()
        }
        total = fsum(scores.values())
        return {c: s / total for c, s in scores.items()}

    def question_concepts(
        self, tokens: Iterable[str], entity: str, mention: tuple[int, int] | None = None
    ) -> dict[str, float]:
        """Concept distribution used when deriving templates for a question.

        Checks the per-question override first, then conceptualizes; an
        entity without isA edges falls back to the universal concept so
        every mention yields at least one template.
        """
        toks = tuple(tokens)
        override = self.overrides.get(" ".join(toks))
        if override:
            return dict(override)
        dist = self.conceptualize(toks, entity, mention=mention)
        if dist:
            return dist
        return {FALLBACK_CONCEPT: 1.0}


def derive_templates(
    tokens: Iterable[str], mention: tuple[int, int], concepts: dict[str, float]
) -> dict[Template, float]:
    """One template per positively weighted concept, mention span replaced
    by the concept placeholder. Probabilities are copied unchanged."""
    toks = tuple(tokens)
    start, end = mention
    if not (0 <= start < end <= len(toks)):
        raise ValueError(f"mention span {mention} out of range for {len(toks)} tokens")
    out: dict[Template, float] = {}
    for concept, prob in concepts.items():
        if prob <= 0:
            continue
        slot = (PLACEHOLDER_MARK + concept,)
        out[Template(toks[:start] + slot + toks[end:], concept)] = prob
    return out
