"""Offline estimation of the predicate-given-template table.

The training unit is a (question, entity, value) observation with a corpus
mass. For each observation the latent assignment z = (template, path) has a
fixed factor f(x, z) = P(q) P(e|q) P(t|e,q) P(v|e,p) computed once up
front; expectation-maximization then alternates responsibilities and row
renormalization until the table stops moving. A counting construction over
the same factors serves as an independent cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import fsum, log
from pathlib import Path
from typing import IO, Iterable

from .concepts import ConceptGraph, derive_templates
from .corpus import CorpusStats, EntityValueExtractor, Observation, QaPair, Tokens
from .kb import PredicatePath

# Latent assignment: (template text, predicate path).
Assignment = tuple[str, PredicatePath]


@dataclass(frozen=True)
class TrainingItem:
    """One observation plus the per-observation factors feeding f(x, z)."""

    question: Tokens
    entity: str
    value: str
    weight: float
    p_q: float
    p_e: float
    template_probs: dict[str, float]
    value_probs: dict[PredicatePath, float]

    def factor(self, template: str, path: PredicatePath) -> float:
        return (
            self.p_q
            * self.p_e
            * self.template_probs.get(template, 0.0)
            * self.value_probs.get(path, 0.0)
        )

    def candidates(self) -> list[tuple[Assignment, float]]:
        """All assignments with positive factor, deterministic order."""
        out = []
        for template in sorted(self.template_probs):
            pt = self.template_probs[template]
            if pt <= 0:
                continue
            for path in sorted(self.value_probs):
                pv = self.value_probs[path]
                if pv <= 0:
                    continue
                out.append(((template, path), self.p_q * self.p_e * pt * pv))
        return out

    @property
    def observation(self) -> Observation:
        return Observation(self.question, self.entity, self.value, self.weight)


def factor_f(item: TrainingItem, assignment: Assignment) -> float:
    """f(x, z): zero whenever any factor is zero."""
    template, path = assignment
    return item.factor(template, path)


class TrainingSet:
    """Observations with precomputed factors; the input to learning."""

    def __init__(self, items: Iterable[TrainingItem]):
        self.items: list[TrainingItem] = list(items)

    def __len__(self) -> int:
        return len(self.items)

    @property
    def observations(self) -> list[Observation]:
        return [item.observation for item in self.items]

    @classmethod
    def build(
        cls,
        corpus: Iterable[QaPair],
        extractor: EntityValueExtractor,
        stats: CorpusStats,
        concepts: ConceptGraph,
        refine: bool = True,
    ) -> "TrainingSet":
        items: list[TrainingItem] = []
        kb = extractor.kb
        for pair in corpus:
            extracted = sorted(extractor.extract(pair, refine=refine))
            if not extracted:
                continue
            mentions = dict()
            for span, entity in extractor.mention_entities(pair.question):
                mentions.setdefault(entity, span)
            distinct_entities = {e for e, _ in extracted}
            p_e = 1.0 / len(distinct_entities)
            p_q = stats.p_q(pair.question)
            mass = (1.0 / len(extracted)) * stats.p_a(pair.question, pair.answer) * p_q
            for entity, value in extracted:
                span = mentions[entity]
                concept_dist = concepts.question_concepts(pair.question, entity, span)
                template_probs = {
                    t.text: prob
                    for t, prob in derive_templates(pair.question, span, concept_dist).items()
                }
                value_probs = {
                    path: kb.value_distribution(entity, path).get(value, 0.0)
                    for path in extractor.connecting_paths(entity, value)
                }
                items.append(
                    TrainingItem(
                        pair.question, entity, value, mass, p_q, p_e,
                        template_probs, value_probs,
                    )
                )
        return cls(items)


class PredicateModel:
    """Sparse conditional table P(path | template), rows summing to one."""

    def __init__(self, rows: dict[str, dict[PredicatePath, float]] | None = None):
        self._rows: dict[str, dict[PredicatePath, float]] = {
            t: dict(row) for t, row in (rows or {}).items()
        }

    def __len__(self) -> int:
        return len(self._rows)

    def __contains__(self, template: str) -> bool:
        return template in self._rows

    def templates(self) -> list[str]:
        return sorted(self._rows)

    def row(self, template: str) -> dict[PredicatePath, float]:
        return dict(self._rows.get(template, {}))

    def prob(self, template: str, path: PredicatePath) -> float:
        return self._rows.get(template, {}).get(path, 0.0)

    def top_path(self, template: str) -> tuple[PredicatePath, float] | None:
        """Highest-probability path for a template; ties break on the
        lexicographically smaller path."""
        row = self._rows.get(template)
        if not row:
            return None
        best = sorted(row.items(), key=lambda kv: (-kv[1], kv[0]))[0]
        return best

    def items(self) -> list[tuple[str, PredicatePath, float]]:
        out = []
        for template in sorted(self._rows):
            row = self._rows[template]
            for path, prob in sorted(row.items(), key=lambda kv: (-kv[1], kv[0])):
                out.append((template, path, prob))
        return out

    def save(self, target: str | Path | IO[str]) -> None:
        """TSV ``template<TAB>p1|p2|...<TAB>probability``, sorted by
        template then probability descending."""
        if isinstance(target, (str, Path)):
            with open(target, "w", encoding="utf-8") as fp:
                self.save(fp)
            return
        for template, path, prob in self.items():
            target.write(f"{template}\t{'|'.join(path)}\t{prob!r}\n")

    @classmethod
    def load(cls, source: str | Path | IO[str]) -> "PredicateModel":
        if isinstance(source, (str, Path)):
            with open(source, encoding="utf-8") as fp:
                return cls.load(fp)
        rows: dict[str, dict[PredicatePath, float]] = {}
        for lineno, raw in enumerate(source, 1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ValueError(f"line {lineno}: expected 3 tab-separated fields")
            template, path_text, prob = fields
            rows.setdefault(template, {})[tuple(path_text.split("|"))] = float(prob)
        return cls(rows)


@dataclass
class Posterior:
    """Per-observation responsibilities; observations with no admissible
    assignment are dropped and counted."""

    responsibilities: list[dict[Assignment, float] | None]
    dropped: list[int] = field(default_factory=list)


def init_theta(training: TrainingSet) -> PredicateModel:
    """Uniform rows over every (template, path) supported by some observation."""
    support: dict[str, set[PredicatePath]] = {}
    for item in training.items:
        for (template, path), _ in item.candidates():
            support.setdefault(template, set()).add(path)
    rows = {
        template: {path: 1.0 / len(paths) for path in paths}
        for template, paths in support.items()
    }
    return PredicateModel(rows)


def e_step(training: TrainingSet, model: PredicateModel) -> Posterior:
    """Responsibilities proportional to f(x, z) * theta, normalized per
    observation."""
    responsibilities: list[dict[Assignment, float] | None] = []
    dropped: list[int] = []
    for i, item in enumerate(training.items):
        scores: dict[Assignment, float] = {}
        for assignment, f_value in item.candidates():
            score = f_value * model.prob(*assignment)
            if score > 0:
                scores[assignment] = score
        total = fsum(scores.values())
        if total <= 0:
            responsibilities.append(None)
            dropped.append(i)
            continue
        responsibilities.append({z: s / total for z, s in scores.items()})
    return Posterior(responsibilities, dropped)


def m_step(training: TrainingSet, posterior: Posterior) -> PredicateModel:
    """Row-renormalized responsibility mass, weighted by observation mass.

    Templates left with zero total mass are removed.
    """
    acc: dict[str, dict[PredicatePath, list[float]]] = {}
    for item, resp in zip(training.items, posterior.responsibilities):
        if resp is None:
            continue
        for (template, path), r in resp.items():
            acc.setdefault(template, {}).setdefault(path, []).append(item.weight * r)
    rows: dict[str, dict[PredicatePath, float]] = {}
    for template, by_path in acc.items():
        sums = {path: fsum(terms) for path, terms in by_path.items()}
        total = fsum(sums.values())
        if total <= 0:
            continue
        rows[template] = {path: s / total for path, s in sums.items()}
    return PredicateModel(rows)


def log_likelihood(training: TrainingSet, model: PredicateModel) -> float:
    """Weighted sum of log marginal probabilities.

    Observations whose every assignment scores zero under the model are
    skipped, matching the set the E-step drops.
    """
    terms = []
    for item in training.items:
        total = fsum(f * model.prob(*z) for z, f in item.candidates())
        if total > 0:
            terms.append(item.weight * log(total))
    return fsum(terms)


@dataclass
class LearnResult:
    model: PredicateModel
    iterations: int
    final_log_likelihood: float
    dropped_observations: int
    ll_history: list[float] = field(default_factory=list)


def learn(
    training: TrainingSet, max_iters: int = 100, epsilon: float = 1e-6
) -> LearnResult:
    """Alternate E and M steps from the uniform initialization until the
    max-abs parameter change falls below epsilon or max_iters is hit."""
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    model = init_theta(training)
    if not len(model):
        return LearnResult(model, 0, 0.0, len(training.items))
    history = [log_likelihood(training, model)]
    dropped = 0
    iterations = 0
    for _ in range(max_iters):
        posterior = e_step(training, model)
        dropped = len(posterior.dropped)
        new_model = m_step(training, posterior)
        iterations += 1
        delta = _max_abs_change(model, new_model)
        model = new_model
        history.append(log_likelihood(training, model))
        if delta < epsilon:
            break
    return LearnResult(model, iterations, history[-1], dropped, history)


def _max_abs_change(old: PredicateModel, new: PredicateModel) -> float:
    delta = 0.0
    templates = set(old.templates()) | set(new.templates())
    for template in templates:
        old_row = old.row(template)
        new_row = new.row(template)
        for path in set(old_row) | set(new_row):
            delta = max(delta, abs(old_row.get(path, 0.0) - new_row.get(path, 0.0)))
    return delta


def counting_baseline(training: TrainingSet) -> PredicateModel:
    """Counting construction: rows proportional to
    sum_i weight_i * P(t|q_i,e_i) * P(p|e_i,v_i).

    P(p|e,v) normalizes P(v|e,p) over the paths connecting the pair.
    Independent of the EM loop; used as a sanity oracle for it.
    """
    acc: dict[str, dict[PredicatePath, list[float]]] = {}
    for item in training.items:
        connecting = {p: v for p, v in item.value_probs.items() if v > 0}
        if not connecting:
            continue
        norm = fsum(connecting.values())
        for template, pt in item.template_probs.items():
            if pt <= 0:
                continue
            for path, pv in connecting.items():
                acc.setdefault(template, {}).setdefault(path, []).append(
                    item.weight * pt * (pv / norm)
                )
    rows: dict[str, dict[PredicatePath, float]] = {}
    for template, by_path in acc.items():
        sums = {path: fsum(terms) for path, terms in by_path.items()}
        total = fsum(sums.values())
        if total <= 0:
            continue
        rows[template] = {path: s / total for path, s in sums.items()}
    return PredicateModel(rows)
