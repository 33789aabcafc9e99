"""Shared fixtures: the toy graph, its artifacts, and heavy shared builds."""

from __future__ import annotations

import random
from pathlib import Path

import pytest

from factqa.concepts import ConceptGraph
from factqa.corpus import EntityValueExtractor, corpus_stats, load_corpus, load_predicate_categories
from factqa.decompose import Decomposer, PatternIndex
from factqa.engine import AnswerEngine
from factqa.hasharray import StaticHashArray
from factqa.kb import load_kb
from factqa.learn import PredicateModel, TrainingSet
from factqa.pipeline import build_entity_index, load_entity_dictionary

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def toy_kb():
    return load_kb(DATA / "toy_kb.tsv")


@pytest.fixture(scope="session")
def toy_index(toy_kb):
    index, surfaces = build_entity_index(toy_kb, load_entity_dictionary(DATA / "entities.tsv"))
    return index, surfaces


@pytest.fixture(scope="session")
def toy_concepts():
    return ConceptGraph.load(
        DATA / "isa.tsv", DATA / "context_weights.tsv", DATA / "fixture_overrides.tsv"
    )


@pytest.fixture(scope="session")
def toy_corpus():
    return load_corpus(DATA / "corpus.jsonl")


@pytest.fixture(scope="session")
def toy_stats(toy_corpus):
    return corpus_stats(toy_corpus)


@pytest.fixture(scope="session")
def toy_extractor(toy_kb, toy_index):
    return EntityValueExtractor(
        toy_kb,
        toy_index[0],
        k=3,
        name_restriction=True,
        predicate_categories=load_predicate_categories(DATA / "predicate_categories.tsv"),
    )


@pytest.fixture(scope="session")
def toy_training(toy_corpus, toy_extractor, toy_stats, toy_concepts):
    return TrainingSet.build(toy_corpus, toy_extractor, toy_stats, toy_concepts, refine=True)


@pytest.fixture(scope="session")
def fixture_model():
    return PredicateModel.load(DATA / "model_fixture.tsv")


@pytest.fixture(scope="session")
def toy_engine(toy_kb, toy_index, toy_concepts, fixture_model):
    index, surfaces = toy_index
    return AnswerEngine(toy_kb, index, toy_concepts, fixture_model, surfaces)


@pytest.fixture(scope="session")
def toy_decomposer(toy_kb, toy_index, toy_concepts, fixture_model, toy_corpus):
    index, _ = toy_index
    patterns = PatternIndex.build(toy_corpus, toy_kb, index)
    return Decomposer(toy_kb, index, toy_concepts, fixture_model, patterns)


def random_keys(rng: random.Random, count: int, prefix: str = "") -> list[str]:
    """Distinct random hex keys of 8..40 characters (plus the prefix)."""
    seen: set[str] = set()
    out: list[str] = []
    while len(out) < count:
        n = rng.randrange(8, 41)
        key = prefix + format(rng.getrandbits(n * 4), f"0{n}x")
        if key not in seen:
            seen.add(key)
            out.append(key)
    return out


@pytest.fixture(scope="session")
def million_key_index():
    """One shared million-entry index build; reused by the unit suite and
    the acceptance suite since it is by far the most expensive fixture."""
    rng = random.Random(0xA11CE)
    keys = random_keys(rng, 1_000_000, prefix="in:")
    index = StaticHashArray.build((key, i) for i, key in enumerate(keys))
    return keys, index
