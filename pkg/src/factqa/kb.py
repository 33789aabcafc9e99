"""In-memory triple store with path queries and bounded predicate expansion.

Nodes live in a single id space; a node counts as an entity iff it occurs
as a subject. The store is immutable after construction and safe for
concurrent readers.
"""

from __future__ import annotations

import io
from pathlib import Path
from typing import IO, Iterable, NamedTuple

PredicatePath = tuple[str, ...]

NAME_PREDICATE = "name"
DEFAULT_PATH_LIMIT = 3


class Triple(NamedTuple):
    subject: str
    predicate: str
    object: str


class SpoPath(NamedTuple):
    """A subject connected to an object through an ordered predicate path."""

    subject: str
    path: PredicatePath
    object: str


class KbParseError(ValueError):
    """A malformed line in a triple stream."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


def parse_triples(lines: Iterable[str]) -> list[Triple]:
    """Parse tab-separated subject/predicate/object records.

    Lines starting with ``#`` and blank lines are skipped. Every other line
    must contain exactly three non-empty tab-separated fields.
    """
    triples = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise KbParseError(lineno, f"expected 3 tab-separated fields, got {len(fields)}")
        if any(not f for f in fields):
            raise KbParseError(lineno, "empty field")
        triples.append(Triple(*fields))
    return triples


class KnowledgeBase:
    """Immutable set of triples with forward adjacency and a pair index.

    Adjacency maps subject -> predicate -> objects. The pair index maps
    (subject, object) -> predicates. Node ids are interned to dense ints
    in sorted order so downstream indexes are reproducible.
    """

    def __init__(self, triples: Iterable[Triple]):
        self.triples: tuple[Triple, ...] = tuple(sorted(set(triples)))
        adj: dict[str, dict[str, list[str]]] = {}
        pairs: dict[tuple[str, str], list[str]] = {}
        nodes: set[str] = set()
        for s, p, o in self.triples:
            adj.setdefault(s, {}).setdefault(p, []).append(o)
            pairs.setdefault((s, o), []).append(p)
            nodes.add(s)
            nodes.add(o)
        self._adj: dict[str, dict[str, tuple[str, ...]]] = {
            s: {p: tuple(objs) for p, objs in by_pred.items()} for s, by_pred in adj.items()
        }
        self._pairs: dict[tuple[str, str], tuple[str, ...]] = {
            k: tuple(v) for k, v in pairs.items()
        }
        self.entities: frozenset[str] = frozenset(self._adj)
        self.nodes: frozenset[str] = frozenset(nodes)
        self._node_list: tuple[str, ...] = tuple(sorted(nodes))
        self._node_ids: dict[str, int] = {n: i for i, n in enumerate(self._node_list)}

    def __len__(self) -> int:
        return len(self.triples)

    def is_entity(self, node: str) -> bool:
        return node in self.entities

    def node_id(self, node: str) -> int:
        return self._node_ids[node]

    def node_name(self, node_id: int) -> str:
        return self._node_list[node_id]

    def has_node_id(self, node_id: int) -> bool:
        return 0 <= node_id < len(self._node_list)

    def objects(self, subject: str, predicate: str) -> tuple[str, ...]:
        return self._adj.get(subject, {}).get(predicate, ())

    def predicates(self, subject: str) -> tuple[str, ...]:
        return tuple(self._adj.get(subject, {}))

    def direct_predicates(self, subject: str, obj: str) -> tuple[str, ...]:
        return self._pairs.get((subject, obj), ())

    def value_distribution(self, entity: str, path: PredicatePath) -> dict[str, float]:
        """Uniform distribution over distinct nodes reachable via ``path``.

        An unknown entity or an unrealizable path yields an empty map.
        """
        if not path:
            raise ValueError("empty predicate path")
        if entity not in self.nodes:
            return {}
        frontier: set[str] = {entity}
        for pred in path:
            nxt: set[str] = set()
            for node in frontier:
                nxt.update(self._adj.get(node, {}).get(pred, ()))
            frontier = nxt
            if not frontier:
                return {}
        share = 1.0 / len(frontier)
        return {v: share for v in sorted(frontier)}

    def predicates_between(
        self,
        entity: str,
        value: str,
        k_max: int,
        *,
        name_restriction: bool = False,
        name_symbol: str = NAME_PREDICATE,
    ) -> list[PredicatePath]:
        """All predicate paths of length <= k_max leading from entity to value.

        Paths are returned shortest first, then lexicographically. With the
        name restriction on, paths of length >= 2 must end with the
        configured name predicate.
        """
        if k_max < 1:
            return []
        found: set[PredicatePath] = set()

        def walk(node: str, prefix: PredicatePath) -> None:
            if len(prefix) == k_max:
                return
            for pred, objs in self._adj.get(node, {}).items():
                path = prefix + (pred,)
                if value in objs:
                    found.add(path)
                for obj in objs:
                    walk(obj, path)

        walk(entity, ())
        if name_restriction:
            found = {p for p in found if len(p) < 2 or p[-1] == name_symbol}
        return sorted(found, key=lambda p: (len(p), p))


def load_kb(source: str | Path | IO[str] | Iterable[str]) -> KnowledgeBase:
    """Load a knowledge base from a path, file object, or line iterable."""
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fp:
            return KnowledgeBase(parse_triples(fp))
    return KnowledgeBase(parse_triples(source))


def expand_predicates(
    kb: KnowledgeBase,
    seeds: Iterable[str],
    k: int,
    *,
    name_restriction: bool = True,
    name_symbol: str = NAME_PREDICATE,
) -> set[SpoPath]:
    """All (subject, path, object) reachable from the seeds within k steps.

    Implemented as k sequential scans of the triple stream, each joined
    against the previous round's endpoints; no reverse adjacency is built.
    Paths may revisit nodes; identical results deduplicate. With the name
    restriction on, paths of length >= 2 must end with the name predicate.
    """
    found: set[SpoPath] = set()
    if k < 1:
        return found
    seed_set = {s for s in seeds if s in kb.entities}
    if not seed_set:
        return found
    # frontier: endpoint -> set of (origin, path so far) arriving there
    frontier: dict[str, set[tuple[str, PredicatePath]]] = {s: {(s, ())} for s in seed_set}
    for _ in range(k):
        nxt: dict[str, set[tuple[str, PredicatePath]]] = {}
        for s, p, o in kb.triples:
            arrivals = frontier.get(s)
            if not arrivals:
                continue
            bucket = nxt.setdefault(o, set())
            for origin, path in arrivals:
                bucket.add((origin, path + (p,)))
        for endpoint, arrivals in nxt.items():
            for origin, path in arrivals:
                found.add(SpoPath(origin, path, endpoint))
        if not nxt:
            break
        frontier = nxt
    if name_restriction:
        found = {sp for sp in found if len(sp.path) < 2 or sp.path[-1] == name_symbol}
    return found


def valid_k(paths: Iterable[SpoPath], reference: set[tuple[str, str]], k: int) -> int:
    """Count length-k paths whose (subject, object) pair is in the reference set."""
    return sum(1 for sp in paths if len(sp.path) == k and (sp.subject, sp.object) in reference)


def expansion_map(paths: Iterable[SpoPath]) -> dict[tuple[str, str], list[PredicatePath]]:
    """Group expansion output by (subject, object) for constant-time path lookup."""
    grouped: dict[tuple[str, str], list[PredicatePath]] = {}
    for sp in paths:
        grouped.setdefault((sp.subject, sp.object), []).append(sp.path)
    for key in grouped:
        grouped[key].sort(key=lambda p: (len(p), p))
    return grouped


def write_expansion(paths: Iterable[SpoPath], fp: IO[str]) -> int:
    """Write expansion rows as ``subject<TAB>p1|p2|...<TAB>object``, sorted."""
    rows = sorted(paths)
    for sp in rows:
        fp.write(f"{sp.subject}\t{'|'.join(sp.path)}\t{sp.object}\n")
    return len(rows)


def read_expansion(source: str | Path | IO[str]) -> set[SpoPath]:
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fp:
            return read_expansion(fp)
    out: set[SpoPath] = set()
    for lineno, raw in enumerate(source, 1):
        line = raw.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise KbParseError(lineno, "expected 3 tab-separated fields")
        out.add(SpoPath(fields[0], tuple(fields[1].split("|")), fields[2]))
    return out


def dumps_expansion(paths: Iterable[SpoPath]) -> str:
    buf = io.StringIO()
    write_expansion(paths, buf)
    return buf.getvalue()
