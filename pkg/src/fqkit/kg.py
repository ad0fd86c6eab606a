"""Knowledge-graph triple store with surface-form entity linking.

The graph is loaded from two TSV files. The triples file has one
``head<TAB>relation<TAB>tail`` edge per line; blank lines and lines whose
first non-space character is ``#`` are skipped. The optional surface file
maps ``entity_id<TAB>canonical_name<TAB>alias...`` and both declares the
names used for linking and promotes tail-only ids to entity status.

Node taxonomy: every triple head is an entity. A tail is an entity when it
is itself a known entity id (it heads triples, or a surface row declares
it); otherwise it is stored as a literal node. Literals participate in
embedding and link-prediction candidate pools but are excluded from the
entity count used to normalize centrality.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from .text import tokenize, tokenize_with_spans

logger = logging.getLogger(__name__)


class KnowledgeGraphError(ValueError):
    """Raised for malformed graph files or inconsistent declarations."""


@dataclass(frozen=True)
class Triple:
    head: str
    relation: str
    tail: str


@dataclass(frozen=True)
class Mention:
    """One linked span: character offsets into the case-folded text."""

    entity_id: str
    alias: str
    start: int
    end: int


def read_triples(path: str | Path) -> list[Triple]:
    """Parse a triples TSV file, preserving file order and dropping exact
    duplicate edges."""
    triples: list[Triple] = []
    seen: set[tuple[str, str, str]] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise KnowledgeGraphError(
                    f"{path}:{lineno}: expected 3 tab-separated fields, got {len(fields)}"
                )
            head, relation, tail = (f.strip() for f in fields)
            if not head or not relation or not tail:
                raise KnowledgeGraphError(f"{path}:{lineno}: empty field in triple")
            key = (head, relation, tail)
            if key in seen:
                continue
            seen.add(key)
            triples.append(Triple(head, relation, tail))
    logger.debug("read %d distinct triples from %s", len(triples), path)
    return triples


def read_surface(path: str | Path) -> dict[str, tuple[str, list[str]]]:
    """Parse a surface-form TSV file into {entity_id: (canonical, aliases)}.

    Repeated rows for one entity merge their alias lists; a repeated row
    that disagrees on the canonical name is an error.
    """
    surface: dict[str, tuple[str, list[str]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) < 2:
                raise KnowledgeGraphError(
                    f"{path}:{lineno}: expected at least entity_id and canonical name"
                )
            entity_id = fields[0].strip()
            canonical = fields[1].strip()
            aliases = [a.strip() for a in fields[2:] if a.strip()]
            if not entity_id or not canonical:
                raise KnowledgeGraphError(f"{path}:{lineno}: empty entity id or name")
            if entity_id in surface:
                prev_canonical, prev_aliases = surface[entity_id]
                if prev_canonical != canonical:
                    raise KnowledgeGraphError(
                        f"{path}:{lineno}: conflicting canonical names for "
                        f"{entity_id!r}: {prev_canonical!r} vs {canonical!r}"
                    )
                merged = prev_aliases + [a for a in aliases if a not in prev_aliases]
                surface[entity_id] = (canonical, merged)
            else:
                surface[entity_id] = (canonical, aliases)
    return surface


class KnowledgeGraph:
    """Immutable triple store with adjacency, centrality, and linking."""

    def __init__(
        self,
        triples: list[Triple],
        surface: dict[str, tuple[str, list[str]]] | None = None,
    ):
        surface = surface or {}
        # Dedupe here too so out-degrees count distinct (relation, tail)
        # pairs even when the list did not come through read_triples.
        seen: set[tuple[str, str, str]] = set()
        deduped: list[Triple] = []
        for t in triples:
            key = (t.head, t.relation, t.tail)
            if key not in seen:
                seen.add(key)
                deduped.append(t)
        self._triples = tuple(deduped)

        heads = {t.head for t in self._triples}
        tails = {t.tail for t in self._triples}
        graph_nodes = heads | tails
        for entity_id in surface:
            if entity_id not in graph_nodes:
                raise KnowledgeGraphError(
                    f"surface form declared for {entity_id!r}, which appears "
                    "in no triple"
                )
        entity_ids = heads | set(surface)

        self._entities = tuple(sorted(entity_ids))
        self._literals = tuple(sorted(tails - entity_ids))
        self._nodes = tuple(sorted(graph_nodes))
        self._relations = tuple(sorted({t.relation for t in self._triples}))

        self._surface = {
            e: (canonical, tuple(aliases)) for e, (canonical, aliases) in surface.items()
        }

        self._out_degree: dict[str, int] = {e: 0 for e in self._entities}
        self._adjacency: dict[str, dict[str, list[str]]] = {}
        for t in self._triples:
            self._out_degree[t.head] = self._out_degree.get(t.head, 0) + 1
            self._adjacency.setdefault(t.head, {}).setdefault(t.relation, []).append(
                t.tail
            )

        self._alias_index = self._build_alias_index()

    @classmethod
    def from_files(
        cls, triples_path: str | Path, surface_path: str | Path | None = None
    ) -> "KnowledgeGraph":
        triples = read_triples(triples_path)
        surface = read_surface(surface_path) if surface_path else None
        return cls(triples, surface)

    def _build_alias_index(self) -> dict[tuple[str, ...], list[str]]:
        index: dict[tuple[str, ...], list[str]] = {}
        for entity_id in self._entities:
            canonical, aliases = self._surface.get(entity_id, (entity_id, ()))
            for name in (canonical, *aliases):
                toks = tuple(tokenize(name))
                if not toks:
                    continue
                bucket = index.setdefault(toks, [])
                if entity_id not in bucket:
                    bucket.append(entity_id)
        for bucket in index.values():
            bucket.sort()
        return index

    # -- basic accessors ---------------------------------------------------

    @property
    def triples(self) -> tuple[Triple, ...]:
        return self._triples

    @property
    def entities(self) -> tuple[str, ...]:
        return self._entities

    @property
    def literals(self) -> tuple[str, ...]:
        return self._literals

    @property
    def nodes(self) -> tuple[str, ...]:
        """All embeddable nodes (entities and literals), sorted."""
        return self._nodes

    @property
    def relations(self) -> tuple[str, ...]:
        return self._relations

    def is_entity(self, node_id: str) -> bool:
        return node_id in self._out_degree

    def canonical_name(self, entity_id: str) -> str:
        self._require_entity(entity_id)
        canonical, _ = self._surface.get(entity_id, (entity_id, ()))
        return canonical

    def aliases(self, entity_id: str) -> tuple[str, ...]:
        self._require_entity(entity_id)
        canonical, aliases = self._surface.get(entity_id, (entity_id, ()))
        return (canonical, *aliases)

    def _require_entity(self, entity_id: str) -> None:
        if entity_id not in self._out_degree:
            raise KeyError(f"unknown entity: {entity_id!r}")

    # -- adjacency ---------------------------------------------------------

    def has_edge(self, head: str, relation: str) -> bool:
        return relation in self._adjacency.get(head, {})

    def objects(self, head: str, relation: str) -> tuple[str, ...]:
        return tuple(self._adjacency.get(head, {}).get(relation, ()))

    def relations_of(self, head: str) -> tuple[str, ...]:
        return tuple(sorted(self._adjacency.get(head, {})))

    def out_degree(self, entity_id: str) -> int:
        self._require_entity(entity_id)
        return self._out_degree[entity_id]

    def centrality(self, entity_id: str) -> float:
        """Out-degree centrality, normalized by (number of entities - 1).

        Literals neither count toward the denominator nor carry a
        centrality of their own. The value is clamped to [0, 1] because
        edges into literals can push the raw ratio above 1.
        """
        degree = self.out_degree(entity_id)
        denom = len(self._entities) - 1
        if denom <= 0:
            raise KnowledgeGraphError(
                "centrality is undefined on a graph with fewer than 2 entities"
            )
        return min(1.0, max(0.0, degree / denom))

    # -- linking -----------------------------------------------------------

    def link(self, text: str) -> list[Mention]:
        """Find entity mentions in free text.

        Matching is case-folded and token-boundary aligned. Overlaps are
        resolved greedily: longest alias first, then earliest span start,
        then smallest entity id. Returned mentions are ordered by span
        start and never overlap.
        """
        toks = tokenize_with_spans(text)
        if not toks:
            return []
        token_strings = [t[0] for t in toks]
        max_len = max(len(k) for k in self._alias_index) if self._alias_index else 0

        candidates: list[tuple[int, int, str]] = []
        for i in range(len(toks)):
            for n in range(1, min(max_len, len(toks) - i) + 1):
                key = tuple(token_strings[i : i + n])
                for entity_id in self._alias_index.get(key, ()):
                    candidates.append((n, i, entity_id))

        candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
        taken = [False] * len(toks)
        picked: list[tuple[int, int, str]] = []
        for n, i, entity_id in candidates:
            if any(taken[i : i + n]):
                continue
            for j in range(i, i + n):
                taken[j] = True
            picked.append((n, i, entity_id))

        picked.sort(key=lambda c: c[1])
        folded = text.casefold()
        mentions = []
        for n, i, entity_id in picked:
            start = toks[i][1]
            end = toks[i + n - 1][2]
            mentions.append(Mention(entity_id, folded[start:end], start, end))
        return mentions

    def link_entity(self, text: str) -> Mention | None:
        """The single best mention in the text, or None when nothing links.

        Best means longest alias in tokens, then earliest span start, then
        smallest entity id: the head of the ordering :meth:`link` uses.
        """
        mentions = self.link(text)
        if not mentions:
            return None
        best = min(
            mentions,
            key=lambda m: (-len(tokenize(m.alias)), m.start, m.entity_id),
        )
        return best

    def link_ids(self, text: str) -> list[str]:
        """Entity ids mentioned in the text, in span order, deduplicated."""
        seen: set[str] = set()
        out: list[str] = []
        for m in self.link(text):
            if m.entity_id not in seen:
                seen.add(m.entity_id)
                out.append(m.entity_id)
        return out

    # -- summary -----------------------------------------------------------

    def stats(self) -> dict:
        """Deterministic summary used by the command-line ``kg stats``."""
        degrees = [self._out_degree[e] for e in self._entities]
        avg_degree = sum(degrees) / len(degrees) if degrees else 0.0
        histogram: dict[int, int] = {}
        for d in degrees:
            histogram[d] = histogram.get(d, 0) + 1
        if len(self._entities) >= 2:
            best = max(self._entities, key=lambda e: (self.centrality(e), e))
            best_centrality = self.centrality(best)
        else:
            best, best_centrality = None, None
        return {
            "n_triples": len(self._triples),
            "n_entities": len(self._entities),
            "n_literals": len(self._literals),
            "n_relations": len(self._relations),
            "avg_out_degree": avg_degree,
            "out_degree_histogram": [[d, histogram[d]] for d in sorted(histogram)],
            "max_centrality_entity": best,
            "max_centrality": best_centrality,
        }
