"""Knowledge-graph store: entity nodes, relation edges, provenance.

Persistence is append-only JSONL (nodes.jsonl + edges.jsonl in a store
directory) with a rebuildable in-memory adjacency index. The store is
single-writer; served snapshots are read-only.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from typing import Sequence

from .errors import NotFound, StoreClosed
from .pipeline import ExtractedTriple, Provenance

_WS = re.compile(r"\s+")


def canonicalize(surface: str) -> str:
    """Case-fold, collapse whitespace, trim."""
    return _WS.sub(" ", surface.casefold()).strip()


@dataclass
class EntityNode:
    id: int
    canonical: str
    aliases: set[str] = field(default_factory=set)
    mention_count: int = 0
    paper_titles: set[str] = field(default_factory=set)

    def to_json(self) -> dict:
        return {"id": self.id, "canonical": self.canonical,
                "aliases": sorted(self.aliases), "mention_count": self.mention_count,
                "paper_titles": sorted(self.paper_titles)}


@dataclass
class RelationEdge:
    id: int
    head: int
    relation: str
    tail: int
    score: float
    provenance: list[Provenance] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"id": self.id, "head": self.head, "relation": self.relation,
                "tail": self.tail, "score": self.score,
                "provenance": [p.to_json() for p in self.provenance]}


class GraphStore:
    def __init__(self):
        self.nodes: dict[int, EntityNode] = {}
        self.edges: dict[int, RelationEdge] = {}
        self._by_canonical: dict[str, int] = {}
        self._edge_keys: dict[tuple, int] = {}          # (h, rel, t) -> edge id
        self._adjacency: dict[int, list[int]] = {}      # node id -> edge ids
        self._next_node = 0
        self._next_edge = 0
        self.closed = False

    # -- writes ------------------------------------------------------------

    def _check_open(self):
        if self.closed:
            raise StoreClosed("store is closed for writes")

    def _node_for(self, surface: str) -> EntityNode:
        canonical = canonicalize(surface)
        node_id = self._by_canonical.get(canonical)
        if node_id is None:
            node_id = self._next_node
            self._next_node += 1
            self.nodes[node_id] = EntityNode(id=node_id, canonical=canonical)
            self._by_canonical[canonical] = node_id
            self._adjacency[node_id] = []
        node = self.nodes[node_id]
        node.aliases.add(surface)
        node.mention_count += 1
        return node

    def upsert_triple(self, triple: ExtractedTriple) -> tuple[int, int, int]:
        """Merge a triple into the graph; returns (head id, tail id, edge id).

        Entities merge on exact canonical match; a duplicate
        (head, relation, tail, sentence) merges provenance instead of
        adding an edge.
        """
        self._check_open()
        head = self._node_for(triple.head)
        tail = self._node_for(triple.tail)
        prov = triple.provenance
        if prov.title:
            head.paper_titles.add(prov.title)
            tail.paper_titles.add(prov.title)

        key = (head.id, triple.relation, tail.id)
        sentence_key = (prov.abstract_id, prov.sentence_index)
        edge_id = self._edge_keys.get(key)
        if edge_id is not None:
            edge = self.edges[edge_id]
            known = {(p.abstract_id, p.sentence_index) for p in edge.provenance}
            if sentence_key not in known:
                edge.provenance.append(prov)
                edge.score = max(edge.score, triple.score)
        else:
            edge_id = self._next_edge
            self._next_edge += 1
            edge = RelationEdge(id=edge_id, head=head.id, relation=triple.relation,
                                tail=tail.id, score=triple.score, provenance=[prov])
            self.edges[edge_id] = edge
            self._edge_keys[key] = edge_id
            self._adjacency[head.id].append(edge_id)
            if tail.id != head.id:
                self._adjacency[tail.id].append(edge_id)
        return head.id, tail.id, edge_id

    def load_triples(self, triples: Sequence[ExtractedTriple]) -> None:
        for t in triples:
            self.upsert_triple(t)

    # -- reads -------------------------------------------------------------

    def search(self, query: str, limit: int = 20) -> list[EntityNode]:
        """Ranked nodes: exact canonical match, then prefix, then substring;
        within a tier mention_count desc, canonical asc."""
        q = canonicalize(query)
        if not q:
            return []
        tiers: tuple[list[EntityNode], list[EntityNode], list[EntityNode]] = ([], [], [])
        for node in self.nodes.values():
            if node.canonical == q:
                tiers[0].append(node)
            elif node.canonical.startswith(q):
                tiers[1].append(node)
            elif q in node.canonical:
                tiers[2].append(node)
        ranked = []
        for tier in tiers:
            ranked.extend(sorted(tier, key=lambda n: (-n.mention_count, n.canonical)))
        return ranked[:limit]

    def _require(self, node_id: int) -> EntityNode:
        node = self.nodes.get(node_id)
        if node is None:
            raise NotFound(f"no node with id {node_id}")
        return node

    def neighbors(self, node_id: int, limit: int = 25,
                  relation_filter: str | None = None) -> tuple[list[EntityNode], list[RelationEdge]]:
        """Incident edges in both directions with their endpoint nodes,
        ordered score desc then edge id asc, capped at limit."""
        node = self._require(node_id)
        edges = [self.edges[e] for e in self._adjacency[node_id]]
        if relation_filter is not None:
            edges = [e for e in edges if e.relation == relation_filter]
        edges.sort(key=lambda e: (-e.score, e.id))
        edges = edges[:limit]
        node_ids = {node_id}
        for e in edges:
            node_ids.add(e.head)
            node_ids.add(e.tail)
        nodes = [self.nodes[i] for i in sorted(node_ids)]
        return nodes, edges

    def degree(self, node_id: int) -> int:
        self._require(node_id)
        return len(self._adjacency[node_id])

    def node_details(self, node_id: int) -> dict:
        node = self._require(node_id)
        detail = node.to_json()
        detail["degree"] = self.degree(node_id)
        return detail

    def stats(self) -> dict:
        per_relation: dict[str, int] = {}
        for e in self.edges.values():
            per_relation[e.relation] = per_relation.get(e.relation, 0) + 1
        return {"nodes": len(self.nodes), "edges": len(self.edges),
                "per_relation": dict(sorted(per_relation.items()))}

    # -- persistence -------------------------------------------------------

    def save(self, directory) -> None:
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, "nodes.jsonl"), "w", encoding="utf-8") as fh:
            for node_id in sorted(self.nodes):
                fh.write(json.dumps(self.nodes[node_id].to_json(),
                                    ensure_ascii=False, sort_keys=True) + "\n")
        with open(os.path.join(directory, "edges.jsonl"), "w", encoding="utf-8") as fh:
            for edge_id in sorted(self.edges):
                fh.write(json.dumps(self.edges[edge_id].to_json(),
                                    ensure_ascii=False, sort_keys=True) + "\n")

    @classmethod
    def load(cls, directory) -> "GraphStore":
        store = cls()
        with open(os.path.join(directory, "nodes.jsonl"), encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                obj = json.loads(line)
                node = EntityNode(id=obj["id"], canonical=obj["canonical"],
                                  aliases=set(obj["aliases"]),
                                  mention_count=obj["mention_count"],
                                  paper_titles=set(obj["paper_titles"]))
                store.nodes[node.id] = node
                store._by_canonical[node.canonical] = node.id
                store._adjacency[node.id] = []
                store._next_node = max(store._next_node, node.id + 1)
        with open(os.path.join(directory, "edges.jsonl"), encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                obj = json.loads(line)
                edge = RelationEdge(id=obj["id"], head=obj["head"], relation=obj["relation"],
                                    tail=obj["tail"], score=float(obj["score"]),
                                    provenance=[Provenance.from_json(p)
                                                for p in obj["provenance"]])
                store.edges[edge.id] = edge
                store._edge_keys[(edge.head, edge.relation, edge.tail)] = edge.id
                store._adjacency[edge.head].append(edge.id)
                if edge.tail != edge.head:
                    store._adjacency[edge.tail].append(edge.id)
                store._next_edge = max(store._next_edge, edge.id + 1)
        return store

    def export_jsonl(self, path) -> None:
        """Single-file export; ids can be remapped on import."""
        with open(path, "w", encoding="utf-8") as fh:
            for node_id in sorted(self.nodes):
                obj = self.nodes[node_id].to_json()
                obj["type"] = "node"
                fh.write(json.dumps(obj, ensure_ascii=False, sort_keys=True) + "\n")
            for edge_id in sorted(self.edges):
                edge = self.edges[edge_id]
                obj = edge.to_json()
                obj["type"] = "edge"
                obj["head_canonical"] = self.nodes[edge.head].canonical
                obj["tail_canonical"] = self.nodes[edge.tail].canonical
                fh.write(json.dumps(obj, ensure_ascii=False, sort_keys=True) + "\n")

    @classmethod
    def import_jsonl(cls, path) -> "GraphStore":
        store = cls()
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                obj = json.loads(line)
                if obj["type"] == "node":
                    node_id = store._next_node
                    store._next_node += 1
                    node = EntityNode(id=node_id, canonical=obj["canonical"],
                                      aliases=set(obj["aliases"]),
                                      mention_count=obj["mention_count"],
                                      paper_titles=set(obj["paper_titles"]))
                    store.nodes[node_id] = node
                    store._by_canonical[node.canonical] = node_id
                    store._adjacency[node_id] = []
                else:
                    head = store._by_canonical[obj["head_canonical"]]
                    tail = store._by_canonical[obj["tail_canonical"]]
                    edge_id = store._next_edge
                    store._next_edge += 1
                    edge = RelationEdge(id=edge_id, head=head, relation=obj["relation"],
                                        tail=tail, score=float(obj["score"]),
                                        provenance=[Provenance.from_json(p)
                                                    for p in obj["provenance"]])
                    store.edges[edge_id] = edge
                    store._edge_keys[(head, edge.relation, tail)] = edge_id
                    store._adjacency[head].append(edge_id)
                    if tail != head:
                        store._adjacency[tail].append(edge_id)
        return store

    def structure(self) -> tuple:
        """Id-independent structural summary, for isomorphism comparison."""
        nodes = sorted((n.canonical, tuple(sorted(n.aliases)), n.mention_count,
                        tuple(sorted(n.paper_titles))) for n in self.nodes.values())
        edges = sorted((self.nodes[e.head].canonical, e.relation,
                        self.nodes[e.tail].canonical, round(e.score, 9),
                        tuple(sorted((p.abstract_id, p.sentence_index)
                                     for p in e.provenance)))
                       for e in self.edges.values())
        return (tuple(nodes), tuple(edges))
