"""Relation-schema induction.

Two-stage clustering: deduplicate and cluster entity strings, rewrite each
triple with its entity cluster's representative, then cluster the rewritten
triples; each triple cluster's representative relation phrase names a
schema relation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .clustering import kmeans, representative
from .encoders import EncoderProvider, embed
from .errors import InvalidK
from .preextract import CandidateTriple


@dataclass
class SchemaRelation:
    id: int
    name: str                        # representative relation phrase
    members: list[str]               # member relation phrases (name included)
    exemplars: list[str]             # nearest member triple texts
    member_triples: list[tuple[str, str, str]] = field(default_factory=list)


@dataclass
class RewrittenTriple:
    head: str
    relation_phrase: str
    tail: str
    relation_id: int = -1

    @property
    def text(self) -> str:
        return f"{self.head} {self.relation_phrase} {self.tail}"


@dataclass
class SchemaResult:
    relations: list[SchemaRelation]
    rewritten: list[RewrittenTriple]
    entity_representatives: dict[str, str]
    entity_clusters: dict[int, list[str]]
    manifest: dict


def induce_schema(triples: Sequence[CandidateTriple], k_entities: int, k_relations: int,
                  provider: EncoderProvider, seed: int = 0,
                  triple_embedding: str = "whole", n_restarts: int = 10,
                  n_exemplars: int = 3) -> SchemaResult:
    """Derive the relation schema from candidate triples.

    triple_embedding: 'whole' embeds the concatenated triple text;
    'average' averages the head/relation/tail embeddings.
    """
    if not triples:
        raise InvalidK("no candidate triples")

    entities = sorted({t.head.text for t in triples} | {t.tail.text for t in triples})
    if k_entities > len(entities):
        raise InvalidK(f"k_entities={k_entities} > {len(entities)} distinct entities")

    entity_vecs = embed(entities, provider)
    entity_model = kmeans(entity_vecs, k_entities, seed=seed, n_restarts=n_restarts)

    entity_clusters: dict[int, list[str]] = {}
    for label, cluster in zip(entities, entity_model.assignments):
        entity_clusters.setdefault(int(cluster), []).append(label)
    reps: dict[str, str] = {}
    for cluster, members in entity_clusters.items():
        idxs = [entities.index(m) for m in members]
        rep = representative(members, entity_vecs[idxs])
        for m in members:
            reps[m] = rep

    # rewrite, then deduplicate rewritten triples (first occurrence kept)
    seen: dict[tuple[str, str, str], RewrittenTriple] = {}
    for t in triples:
        key = (reps[t.head.text], t.relation.text, reps[t.tail.text])
        if key not in seen:
            seen[key] = RewrittenTriple(*key)
    rewritten = list(seen.values())
    if k_relations > len(rewritten):
        raise InvalidK(f"k_relations={k_relations} > {len(rewritten)} distinct rewritten triples")

    texts = [r.text for r in rewritten]
    if triple_embedding == "average":
        parts = embed([r.head for r in rewritten], provider), \
            embed([r.relation_phrase for r in rewritten], provider), \
            embed([r.tail for r in rewritten], provider)
        triple_vecs = (parts[0] + parts[1] + parts[2]) / 3.0
    else:
        triple_vecs = embed(texts, provider)
    triple_model = kmeans(triple_vecs, k_relations, seed=seed + 1, n_restarts=n_restarts)

    relations: list[SchemaRelation] = []
    for cluster in range(k_relations):
        idxs = [i for i, a in enumerate(triple_model.assignments) if a == cluster]
        member_texts = [texts[i] for i in idxs]
        rep_text = representative(member_texts, triple_vecs[idxs])
        rep_idx = idxs[member_texts.index(rep_text)]
        name = rewritten[rep_idx].relation_phrase
        centroid = triple_vecs[idxs].mean(axis=0)
        order = sorted(idxs, key=lambda i: (float(np.linalg.norm(triple_vecs[i] - centroid)),
                                            texts[i]))
        phrases = sorted({rewritten[i].relation_phrase for i in idxs})
        relations.append(SchemaRelation(
            id=cluster,
            name=name,
            members=phrases,
            exemplars=[texts[i] for i in order[:n_exemplars]],
            member_triples=[(rewritten[i].head, rewritten[i].relation_phrase,
                             rewritten[i].tail) for i in idxs],
        ))
        for i in idxs:
            rewritten[i].relation_id = cluster

    manifest = {
        "seed": seed,
        "provider": provider.provider_id,
        "dim": provider.dim,
        "k_entities": k_entities,
        "k_relations": k_relations,
        "triple_embedding": triple_embedding,
        "n_restarts": n_restarts,
        "entity_objective": entity_model.objective,
        "triple_objective": triple_model.objective,
    }
    return SchemaResult(relations=relations, rewritten=rewritten,
                        entity_representatives=reps, entity_clusters=entity_clusters,
                        manifest=manifest)


def save_schema(result: SchemaResult, path) -> None:
    obj = {
        "relations": [
            {"id": r.id, "name": r.name, "members": r.members, "exemplars": r.exemplars,
             "member_triples": [list(t) for t in r.member_triples]}
            for r in result.relations
        ],
        "entity_representatives": result.entity_representatives,
        "manifest": result.manifest,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, ensure_ascii=False, indent=2, sort_keys=True)


def load_schema(path) -> list[SchemaRelation]:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    return [SchemaRelation(id=r["id"], name=r["name"], members=r["members"],
                           exemplars=r.get("exemplars", []),
                           member_triples=[tuple(t) for t in r.get("member_triples", [])])
            for r in obj["relations"]]
