"""Full-corpus extraction pipeline.

Tags each sentence, enumerates entity pairs, classifies each pair against
the schema with the few-shot scorer, thresholds the results, and reports
integration statistics plus human-validation accuracy bookkeeping.
"""

from __future__ import annotations

import json
import random
import warnings
from dataclasses import dataclass, field
from decimal import Decimal, ROUND_HALF_UP
from typing import Iterable, Mapping, Sequence

from .crf import CrfModel, entity_spans, tag
from .dataset import RcInstance
from .encoders import EncoderProvider
from .errors import MissingAdjudication
from .fewshot import PairScorer, predict
from .ingest import AbstractRecord, SentenceRecord, segment_abstract


def round_half_up(x: float, digits: int = 2) -> float:
    q = Decimal(10) ** -digits
    return float(Decimal(repr(x)).quantize(q, rounding=ROUND_HALF_UP))


@dataclass
class Provenance:
    abstract_id: str
    sentence_index: int
    title: str = ""
    journal: str = ""
    year: int = 0
    sentence: str = ""

    def to_json(self) -> dict:
        return {"abstract_id": self.abstract_id, "sentence_index": self.sentence_index,
                "title": self.title, "journal": self.journal, "year": self.year,
                "sentence": self.sentence}

    @classmethod
    def from_json(cls, obj: dict) -> "Provenance":
        return cls(obj["abstract_id"], int(obj["sentence_index"]), obj.get("title", ""),
                   obj.get("journal", ""), int(obj.get("year", 0)), obj.get("sentence", ""))


@dataclass
class ExtractedTriple:
    head: str
    head_span: tuple[int, int]
    relation: str
    tail: str
    tail_span: tuple[int, int]
    score: float
    provenance: Provenance

    def to_json(self) -> dict:
        return {"head": self.head, "head_span": list(self.head_span),
                "relation": self.relation, "tail": self.tail,
                "tail_span": list(self.tail_span), "score": self.score,
                "provenance": self.provenance.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "ExtractedTriple":
        return cls(obj["head"], tuple(obj["head_span"]), obj["relation"], obj["tail"],
                   tuple(obj["tail_span"]), float(obj["score"]),
                   Provenance.from_json(obj["provenance"]))


@dataclass
class PipelineStats:
    abstracts: int = 0
    sentences: int = 0
    entity_mentions: int = 0
    distinct_entities: int = 0
    pair_candidates: int = 0
    triples_total: int = 0
    high_quality_triples: int = 0
    per_relation: dict[str, dict[str, int]] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"abstracts": self.abstracts, "sentences": self.sentences,
                "entity_mentions": self.entity_mentions,
                "distinct_entities": self.distinct_entities,
                "pair_candidates": self.pair_candidates,
                "triples_total": self.triples_total,
                "high_quality_triples": self.high_quality_triples,
                "per_relation": self.per_relation}


def enumerate_pairs(spans: Sequence[tuple[int, int]], mode: str = "forward",
                    cap: int | None = None) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    """Entity pairs in one sentence. forward: head precedes tail (C(n,2));
    both: all ordered pairs (n(n-1))."""
    ordered = sorted(spans)
    pairs = []
    for i, h in enumerate(ordered):
        for j, t in enumerate(ordered):
            if i == j:
                continue
            if mode == "forward" and j < i:
                continue
            pairs.append((h, t))
    if cap is not None and len(pairs) > cap:
        warnings.warn(f"pair enumeration capped at {cap} (had {len(pairs)})")
        pairs = pairs[:cap]
    return pairs


@dataclass
class ExtractionConfig:
    k_shot: int = 1
    seed: int = 0
    pair_mode: str = "forward"
    pair_cap: int | None = 100
    theta: float = float("-inf")


def build_support_bank(pool: Mapping[str, Sequence[RcInstance]], k_shot: int,
                       seed: int) -> dict[str, list[RcInstance]]:
    """Seeded deterministic draw of K support instances per relation, fixed
    for a whole run."""
    rng = random.Random(seed)
    bank: dict[str, list[RcInstance]] = {}
    for relation in sorted(pool):
        insts = list(pool[relation])
        bank[relation] = insts if len(insts) <= k_shot else rng.sample(insts, k_shot)
    return bank


def extract_sentence(sentence: SentenceRecord, model: CrfModel,
                     provider: EncoderProvider, scorer: PairScorer,
                     support_bank: Mapping[str, Sequence[RcInstance]],
                     config: ExtractionConfig,
                     abstract: AbstractRecord | None = None) -> list[ExtractedTriple]:
    tokens = [t.surface for t in sentence.tokens]
    if not tokens:
        return []
    labels = tag(model, tokens, provider)
    spans = sorted(entity_spans(labels))
    if len(spans) < 2:
        return []
    triples = []
    for head_span, tail_span in enumerate_pairs(spans, config.pair_mode, config.pair_cap):
        query = RcInstance(tokens, head_span, tail_span, relation="")
        pred = predict(query, support_bank, scorer)
        prov = Provenance(
            abstract_id=sentence.abstract_id,
            sentence_index=sentence.index,
            title=abstract.title if abstract else "",
            journal=abstract.journal if abstract else "",
            year=abstract.year if abstract else 0,
            sentence=sentence.text,
        )
        triples.append(ExtractedTriple(
            head=" ".join(tokens[head_span[0]:head_span[1]]),
            head_span=head_span,
            relation=pred.relation,
            tail=" ".join(tokens[tail_span[0]:tail_span[1]]),
            tail_span=tail_span,
            score=pred.score,
            provenance=prov,
        ))
    return triples


def filter_threshold(triples: Sequence[ExtractedTriple], theta: float) -> list[ExtractedTriple]:
    """Triples with score >= theta, order preserved."""
    return [t for t in triples if t.score >= theta]


def score_histogram(triples: Sequence[ExtractedTriple],
                    bin_width: float) -> list[tuple[float, int]]:
    """(threshold, surviving count) series: how many triples survive as the
    threshold rises in bin_width steps. Counts are non-increasing."""
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    if not triples:
        return []
    scores = sorted(t.score for t in triples)
    lo, hi = scores[0], scores[-1]
    series = []
    theta = lo
    while theta <= hi + bin_width / 2:
        count = sum(1 for s in scores if s >= theta - 1e-12)
        series.append((theta, count))
        theta += bin_width
    return series


def histogram_csv(series: Sequence[tuple[float, int]]) -> str:
    lines = ["threshold,count"]
    for theta, count in series:
        lines.append(f"{theta},{count}")
    return "\n".join(lines) + "\n"


def choose_threshold(scored_labels: Sequence[tuple[float, bool]],
                     target_precision: float) -> float:
    """Smallest threshold whose surviving labeled sample reaches the target
    precision; +inf if unreachable."""
    candidates = sorted({s for s, _ in scored_labels})
    for theta in candidates:
        kept = [(s, ok) for s, ok in scored_labels if s >= theta]
        if kept and sum(ok for _, ok in kept) / len(kept) >= target_precision:
            return theta
    return float("inf")


def sample_validation(triples: Sequence[ExtractedTriple], per_relation: int = 100,
                      seed: int = 0) -> tuple[list[ExtractedTriple], list[str]]:
    """Seeded uniform sample of up to per_relation triples per relation."""
    rng = random.Random(seed)
    by_rel: dict[str, list[ExtractedTriple]] = {}
    for t in triples:
        by_rel.setdefault(t.relation, []).append(t)
    sample: list[ExtractedTriple] = []
    shortfalls: list[str] = []
    for relation in sorted(by_rel):
        group = by_rel[relation]
        if len(group) <= per_relation:
            sample.extend(group)
            if len(group) < per_relation:
                shortfalls.append(
                    f"relation {relation!r}: only {len(group)} of {per_relation} triples")
        else:
            sample.extend(rng.sample(group, per_relation))
    return sample, shortfalls


@dataclass
class ValidationRecord:
    triple_ref: str
    relation: str
    votes: tuple[bool, bool]
    adjudication: bool | None = None

    def validate(self):
        if self.votes[0] != self.votes[1] and self.adjudication is None:
            raise MissingAdjudication(f"{self.triple_ref}: disagreement without adjudication")
        if self.votes[0] == self.votes[1] and self.adjudication is not None:
            raise ValueError(f"{self.triple_ref}: adjudication present despite agreement")

    @property
    def agreed(self) -> bool:
        return self.votes[0] == self.votes[1]

    @property
    def final(self) -> bool:
        return self.votes[0] if self.agreed else bool(self.adjudication)

    def to_json(self) -> dict:
        return {"triple_ref": self.triple_ref, "relation": self.relation,
                "votes": list(self.votes), "adjudication": self.adjudication}

    @classmethod
    def from_json(cls, obj: dict) -> "ValidationRecord":
        return cls(obj["triple_ref"], obj.get("relation", ""),
                   tuple(bool(v) for v in obj["votes"]),
                   obj.get("adjudication"))


def _bucket(records: Sequence[ValidationRecord]) -> dict:
    true = sum(r.final for r in records)
    total = len(records)
    acc = round_half_up(100.0 * true / total) if total else 0.0
    return {"true": true, "false": total - true, "total": total, "accuracy": acc}


def adjudicate(records: Sequence[ValidationRecord]) -> dict:
    """Accuracy report split into unanimous and adjudicated buckets."""
    for r in records:
        r.validate()
    agreed = [r for r in records if r.agreed]
    disagreed = [r for r in records if not r.agreed]
    return {"agreed": _bucket(agreed), "disagreed": _bucket(disagreed),
            "total": _bucket(list(records))}


def per_relation_accuracy(records: Sequence[ValidationRecord]) -> dict[str, float]:
    """Final-verdict accuracy (percent) per relation; empty relations omitted."""
    by_rel: dict[str, list[ValidationRecord]] = {}
    for r in records:
        r.validate()
        by_rel.setdefault(r.relation, []).append(r)
    return {rel: round_half_up(100.0 * sum(r.final for r in group) / len(group))
            for rel, group in sorted(by_rel.items())}


def run_pipeline(corpus: Sequence[AbstractRecord], model: CrfModel,
                 provider: EncoderProvider, scorer: PairScorer,
                 support_bank: Mapping[str, Sequence[RcInstance]],
                 config: ExtractionConfig,
                 checkpoint_path=None) -> tuple[list[ExtractedTriple], PipelineStats, dict]:
    """Stream sentences through extraction, threshold, and collect stats.

    On failure the ids of completed abstracts are written to checkpoint_path
    so a rerun can skip them.
    """
    stats = PipelineStats()
    all_triples: list[ExtractedTriple] = []
    done: set[str] = set()
    if checkpoint_path:
        try:
            with open(checkpoint_path, encoding="utf-8") as fh:
                done = set(json.load(fh)["completed"])
        except FileNotFoundError:
            pass

    entity_surfaces: set[str] = set()
    try:
        for abstract in corpus:
            if abstract.id in done:
                continue
            stats.abstracts += 1
            for sentence in segment_abstract(abstract):
                stats.sentences += 1
                tokens = [t.surface for t in sentence.tokens]
                if not tokens:
                    continue
                labels = tag(model, tokens, provider)
                spans = sorted(entity_spans(labels))
                stats.entity_mentions += len(spans)
                for s, e in spans:
                    entity_surfaces.add(" ".join(tokens[s:e]))
                if len(spans) >= 2:
                    pairs = enumerate_pairs(spans, config.pair_mode, config.pair_cap)
                    stats.pair_candidates += len(pairs)
                triples = extract_sentence(sentence, model, provider, scorer,
                                           support_bank, config, abstract)
                stats.triples_total += len(triples)
                all_triples.extend(triples)
            done.add(abstract.id)
    except Exception:
        if checkpoint_path:
            with open(checkpoint_path, "w", encoding="utf-8") as fh:
                json.dump({"completed": sorted(done)}, fh)
        raise

    kept = filter_threshold(all_triples, config.theta)
    stats.high_quality_triples = len(kept)
    stats.distinct_entities = len(entity_surfaces)
    for t in kept:
        rel = stats.per_relation.setdefault(t.relation, {"triples": 0, "entities": 0})
        rel["triples"] += 1
    for relation, group in _entities_per_relation(kept).items():
        stats.per_relation[relation]["entities"] = len(group)

    manifest = {
        "seed": config.seed,
        "k_shot": config.k_shot,
        "pair_mode": config.pair_mode,
        "theta": config.theta,
        "provider": provider.provider_id,
        "scorer": type(scorer).__name__,
        "encoder_id": model.encoder_id,
        "relations": sorted(support_bank),
    }
    return kept, stats, manifest


def _entities_per_relation(triples: Sequence[ExtractedTriple]) -> dict[str, set[str]]:
    out: dict[str, set[str]] = {}
    for t in triples:
        group = out.setdefault(t.relation, set())
        group.add(t.head)
        group.add(t.tail)
    return out


def write_triples(triples: Iterable[ExtractedTriple], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in triples:
            fh.write(json.dumps(t.to_json(), ensure_ascii=False, sort_keys=True) + "\n")


def read_triples(path) -> list[ExtractedTriple]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(ExtractedTriple.from_json(json.loads(line)))
    return out
