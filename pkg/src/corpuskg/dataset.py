"""Annotated datasets: brat standoff import, lint rules, NER/RC splits,
few-shot episode sampling, rotation folds for cross-validation."""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import (DanglingRef, EpisodeInfeasible, InvalidFold, OffsetError, ParseError,
                     SplitError)
from .ingest import Token, tokenize

BIO_LABELS = ("B", "I", "O")
_COORDINATORS = {"and", "or", "nor", "but", ","}


def bio_valid(labels: Sequence[str]) -> bool:
    prev = "O"
    for lab in labels:
        if lab not in BIO_LABELS:
            return False
        if lab == "I" and prev == "O":
            return False
        prev = lab
    return True


@dataclass
class NerInstance:
    tokens: list[str]
    labels: list[str]
    head_span: tuple[int, int]
    tail_span: tuple[int, int]

    def validate(self):
        if len(self.tokens) != len(self.labels):
            raise ValueError("labels/tokens length mismatch")
        if not bio_valid(self.labels):
            raise ValueError(f"invalid BIO sequence: {self.labels}")

    def to_json(self) -> dict:
        return {"tokens": self.tokens, "labels": self.labels,
                "head_span": list(self.head_span), "tail_span": list(self.tail_span)}

    @classmethod
    def from_json(cls, obj: dict) -> "NerInstance":
        return cls(obj["tokens"], obj["labels"],
                   tuple(obj["head_span"]), tuple(obj["tail_span"]))


@dataclass
class RcInstance:
    tokens: list[str]
    head_span: tuple[int, int]
    tail_span: tuple[int, int]
    relation: str

    def validate(self):
        h, t = self.head_span, self.tail_span
        if not (h[1] <= t[0] or t[1] <= h[0]):
            raise ValueError("head and tail spans overlap")

    def to_json(self) -> dict:
        return {"tokens": self.tokens, "head_span": list(self.head_span),
                "tail_span": list(self.tail_span), "relation": self.relation}

    @classmethod
    def from_json(cls, obj: dict) -> "RcInstance":
        return cls(obj["tokens"], tuple(obj["head_span"]), tuple(obj["tail_span"]),
                   obj["relation"])


@dataclass
class Episode:
    support: dict[str, list[RcInstance]]   # relation -> K instances
    queries: dict[str, list[RcInstance]]   # relation -> Q instances
    n_way: int
    k_shot: int
    q_query: int


@dataclass
class DatasetSplit:
    train: list = field(default_factory=list)
    validation: list = field(default_factory=list)
    test: list = field(default_factory=list)
    train_relations: list[str] = field(default_factory=list)
    val_relations: list[str] = field(default_factory=list)
    test_relations: list[str] = field(default_factory=list)


_T_LINE = re.compile(r"^(T\d+)\t(\S+) (\d+) (\d+)\t(.*)$")
_R_LINE = re.compile(r"^(R\d+)\t(\S+) Arg1:(T\d+) Arg2:(T\d+)\s*$")


def _char_to_token_span(tokens: Sequence[Token], start: int, end: int) -> tuple[int, int]:
    idxs = [i for i, t in enumerate(tokens) if t.start < end and t.end > start]
    if not idxs:
        raise OffsetError(f"char span [{start},{end}) covers no tokens")
    return (idxs[0], idxs[-1] + 1)


def import_brat(text_path, ann_path) -> tuple[list[NerInstance], list[RcInstance]]:
    """Parse one brat document pair into NER and RC instances.

    The .txt is treated as one annotated sentence per line; each relation
    line yields one instance in each dataset.
    """
    with open(text_path, encoding="utf-8") as fh:
        text = fh.read()

    # char offset of each line within the document
    lines = text.split("\n")
    offsets = []
    pos = 0
    for line in lines:
        offsets.append(pos)
        pos += len(line) + 1

    entities: dict[str, tuple[str, int, int, str]] = {}
    relations: list[tuple[str, str, str]] = []
    with open(ann_path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            raw = raw.rstrip("\n")
            if not raw or raw.startswith("#"):
                continue
            if raw.startswith("T"):
                m = _T_LINE.match(raw)
                if not m:
                    raise ParseError(f"{ann_path}:{lineno}: bad entity line", lineno)
                tid, etype, start, end, surface = m.groups()
                start, end = int(start), int(end)
                if end > len(text) or start >= end:
                    raise OffsetError(f"{tid}: offsets [{start},{end}) outside text")
                if text[start:end] != surface:
                    raise OffsetError(
                        f"{tid}: surface {surface!r} != text {text[start:end]!r}")
                entities[tid] = (etype, start, end, surface)
            elif raw.startswith("R"):
                m = _R_LINE.match(raw)
                if not m:
                    raise ParseError(f"{ann_path}:{lineno}: bad relation line", lineno)
                rid, rtype, arg1, arg2 = m.groups()
                relations.append((rtype, arg1, arg2))

    ner, rc = [], []
    for rtype, arg1, arg2 in relations:
        for ref in (arg1, arg2):
            if ref not in entities:
                raise DanglingRef(f"relation references unknown entity {ref}")
        _, h_start, h_end, _ = entities[arg1]
        _, t_start, t_end, _ = entities[arg2]
        # locate the line containing both spans
        line_idx = None
        for i, line in enumerate(lines):
            lo, hi = offsets[i], offsets[i] + len(line)
            if lo <= h_start and h_end <= hi and lo <= t_start and t_end <= hi:
                line_idx = i
                break
        if line_idx is None:
            raise OffsetError("relation arguments do not share a line")
        base = offsets[line_idx]
        tokens = tokenize(lines[line_idx])
        head_span = _char_to_token_span(tokens, h_start - base, h_end - base)
        tail_span = _char_to_token_span(tokens, t_start - base, t_end - base)
        surfaces = [t.surface for t in tokens]
        labels = ["O"] * len(tokens)
        for s, e in (head_span, tail_span):
            labels[s] = "B"
            for i in range(s + 1, e):
                labels[i] = "I"
        inst_ner = NerInstance(surfaces, labels, head_span, tail_span)
        inst_ner.validate()
        inst_rc = RcInstance(surfaces, head_span, tail_span, rtype)
        inst_rc.validate()
        ner.append(inst_ner)
        rc.append(inst_rc)
    return ner, rc


def import_brat_dir(txt_dir, ann_dir) -> tuple[list[NerInstance], list[RcInstance]]:
    import os
    ner, rc = [], []
    for name in sorted(os.listdir(txt_dir)):
        if not name.endswith(".txt"):
            continue
        ann = os.path.join(ann_dir, name[:-4] + ".ann")
        if not os.path.exists(ann):
            continue
        n, r = import_brat(os.path.join(txt_dir, name), ann)
        ner.extend(n)
        rc.extend(r)
    return ner, rc


def lint_annotations(instances: Sequence[NerInstance | RcInstance],
                     length_cap: int = 8) -> list[str]:
    """Warn about coordinate entities and over-long (clause-like) spans."""
    warnings = []
    for idx, inst in enumerate(instances):
        for name, (s, e) in (("head", inst.head_span), ("tail", inst.tail_span)):
            span_tokens = inst.tokens[s:e]
            surface = " ".join(span_tokens)
            if any(t.lower() in _COORDINATORS for t in span_tokens):
                warnings.append(
                    f"instance {idx}: {name} entity {surface!r} looks like coordinate entities")
            if e - s > length_cap:
                warnings.append(
                    f"instance {idx}: {name} entity {surface!r} exceeds {length_cap} tokens")
    return warnings


def split_rc(instances: Sequence[RcInstance], seed: int,
             counts: tuple[int, int, int] = (18, 5, 6),
             instances_per_relation: int = 50,
             enforce: bool = True) -> DatasetSplit:
    """Relation-level split: shuffle relations, allocate counts[0]/[1]/[2]
    to train/validation/test; instances follow their relation."""
    by_rel: dict[str, list[RcInstance]] = {}
    for inst in instances:
        by_rel.setdefault(inst.relation, []).append(inst)
    relations = sorted(by_rel)
    if enforce:
        if len(relations) != sum(counts) or any(
                len(v) != instances_per_relation for v in by_rel.values()):
            raise SplitError(
                f"expected {sum(counts)} relations x {instances_per_relation} instances, "
                f"got {len(relations)} relations with sizes "
                f"{sorted({len(v) for v in by_rel.values()})}")
    elif len(relations) < sum(counts):
        raise SplitError(f"{len(relations)} relations < {sum(counts)} required")
    rng = random.Random(seed)
    shuffled = list(relations)
    rng.shuffle(shuffled)
    n_train, n_val, n_test = counts
    split = DatasetSplit(
        train_relations=shuffled[:n_train],
        val_relations=shuffled[n_train:n_train + n_val],
        test_relations=shuffled[n_train + n_val:n_train + n_val + n_test],
    )
    for rel in split.train_relations:
        split.train.extend(by_rel[rel])
    for rel in split.val_relations:
        split.validation.extend(by_rel[rel])
    for rel in split.test_relations:
        split.test.extend(by_rel[rel])
    return split


def split_ner(instances: Sequence[NerInstance], seed: int,
              train_size: int = 1600, val_size: int = 400,
              ratio: float | None = None) -> DatasetSplit:
    """Instance-level train/validation split with an empty test set."""
    n = len(instances)
    if ratio is not None:
        train_size = round(n * ratio)
        val_size = n - train_size
    elif n != train_size + val_size:
        raise SplitError(f"expected {train_size + val_size} instances, got {n} "
                         "(pass ratio= to override)")
    rng = random.Random(seed)
    order = list(range(n))
    rng.shuffle(order)
    return DatasetSplit(
        train=[instances[i] for i in order[:train_size]],
        validation=[instances[i] for i in order[train_size:train_size + val_size]],
        test=[],
    )


def sample_episode(pool: Mapping[str, Sequence[RcInstance]], n_way: int, k_shot: int,
                   q_query: int, seed: int) -> Episode:
    """Draw an N-way K-shot Q-query episode; support and query instances are
    disjoint within each relation."""
    eligible = sorted(r for r, insts in pool.items() if len(insts) >= k_shot + q_query)
    if len(eligible) < n_way:
        raise EpisodeInfeasible(
            f"need {n_way} relations with >= {k_shot + q_query} instances, "
            f"have {len(eligible)}")
    rng = random.Random(seed)
    chosen = rng.sample(eligible, n_way)
    support: dict[str, list[RcInstance]] = {}
    queries: dict[str, list[RcInstance]] = {}
    for rel in chosen:
        picks = rng.sample(list(pool[rel]), k_shot + q_query)
        support[rel] = picks[:k_shot]
        queries[rel] = picks[k_shot:]
    return Episode(support=support, queries=queries,
                   n_way=n_way, k_shot=k_shot, q_query=q_query)


def rotate_folds(relations: Sequence[str], fold: int,
                 counts: tuple[int, int, int] = (18, 5, 6),
                 shift: int = 4) -> DatasetSplit:
    """Relation-level fold split: right-rotate the relation order by
    shift*(fold-1) positions, then allocate counts to train/val/test."""
    if not 1 <= fold <= 5:
        raise InvalidFold(f"fold must be in 1..5, got {fold}")
    if len(relations) != sum(counts):
        raise SplitError(f"expected {sum(counts)} relations, got {len(relations)}")
    r = (shift * (fold - 1)) % len(relations)
    order = list(relations[-r:]) + list(relations[:-r]) if r else list(relations)
    n_train, n_val, n_test = counts
    return DatasetSplit(
        train_relations=order[:n_train],
        val_relations=order[n_train:n_train + n_val],
        test_relations=order[n_train + n_val:],
    )


def group_by_relation(instances: Iterable[RcInstance]) -> dict[str, list[RcInstance]]:
    out: dict[str, list[RcInstance]] = {}
    for inst in instances:
        out.setdefault(inst.relation, []).append(inst)
    return out


def write_instances(instances: Iterable[NerInstance | RcInstance], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps(inst.to_json(), ensure_ascii=False, sort_keys=True) + "\n")


def read_ner(path) -> list[NerInstance]:
    return _read_jsonl(path, NerInstance)


def read_rc(path) -> list[RcInstance]:
    return _read_jsonl(path, RcInstance)


def _read_jsonl(path, cls):
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(cls.from_json(json.loads(line)))
    return out


def diff_annotations(old: Sequence[RcInstance], new: Sequence[RcInstance]) -> dict:
    """Re-import comparison report for second-pass validation."""
    def key(inst: RcInstance):
        return (tuple(inst.tokens), inst.head_span, inst.tail_span, inst.relation)
    old_keys = {key(i) for i in old}
    new_keys = {key(i) for i in new}
    return {
        "unchanged": len(old_keys & new_keys),
        "removed": len(old_keys - new_keys),
        "added": len(new_keys - old_keys),
    }
