"""Shallow candidate-triple extraction.

Produces (head, relation-phrase, tail, confidence) candidates per sentence
using a small closed-class lexicon and chunking rules. Output of a real
open-IE system can be imported instead via import_external.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Sequence

from .errors import InvariantViolation, ParseError
from .ingest import AbstractRecord, SentenceRecord, Token, tokenize

NOUN = "NOUN"
PUNCT = "PUNCT"

_NP_CLASSES = {NOUN, "DET", "NUM", "ADJ"}


def _load_lexicon() -> dict[str, str]:
    data = resources.files("corpuskg.data").joinpath("pos_lexicon.txt").read_text("utf-8")
    lex = {}
    for line in data.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        cls, word = line.split("\t")
        lex[word] = cls
    return lex


_LEXICON: dict[str, str] | None = None


def _lexicon() -> dict[str, str]:
    global _LEXICON
    if _LEXICON is None:
        _LEXICON = _load_lexicon()
    return _LEXICON


def pos_tag(token: str) -> str:
    """Lexicon lookup with fallback heuristics; unknown words are noun-like."""
    lower = token.lower()
    lex = _lexicon()
    if lower in lex:
        return lex[lower]
    if not any(ch.isalnum() for ch in token):
        return PUNCT
    if token.replace(".", "").replace(",", "").isdigit():
        return "NUM"
    if lower.endswith("ly") and len(lower) > 3:
        return "ADV"
    return NOUN


@dataclass(frozen=True)
class TripleSpan:
    """A token-index range [start, end) with its surface text."""
    start: int
    end: int
    text: str


@dataclass
class CandidateTriple:
    abstract_id: str
    sentence_index: int
    sentence: str
    head: TripleSpan
    relation: TripleSpan
    tail: TripleSpan
    confidence: float

    @property
    def sentence_ref(self) -> tuple[str, int]:
        return (self.abstract_id, self.sentence_index)

    def to_json(self) -> dict:
        return {
            "abstract_id": self.abstract_id,
            "sentence_index": self.sentence_index,
            "sentence": self.sentence,
            "head": self.head.text,
            "head_span": [self.head.start, self.head.end],
            "relation": self.relation.text,
            "relation_span": [self.relation.start, self.relation.end],
            "tail": self.tail.text,
            "tail_span": [self.tail.start, self.tail.end],
            "confidence": self.confidence,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CandidateTriple":
        return cls(
            abstract_id=obj["abstract_id"],
            sentence_index=int(obj["sentence_index"]),
            sentence=obj["sentence"],
            head=TripleSpan(*obj["head_span"], obj["head"]),
            relation=TripleSpan(*obj["relation_span"], obj["relation"]),
            tail=TripleSpan(*obj["tail_span"], obj["tail"]),
            confidence=float(obj["confidence"]),
        )


def _span_text(tokens: Sequence[Token], start: int, end: int) -> str:
    return " ".join(t.surface for t in tokens[start:end])


# logistic-confidence feature weights; tuned for plausible spread, not a
# reproduction of any trained confidence model
_CONF_BIAS = 2.0
_CONF_W_CHUNK = -0.15
_CONF_W_REL = -0.10
_CONF_W_DIST = -0.40


def _confidence(head_len: int, rel_len: int, tail_len: int,
                head_gap: int, tail_gap: int) -> float:
    z = (_CONF_BIAS
         + _CONF_W_CHUNK * (head_len + tail_len - 2)
         + _CONF_W_REL * (rel_len - 1)
         + _CONF_W_DIST * (head_gap + tail_gap))
    return 1.0 / (1.0 + math.exp(-z))


def extract_candidates(sentence: SentenceRecord) -> list[CandidateTriple]:
    """Emit one candidate per NP-chunk + verb-group(+particle/prep) + NP-chunk match."""
    tokens = sentence.tokens
    tags = [pos_tag(t.surface) for t in tokens]
    n = len(tokens)

    # maximal noun-like runs, with leading determiners trimmed
    np_chunks: list[tuple[int, int]] = []
    i = 0
    while i < n:
        if tags[i] in _NP_CLASSES:
            j = i
            while j < n and tags[j] in _NP_CLASSES:
                j += 1
            start = i
            while start < j - 1 and tags[start] == "DET":
                start += 1
            if tags[start] != "DET":
                np_chunks.append((start, j))
            i = j
        else:
            i += 1

    # verb groups: AUX* VERB+ (PART|PREP)?
    verb_groups: list[tuple[int, int]] = []
    i = 0
    while i < n:
        if tags[i] in ("AUX", "VERB"):
            j = i
            while j < n and tags[j] == "AUX":
                j += 1
            v_start = j
            while j < n and tags[j] == "VERB":
                j += 1
            if j > v_start:
                if j < n and tags[j] in ("PART", "PREP"):
                    j += 1
                verb_groups.append((i, j))
            i = max(j, i + 1)
        else:
            i += 1

    candidates = []
    for vg_start, vg_end in verb_groups:
        head = None
        for s, e in np_chunks:
            if e <= vg_start:
                head = (s, e)
            else:
                break
        tail = None
        for s, e in np_chunks:
            if s >= vg_end:
                tail = (s, e)
                break
        if head is None or tail is None:
            continue
        conf = _confidence(head[1] - head[0], vg_end - vg_start, tail[1] - tail[0],
                           vg_start - head[1], tail[0] - vg_end)
        candidates.append(CandidateTriple(
            abstract_id=sentence.abstract_id,
            sentence_index=sentence.index,
            sentence=sentence.text,
            head=TripleSpan(head[0], head[1], _span_text(tokens, *head)),
            relation=TripleSpan(vg_start, vg_end, _span_text(tokens, vg_start, vg_end)),
            tail=TripleSpan(tail[0], tail[1], _span_text(tokens, *tail)),
            confidence=conf,
        ))
    return candidates


def select_best(candidates: Sequence[CandidateTriple]) -> CandidateTriple | None:
    """Highest-confidence candidate of one sentence; ties broken by earliest
    head start, then earliest tail start."""
    if not candidates:
        return None
    refs = {c.sentence_ref for c in candidates}
    if len(refs) > 1:
        raise InvariantViolation(f"candidates span multiple sentences: {sorted(refs)}")
    return min(candidates, key=lambda c: (-c.confidence, c.head.start, c.tail.start))


def _find_subsequence(tokens: Sequence[Token], phrase: str) -> tuple[int, int] | None:
    want = [t.surface for t in tokenize(phrase)]
    if not want:
        return None
    have = [t.surface for t in tokens]
    for i in range(len(have) - len(want) + 1):
        if have[i:i + len(want)] == want:
            return (i, i + len(want))
    return None


def import_external(path) -> tuple[list[CandidateTriple], int]:
    """Parse external extractor output: TSV lines of
    confidence, head, relation, tail, sentence. Returns (candidates, skipped)."""
    candidates = []
    warnings = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise ParseError(f"line {lineno}: expected 5 tab-separated fields, got {len(parts)}",
                                 lineno)
            conf_s, head_s, rel_s, tail_s, sent = parts
            try:
                conf = float(conf_s)
            except ValueError as exc:
                raise ParseError(f"line {lineno}: bad confidence {conf_s!r}", lineno) from exc
            tokens = tokenize(sent)
            head = _find_subsequence(tokens, head_s)
            rel = _find_subsequence(tokens, rel_s)
            tail = _find_subsequence(tokens, tail_s)
            if head is None or rel is None or tail is None:
                warnings += 1
                continue
            candidates.append(CandidateTriple(
                abstract_id=f"ext{lineno}",
                sentence_index=0,
                sentence=sent,
                head=TripleSpan(*head, _span_text(tokens, *head)),
                relation=TripleSpan(*rel, _span_text(tokens, *rel)),
                tail=TripleSpan(*tail, _span_text(tokens, *tail)),
                confidence=conf,
            ))
    return candidates, warnings


def sample_abstracts(records: Sequence[AbstractRecord], n: int, seed: int) -> list[AbstractRecord]:
    """Seeded uniform sample without replacement (all records if n >= len)."""
    if n >= len(records):
        return list(records)
    rng = random.Random(seed)
    return rng.sample(list(records), n)


def write_candidates(candidates: Iterable[CandidateTriple], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c in candidates:
            fh.write(json.dumps(c.to_json(), ensure_ascii=False, sort_keys=True) + "\n")


def read_candidates(path) -> list[CandidateTriple]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(CandidateTriple.from_json(json.loads(line)))
    return out
