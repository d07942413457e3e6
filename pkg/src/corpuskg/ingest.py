"""Corpus ingestion: load abstracts, clean text, segment into sentences and tokens.

Abstracts arrive either as plain records with a ``text`` field or in
inverted-index form (token -> list of positions) and are normalized into
JSONL records, one abstract per line.
"""

from __future__ import annotations

import datetime
import json
import re
import string
import unicodedata
from dataclasses import dataclass, field, asdict
from importlib import resources
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import DuplicatePosition, MissingPosition, ParseError, PositionOutOfRange

_PUNCT = set(string.punctuation)


@dataclass
class AbstractRecord:
    id: str
    title: str = ""
    journal: str = ""
    for_code: str = ""
    year: int = 0
    text: str = ""

    def validate(self):
        if not self.id:
            raise ValueError("abstract id must be non-empty")
        if not self.text:
            raise ValueError(f"abstract {self.id}: text empty after cleaning")
        current = datetime.date.today().year
        if self.year and not (1900 <= self.year <= current):
            raise ValueError(f"abstract {self.id}: year {self.year} outside [1900, {current}]")


@dataclass
class Token:
    surface: str
    start: int
    end: int


@dataclass
class SentenceRecord:
    abstract_id: str
    index: int
    text: str
    tokens: list[Token] = field(default_factory=list)


def reconstruct_abstract(index_length: int, inverted_index: Mapping[str, Sequence[int]]) -> str:
    """Rebuild the abstract text from its inverted-index form.

    Every position in [0, index_length) must be covered exactly once;
    tokens are joined with single spaces.
    """
    slots: list[str | None] = [None] * index_length
    for token, positions in inverted_index.items():
        for pos in positions:
            if pos < 0 or pos >= index_length:
                raise PositionOutOfRange(f"position {pos} outside [0, {index_length})")
            if slots[pos] is not None:
                raise DuplicatePosition(f"position {pos} assigned twice")
            slots[pos] = token
    for pos, token in enumerate(slots):
        if token is None:
            raise MissingPosition(f"no token for position {pos}")
    return " ".join(slots)  # type: ignore[arg-type]


def invert_text(text: str) -> tuple[int, dict[str, list[int]]]:
    """Inverse of reconstruct_abstract for whitespace-tokenized text."""
    tokens = text.split()
    index: dict[str, list[int]] = {}
    for pos, token in enumerate(tokens):
        index.setdefault(token, []).append(pos)
    return len(tokens), index


_ESCAPE_RE = re.compile(r"\\[ntr\\]|[\n\t\r\f\v]")
_WS_RE = re.compile(r"\s+")
# a punctuation char immediately repeated, e.g. "!!" or "--"
_REPEAT_PUNCT_RE = re.compile(r"([%s])\1+" % re.escape(string.punctuation))


def clean_text(raw: str) -> str:
    """Normalize an abstract: drop escapes, collapse repeated punctuation
    and whitespace. Idempotent."""
    text = unicodedata.normalize("NFC", raw)
    text = _ESCAPE_RE.sub(" ", text)
    text = "".join(ch if unicodedata.category(ch)[0] != "C" else " " for ch in text)
    text = _REPEAT_PUNCT_RE.sub(r"\1", text)
    text = _WS_RE.sub(" ", text)
    return text.strip()


def _load_default_abbreviations() -> frozenset[str]:
    data = resources.files("corpuskg.data").joinpath("abbreviations.txt").read_text("utf-8")
    abbrevs = set()
    for line in data.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            abbrevs.add(line)
    return frozenset(abbrevs)


_DEFAULT_ABBREVIATIONS: frozenset[str] | None = None


def default_abbreviations() -> frozenset[str]:
    global _DEFAULT_ABBREVIATIONS
    if _DEFAULT_ABBREVIATIONS is None:
        _DEFAULT_ABBREVIATIONS = _load_default_abbreviations()
    return _DEFAULT_ABBREVIATIONS


_BOUNDARY_RE = re.compile(r"[.?!](?=\s+[A-Z0-9])")


def split_sentences(text: str, abbreviations: Iterable[str] | None = None) -> list[str]:
    """Split cleaned text into sentences.

    Boundary: [.?!] followed by whitespace and an uppercase letter or digit,
    unless the token ending at the period is a known abbreviation.
    Joining the result with single spaces reproduces the input.
    """
    if not text:
        return []
    abbrevs = frozenset(abbreviations) if abbreviations is not None else default_abbreviations()
    boundaries = []
    for m in _BOUNDARY_RE.finditer(text):
        end = m.end()
        if text[end - 1] == ".":
            # token ending at this period, including a possible one-word prefix
            # so multiword entries like "et al." match
            tail = text[:end]
            last_space = tail.rfind(" ")
            token = tail[last_space + 1:]
            prev_space = tail.rfind(" ", 0, last_space) if last_space >= 0 else -1
            two_tokens = tail[prev_space + 1:] if last_space >= 0 else token
            if token in abbrevs or two_tokens in abbrevs:
                continue
        boundaries.append(end)
    sentences = []
    start = 0
    for b in boundaries:
        sentences.append(text[start:b])
        start = b + 1  # skip the single separating space
    if start <= len(text) - 1 or not sentences:
        sentences.append(text[start:])
    return [s for s in sentences if s]


def tokenize(sentence: str) -> list[Token]:
    """Whitespace tokenization with leading/trailing punctuation detached.

    Each token records its character span; spans tile the non-space text.
    """
    tokens: list[Token] = []
    pos = 0
    n = len(sentence)
    while pos < n:
        if sentence[pos].isspace():
            pos += 1
            continue
        end = pos
        while end < n and not sentence[end].isspace():
            end += 1
        word_start, word_end = pos, end
        # detach leading punctuation chars
        while word_start < word_end and sentence[word_start] in _PUNCT and word_end - word_start > 1:
            tokens.append(Token(sentence[word_start], word_start, word_start + 1))
            word_start += 1
        # find trailing punctuation run
        trail = word_end
        while trail > word_start + 1 and sentence[trail - 1] in _PUNCT:
            trail -= 1
        if word_start < trail:
            tokens.append(Token(sentence[word_start:trail], word_start, trail))
        for i in range(trail, word_end):
            tokens.append(Token(sentence[i], i, i + 1))
        pos = end
    return tokens


def segment_abstract(record: AbstractRecord,
                     abbreviations: Iterable[str] | None = None) -> list[SentenceRecord]:
    """Split an abstract into tokenized SentenceRecords."""
    out = []
    for i, sent in enumerate(split_sentences(record.text, abbreviations)):
        out.append(SentenceRecord(record.id, i, sent, tokenize(sent)))
    return out


def parse_record(obj: Mapping, fmt: str = "jsonl") -> AbstractRecord:
    """Build an AbstractRecord from a parsed JSON object.

    fmt='inverted' expects index_length + inverted_index instead of text.
    """
    if fmt == "inverted":
        text = reconstruct_abstract(int(obj["index_length"]), obj["inverted_index"])
    else:
        text = obj.get("text", "")
    rec = AbstractRecord(
        id=str(obj.get("id", "")),
        title=obj.get("title", ""),
        journal=obj.get("journal", ""),
        for_code=str(obj.get("for_code", "")),
        year=int(obj.get("year", 0) or 0),
        text=clean_text(text),
    )
    rec.validate()
    return rec


def read_corpus(path, fmt: str = "jsonl") -> list[AbstractRecord]:
    records = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                rec = parse_record(obj, fmt)
            except (ValueError, KeyError) as exc:
                raise ParseError(f"line {lineno}: {exc}", lineno) from exc
            if rec.id in seen:
                raise ParseError(f"line {lineno}: duplicate abstract id {rec.id!r}", lineno)
            seen.add(rec.id)
            records.append(rec)
    return records


def write_corpus(records: Iterable[AbstractRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(asdict(rec), ensure_ascii=False, sort_keys=True) + "\n")


def iter_sentences(records: Iterable[AbstractRecord]) -> Iterator[SentenceRecord]:
    for rec in records:
        yield from segment_abstract(rec)
