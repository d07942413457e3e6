"""Few-shot relation classification.

A pair scorer rates the relation similarity of a (query, support) instance
pair; per-relation scores average the K support scores and the argmax
relation wins. Episode evaluation and rotation cross-validation sit on top.
"""

from __future__ import annotations

import json
import subprocess
import warnings
from dataclasses import dataclass
from typing import Callable, Mapping, Protocol, Sequence

import numpy as np

from .dataset import Episode, RcInstance, group_by_relation, rotate_folds, sample_episode
from .encoders import EncoderProvider, embed
from .errors import EncoderUnavailable, IncompleteSupport
from .crf import mean_std

DEFAULT_PAIR_CAP = 128

HEAD_MASK = "HEAD"
TAIL_MASK = "TAIL"


class PairScorer(Protocol):
    max_tokens: int

    def score(self, query: RcInstance, support: RcInstance) -> float: ...


@dataclass
class Prediction:
    relation: str
    score: float
    per_relation_scores: dict[str, float]


def _truncated(inst: RcInstance, budget: int) -> RcInstance:
    if len(inst.tokens) <= budget:
        return inst
    warnings.warn(f"pair input truncated to {budget} tokens")
    head = inst.head_span if inst.head_span[1] <= budget else (0, 0)
    tail = inst.tail_span if inst.tail_span[1] <= budget else (0, 0)
    return RcInstance(inst.tokens[:budget], head, tail, inst.relation)


def _cap_pair(query: RcInstance, support: RcInstance,
              cap: int) -> tuple[RcInstance, RcInstance]:
    combined = len(query.tokens) + len(support.tokens)
    if combined <= cap:
        return query, support
    budget = cap // 2
    return _truncated(query, budget), _truncated(support, cap - min(budget, len(query.tokens)))


def predict(query: RcInstance, support_set: Mapping[str, Sequence[RcInstance]],
            scorer: PairScorer) -> Prediction:
    """Average the K pair scores per relation, return the argmax relation;
    ties go to the lowest relation index (support_set iteration order)."""
    per_relation: dict[str, float] = {}
    cap = getattr(scorer, "max_tokens", DEFAULT_PAIR_CAP)
    for relation, supports in support_set.items():
        if not supports:
            raise IncompleteSupport(f"no support instances for relation {relation!r}")
        total = 0.0
        for s in supports:
            q_c, s_c = _cap_pair(query, s, cap)
            total += float(scorer.score(q_c, s_c))
        per_relation[relation] = total / len(supports)
    best_relation = None
    best_score = -np.inf
    for relation, score in per_relation.items():
        if score > best_score:
            best_relation, best_score = relation, score
    return Prediction(relation=best_relation, score=best_score,
                      per_relation_scores=per_relation)


@dataclass
class EpisodeAccuracy:
    accuracy: float
    correct: int
    total: int
    ci_low: float
    ci_high: float


def _binomial_ci(correct: int, total: int) -> tuple[float, float]:
    if total == 0:
        return (0.0, 0.0)
    p = correct / total
    half = 1.96 * (p * (1 - p) / total) ** 0.5
    return (max(0.0, p - half), min(1.0, p + half))


def evaluate_episode(episode: Episode, scorer: PairScorer) -> tuple[int, int]:
    correct = total = 0
    for gold_relation, queries in episode.queries.items():
        for q in queries:
            pred = predict(q, episode.support, scorer)
            correct += int(pred.relation == gold_relation)
            total += 1
    return correct, total


def evaluate_episodes(scorer: PairScorer, pool: Mapping[str, Sequence[RcInstance]],
                      n_way: int, k_shot: int, q_query: int, iterations: int,
                      seed: int = 0) -> EpisodeAccuracy:
    """Accuracy over iterations independently-seeded episodes."""
    correct = total = 0
    for i in range(iterations):
        episode = sample_episode(pool, n_way, k_shot, q_query, seed + i)
        c, t = evaluate_episode(episode, scorer)
        correct += c
        total += t
    acc = correct / total if total else 0.0
    lo, hi = _binomial_ci(correct, total)
    return EpisodeAccuracy(accuracy=acc, correct=correct, total=total,
                           ci_low=lo, ci_high=hi)


@dataclass
class CvResult:
    val_accuracies: list[float]
    test_accuracies: list[float]
    val_mean: float
    val_std: float
    test_mean: float
    test_std: float


def rotation_cv(scorer_factory: Callable[[Sequence[RcInstance]], PairScorer],
                instances: Sequence[RcInstance], folds: int = 5,
                n_way: int = 5, k_shot: int = 1, q_query: int = 1,
                iterations: int = 1000, seed: int = 0) -> CvResult:
    """Rotation cross-validation: each fold right-rotates the relation
    allocation, builds a scorer on the train relations, and evaluates
    episodes on the validation and test relation pools."""
    by_rel = group_by_relation(instances)
    relations = sorted(by_rel)
    val_accs, test_accs = [], []
    for fold in range(1, folds + 1):
        split = rotate_folds(relations, fold)
        train_insts = [i for r in split.train_relations for i in by_rel[r]]
        scorer = scorer_factory(train_insts)
        val_pool = {r: by_rel[r] for r in split.val_relations}
        test_pool = {r: by_rel[r] for r in split.test_relations}
        n_val = min(n_way, len(val_pool))
        n_test = min(n_way, len(test_pool))
        val_accs.append(evaluate_episodes(scorer, val_pool, n_val, k_shot, q_query,
                                          iterations, seed + fold).accuracy)
        test_accs.append(evaluate_episodes(scorer, test_pool, n_test, k_shot, q_query,
                                           iterations, seed + 100 + fold).accuracy)
    val_mean, val_std = mean_std(val_accs)
    test_mean, test_std = mean_std(test_accs)
    return CvResult(val_accs, test_accs, val_mean, val_std, test_mean, test_std)


def context_key(inst: RcInstance, window: int = 2) -> str:
    """Relation-context signature: tokens between and around the entity
    spans, with entity surfaces masked to HEAD/TAIL placeholders."""
    spans = sorted(
        [(inst.head_span, HEAD_MASK), (inst.tail_span, TAIL_MASK)],
        key=lambda x: x[0][0])
    (s1, e1), m1 = spans[0]
    (s2, e2), m2 = spans[1]
    parts = (inst.tokens[max(0, s1 - window):s1] + [m1]
             + inst.tokens[e1:s2] + [m2]
             + inst.tokens[e2:e2 + window])
    return " ".join(parts)


class CosineContextScorer:
    """Default scorer: cosine similarity of masked-context feature vectors."""

    def __init__(self, provider: EncoderProvider, window: int = 2,
                 max_tokens: int = DEFAULT_PAIR_CAP):
        self.provider = provider
        self.window = window
        self.max_tokens = max_tokens

    def score(self, query: RcInstance, support: RcInstance) -> float:
        vecs = embed([context_key(query, self.window),
                      context_key(support, self.window)], self.provider)
        norms = np.linalg.norm(vecs, axis=1)
        if norms[0] == 0 or norms[1] == 0:
            return 0.0
        return float(vecs[0] @ vecs[1] / (norms[0] * norms[1]))


def default_scorer(provider: EncoderProvider) -> CosineContextScorer:
    if provider is None:
        raise EncoderUnavailable("no encoder provider for the default scorer")
    return CosineContextScorer(provider)


class OracleScorer:
    """Test scorer: 1 when the two instances share a gold relation, else 0."""

    max_tokens = DEFAULT_PAIR_CAP

    def score(self, query: RcInstance, support: RcInstance) -> float:
        return 1.0 if query.relation == support.relation else 0.0


class ConstantScorer:
    def __init__(self, value: float = 0.0):
        self.value = value
        self.max_tokens = DEFAULT_PAIR_CAP

    def score(self, query: RcInstance, support: RcInstance) -> float:
        return self.value


class TableScorer:
    """Scores 1 when a context-key table assigns the query's context the
    support instance's relation. Lets tests plant exact gold labels."""

    def __init__(self, table: Mapping[str, str], window: int = 2,
                 max_tokens: int = DEFAULT_PAIR_CAP):
        self.table = dict(table)
        self.window = window
        self.max_tokens = max_tokens

    @classmethod
    def from_file(cls, path) -> "TableScorer":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    def score(self, query: RcInstance, support: RcInstance) -> float:
        return 1.0 if self.table.get(context_key(query, self.window)) == support.relation \
            else 0.0


class ExternalScorer:
    """Line-delimited JSON protocol over a subprocess: one request per line
    {"query": ..., "support": ...} -> one response line {"score": s}."""

    def __init__(self, command: Sequence[str], max_tokens: int = DEFAULT_PAIR_CAP):
        self.command = list(command)
        self.max_tokens = max_tokens
        self._proc: subprocess.Popen | None = None

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, bufsize=1)
        return self._proc

    def score(self, query: RcInstance, support: RcInstance) -> float:
        proc = self._ensure()
        request = json.dumps({"query": query.to_json(), "support": support.to_json()},
                             sort_keys=True)
        assert proc.stdin and proc.stdout
        proc.stdin.write(request + "\n")
        proc.stdin.flush()
        line = proc.stdout.readline()
        if not line:
            raise EncoderUnavailable("external scorer closed its output stream")
        return float(json.loads(line)["score"])

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            self._proc.stdin.close()  # type: ignore[union-attr]
            self._proc.wait(timeout=5)


def make_scorer(spec: str, provider: EncoderProvider | None = None) -> PairScorer:
    """Build a scorer from a CLI spec: 'default', 'table:<path>', 'external:<cmd>'."""
    if spec == "default":
        return default_scorer(provider)
    if spec.startswith("table:"):
        return TableScorer.from_file(spec[len("table:"):])
    if spec.startswith("external:"):
        import shlex
        return ExternalScorer(shlex.split(spec[len("external:"):]))
    raise ValueError(f"unknown scorer spec: {spec!r}")
