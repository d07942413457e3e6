"""Linear-chain CRF tagger over pluggable token encodings.

Emission scores come from a linear layer on top of an encoder provider;
transition scores include virtual start/end states. Training maximizes the
log-likelihood of gold BIO sequences (Adam); decoding is Viterbi.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset import BIO_LABELS, NerInstance, bio_valid
from .encoders import EncoderProvider, embed
from .errors import (DimensionMismatch, InvalidGold, InvalidK, TrainingDiverged)

L = len(BIO_LABELS)       # B, I, O
B_IDX, I_IDX, O_IDX = 0, 1, 2
START, END = L, L + 1
NEG_INF = -np.inf


@dataclass
class CrfModel:
    weights: np.ndarray               # (d, L) emission weights
    transitions: np.ndarray           # (L+2, L+2), START/END rows/cols
    dropout_rate: float = 0.1
    encoder_id: str = ""
    labels: tuple[str, ...] = BIO_LABELS
    seed: int = 0

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    def save(self, path) -> None:
        obj = {
            "labels": list(self.labels),
            "weights": self.weights.tolist(),
            "transitions": [[None if t == NEG_INF else t for t in row]
                            for row in self.transitions.tolist()],
            "dropout_rate": self.dropout_rate,
            "encoder_id": self.encoder_id,
            "seed": self.seed,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(obj, fh, sort_keys=True)

    @classmethod
    def load(cls, path) -> "CrfModel":
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        trans = np.array([[NEG_INF if t is None else t for t in row]
                          for row in obj["transitions"]])
        return cls(weights=np.array(obj["weights"]), transitions=trans,
                   dropout_rate=obj["dropout_rate"], encoder_id=obj["encoder_id"],
                   labels=tuple(obj["labels"]), seed=obj.get("seed", 0))


def new_model(dim: int, seed: int = 0, scale: float = 0.01, dropout_rate: float = 0.1,
              encoder_id: str = "", constrain_bio: bool = True) -> CrfModel:
    rng = np.random.default_rng(seed)
    weights = rng.normal(0.0, scale, size=(dim, L))
    transitions = rng.normal(0.0, scale, size=(L + 2, L + 2))
    transitions[:, START] = NEG_INF
    transitions[END, :] = NEG_INF
    if constrain_bio:
        apply_bio_constraints(transitions)
    return CrfModel(weights=weights, transitions=transitions, dropout_rate=dropout_rate,
                    encoder_id=encoder_id, seed=seed)


def apply_bio_constraints(transitions: np.ndarray) -> None:
    """Forbid O->I and start->I so decoded sequences are always BIO-valid."""
    transitions[O_IDX, I_IDX] = NEG_INF
    transitions[START, I_IDX] = NEG_INF


def labels_to_indices(labels: Sequence[str]) -> list[int]:
    try:
        return [BIO_LABELS.index(lab) for lab in labels]
    except ValueError:
        raise InvalidGold(f"unknown label in {labels!r}")


def emissions(token_vectors: np.ndarray, model: CrfModel,
              training: bool = False, rng: np.random.Generator | None = None) -> np.ndarray:
    """T x L emission scores: linear layer over (optionally dropped-out) encodings."""
    X = np.asarray(token_vectors, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.dim:
        raise DimensionMismatch(
            f"encoder dim {X.shape[-1] if X.ndim == 2 else '?'} != model dim {model.dim}")
    if training and model.dropout_rate > 0:
        if rng is None:
            rng = np.random.default_rng(model.seed)
        keep = 1.0 - model.dropout_rate
        mask = rng.random(X.shape) < keep
        X = X * mask / keep
    return X @ model.weights


def _logsumexp(a: np.ndarray, axis=None) -> np.ndarray:
    amax = np.max(a, axis=axis, keepdims=True)
    amax_safe = np.where(np.isfinite(amax), amax, 0.0)
    out = np.log(np.sum(np.exp(a - amax_safe), axis=axis)) + np.squeeze(amax_safe, axis=axis)
    return np.where(np.isfinite(np.squeeze(amax, axis=axis)), out, -np.inf)


def log_partition(emission_scores: np.ndarray, transitions: np.ndarray) -> float:
    """Forward algorithm in log space over all label paths incl. start/end
    transitions."""
    T = emission_scores.shape[0]
    alpha = transitions[START, :L] + emission_scores[0]
    for t in range(1, T):
        alpha = _logsumexp(alpha[:, None] + transitions[:L, :L], axis=0) + emission_scores[t]
    return float(_logsumexp(alpha + transitions[:L, END], axis=0))


def path_score(emission_scores: np.ndarray, transitions: np.ndarray,
               label_idx: Sequence[int]) -> float:
    score = transitions[START, label_idx[0]] + emission_scores[0, label_idx[0]]
    for t in range(1, len(label_idx)):
        score += transitions[label_idx[t - 1], label_idx[t]] + emission_scores[t, label_idx[t]]
    score += transitions[label_idx[-1], END]
    return float(score)


def nll_loss(emission_scores: np.ndarray, transitions: np.ndarray,
             gold_labels: Sequence[str], validate: bool = True) -> float:
    """Negative log-likelihood of the gold path; >= 0 up to float rounding."""
    if validate and not bio_valid(gold_labels):
        raise InvalidGold(f"gold labels not BIO-valid: {gold_labels!r}")
    idx = labels_to_indices(gold_labels)
    return log_partition(emission_scores, transitions) - path_score(
        emission_scores, transitions, idx)


def forward_backward(emission_scores: np.ndarray,
                     transitions: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Log-space marginals: returns (unary (T,L), pairwise (T-1,L,L),
    start (L,), end (L,)) probabilities."""
    T = emission_scores.shape[0]
    alphas = np.empty((T, L))
    alphas[0] = transitions[START, :L] + emission_scores[0]
    for t in range(1, T):
        alphas[t] = _logsumexp(alphas[t - 1][:, None] + transitions[:L, :L], axis=0) \
            + emission_scores[t]
    betas = np.empty((T, L))
    betas[T - 1] = transitions[:L, END]
    for t in range(T - 2, -1, -1):
        betas[t] = _logsumexp(transitions[:L, :L] + emission_scores[t + 1][None, :]
                              + betas[t + 1][None, :], axis=1)
    logZ = _logsumexp(alphas[T - 1] + betas[T - 1], axis=0)

    unary = np.exp(alphas + betas - logZ)
    pairwise = np.zeros((max(T - 1, 0), L, L))
    for t in range(T - 1):
        joint = alphas[t][:, None] + transitions[:L, :L] \
            + emission_scores[t + 1][None, :] + betas[t + 1][None, :]
        pairwise[t] = np.exp(joint - logZ)
    start_marg = np.exp(transitions[START, :L] + emission_scores[0] + betas[0] - logZ)
    end_marg = np.exp(alphas[T - 1] + transitions[:L, END] - logZ)
    return unary, pairwise, start_marg, end_marg


def gradient(model: CrfModel, token_vectors: np.ndarray, gold_labels: Sequence[str],
             emission_scores: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of the NLL wrt (weights, transitions): expected minus
    observed sufficient statistics."""
    X = np.asarray(token_vectors, dtype=float)
    if emission_scores is None:
        emission_scores = emissions(X, model)
    idx = labels_to_indices(gold_labels)
    T = X.shape[0]
    unary, pairwise, start_marg, end_marg = forward_backward(emission_scores, model.transitions)

    d_emis = unary.copy()
    for t, lab in enumerate(idx):
        d_emis[t, lab] -= 1.0
    d_weights = X.T @ d_emis

    d_trans = np.zeros_like(model.transitions)
    d_trans[:L, :L] = pairwise.sum(axis=0)
    d_trans[START, :L] = start_marg
    d_trans[:L, END] = end_marg
    d_trans[START, idx[0]] -= 1.0
    for t in range(1, T):
        d_trans[idx[t - 1], idx[t]] -= 1.0
    d_trans[idx[-1], END] -= 1.0
    # constrained (-inf) transitions are not parameters
    d_trans[~np.isfinite(model.transitions)] = 0.0
    return d_weights, d_trans


def viterbi_decode(emission_scores: np.ndarray, transitions: np.ndarray) -> list[str]:
    """Best-scoring label path; ties broken toward the lower label index."""
    T = emission_scores.shape[0]
    delta = transitions[START, :L] + emission_scores[0]
    psi = np.zeros((T, L), dtype=int)
    for t in range(1, T):
        cand = delta[:, None] + transitions[:L, :L]
        psi[t] = np.argmax(cand, axis=0)
        delta = cand[psi[t], np.arange(L)] + emission_scores[t]
    final = delta + transitions[:L, END]
    best = int(np.argmax(final))
    path = [best]
    for t in range(T - 1, 0, -1):
        best = int(psi[t][best])
        path.append(best)
    path.reverse()
    return [BIO_LABELS[i] for i in path]


@dataclass
class TagMetrics:
    token_accuracy: float
    entity_precision: float
    entity_recall: float
    entity_f1: float

    def as_dict(self) -> dict:
        return {"token_accuracy": self.token_accuracy,
                "entity_precision": self.entity_precision,
                "entity_recall": self.entity_recall,
                "entity_f1": self.entity_f1}


def f1_score(precision: float, recall: float) -> float:
    if precision + recall <= 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def entity_spans(labels: Sequence[str]) -> set[tuple[int, int]]:
    """Maximal B I* runs as [start, end) spans."""
    spans = set()
    start = None
    for i, lab in enumerate(labels):
        if lab == "B":
            if start is not None:
                spans.add((start, i))
            start = i
        elif lab == "O":
            if start is not None:
                spans.add((start, i))
                start = None
    if start is not None:
        spans.add((start, len(labels)))
    return spans


@dataclass
class TrainConfig:
    batch_size: int = 16
    learning_rate: float = 5e-8       # faithful default; use lr_preset() for desk scale
    epochs: int = 50
    seed: int = 0
    dropout_rate: float = 0.1
    constrain_bio: bool = True
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8


def lr_preset() -> float:
    """Practical learning rate for the linear+CRF model (no encoder fine-tuning)."""
    return 1e-3


@dataclass
class TrainResult:
    model: CrfModel
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)


def _encode_tokens(inst: NerInstance, provider: EncoderProvider) -> np.ndarray:
    return embed(inst.tokens, provider)


def mean_nll(model: CrfModel, instances: Sequence[NerInstance],
             provider: EncoderProvider) -> float:
    total = 0.0
    for inst in instances:
        e = emissions(_encode_tokens(inst, provider), model)
        total += nll_loss(e, model.transitions, inst.labels)
    return total / max(len(instances), 1)


def train(instances: Sequence[NerInstance], provider: EncoderProvider,
          config: TrainConfig | None = None,
          validation: Sequence[NerInstance] | None = None) -> TrainResult:
    """Minimize mean NLL with Adam. Deterministic given config.seed."""
    if not instances:
        raise InvalidGold("empty training set")
    config = config or TrainConfig()
    model = new_model(provider.dim, seed=config.seed, dropout_rate=config.dropout_rate,
                      encoder_id=provider.provider_id, constrain_bio=config.constrain_bio)
    encodings = [_encode_tokens(inst, provider) for inst in instances]

    m_w = np.zeros_like(model.weights)
    v_w = np.zeros_like(model.weights)
    m_t = np.zeros_like(model.transitions)
    v_t = np.zeros_like(model.transitions)
    finite_mask = np.isfinite(model.transitions)
    rng = np.random.default_rng(config.seed)
    step = 0
    result = TrainResult(model=model)

    for epoch in range(config.epochs):
        order = rng.permutation(len(instances))
        epoch_loss = 0.0
        for batch_start in range(0, len(order), config.batch_size):
            batch = order[batch_start:batch_start + config.batch_size]
            g_w = np.zeros_like(model.weights)
            g_t = np.zeros_like(model.transitions)
            batch_loss = 0.0
            for i in batch:
                e = emissions(encodings[i], model, training=True, rng=rng)
                batch_loss += nll_loss(e, model.transitions, instances[i].labels)
                dw, dt = gradient(model, encodings[i], instances[i].labels,
                                  emission_scores=e)
                g_w += dw
                g_t += dt
            g_w /= len(batch)
            g_t /= len(batch)
            epoch_loss += batch_loss

            step += 1
            b1, b2 = config.adam_beta1, config.adam_beta2
            m_w = b1 * m_w + (1 - b1) * g_w
            v_w = b2 * v_w + (1 - b2) * g_w ** 2
            m_t = b1 * m_t + (1 - b1) * g_t
            v_t = b2 * v_t + (1 - b2) * g_t ** 2
            mw_hat = m_w / (1 - b1 ** step)
            vw_hat = v_w / (1 - b2 ** step)
            mt_hat = m_t / (1 - b1 ** step)
            vt_hat = v_t / (1 - b2 ** step)
            model.weights -= config.learning_rate * mw_hat / (np.sqrt(vw_hat) + config.adam_eps)
            update_t = config.learning_rate * mt_hat / (np.sqrt(vt_hat) + config.adam_eps)
            model.transitions[finite_mask] -= update_t[finite_mask]

        epoch_mean = epoch_loss / len(instances)
        if not math.isfinite(epoch_mean):
            raise TrainingDiverged(f"non-finite loss at epoch {epoch}")
        result.train_losses.append(epoch_mean)
        if validation is not None:
            result.val_losses.append(mean_nll(model, validation, provider))
    return result


def tag(model: CrfModel, tokens: Sequence[str], provider: EncoderProvider) -> list[str]:
    if not tokens:
        return []
    e = emissions(embed(list(tokens), provider), model)
    return viterbi_decode(e, model.transitions)


def evaluate(model: CrfModel, instances: Sequence[NerInstance],
             provider: EncoderProvider) -> TagMetrics:
    """Token accuracy plus exact-span entity precision/recall/F1."""
    correct_tokens = total_tokens = 0
    pred_entities = gold_entities = correct_entities = 0
    for inst in instances:
        pred = tag(model, inst.tokens, provider)
        correct_tokens += sum(p == g for p, g in zip(pred, inst.labels))
        total_tokens += len(inst.labels)
        p_spans = entity_spans(pred)
        g_spans = entity_spans(inst.labels)
        pred_entities += len(p_spans)
        gold_entities += len(g_spans)
        correct_entities += len(p_spans & g_spans)
    acc = correct_tokens / total_tokens if total_tokens else 0.0
    prec = correct_entities / pred_entities if pred_entities else 0.0
    rec = correct_entities / gold_entities if gold_entities else 0.0
    return TagMetrics(acc, prec, rec, f1_score(prec, rec))


def mean_std(values: Sequence[float]) -> tuple[float, float]:
    """Mean and sample (n-1) standard deviation."""
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var)


@dataclass
class KfoldResult:
    fold_metrics: list[TagMetrics]
    mean: TagMetrics
    std: TagMetrics


def kfold(instances: Sequence[NerInstance], provider: EncoderProvider, k: int = 5,
          seed: int = 0, config: TrainConfig | None = None) -> KfoldResult:
    """k-fold cross-validation; remainder instances go to the earliest folds."""
    n = len(instances)
    if k > n or k < 2:
        raise InvalidK(f"k={k} invalid for {n} instances")
    rng = random.Random(seed)
    order = list(range(n))
    rng.shuffle(order)
    base, extra = divmod(n, k)
    folds = []
    pos = 0
    for f in range(k):
        size = base + (1 if f < extra else 0)
        folds.append(order[pos:pos + size])
        pos += size

    fold_metrics = []
    for f in range(k):
        val_idx = set(folds[f])
        train_set = [instances[i] for i in order if i not in val_idx]
        val_set = [instances[i] for i in folds[f]]
        result = train(train_set, provider, config)
        fold_metrics.append(evaluate(result.model, val_set, provider))

    def agg(fn):
        return TagMetrics(*[fn([getattr(m, name) for m in fold_metrics])
                            for name in ("token_accuracy", "entity_precision",
                                         "entity_recall", "entity_f1")])
    means = agg(lambda vals: mean_std(vals)[0])
    stds = agg(lambda vals: mean_std(vals)[1])
    return KfoldResult(fold_metrics=fold_metrics, mean=means, std=stds)
