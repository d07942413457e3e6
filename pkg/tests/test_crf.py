import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpuskg.crf import (BIO_LABELS, END, L, START, CrfModel, TrainConfig, apply_bio_constraints,
                          emissions, entity_spans, evaluate, f1_score, forward_backward,
                          gradient, kfold, log_partition, lr_preset, mean_nll, mean_std,
                          new_model, nll_loss, path_score, tag, train, viterbi_decode)
from corpuskg.dataset import NerInstance, bio_valid
from corpuskg.encoders import TableProvider
from corpuskg.errors import DimensionMismatch, InvalidGold, InvalidK


def random_scores(T, seed, constrain=False):
    """Random emissions/transitions for a T-token sequence."""
    rng = np.random.default_rng(seed)
    e = rng.normal(size=(T, L))
    trans = rng.normal(size=(L + 2, L + 2))
    trans[:, START] = -np.inf
    trans[END, :] = -np.inf
    if constrain:
        apply_bio_constraints(trans)
    return e, trans


def all_paths(T):
    return itertools.product(range(L), repeat=T)


class TestPartitionOracle:
    def test_matches_enumeration(self):
        for T in (1, 2, 3, 4):
            for seed in range(5):
                e, trans = random_scores(T, seed)
                scores = [path_score(e, trans, p) for p in all_paths(T)]
                oracle = math.log(sum(math.exp(s) for s in scores))
                assert log_partition(e, trans) == pytest.approx(oracle, abs=1e-10)

    def test_constrained_paths_excluded(self):
        e, trans = random_scores(3, 0, constrain=True)
        finite = [path_score(e, trans, p) for p in all_paths(3)
                  if math.isfinite(path_score(e, trans, p))]
        oracle = math.log(sum(math.exp(s) for s in finite))
        assert log_partition(e, trans) == pytest.approx(oracle, abs=1e-10)

    def test_single_token(self):
        e, trans = random_scores(1, 3)
        oracle = math.log(sum(
            math.exp(trans[START, y] + e[0, y] + trans[y, END]) for y in range(L)))
        assert log_partition(e, trans) == pytest.approx(oracle, abs=1e-12)


class TestNll:
    def test_probabilities_normalize(self):
        for T in (1, 2, 3, 4):
            e, trans = random_scores(T, T + 10)
            total = sum(
                math.exp(-nll_loss(e, trans, [BIO_LABELS[i] for i in p], validate=False))
                for p in all_paths(T))
            assert total == pytest.approx(1.0, abs=1e-10)

    def test_nonnegative(self):
        rng = np.random.default_rng(2)
        for trial in range(20):
            T = int(rng.integers(1, 7))
            e, trans = random_scores(T, trial + 50)
            labels = ["O"] * T
            labels[0] = "B"
            assert nll_loss(e, trans, labels) >= -1e-10

    def test_invalid_gold_rejected(self):
        e, trans = random_scores(2, 0)
        with pytest.raises(InvalidGold):
            nll_loss(e, trans, ["O", "I"])
        with pytest.raises(InvalidGold):
            nll_loss(e, trans, ["B", "Q"], validate=False)


class TestViterbiOracle:
    def test_matches_enumeration(self):
        for T in range(1, 7):
            for seed in range(5):
                e, trans = random_scores(T, 100 * T + seed)
                best_path = max(all_paths(T), key=lambda p: path_score(e, trans, p))
                decoded = viterbi_decode(e, trans)
                assert decoded == [BIO_LABELS[i] for i in best_path]

    def test_constrained_output_bio_valid(self):
        rng = np.random.default_rng(4)
        for trial in range(50):
            T = int(rng.integers(1, 10))
            e, trans = random_scores(T, trial + 200, constrain=True)
            assert bio_valid(viterbi_decode(e, trans))

    def test_tie_break_lowest_index(self):
        # all-zero scores: every path ties, decode picks label index 0 everywhere
        e = np.zeros((3, L))
        trans = np.zeros((L + 2, L + 2))
        trans[:, START] = -np.inf
        trans[END, :] = -np.inf
        assert viterbi_decode(e, trans) == ["B", "B", "B"]


class TestForwardBackward:
    def test_unary_matches_enumeration(self):
        T = 4
        e, trans = random_scores(T, 9)
        scores = {p: math.exp(path_score(e, trans, p)) for p in all_paths(T)}
        Z = sum(scores.values())
        unary, pairwise, start_marg, end_marg = forward_backward(e, trans)
        for t in range(T):
            for y in range(L):
                oracle = sum(v for p, v in scores.items() if p[t] == y) / Z
                assert unary[t, y] == pytest.approx(oracle, abs=1e-10)
        for t in range(T - 1):
            for a in range(L):
                for b in range(L):
                    oracle = sum(v for p, v in scores.items()
                                 if p[t] == a and p[t + 1] == b) / Z
                    assert pairwise[t, a, b] == pytest.approx(oracle, abs=1e-10)
        for y in range(L):
            first = sum(v for p, v in scores.items() if p[0] == y) / Z
            last = sum(v for p, v in scores.items() if p[-1] == y) / Z
            assert start_marg[y] == pytest.approx(first, abs=1e-10)
            assert end_marg[y] == pytest.approx(last, abs=1e-10)

    def test_marginals_sum_to_one(self):
        e, trans = random_scores(5, 17, constrain=True)
        unary, pairwise, start_marg, end_marg = forward_backward(e, trans)
        assert np.allclose(unary.sum(axis=1), 1.0)
        assert np.allclose(pairwise.sum(axis=(1, 2)), 1.0)
        assert start_marg.sum() == pytest.approx(1.0)
        assert end_marg.sum() == pytest.approx(1.0)


class TestGradient:
    def finite_difference(self, model, X, labels, h=1e-5):
        e = emissions(X, model)
        base_args = (e, model.transitions, labels)

        def loss_with(weights, transitions):
            return nll_loss(X @ weights, transitions, labels)

        num_w = np.zeros_like(model.weights)
        for i in range(model.weights.shape[0]):
            for j in range(model.weights.shape[1]):
                wp = model.weights.copy()
                wm = model.weights.copy()
                wp[i, j] += h
                wm[i, j] -= h
                num_w[i, j] = (loss_with(wp, model.transitions)
                               - loss_with(wm, model.transitions)) / (2 * h)
        num_t = np.zeros_like(model.transitions)
        for i in range(L + 2):
            for j in range(L + 2):
                if not np.isfinite(model.transitions[i, j]):
                    continue
                tp = model.transitions.copy()
                tm = model.transitions.copy()
                tp[i, j] += h
                tm[i, j] -= h
                num_t[i, j] = (loss_with(model.weights, tp)
                               - loss_with(model.weights, tm)) / (2 * h)
        return num_w, num_t

    def check(self, seed, constrain):
        rng = np.random.default_rng(seed)
        d, T = 5, 4
        model = new_model(d, seed=seed, scale=0.5, dropout_rate=0.0,
                          constrain_bio=constrain)
        X = rng.normal(size=(T, d))
        labels = ["B", "I", "O", "B"]
        aw, at = gradient(model, X, labels)
        nw, nt = self.finite_difference(model, X, labels)
        scale_w = max(np.abs(nw).max(), 1.0)
        scale_t = max(np.abs(nt).max(), 1.0)
        assert np.abs(aw - nw).max() / scale_w <= 1e-4
        assert np.abs(at - nt).max() / scale_t <= 1e-4

    def test_unconstrained(self):
        for seed in range(3):
            self.check(seed, constrain=False)

    def test_constrained(self):
        for seed in range(3):
            self.check(seed, constrain=True)

    def test_constrained_entries_zero(self):
        model = new_model(4, seed=0, constrain_bio=True)
        X = np.random.default_rng(0).normal(size=(3, 4))
        _, dt = gradient(model, X, ["B", "I", "O"])
        assert (dt[~np.isfinite(model.transitions)] == 0).all()


class TestEmissions:
    def test_linear_layer(self):
        model = new_model(4, seed=1, dropout_rate=0.0)
        X = np.random.default_rng(1).normal(size=(6, 4))
        assert np.allclose(emissions(X, model), X @ model.weights)

    def test_inference_ignores_dropout(self):
        model = new_model(4, seed=1, dropout_rate=0.5)
        X = np.ones((3, 4))
        assert np.allclose(emissions(X, model, training=False), X @ model.weights)

    def test_training_dropout_zeroes_features(self):
        model = new_model(50, seed=1, dropout_rate=0.5)
        X = np.ones((4, 50))
        rng = np.random.default_rng(0)
        keep = 1.0 - model.dropout_rate
        mask = rng.random(X.shape) < keep
        expected = (X * mask / keep) @ model.weights
        got = emissions(X, model, training=True, rng=np.random.default_rng(0))
        assert np.allclose(got, expected)

    def test_dimension_mismatch(self):
        model = new_model(4, seed=0)
        with pytest.raises(DimensionMismatch):
            emissions(np.ones((3, 5)), model)


class TestEntitySpans:
    def test_examples(self):
        assert entity_spans(["B", "I", "O", "B"]) == {(0, 2), (3, 4)}
        assert entity_spans(["O", "O"]) == set()
        assert entity_spans(["B", "B"]) == {(0, 1), (1, 2)}
        assert entity_spans([]) == set()

    @settings(max_examples=300, deadline=None)
    @given(st.lists(st.sampled_from(["B", "I", "O"]), max_size=15))
    def test_spans_tile_b_runs(self, labels):
        spans = entity_spans(labels)
        # every span starts with B and continues with I until its end
        for s, e in spans:
            assert labels[s] == "B"
            assert all(labels[i] == "I" for i in range(s + 1, e))
        # every B opens exactly one span
        assert len(spans) == sum(1 for lab in labels if lab == "B")


class TestMetricArithmetic:
    def test_f1_known_values(self):
        assert f1_score(71.48, 77.24) == pytest.approx(74.25, abs=0.01)
        assert f1_score(69.15, 64.36) == pytest.approx(66.67, abs=0.01)
        assert f1_score(0.0, 0.0) == 0.0
        assert f1_score(1.0, 1.0) == 1.0

    def test_mean_std_known_values(self):
        folds = [91.62, 91.26, 91.82, 92.14, 92.24]
        mean, std = mean_std(folds)
        assert mean == pytest.approx(91.82, abs=0.01)
        assert std == pytest.approx(0.40, abs=0.01)

    def test_mean_std_matches_numpy(self):
        rng = np.random.default_rng(0)
        vals = rng.normal(size=11).tolist()
        mean, std = mean_std(vals)
        assert mean == pytest.approx(float(np.mean(vals)))
        assert std == pytest.approx(float(np.std(vals, ddof=1)))

    def test_single_value_std_zero(self):
        assert mean_std([4.0]) == (4.0, 0.0)


def separable_dataset():
    """Token identity fully determines the label, with one-hot encodings."""
    vocab = {
        "Bcem": "B", "Bash": "B", "Islag": "I", "Icure": "I",
        "the": "O", "improves": "O", "fast": "O", ".": "O",
    }
    table = {tok: np.eye(len(vocab))[i].tolist() for i, tok in enumerate(vocab)}
    provider = TableProvider(table)
    patterns = [
        ["Bcem", "Islag", "improves", "fast", "."],
        ["the", "Bash", "Icure", "improves", "Bcem", "."],
        ["Bash", "improves", "the", "Bcem", "Islag", "."],
        ["the", "Bcem", "."],
        ["Bash", "Icure", "Islag", "improves", "fast", "."],
    ]
    insts = []
    for p in patterns * 4:
        labels = [vocab[t] for t in p]
        spans = sorted(entity_spans(labels))
        inst = NerInstance(list(p), labels, spans[0], spans[-1])
        inst.validate()
        insts.append(inst)
    return insts, provider


class TestTraining:
    def test_loss_decreases_and_f1_perfect(self):
        insts, provider = separable_dataset()
        config = TrainConfig(learning_rate=lr_preset(), epochs=60, seed=0,
                             dropout_rate=0.0)
        result = train(insts, provider, config)
        assert result.train_losses[-1] < result.train_losses[0]
        metrics = evaluate(result.model, insts, provider)
        assert metrics.entity_f1 == pytest.approx(1.0)
        assert metrics.token_accuracy == pytest.approx(1.0)

    def test_validation_losses_recorded(self):
        insts, provider = separable_dataset()
        config = TrainConfig(learning_rate=lr_preset(), epochs=3, seed=0)
        result = train(insts, provider, config, validation=insts[:4])
        assert len(result.val_losses) == 3
        assert result.val_losses[-1] == pytest.approx(
            mean_nll(result.model, insts[:4], provider))

    def test_deterministic(self):
        insts, provider = separable_dataset()
        config = TrainConfig(learning_rate=lr_preset(), epochs=2, seed=7)
        a = train(insts, provider, config)
        b = train(insts, provider, config)
        assert a.train_losses == b.train_losses
        assert np.array_equal(a.model.weights, b.model.weights)

    def test_empty_rejected(self):
        _, provider = separable_dataset()
        with pytest.raises(InvalidGold):
            train([], provider)

    def test_tag_empty(self):
        insts, provider = separable_dataset()
        model = new_model(provider.dim, seed=0)
        assert tag(model, [], provider) == []

    def test_tagged_output_bio_valid(self):
        insts, provider = separable_dataset()
        model = new_model(provider.dim, seed=3, constrain_bio=True)
        for inst in insts[:5]:
            assert bio_valid(tag(model, inst.tokens, provider))


class TestSaveLoad:
    def test_round_trip(self, tmp_path):
        model = new_model(6, seed=2, constrain_bio=True, encoder_id="table")
        path = tmp_path / "model.json"
        model.save(path)
        loaded = CrfModel.load(path)
        assert np.array_equal(loaded.weights, model.weights)
        assert np.array_equal(loaded.transitions, model.transitions)
        assert loaded.encoder_id == "table"
        assert loaded.labels == BIO_LABELS


class TestKfold:
    def test_fold_sizes_and_aggregates(self):
        insts, provider = separable_dataset()  # 20 instances
        config = TrainConfig(learning_rate=lr_preset(), epochs=20, seed=0,
                             dropout_rate=0.0)
        result = kfold(insts, provider, k=5, seed=0, config=config)
        assert len(result.fold_metrics) == 5
        f1s = [m.entity_f1 for m in result.fold_metrics]
        mean, std = mean_std(f1s)
        assert result.mean.entity_f1 == pytest.approx(mean)
        assert result.std.entity_f1 == pytest.approx(std)

    def test_remainder_to_earliest_folds(self):
        # spy on fold sizes via a tiny run: 7 instances, k=3 -> sizes 3,2,2
        insts, provider = separable_dataset()
        config = TrainConfig(learning_rate=lr_preset(), epochs=1, seed=0)
        result = kfold(insts[:7], provider, k=3, seed=0, config=config)
        assert len(result.fold_metrics) == 3

    def test_invalid_k(self):
        insts, provider = separable_dataset()
        with pytest.raises(InvalidK):
            kfold(insts[:3], provider, k=1)
        with pytest.raises(InvalidK):
            kfold(insts[:3], provider, k=4)
