import json
import math
import sys

import pytest

from corpuskg.dataset import RcInstance, sample_episode
from corpuskg.errors import EncoderUnavailable, IncompleteSupport
from corpuskg.fewshot import (ConstantScorer, CosineContextScorer, ExternalScorer,
                              OracleScorer, TableScorer, context_key, default_scorer,
                              evaluate_episode, evaluate_episodes, make_scorer, predict,
                              rotation_cv)
from corpuskg.encoders import TableProvider


def rc(relation, i=0, tokens=None):
    tokens = tokens or ["h", str(i), "x", "t", str(i)]
    return RcInstance(tokens, (0, 1), (3, 4), relation)


def make_pool(n_relations, per_relation):
    return {f"r{i + 1}": [rc(f"r{i + 1}", j) for j in range(per_relation)]
            for i in range(n_relations)}


class ByRelationScorer:
    """Scores every pair by the support instance's relation."""

    max_tokens = 128

    def __init__(self, values):
        self.values = values

    def score(self, query, support):
        return self.values[support.relation]


class TestPredict:
    def test_averages_k_scores(self):
        class PerInstance:
            max_tokens = 128

            def score(self, query, support):
                return float(support.tokens[1])

        support = {"a": [rc("a", 2), rc("a", 4)], "b": [rc("b", 10)]}
        pred = predict(rc("a", 0), support, PerInstance())
        assert pred.per_relation_scores == {"a": 3.0, "b": 10.0}
        assert pred.relation == "b"
        assert pred.score == 10.0

    def test_highest_mean_wins(self):
        values = {"improve": 4.2, "lead_to": 8.6, "assess": 5.9, "made_of": 2.5}
        support = {r: [rc(r, j) for j in range(3)] for r in values}
        pred = predict(rc("lead_to"), support, ByRelationScorer(values))
        assert pred.relation == "lead_to"
        assert pred.score == pytest.approx(8.6)

    def test_tie_goes_to_first_relation(self):
        support = {"second": [rc("second")], "first": [rc("first")]}
        pred = predict(rc("x"), support, ConstantScorer(0.5))
        assert pred.relation == "second"

    def test_empty_support_rejected(self):
        with pytest.raises(IncompleteSupport):
            predict(rc("x"), {"a": []}, ConstantScorer())

    def test_monotone_transform_preserves_argmax_at_k1(self):
        values = {"a": 0.1, "b": 0.7, "c": 0.4}
        support = {r: [rc(r)] for r in values}

        class Transformed:
            max_tokens = 128

            def __init__(self, fn):
                self.fn = fn

            def score(self, query, sup):
                return self.fn(values[sup.relation])

        base = predict(rc("q"), support, Transformed(lambda x: x))
        for fn in (lambda x: 2 * x + 1, math.tanh, lambda x: x ** 3):
            assert predict(rc("q"), support, Transformed(fn)).relation == base.relation

    def test_support_order_invariant(self):
        class PerInstance:
            max_tokens = 128

            def score(self, query, support):
                return float(support.tokens[1])

        forward = {"a": [rc("a", 1), rc("a", 5)], "b": [rc("b", 2)]}
        backward = {"a": [rc("a", 5), rc("a", 1)], "b": [rc("b", 2)]}
        assert predict(rc("q"), forward, PerInstance()).per_relation_scores == \
            predict(rc("q"), backward, PerInstance()).per_relation_scores

    def test_long_pair_truncated_with_warning(self):
        seen = {}

        class Recorder:
            max_tokens = 16

            def score(self, query, support):
                seen["lens"] = (len(query.tokens), len(support.tokens))
                return 0.0

        long_q = RcInstance(["w"] * 40, (0, 1), (2, 3), "a")
        long_s = RcInstance(["v"] * 40, (0, 1), (2, 3), "a")
        with pytest.warns(UserWarning):
            predict(long_q, {"a": [long_s]}, Recorder())
        assert sum(seen["lens"]) <= 16

    def test_short_pair_untouched(self):
        seen = {}

        class Recorder:
            max_tokens = 128

            def score(self, query, support):
                seen["tokens"] = (query.tokens, support.tokens)
                return 0.0

        q, s = rc("a", 1), rc("a", 2)
        predict(q, {"a": [s]}, Recorder())
        assert seen["tokens"] == (q.tokens, s.tokens)


class TestEpisodeEvaluation:
    def test_oracle_scorer_perfect(self):
        result = evaluate_episodes(OracleScorer(), make_pool(10, 20),
                                   n_way=5, k_shot=3, q_query=2, iterations=20, seed=0)
        assert result.accuracy == 1.0
        assert result.correct == result.total == 20 * 5 * 2

    def test_constant_scorer_one_over_n(self):
        for n_way in (2, 5, 10):
            result = evaluate_episodes(ConstantScorer(), make_pool(12, 20),
                                       n_way=n_way, k_shot=1, q_query=4,
                                       iterations=10, seed=3)
            assert result.accuracy == pytest.approx(1.0 / n_way)

    def test_ci_brackets_accuracy(self):
        result = evaluate_episodes(OracleScorer(), make_pool(8, 10),
                                   n_way=4, k_shot=1, q_query=1, iterations=5, seed=1)
        assert result.ci_low <= result.accuracy <= result.ci_high

    def test_deterministic(self):
        pool = make_pool(10, 20)
        a = evaluate_episodes(ConstantScorer(), pool, 5, 2, 2, iterations=8, seed=11)
        b = evaluate_episodes(ConstantScorer(), pool, 5, 2, 2, iterations=8, seed=11)
        assert (a.correct, a.total) == (b.correct, b.total)

    def test_single_episode_counts(self):
        ep = sample_episode(make_pool(6, 10), n_way=3, k_shot=2, q_query=4, seed=0)
        correct, total = evaluate_episode(ep, OracleScorer())
        assert (correct, total) == (12, 12)


class TestContextKey:
    def test_masks_entities(self):
        inst = RcInstance(["Steam", "curing", "led", "to", "lower", "porosity", "."],
                          (0, 2), (4, 6), "lead_to")
        assert context_key(inst) == "HEAD led to TAIL ."

    def test_window_limits_context(self):
        inst = RcInstance(["a", "b", "c", "HEADX", "led", "to", "TAILX", "d", "e", "f"],
                          (3, 4), (6, 7), "x")
        assert context_key(inst, window=2) == "b c HEAD led to TAIL d e"
        assert context_key(inst, window=0) == "HEAD led to TAIL"

    def test_order_normalized(self):
        # tail appearing before head still masks in surface order
        inst = RcInstance(["porosity", "follows", "curing"], (2, 3), (0, 1), "x")
        assert context_key(inst, window=0) == "TAIL follows HEAD"


class TestScorers:
    def test_cosine_identical_contexts(self):
        table = {"HEAD led to TAIL": [1.0, 0.0], "HEAD made of TAIL": [0.0, 1.0]}
        provider = TableProvider(table)
        scorer = CosineContextScorer(provider, window=0)
        a = RcInstance(["x", "led", "to", "y"], (0, 1), (3, 4), "lead_to")
        b = RcInstance(["p", "led", "to", "q"], (0, 1), (3, 4), "lead_to")
        c = RcInstance(["p", "made", "of", "q"], (0, 1), (3, 4), "made_of")
        assert scorer.score(a, b) == pytest.approx(1.0)
        assert scorer.score(a, c) == pytest.approx(0.0)

    def test_default_scorer_requires_provider(self):
        with pytest.raises(EncoderUnavailable):
            default_scorer(None)

    def test_table_scorer(self):
        scorer = TableScorer({"HEAD led to TAIL": "lead_to"}, window=0)
        q = RcInstance(["x", "led", "to", "y"], (0, 1), (3, 4), "lead_to")
        assert scorer.score(q, rc("lead_to")) == 1.0
        assert scorer.score(q, rc("made_of")) == 0.0

    def test_table_scorer_from_file(self, tmp_path):
        path = tmp_path / "table.json"
        path.write_text(json.dumps({"HEAD x TAIL": "rel"}))
        scorer = TableScorer.from_file(path)
        assert scorer.table == {"HEAD x TAIL": "rel"}

    def test_external_scorer_round_trip(self):
        program = (
            "import sys, json\n"
            "for line in sys.stdin:\n"
            "    req = json.loads(line)\n"
            "    n = len(req['query']['tokens'])\n"
            "    print(json.dumps({'score': float(n)}), flush=True)\n"
        )
        scorer = ExternalScorer([sys.executable, "-c", program])
        try:
            assert scorer.score(rc("a"), rc("b")) == 5.0
            assert scorer.score(rc("a", tokens=["one", "two"]), rc("b")) == 2.0
        finally:
            scorer.close()

    def test_make_scorer_specs(self, tmp_path):
        provider = TableProvider({"x": [1.0]})
        assert isinstance(make_scorer("default", provider), CosineContextScorer)
        path = tmp_path / "t.json"
        path.write_text("{}")
        assert isinstance(make_scorer(f"table:{path}"), TableScorer)
        assert isinstance(make_scorer("external:cat"), ExternalScorer)
        with pytest.raises(ValueError):
            make_scorer("bogus")


class TestRotationCv:
    def test_oracle_factory_perfect_every_fold(self):
        instances = [inst for v in make_pool(29, 4).values() for inst in v]
        result = rotation_cv(lambda train: OracleScorer(), instances,
                             n_way=5, k_shot=1, q_query=1, iterations=5, seed=0)
        assert result.val_accuracies == [1.0] * 5
        assert result.test_accuracies == [1.0] * 5
        assert result.val_mean == result.test_mean == 1.0
        assert result.val_std == result.test_std == 0.0

    def test_factory_sees_only_train_relations(self):
        seen = []

        def factory(train):
            seen.append({i.relation for i in train})
            return ConstantScorer()

        instances = [inst for v in make_pool(29, 3).values() for inst in v]
        rotation_cv(factory, instances, n_way=3, k_shot=1, q_query=1,
                    iterations=2, seed=0)
        assert len(seen) == 5
        assert all(len(rels) == 18 for rels in seen)
        # the train set rotates: successive folds differ
        assert seen[0] != seen[1]

    def test_means_match_fold_accuracies(self):
        instances = [inst for v in make_pool(29, 3).values() for inst in v]
        result = rotation_cv(lambda train: ConstantScorer(), instances,
                             n_way=4, k_shot=1, q_query=1, iterations=4, seed=2)
        assert result.val_mean == pytest.approx(
            sum(result.val_accuracies) / len(result.val_accuracies))
        assert result.test_mean == pytest.approx(
            sum(result.test_accuracies) / len(result.test_accuracies))
