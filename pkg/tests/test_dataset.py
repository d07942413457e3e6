import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpuskg.dataset import (NerInstance, RcInstance, bio_valid, diff_annotations,
                              group_by_relation, import_brat, import_brat_dir,
                              lint_annotations, read_ner, read_rc, rotate_folds,
                              sample_episode, split_ner, split_rc, write_instances)
from corpuskg.errors import (DanglingRef, EpisodeInfeasible, InvalidFold, OffsetError,
                             ParseError, SplitError)


def rc(relation, i=0, tokens=None):
    tokens = tokens or ["h", str(i), "r", "t", str(i)]
    return RcInstance(tokens, (0, 1), (3, 4), relation)


def make_pool(n_relations, per_relation):
    return {f"r{i + 1}": [rc(f"r{i + 1}", j) for j in range(per_relation)]
            for i in range(n_relations)}


class TestBioValid:
    def test_examples(self):
        assert bio_valid(["B", "I", "O"])
        assert bio_valid(["O", "O"])
        assert bio_valid([])
        assert not bio_valid(["O", "I"])
        assert not bio_valid(["I"])
        assert not bio_valid(["B", "X"])

    @settings(max_examples=300, deadline=None)
    @given(st.lists(st.sampled_from(["B", "I", "O"]), max_size=12))
    def test_matches_naive_scan(self, labels):
        ok = all(not (lab == "I" and (i == 0 or labels[i - 1] == "O"))
                 for i, lab in enumerate(labels))
        assert bio_valid(labels) == ok


BRAT_TXT = "Steam curing led to lower porosity.\nFly ash improves strength.\n"
BRAT_ANN = (
    "T1\tEntity 0 12\tSteam curing\n"
    "T2\tEntity 20 34\tlower porosity\n"
    "T3\tEntity 36 43\tFly ash\n"
    "T4\tEntity 53 61\tstrength\n"
    "R1\tlead_to Arg1:T1 Arg2:T2\n"
    "R2\timprove Arg1:T3 Arg2:T4\n"
)


def write_brat(tmp_path, txt=BRAT_TXT, ann=BRAT_ANN, stem="doc"):
    tp = tmp_path / f"{stem}.txt"
    ap = tmp_path / f"{stem}.ann"
    tp.write_text(txt)
    ap.write_text(ann)
    return tp, ap


class TestImportBrat:
    def test_basic(self, tmp_path):
        tp, ap = write_brat(tmp_path)
        ner, rc_insts = import_brat(tp, ap)
        assert len(ner) == len(rc_insts) == 2
        first = ner[0]
        assert first.tokens == ["Steam", "curing", "led", "to", "lower", "porosity", "."]
        assert first.labels == ["B", "I", "O", "O", "B", "I", "O"]
        assert first.head_span == (0, 2)
        assert first.tail_span == (4, 6)
        assert rc_insts[0].relation == "lead_to"
        assert rc_insts[1].relation == "improve"
        assert rc_insts[1].tokens == ["Fly", "ash", "improves", "strength", "."]
        assert rc_insts[1].head_span == (0, 2)
        assert rc_insts[1].tail_span == (3, 4)

    def test_surface_mismatch(self, tmp_path):
        bad = BRAT_ANN.replace("Steam curing", "steam curing")
        tp, ap = write_brat(tmp_path, ann=bad)
        with pytest.raises(OffsetError):
            import_brat(tp, ap)

    def test_offsets_outside_text(self, tmp_path):
        ann = "T1\tEntity 0 9999\tway too long\nR1\tx Arg1:T1 Arg2:T1\n"
        tp, ap = write_brat(tmp_path, ann=ann)
        with pytest.raises(OffsetError):
            import_brat(tp, ap)

    def test_dangling_relation_ref(self, tmp_path):
        ann = "T1\tEntity 0 12\tSteam curing\nR1\tlead_to Arg1:T1 Arg2:T9\n"
        tp, ap = write_brat(tmp_path, ann=ann)
        with pytest.raises(DanglingRef):
            import_brat(tp, ap)

    def test_malformed_entity_line(self, tmp_path):
        tp, ap = write_brat(tmp_path, ann="T1\tgarbage\n")
        with pytest.raises(ParseError):
            import_brat(tp, ap)

    def test_cross_line_relation_rejected(self, tmp_path):
        ann = (
            "T1\tEntity 0 12\tSteam curing\n"
            "T4\tEntity 53 61\tstrength\n"
            "R1\tlead_to Arg1:T1 Arg2:T4\n"
        )
        tp, ap = write_brat(tmp_path, ann=ann)
        with pytest.raises(OffsetError):
            import_brat(tp, ap)

    def test_dir_import(self, tmp_path):
        write_brat(tmp_path, stem="a")
        write_brat(tmp_path, stem="b")
        ner, rc_insts = import_brat_dir(tmp_path, tmp_path)
        assert len(ner) == len(rc_insts) == 4


class TestLint:
    def test_coordinate_entity_flagged(self):
        inst = RcInstance(["cement", "and", "water", "cure", "fast"],
                          (0, 3), (4, 5), "x")
        warnings = lint_annotations([inst])
        assert len(warnings) == 1
        assert "coordinate" in warnings[0]

    def test_long_span_flagged(self):
        inst = RcInstance([f"w{i}" for i in range(12)], (0, 9), (10, 11), "x")
        warnings = lint_annotations([inst])
        assert any("exceeds" in w for w in warnings)

    def test_clean_instance_silent(self):
        assert lint_annotations([rc("x")]) == []


class TestSplitRc:
    def test_counts(self):
        pool = [inst for v in make_pool(29, 50).values() for inst in v]
        split = split_rc(pool, seed=0)
        assert (len(split.train_relations), len(split.val_relations),
                len(split.test_relations)) == (18, 5, 6)
        assert len(split.train) == 18 * 50
        assert len(split.validation) == 5 * 50
        assert len(split.test) == 6 * 50

    def test_relation_level_disjoint(self):
        pool = [inst for v in make_pool(29, 50).values() for inst in v]
        split = split_rc(pool, seed=3)
        sets = [set(split.train_relations), set(split.val_relations),
                set(split.test_relations)]
        assert sets[0] | sets[1] | sets[2] == {f"r{i + 1}" for i in range(29)}
        assert not (sets[0] & sets[1] or sets[0] & sets[2] or sets[1] & sets[2])
        for inst in split.validation:
            assert inst.relation in sets[1]

    def test_seed_determinism(self):
        pool = [inst for v in make_pool(29, 50).values() for inst in v]
        a, b = split_rc(pool, seed=9), split_rc(pool, seed=9)
        assert a.train_relations == b.train_relations
        assert a.test_relations == b.test_relations

    def test_enforcement(self):
        pool = [inst for v in make_pool(28, 50).values() for inst in v]
        with pytest.raises(SplitError):
            split_rc(pool, seed=0)
        pool = [inst for v in make_pool(29, 49).values() for inst in v]
        with pytest.raises(SplitError):
            split_rc(pool, seed=0)

    def test_enforce_off(self):
        pool = [inst for v in make_pool(30, 7).values() for inst in v]
        split = split_rc(pool, seed=0, enforce=False)
        assert len(split.train_relations) == 18


class TestSplitNer:
    def test_counts(self):
        insts = [NerInstance(["x"], ["O"], (0, 1), (0, 1)) for _ in range(2000)]
        split = split_ner(insts, seed=0)
        assert len(split.train) == 1600
        assert len(split.validation) == 400
        assert split.test == []

    def test_size_enforced(self):
        insts = [NerInstance(["x"], ["O"], (0, 1), (0, 1)) for _ in range(10)]
        with pytest.raises(SplitError):
            split_ner(insts, seed=0)

    def test_ratio_override(self):
        insts = [NerInstance([str(i)], ["O"], (0, 1), (0, 1)) for i in range(10)]
        split = split_ner(insts, seed=0, ratio=0.8)
        assert len(split.train) == 8 and len(split.validation) == 2
        seen = {i.tokens[0] for i in split.train} | {i.tokens[0] for i in split.validation}
        assert seen == {str(i) for i in range(10)}


class TestSampleEpisode:
    def test_shape(self):
        ep = sample_episode(make_pool(10, 20), n_way=5, k_shot=3, q_query=2, seed=0)
        assert len(ep.support) == len(ep.queries) == 5
        for rel in ep.support:
            assert len(ep.support[rel]) == 3
            assert len(ep.queries[rel]) == 2

    def test_disjoint_support_query(self):
        pool = make_pool(6, 10)
        ep = sample_episode(pool, n_way=4, k_shot=5, q_query=5, seed=1)
        for rel in ep.support:
            sup = {id(i) for i in ep.support[rel]}
            qry = {id(i) for i in ep.queries[rel]}
            assert not sup & qry

    def test_29_way_1_shot_feasible(self):
        pool = make_pool(29, 50)
        ep = sample_episode(pool, n_way=29, k_shot=1, q_query=1, seed=0)
        assert ep.n_way == 29 and len(ep.support) == 29

    def test_infeasible_k_plus_q(self):
        with pytest.raises(EpisodeInfeasible):
            sample_episode(make_pool(29, 50), n_way=29, k_shot=1, q_query=50, seed=0)

    def test_infeasible_n_way(self):
        with pytest.raises(EpisodeInfeasible):
            sample_episode(make_pool(4, 10), n_way=5, k_shot=1, q_query=1, seed=0)

    def test_small_pools_skipped(self):
        pool = make_pool(6, 10)
        pool["tiny"] = [rc("tiny", 0)]
        ep = sample_episode(pool, n_way=6, k_shot=3, q_query=3, seed=5)
        assert "tiny" not in ep.support

    def test_seed_determinism(self):
        pool = make_pool(12, 20)
        a = sample_episode(pool, 5, 2, 2, seed=42)
        b = sample_episode(pool, 5, 2, 2, seed=42)
        assert list(a.support) == list(b.support)
        for rel in a.support:
            assert a.support[rel] == b.support[rel]
            assert a.queries[rel] == b.queries[rel]


class TestRotateFolds:
    RELS = [f"r{i + 1}" for i in range(29)]

    def test_fold1_identity(self):
        split = rotate_folds(self.RELS, fold=1)
        assert split.train_relations == self.RELS[:18]
        assert split.val_relations == self.RELS[18:23]
        assert split.test_relations == self.RELS[23:]

    def test_fold2_rotated(self):
        split = rotate_folds(self.RELS, fold=2)
        expected_order = self.RELS[-4:] + self.RELS[:-4]
        assert split.train_relations == expected_order[:18]
        assert split.train_relations[:4] == ["r26", "r27", "r28", "r29"]
        assert split.test_relations == expected_order[23:]

    def test_all_folds_partition(self):
        for fold in range(1, 6):
            split = rotate_folds(self.RELS, fold=fold)
            combined = (split.train_relations + split.val_relations
                        + split.test_relations)
            assert sorted(combined) == sorted(self.RELS)
            assert len(set(combined)) == 29

    def test_test_sets_cover_expected_relations(self):
        # five test windows of 6, successive folds shifted by 4, so the
        # union covers 6 + 4*4 = 22 distinct relations
        covered = set()
        for fold in range(1, 6):
            covered |= set(rotate_folds(self.RELS, fold=fold).test_relations)
        assert len(covered) == 22

    def test_invalid_fold(self):
        with pytest.raises(InvalidFold):
            rotate_folds(self.RELS, fold=0)
        with pytest.raises(InvalidFold):
            rotate_folds(self.RELS, fold=6)

    def test_wrong_relation_count(self):
        with pytest.raises(SplitError):
            rotate_folds(["a", "b"], fold=1)


class TestSerialization:
    def test_ner_round_trip(self, tmp_path):
        insts = [NerInstance(["a", "b"], ["B", "O"], (0, 1), (1, 2)),
                 NerInstance(["x"], ["O"], (0, 1), (0, 1))]
        path = tmp_path / "ner.jsonl"
        write_instances(insts, path)
        assert read_ner(path) == insts

    def test_rc_round_trip(self, tmp_path):
        insts = [rc("lead_to", 1), rc("improve", 2)]
        path = tmp_path / "rc.jsonl"
        write_instances(insts, path)
        assert read_rc(path) == insts


def test_group_by_relation():
    insts = [rc("a", 0), rc("b", 1), rc("a", 2)]
    grouped = group_by_relation(insts)
    assert set(grouped) == {"a", "b"}
    assert len(grouped["a"]) == 2


def test_diff_annotations():
    old = [rc("a", 0), rc("b", 1)]
    new = [rc("a", 0), rc("c", 2), rc("d", 3)]
    assert diff_annotations(old, new) == {"unchanged": 1, "removed": 1, "added": 2}
