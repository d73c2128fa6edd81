"""Unit tests for services/evaluation.py"""
import csv
import io

import numpy as np
import pytest

from truewalks.config import EvalConfig
from truewalks.core.errors import EvaluationError
from truewalks.core.schemas import PairDataset, PairRecord
from truewalks.services.evaluation import (
    classify,
    compare_splits,
    export_similarity_distribution,
    hadamard_pair,
    mccv_splits,
    mccv_test_size,
    pair_cosine,
    pair_features,
    rank_eval,
    run_mccv,
)
from truewalks.services.fusion import EntityEmbeddingTable


def _table(rows):
    entities = list(rows)
    return EntityEmbeddingTable(entities, np.array([rows[e] for e in entities], dtype=np.float64))


def _pairs(*triples):
    return PairDataset(pairs=[PairRecord(entity_a=a, entity_b=b, label=label) for a, b, label in triples])


def _random_table(n, dim=6, seed=0):
    rng = np.random.default_rng(seed)
    return _table({f"e{i:03d}": rng.normal(size=dim) for i in range(n)})


def _fast_eval(**kwargs):
    defaults = dict(rf_estimators=[3], rf_max_depths=[2])
    defaults.update(kwargs)
    return EvalConfig(**defaults)


class TestPairFeatures:
    """Hadamard pair representation."""

    def test_hadamard(self):
        assert hadamard_pair([1, 2, 3], [4, 5, 6]).tolist() == [4.0, 10.0, 18.0]

    def test_hadamard_length_mismatch(self):
        with pytest.raises(EvaluationError):
            hadamard_pair([1, 2], [1, 2, 3])

    def test_feature_matrix(self):
        table = _table({"a": [1.0, 2.0], "b": [3.0, 4.0], "c": [0.5, 0.5]})
        X, y = pair_features(table, _pairs(("a", "b", 1), ("a", "c", 0)))
        assert X.tolist() == [[3.0, 8.0], [0.5, 1.0]]
        assert y.tolist() == [1, 0]

    def test_second_table(self):
        table = _table({"a": [1.0, 2.0]})
        other = _table({"x": [2.0, 2.0]})
        X, _ = pair_features(table, _pairs(("a", "x", 1)), table_b=other)
        assert X.tolist() == [[2.0, 4.0]]

    def test_missing_entity(self):
        with pytest.raises(EvaluationError):
            pair_features(_table({"a": [1.0]}), _pairs(("a", "ghost", 1)))


class TestMccv:
    """Monte Carlo cross-validation."""

    def test_test_size(self):
        assert mccv_test_size(10, 0.3) == 3
        assert mccv_test_size(2, 0.3) == 1
        assert mccv_test_size(3, 0.9) == 2

    def test_partitions(self):
        splits = mccv_splits(10, 30, 0.3, np.random.default_rng(0))
        assert len(splits) == 30
        for train, test in splits:
            assert len(test) == 3
            assert set(train).isdisjoint(test)
            assert sorted(set(train) | set(test)) == list(range(10))

    def test_too_few_pairs(self):
        with pytest.raises(EvaluationError):
            mccv_splits(1, 5, 0.3, np.random.default_rng(0))

    def test_default_repetitions(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(20, 3))
        y = np.array([0, 1] * 10)
        results = run_mccv(X, y, _fast_eval())
        assert len(results) == 30
        assert all(r.n_test == 6 and r.n_train == 14 for r in results)

    def test_default_forest_grid(self):
        assert set(EvalConfig().rf_grid()) == {(n, d) for n in (50, 100, 200) for d in (2, 4, 6, None)}

    def test_same_seed_same_results(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(20, 3))
        y = (X[:, 0] > 0).astype(int)
        cfg = _fast_eval(mccv_repetitions=5, seed=9)
        assert run_mccv(X, y, cfg) == run_mccv(X, y, cfg)

    def test_worker_count_independent(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(20, 3))
        y = (X[:, 0] > 0).astype(int)
        serial = run_mccv(X, y, _fast_eval(mccv_repetitions=4))
        parallel = run_mccv(X, y, _fast_eval(mccv_repetitions=4, workers=2))
        assert serial == parallel


class TestClassify:
    """Classifier report and paired comparisons."""

    def test_report(self):
        table = _random_table(20)
        entities = table.entities
        pairs = _pairs(*[(entities[i], entities[i + 1], i % 2) for i in range(19)])
        report = classify(table, pairs, _fast_eval(mccv_repetitions=6), mode="truewalks")
        assert len(report.per_split) == 6
        assert 0.0 <= report.f_median <= 1.0
        assert report.f_median == float(np.median([s.f for s in report.per_split]))

    def test_report_json_keys(self):
        table = _random_table(10)
        e = table.entities
        pairs = _pairs(*[(e[i], e[i + 1], i % 2) for i in range(9)])
        data = classify(table, pairs, _fast_eval(mccv_repetitions=3)).model_dump(mode="json")
        assert {"precision_median", "recall_median", "f_median", "per_split", "wilcoxon"} <= set(data)

    def test_compare_identical_splits(self):
        table = _random_table(12)
        e = table.entities
        pairs = _pairs(*[(e[i], e[i + 1], i % 2) for i in range(11)])
        report = classify(table, pairs, _fast_eval(mccv_repetitions=4))
        assert compare_splits(report.per_split, report.per_split) == {"precision": 1.0, "recall": 1.0, "f": 1.0}

    def test_compare_requires_equal_lengths(self):
        table = _random_table(12)
        e = table.entities
        pairs = _pairs(*[(e[i], e[i + 1], i % 2) for i in range(11)])
        report = classify(table, pairs, _fast_eval(mccv_repetitions=4))
        with pytest.raises(EvaluationError):
            compare_splits(report.per_split, report.per_split[:2])


class TestRanking:
    """Cosine ranking metrics."""

    def test_unique_nearest_neighbour(self):
        table = _table({"a": [1.0, 0.0], "b": [1.0, 0.1], "c": [0.0, 1.0], "d": [-1.0, 0.0]})
        report = rank_eval(table, _pairs(("a", "b", 1), ("c", "d", 0)))
        assert report.hits10 == 1.0
        assert report.mean_rank == 1.0
        assert report.auc == 1.0
        assert report.n_pairs == 1
        assert not report.degenerate

    def test_identical_embeddings(self):
        table = _table({e: [1.0, 1.0] for e in "abcde"})
        expected = rank_eval(table, [("a", "b")], tie_rule="expected")
        assert expected.auc == pytest.approx(0.5)
        assert expected.degenerate
        optimistic = rank_eval(table, [("a", "b")])
        assert optimistic.auc == 1.0
        assert optimistic.degenerate

    def test_zero_vectors_score_zero(self):
        table = _table({"a": [1.0, 0.0], "z": [0.0, 0.0]})
        assert pair_cosine(table, "a", "z") == 0.0

    def test_brute_force_ranks(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            table = _random_table(6, dim=3, seed=int(rng.integers(1000)))
            e = table.entities
            a, b = e[0], e[int(rng.integers(1, 6))]
            report = rank_eval(table, [(a, b)])

            def cos(x, y):
                vx, vy = table.vector(x), table.vector(y)
                return float(vx @ vy / np.linalg.norm(vx) / np.linalg.norm(vy))

            others = [x for x in e if x != a]
            rank = 1 + sum(cos(a, x) > cos(a, b) for x in others if x != b)
            assert report.mean_rank == rank
            assert report.auc == pytest.approx((len(others) - rank) / (len(others) - 1))

    def test_hits_are_monotone(self):
        table = _random_table(150, seed=2)
        e = table.entities
        report = rank_eval(table, [(e[i], e[i + 75]) for i in range(75)])
        assert report.hits10 <= report.hits100
        assert 1.0 <= report.mean_rank <= 149

    def test_auc_drops_when_target_moves_away(self):
        rows = {"a": [1.0, 0.0], "b": [1.0, 0.5], "c": [1.0, 1.0], "d": [0.0, 1.0], "x": [-1.0, 0.2]}
        before = rank_eval(_table(rows), [("a", "b")])
        rows["b"] = [0.2, 1.0]
        after = rank_eval(_table(rows), [("a", "b")])
        assert after.auc < before.auc

    def test_candidate_restriction(self):
        table = _table({"a": [1.0, 0.0], "b": [1.0, 0.3], "c": [1.0, 0.1], "d": [0.0, 1.0]})
        everyone = rank_eval(table, [("a", "b")])
        restricted = rank_eval(table, [("a", "b")], candidates=["a", "b", "d"])
        assert everyone.mean_rank == 2.0
        assert restricted.mean_rank == 1.0
        assert restricted.n_candidates == 3

    def test_target_must_be_candidate(self):
        table = _random_table(4)
        e = table.entities
        with pytest.raises(EvaluationError):
            rank_eval(table, [(e[0], e[1])], candidates=[e[0], e[2], e[3]])

    def test_unknown_tie_rule(self):
        with pytest.raises(EvaluationError):
            rank_eval(_random_table(4), [], tie_rule="pessimistic")

    def test_self_pair_is_rejected(self):
        table = _random_table(4)
        e = table.entities
        with pytest.raises(EvaluationError, match="against itself"):
            rank_eval(table, _pairs((e[0], e[1], 1), (e[2], e[2], 1)))


class TestSimilarityExport:
    """Per-pair cosine dump."""

    def test_matches_ranking_similarities(self, tmp_path):
        table = _random_table(8, seed=5)
        e = table.entities
        pairs = _pairs((e[0], e[1], 1), (e[2], e[3], 0), (e[4], e[5], 1))
        path = tmp_path / "similarities.csv"
        text = export_similarity_distribution(table, pairs, path)
        assert path.read_text() == text

        rows = list(csv.DictReader(io.StringIO(text)))
        assert [r["label"] for r in rows] == ["1", "0", "1"]
        for row in rows:
            assert float(row["cosine"]) == pair_cosine(table, row["entityA"], row["entityB"])

        ranking = rank_eval(table, pairs)
        positives = [float(r["cosine"]) for r in rows if r["label"] == "1"]
        assert ranking.target_similarities == positives
