"""Unit tests for core/schemas.py"""
import json

import pytest
from pydantic import ValidationError

from truewalks.core.graph import Polarity
from truewalks.core.schemas import (
    AnnotationRecord,
    EvalReport,
    PairDataset,
    PairRecord,
    RankingReport,
    SplitResult,
)


class TestAnnotationRecord:
    """Annotation rows are validated before they reach the graph."""

    def test_valid_record(self):
        record = AnnotationRecord(entity="http://x/P1", property="http://x/hasFunction", cls="http://x/C", polarity="neg")
        assert record.polarity is Polarity.NEGATIVE

    def test_angle_brackets_are_stripped(self):
        record = AnnotationRecord.model_validate(
            {"entity": "<http://x/P1>", "property": "http://x/p", "class": "http://x/C", "polarity": "pos"}
        )
        assert record.entity == "http://x/P1"
        assert record.cls == "http://x/C"

    def test_unknown_polarity_raises(self):
        """Only pos and neg are polarity tokens."""
        with pytest.raises(ValidationError) as exc_info:
            AnnotationRecord(entity="http://x/P1", property="http://x/p", cls="http://x/C", polarity="maybe")
        assert "unknown polarity token" in str(exc_info.value)

    def test_space_in_iri_raises(self):
        with pytest.raises(ValidationError):
            AnnotationRecord(entity="http://x/P 1", property="http://x/p", cls="http://x/C", polarity="pos")


class TestPairs:
    """Labeled pair datasets."""

    def test_string_labels(self):
        assert PairRecord(entity_a="a", entity_b="b", label="1").label == 1

    def test_bad_label(self):
        with pytest.raises(ValidationError):
            PairRecord(entity_a="a", entity_b="b", label="2")

    def test_duplicate_unordered_pair(self):
        with pytest.raises(ValidationError, match="duplicate unordered pair"):
            PairDataset(pairs=[
                PairRecord(entity_a="a", entity_b="b", label=1),
                PairRecord(entity_a="b", entity_b="a", label=0),
            ])

    def test_accessors(self):
        pairs = PairDataset(pairs=[
            PairRecord(entity_a="c", entity_b="a", label=1),
            PairRecord(entity_a="a", entity_b="b", label=0),
        ])
        assert len(pairs) == 2
        assert pairs.labels == [1, 0]
        assert [p.entity_a for p in pairs.positives()] == ["c"]
        assert pairs.entities() == ["a", "b", "c"]


class TestReports:
    """Report models and their JSON form."""

    def test_split_metrics_are_bounded(self):
        with pytest.raises(ValidationError):
            SplitResult(split=0, n_train=7, n_test=3, precision=1.2, recall=0.5, f=0.5, n_estimators=50)

    def test_mean_rank_is_at_least_one(self):
        with pytest.raises(ValidationError):
            RankingReport(hits10=1.0, hits100=1.0, mean_rank=0.5, auc=1.0, n_pairs=1, n_candidates=2)

    def test_report_json(self):
        ranking = RankingReport(
            hits10=0.5, hits100=1.0, mean_rank=3.0, auc=0.75, n_pairs=2, n_candidates=5,
            target_similarities=[0.1, 0.2],
        )
        split = SplitResult(split=0, n_train=7, n_test=3, precision=1.0, recall=0.5, f=0.6, n_estimators=50, max_depth=4)
        nested = EvalReport(mode="positive_only", per_split=[split])
        report = EvalReport(per_split=[split], ranking=ranking, baselines={"positive_only": nested},
                            wilcoxon={"positive_only": {"precision": 1.0, "recall": 1.0, "f": 1.0}})
        data = json.loads(report.to_json())
        assert data["mode"] == "truewalks"
        assert data["ranking"]["auc"] == 0.75
        assert "target_similarities" not in data["ranking"]
        assert data["baselines"]["positive_only"]["per_split"][0]["max_depth"] == 4
        assert EvalReport.model_validate(data).baselines["positive_only"].mode == "positive_only"
