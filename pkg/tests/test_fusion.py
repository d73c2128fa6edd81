"""Unit tests for services/fusion.py"""
import numpy as np
import pytest

from truewalks.config import SkipGramConfig, WalkConfig
from truewalks.core.errors import FusionError
from truewalks.services.embedding import VectorSet, train_dual
from truewalks.services.fusion import (
    EntityEmbeddingTable,
    FusionStrategy,
    build_single_table,
    combine,
)
from truewalks.services.walker import build_corpus


def _vectors(rows):
    tokens = list(rows)
    return VectorSet(tokens, np.array([rows[t] for t in tokens], dtype=np.float64))


class TestCombine:
    """Concatenation of the positive and negative halves."""

    def test_concat(self):
        table = combine(_vectors({"e": [1.0]}), _vectors({"e": [2.0]}), ["e"])
        assert table.vector("e").tolist() == [1.0, 2.0]
        assert table.strategy is FusionStrategy.CONCAT

    def test_two_dimensional_halves(self):
        table = combine(_vectors({"e": [1.0, 2.0]}), _vectors({"e": [3.0, 4.0]}), ["e"])
        assert table.vector("e").tolist() == [1.0, 2.0, 3.0, 4.0]
        assert table.source_dims == [2, 2]

    def test_missing_half_is_zero_filled(self):
        pos = _vectors({"a": [1.0, 1.0], "b": [2.0, 2.0]})
        neg = _vectors({"a": [3.0, 3.0]})
        table = combine(pos, neg, ["a", "b"])
        assert table.vector("b").tolist() == [2.0, 2.0, 0.0, 0.0]

    def test_zero_fill_warns(self, caplog):
        pos = _vectors({"a": [1.0]})
        neg = _vectors({"b": [1.0]})
        with caplog.at_level("WARNING", logger="truewalks.services.fusion"):
            combine(pos, neg, ["a", "b"])
        warnings = [r.getMessage() for r in caplog.records if r.levelname == "WARNING"]
        assert "a: no negative representation, zero-filled" in warnings
        assert "b: no positive representation, zero-filled" in warnings

    def test_missing_from_both_models(self):
        with pytest.raises(FusionError):
            combine(_vectors({"a": [1.0]}), _vectors({"a": [1.0]}), ["a", "ghost"])

    def test_no_entities(self):
        with pytest.raises(FusionError):
            combine(_vectors({"a": [1.0]}), _vectors({"a": [1.0]}), [])

    def test_unsupported_strategy(self):
        with pytest.raises(FusionError):
            combine(_vectors({"a": [1.0]}), _vectors({"a": [1.0]}), ["a"], FusionStrategy.SINGLE)

    def test_unknown_entity_lookup(self):
        table = combine(_vectors({"a": [1.0]}), _vectors({"a": [1.0]}), ["a"])
        with pytest.raises(FusionError):
            table.vector("b")

    def test_default_dimension_and_halves(self, augmented_protein_kg, terms):
        """Default settings give 100 + 100 dimensions; slicing recovers each model's vector."""
        corpus = build_corpus(augmented_protein_kg, WalkConfig(seed=1))
        pos, neg = train_dual(corpus, SkipGramConfig(epochs=1, seed=1))
        table = combine(pos, neg, [terms.P1, terms.P2])
        assert table.dim == 200
        for entity in (terms.P1, terms.P2):
            vector = table.vector(entity)
            assert np.array_equal(vector[:100], pos.vector(entity))
            assert np.array_equal(vector[100:], neg.vector(entity))


class TestSingleTable:
    """Tables for the single-model baselines."""

    def test_copies_vectors(self):
        table = build_single_table(_vectors({"a": [1.0, 2.0], "b": [3.0, 4.0]}), ["b", "a"])
        assert table.strategy is FusionStrategy.SINGLE
        assert table.vector("b").tolist() == [3.0, 4.0]

    def test_partial_coverage_uses_zeros(self):
        table = build_single_table(_vectors({"a": [1.0, 2.0]}), ["a", "b"])
        assert table.vector("b").tolist() == [0.0, 0.0]

    def test_no_coverage(self):
        with pytest.raises(FusionError):
            build_single_table(_vectors({"a": [1.0]}), ["b"])


class TestTableFiles:
    """Entity tables share the vector text format."""

    def test_save_and_load(self, tmp_path):
        table = combine(_vectors({"a": [0.1, 0.2], "b": [0.3, 0.4]}), _vectors({"a": [0.5], "b": [0.6]}), ["a", "b"])
        loaded = EntityEmbeddingTable.load(table.save(tmp_path / "embeddings.vec"))
        assert loaded.entities == ["a", "b"]
        assert np.array_equal(loaded.vectors, table.vectors)
        assert len(loaded) == 2 and "a" in loaded
