"""
Fusion Service
Per-entity representations built from the positive and negative models.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Union

import numpy as np

from ..core.errors import FusionError
from .embedding import EmbeddingModel, VectorSet, load_vectors, save_vectors

logger = logging.getLogger(__name__)

TokenVectors = Union[EmbeddingModel, VectorSet]


class FusionStrategy(str, Enum):
    CONCAT = "concat"
    SINGLE = "single"


@dataclass
class EntityEmbeddingTable:
    entities: List[str]
    vectors: np.ndarray
    strategy: FusionStrategy = FusionStrategy.CONCAT
    source_dims: List[int] = field(default_factory=list)

    def __post_init__(self):
        self._row: Dict[str, int] = {e: i for i, e in enumerate(self.entities)}

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.entities)

    def __contains__(self, entity: str) -> bool:
        return entity in self._row

    def vector(self, entity: str) -> np.ndarray:
        try:
            return self.vectors[self._row[entity]]
        except KeyError:
            raise FusionError(f"entity not in embedding table: {entity}") from None

    def save(self, path: Union[str, Path]) -> Path:
        return save_vectors(path, self.entities, self.vectors)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "EntityEmbeddingTable":
        tokens, matrix = load_vectors(path)
        return cls(tokens, matrix, FusionStrategy.CONCAT, [matrix.shape[1]])


def combine(
    pos_model: TokenVectors,
    neg_model: TokenVectors,
    entities: Iterable[str],
    strategy: FusionStrategy = FusionStrategy.CONCAT,
) -> EntityEmbeddingTable:
    """vector(e) = pos(e) || neg(e); a half missing from its model is zero-filled."""
    if strategy is not FusionStrategy.CONCAT:
        raise FusionError(f"unsupported fusion strategy: {strategy}")
    entities = list(entities)
    if not entities:
        raise FusionError("no entities to combine")

    missing_both = [e for e in entities if e not in pos_model and e not in neg_model]
    if missing_both:
        raise FusionError(f"entities missing from both models: {', '.join(missing_both)}")

    dp, dn = pos_model.dim, neg_model.dim
    vectors = np.zeros((len(entities), dp + dn))
    for i, entity in enumerate(entities):
        if entity in pos_model:
            vectors[i, :dp] = pos_model.vector(entity)
        else:
            logger.warning(f"{entity}: no positive representation, zero-filled")
        if entity in neg_model:
            vectors[i, dp:] = neg_model.vector(entity)
        else:
            logger.warning(f"{entity}: no negative representation, zero-filled")
    return EntityEmbeddingTable(entities, vectors, strategy, [dp, dn])


def build_single_table(model: TokenVectors, entities: Sequence[str]) -> EntityEmbeddingTable:
    """Table taken straight from one model (single-model baselines)."""
    entities = list(entities)
    missing = [e for e in entities if e not in model]
    if len(missing) == len(entities):
        raise FusionError(f"entities missing from the model: {', '.join(missing)}")
    vectors = np.zeros((len(entities), model.dim))
    for i, entity in enumerate(entities):
        if entity in model:
            vectors[i] = model.vector(entity)
    if missing:
        logger.warning(f"{len(missing)} entities have no walks in this mode; zero vectors used")
    return EntityEmbeddingTable(entities, vectors, FusionStrategy.SINGLE, [model.dim])
