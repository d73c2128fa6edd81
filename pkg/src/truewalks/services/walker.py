"""
Walk Generation Service
Polarity-aware random walks: the first hop of a walk fixes its status, and the
status decides which way subclass edges are traversed afterwards.
"""
import hashlib
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Set, Tuple, Union

import numpy as np

from ..config import WalkConfig
from ..core.errors import GraphError, ParseError
from ..core.graph import KnowledgeGraph, NodeId, Polarity
from .prometheus import get_metrics_collector

logger = logging.getLogger(__name__)

# (edge token, node, index of the edge token in the walk)
VisitedKey = Tuple[str, NodeId, int]

ENUMERATION_LIMIT = 100_000


@dataclass(frozen=True)
class Walk:
    """Alternating node/edge tokens, starting at the root entity."""
    tokens: Tuple[str, ...]
    status: Polarity

    @property
    def root(self) -> str:
        return self.tokens[0]

    @property
    def hops(self) -> int:
        return len(self.tokens) // 2

    def __len__(self) -> int:
        return len(self.tokens)

    def to_line(self) -> str:
        return f"{self.status.prefix}|{' '.join(self.tokens)}"


@dataclass
class WalkCorpus:
    positive: List[Walk] = field(default_factory=list)
    negative: List[Walk] = field(default_factory=list)
    by_entity: Dict[str, Tuple[List[Walk], List[Walk]]] = field(default_factory=dict)

    def add(self, entity: str, pos: List[Walk], neg: List[Walk]) -> None:
        self.positive.extend(pos)
        self.negative.extend(neg)
        self.by_entity[entity] = (list(pos), list(neg))

    def walks(self, status: Polarity) -> List[Walk]:
        return self.positive if status is Polarity.POSITIVE else self.negative

    def sentences(self, status: Polarity) -> List[List[str]]:
        return [list(w.tokens) for w in self.walks(status)]

    def dump(self) -> str:
        """Positive walks first, then negative ones, each grouped by entity in sorted order."""
        lines = [w.to_line() for w in self.positive] + [w.to_line() for w in self.negative]
        return "\n".join(lines) + ("\n" if lines else "")

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.dump(), encoding="utf-8")
        return path

    def __len__(self) -> int:
        return len(self.positive) + len(self.negative)


def read_corpus(path: Union[str, Path]) -> WalkCorpus:
    """Read a `P|`/`N|` corpus dump back."""
    path = Path(path)
    grouped: Dict[str, Tuple[List[Walk], List[Walk]]] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").split("\n"), start=1):
        if not line.strip():
            continue
        prefix, sep, body = line.partition("|")
        if not sep or prefix not in ("P", "N") or not body.strip():
            raise ParseError("expected a walk line starting with P| or N|", line=lineno, column=1, source=str(path))
        status = Polarity.POSITIVE if prefix == "P" else Polarity.NEGATIVE
        walk = Walk(tuple(body.split(" ")), status)
        pos, neg = grouped.setdefault(walk.root, ([], []))
        (pos if status is Polarity.POSITIVE else neg).append(walk)

    corpus = WalkCorpus()
    for entity in sorted(grouped):
        corpus.add(entity, *grouped[entity])
    return corpus


# --- Seeded streams ---

def _entity_key(entity: NodeId) -> int:
    digest = hashlib.blake2b(entity.token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def entity_stream(seed: int, entity: NodeId, status: Polarity) -> np.random.Generator:
    """Independent generator for one (entity, status), whatever the iteration order."""
    status_index = 0 if status is Polarity.POSITIVE else 1
    seq = np.random.SeedSequence(entropy=seed, spawn_key=(_entity_key(entity), status_index))
    return np.random.default_rng(seq)


# --- Walk generation ---

class _Outcome(Enum):
    EMITTED = "emitted"
    BLOCKED = "blocked"
    EXHAUSTED = "exhausted"


def _attempt(
    kg: KnowledgeGraph,
    entity: NodeId,
    status: Polarity,
    max_depth: int,
    visited: Set[VisitedKey],
    rng: np.random.Generator,
) -> Tuple[_Outcome, Optional[List[str]]]:
    tokens = [entity.token]
    node = entity
    depth = 1
    while depth < max_depth:
        if len(tokens) == 1:
            candidates = kg.assertions(entity, status)
        else:
            candidates = kg.neighbors(node, status)
            if not candidates:
                # dead end: keep the shorter walk
                visited.add((tokens[-2], node, len(tokens) - 2))
                return _Outcome.EMITTED, tokens

        position = len(tokens)
        open_hops = [(edge, target) for edge, target in candidates if (edge, target, position) not in visited]
        if not open_hops:
            if len(tokens) > 2:
                visited.add((tokens[-2], node, len(tokens) - 2))
                return _Outcome.BLOCKED, None
            return _Outcome.EXHAUSTED, None

        edge, node = open_hops[int(rng.integers(len(open_hops)))]
        tokens += [edge, node.token]
        depth += 1

    visited.add((tokens[-2], node, len(tokens) - 2))
    return _Outcome.EMITTED, tokens


def get_random_walks(
    kg: KnowledgeGraph,
    entity: NodeId,
    status: Polarity,
    cfg: WalkConfig,
    rng: np.random.Generator,
) -> List[Walk]:
    """
    Up to `cfg.max_walks` distinct walks rooted at `entity` whose first hop
    has the given polarity. Visited memory is shared by all attempts for
    this (entity, status); 10 * max_walks consecutive failures end the loop.
    """
    if not kg.assertions(entity, status):
        return []

    visited: Set[VisitedKey] = set()
    walks: Dict[Tuple[str, ...], None] = {}
    failures = 0
    max_failures = 10 * cfg.max_walks
    while len(walks) < cfg.max_walks and failures < max_failures:
        outcome, tokens = _attempt(kg, entity, status, cfg.max_depth, visited, rng)
        if outcome is _Outcome.EXHAUSTED:
            break
        if outcome is _Outcome.BLOCKED or tuple(tokens) in walks:
            failures += 1
            continue
        walks[tuple(tokens)] = None
        failures = 0

    if failures >= max_failures:
        logger.debug(f"{entity.token} ({status.value}): stopped after {failures} failed attempts")
    return [Walk(tokens, status) for tokens in walks]


def get_truewalks(
    kg: KnowledgeGraph,
    entity: NodeId,
    cfg: WalkConfig,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[List[Walk], List[Walk]]:
    """Positive and negative walks for one entity, each from its own stream."""
    if rng is None:
        pos_rng = entity_stream(cfg.seed, entity, Polarity.POSITIVE)
        neg_rng = entity_stream(cfg.seed, entity, Polarity.NEGATIVE)
    else:
        pos_rng, neg_rng = rng.spawn(2)
    pos = get_random_walks(kg, entity, Polarity.POSITIVE, cfg, pos_rng)
    neg = get_random_walks(kg, entity, Polarity.NEGATIVE, cfg, neg_rng)
    return pos, neg


def enumerate_valid_walks(kg: KnowledgeGraph, entity: NodeId, status: Polarity, max_depth: int) -> Set[Walk]:
    """
    Every walk with 1 to max_depth-1 hops that respects the first-hop polarity
    and direction rules, ignoring visited memory. Small graphs only.
    """
    found: Set[Walk] = set()

    def extend(tokens: List[str], node: NodeId, hops: int) -> None:
        if hops >= max_depth - 1:
            return
        candidates = kg.assertions(entity, status) if hops == 0 else kg.neighbors(node, status)
        for edge, target in candidates:
            walk_tokens = tokens + [edge, target.token]
            found.add(Walk(tuple(walk_tokens), status))
            if len(found) > ENUMERATION_LIMIT:
                raise GraphError(f"walk enumeration exceeded {ENUMERATION_LIMIT} walks; graph too large")
            extend(walk_tokens, target, hops + 1)

    extend([entity.token], entity, 0)
    return found


# --- Corpus ---

_worker_kg: Optional[KnowledgeGraph] = None


def _init_worker(kg: KnowledgeGraph) -> None:
    global _worker_kg
    _worker_kg = kg


def _walks_in_worker(args: Tuple[NodeId, WalkConfig]) -> Tuple[List[Walk], List[Walk]]:
    entity, cfg = args
    return get_truewalks(_worker_kg, entity, cfg)


def build_corpus(kg: KnowledgeGraph, cfg: WalkConfig, workers: int = 1) -> WalkCorpus:
    """
    Walks for every root entity. Entities are processed (and merged) in sorted
    order; with per-entity streams the result does not depend on `workers`.
    """
    roots = kg.sorted_roots()
    if not roots:
        raise GraphError("knowledge graph has no root entities to walk from")
    kg.freeze()

    if workers > 1 and len(roots) > 1:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(kg,)) as pool:
            chunksize = max(1, len(roots) // (workers * 4))
            results = list(pool.map(_walks_in_worker, [(e, cfg) for e in roots], chunksize=chunksize))
    else:
        results = [get_truewalks(kg, entity, cfg) for entity in roots]

    corpus = WalkCorpus()
    for entity, (pos, neg) in zip(roots, results):
        corpus.add(entity.token, pos, neg)

    metrics = get_metrics_collector()
    metrics.record_walks("pos", (len(w) for w in corpus.positive))
    metrics.record_walks("neg", (len(w) for w in corpus.negative))
    logger.info(
        f"Generated {len(corpus.positive)} positive and {len(corpus.negative)} negative walks "
        f"for {len(roots)} entities (w={cfg.max_walks}, d={cfg.max_depth})"
    )
    return corpus
