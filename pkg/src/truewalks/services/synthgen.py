"""
Synthetic Graph Generator
Seeded ontology-rich graphs with a planted signal: entities in the same group
share a negatively annotated signature class, and labeled pairs are drawn so
that positive pairs fall in the same group with probability `signal`.
"""
import logging
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Dict, List, Optional, Set, Tuple, Union

import networkx as nx
import numpy as np

from ..config import SynthConfig
from ..core.errors import ConfigError
from ..core.graph import KnowledgeGraph, NodeId, Polarity, Statement
from ..core.schemas import PairDataset, PairRecord
from ..core.vocabulary import SUBCLASS_OF
from .ingest import write_graph, write_pairs

logger = logging.getLogger(__name__)

# label-0 pairs drawn from one group at most this often
BACKGROUND_RATE = 0.05
# levels of subclasses wanted under a signature; a default negative walk runs this far below it
SIGNATURE_HEIGHT = 2


@dataclass
class _ClassTree:
    parents: Dict[int, List[int]]
    depth: Dict[int, int]
    hierarchy: nx.DiGraph  # child -> parent

    def subclasses(self, c: int) -> Set[int]:
        return {c} | nx.ancestors(self.hierarchy, c)

    def superclasses(self, c: int) -> Set[int]:
        return {c} | nx.descendants(self.hierarchy, c)


def _class_tree(cfg: SynthConfig, rng: np.random.Generator) -> _ClassTree:
    tree = nx.balanced_tree(cfg.branching, cfg.depth)
    full = tree.number_of_nodes()
    n_classes = cfg.n_classes or full
    if n_classes > full:
        raise ConfigError(f"n_classes={n_classes} exceeds the {full} classes of a {cfg.branching}-ary tree of depth {cfg.depth}")

    # balanced_tree numbers nodes breadth-first, so every prefix is a rooted subtree
    depth = nx.single_source_shortest_path_length(tree, 0)
    parents: Dict[int, List[int]] = {c: [] for c in range(n_classes)}
    for c in range(1, n_classes):
        parents[c].append(min(tree.neighbors(c)))

    has_children = {p for c in range(1, n_classes) for p in parents[c]}
    n_extra = round(cfg.extra_edge_fraction * (n_classes - 1))
    candidates = [c for c in range(2, n_classes) if depth[c] >= 2]
    added = 0
    for _ in range(n_extra * 20):
        if added >= n_extra or not candidates:
            break
        child = int(candidates[rng.integers(len(candidates))])
        # stay inside the child's top-level branch, pointing at a lower-numbered inner class
        branch = _top_branch(child, parents)
        options = [
            p for p in range(1, child)
            if p in has_children and p not in parents[child] and _top_branch(p, parents) == branch
        ]
        if not options:
            continue
        parents[child].append(int(options[rng.integers(len(options))]))
        added += 1

    hierarchy = nx.DiGraph()
    hierarchy.add_nodes_from(range(n_classes))
    for c, ps in parents.items():
        for p in ps:
            hierarchy.add_edge(c, p)
    return _ClassTree(parents=parents, depth={c: depth[c] for c in range(n_classes)}, hierarchy=hierarchy)


def _top_branch(c: int, parents: Dict[int, List[int]]) -> int:
    while parents[c] and parents[c][0] != 0:
        c = parents[c][0]
    return c


def _subtree_height(tree: _ClassTree, c: int) -> int:
    return max(tree.depth[x] for x in tree.subclasses(c)) - tree.depth[c]


def _signature_classes(tree: _ClassTree, min_shared: int) -> List[int]:
    """Deepest level whose classes keep SIGNATURE_HEIGHT levels below them.

    Only classes with at least `min_shared` subclasses (themselves included)
    qualify. Flat trees fall back to shallower subtrees, then to leaves.
    """
    by_level: Dict[int, List[int]] = {}
    for c in sorted(tree.parents):
        if c != 0 and len(tree.subclasses(c)) >= min_shared:
            by_level.setdefault(tree.depth[c], []).append(c)
    for height in range(SIGNATURE_HEIGHT, -1, -1):
        for level in sorted(by_level, reverse=True):
            chosen = [c for c in by_level[level] if _subtree_height(tree, c) >= height]
            if len(chosen) >= 2:
                return chosen
    return []


def _sample_pairs(
    rng: np.random.Generator,
    candidates: List[Tuple[int, int]],
    count: int,
    kind: str,
) -> List[Tuple[int, int]]:
    if count > len(candidates):
        raise ConfigError(f"need {count} {kind} pairs but only {len(candidates)} exist; lower n_pairs or signal")
    if count == 0:
        return []
    return [candidates[int(i)] for i in rng.choice(len(candidates), size=count, replace=False)]


def gen_kg(cfg: SynthConfig, rng: Optional[np.random.Generator] = None) -> Tuple[KnowledgeGraph, PairDataset]:
    """Generate a frozen graph and a balanced pair dataset. Raises ConfigError for infeasible configs."""
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    ns = cfg.namespace
    tree = _class_tree(cfg, rng)
    n_classes = len(tree.parents)
    signatures = _signature_classes(tree, cfg.min_shared)
    n_groups = min(len(signatures), cfg.n_entities // 2)
    if n_groups < 2:
        raise ConfigError(
            "configuration yields fewer than 2 entity groups; "
            "increase branching, depth or n_entities, or lower min_shared"
        )
    if cfg.negative_per_entity > n_classes - 1 or cfg.positive_per_entity > n_classes - 1:
        raise ConfigError("more annotations per entity than classes")
    if cfg.n_pairs > cfg.n_entities * (cfg.n_entities - 1) // 2:
        raise ConfigError(f"n_pairs={cfg.n_pairs} exceeds the number of distinct entity pairs")

    leaves = [c for c in range(1, n_classes) if not tree.subclasses(c) - {c}]
    signatures = [int(s) for s in rng.permutation(signatures)[:n_groups]]
    order = rng.permutation(cfg.n_entities)
    group_of = {int(e): i % n_groups for i, e in enumerate(order)}
    groups: List[List[int]] = [[] for _ in range(n_groups)]
    for e in range(cfg.n_entities):
        groups[group_of[e]].append(e)

    def class_iri(c: int) -> str:
        return f"{ns}class/C{c:03d}"

    def entity_iri(e: int) -> str:
        return f"{ns}entity/E{e:03d}"

    prop = f"{ns}hasFunction"
    statements: List[Statement] = []
    for c in range(1, n_classes):
        for p in tree.parents[c]:
            statements.append(Statement.of(class_iri(c), SUBCLASS_OF, class_iri(p)))

    for e in range(cfg.n_entities):
        signature = signatures[group_of[e]]
        negatives = [signature]
        closure = tree.subclasses(signature)
        extra_pool = [c for c in leaves if c not in closure]
        n_extra = cfg.negative_per_entity - 1
        if n_extra > len(extra_pool):
            raise ConfigError(f"cannot draw {cfg.negative_per_entity} negative classes per entity")
        for c in rng.choice(extra_pool, size=n_extra, replace=False) if n_extra else []:
            negatives.append(int(c))
            closure |= tree.subclasses(int(c))

        allowed = [c for c in range(1, n_classes) if not (tree.superclasses(c) & closure)]
        if cfg.positive_per_entity > len(allowed):
            raise ConfigError(f"cannot draw {cfg.positive_per_entity} positive classes outside the negative closure")
        positives = sorted(int(c) for c in rng.choice(allowed, size=cfg.positive_per_entity, replace=False))

        for c in positives:
            statements.append(Statement.of(entity_iri(e), prop, class_iri(c), Polarity.POSITIVE))
        for c in sorted(negatives):
            statements.append(Statement.of(entity_iri(e), prop, class_iri(c), Polarity.NEGATIVE))

    kg = KnowledgeGraph.from_statements(statements, [NodeId.iri(entity_iri(e)) for e in range(cfg.n_entities)])

    # same-group counts are fixed per label, so the planted rates hold exactly
    n_pos = cfg.n_pairs // 2
    n_neg = cfg.n_pairs - n_pos
    same_pos = round(cfg.signal * n_pos)
    same_neg = round(min(BACKGROUND_RATE, cfg.signal) * n_neg)
    same_candidates = [pair for g in groups for pair in combinations(g, 2)]
    same_set: Set[Tuple[int, int]] = set(same_candidates)
    cross_candidates = [pair for pair in combinations(range(cfg.n_entities), 2) if pair not in same_set]
    same = _sample_pairs(rng, same_candidates, same_pos + same_neg, "same-group")
    cross = _sample_pairs(rng, cross_candidates, cfg.n_pairs - same_pos - same_neg, "cross-group")
    cross_pos = n_pos - same_pos

    records: List[PairRecord] = []
    for label, drawn in ((1, same[:same_pos] + cross[:cross_pos]), (0, same[same_pos:] + cross[cross_pos:])):
        for i in rng.permutation(len(drawn)):
            a, b = drawn[int(i)]
            records.append(PairRecord(entity_a=entity_iri(a), entity_b=entity_iri(b), label=label))

    pairs = PairDataset(pairs=records)
    logger.info(
        f"Generated synthetic graph: {n_classes} classes, {cfg.n_entities} entities in {n_groups} groups, "
        f"{len(pairs)} pairs (signal={cfg.signal})"
    )
    return kg, pairs


@dataclass
class SyntheticFiles:
    ontology: Path
    annotations: Path
    pairs: Path


def write_synthetic(
    kg: KnowledgeGraph,
    pairs: PairDataset,
    out_dir: Union[str, Path],
    reify_negatives: bool = False,
) -> SyntheticFiles:
    """Write the ontology, annotation and pair files the ingest service reads."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = SyntheticFiles(out_dir / "ontology.nt", out_dir / "annotations.tsv", out_dir / "pairs.tsv")
    write_graph(kg, files.ontology, files.annotations, reify_negatives=reify_negatives)
    write_pairs(pairs, files.pairs)
    return files
