"""
Evaluation Service
Pair classification (Hadamard pair features, Monte Carlo cross-validation,
random forest) and similarity ranking over an entity embedding table.
"""
import csv
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..config import EvalConfig
from ..core.errors import EvaluationError
from ..core.schemas import EvalReport, PairDataset, PairRecord, RankingReport, SplitResult
from .forest import RFHyper, rf_fit, select_hyperparameters
from .fusion import EntityEmbeddingTable
from .prometheus import get_metrics_collector
from .statistics import prf_weighted, wilcoxon_signed_rank

logger = logging.getLogger(__name__)

METRICS = ("precision", "recall", "f")
Split = Tuple[np.ndarray, np.ndarray]


# --- Pair features ---

def hadamard_pair(va, vb) -> np.ndarray:
    va, vb = np.asarray(va, dtype=np.float64), np.asarray(vb, dtype=np.float64)
    if va.shape != vb.shape:
        raise EvaluationError(f"Hadamard product needs equal lengths ({va.shape} vs {vb.shape})")
    return va * vb


def pair_features(
    table: EntityEmbeddingTable,
    pairs: PairDataset,
    table_b: Optional[EntityEmbeddingTable] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Feature matrix and labels. With `table_b`, the second entity of each pair is looked up there."""
    side_b = table_b if table_b is not None else table
    missing = [p.entity_a for p in pairs.pairs if p.entity_a not in table]
    missing += [p.entity_b for p in pairs.pairs if p.entity_b not in side_b]
    if missing:
        raise EvaluationError(f"{len(set(missing))} pair entities have no embedding (e.g. {sorted(set(missing))[0]})")
    X = np.stack([hadamard_pair(table.vector(p.entity_a), side_b.vector(p.entity_b)) for p in pairs.pairs])
    y = np.asarray(pairs.labels, dtype=np.int64)
    return X, y


# --- Monte Carlo cross-validation ---

def mccv_test_size(n_pairs: int, beta: float) -> int:
    return min(max(round(beta * n_pairs), 1), n_pairs - 1)


def mccv_splits(n_pairs: int, repetitions: int, beta: float, rng: np.random.Generator) -> List[Split]:
    """`repetitions` independent uniform (train, test) partitions with |test| = round(beta * n)."""
    if n_pairs < 2:
        raise EvaluationError("Monte Carlo cross-validation needs at least 2 pairs")
    n_test = mccv_test_size(n_pairs, beta)
    splits = []
    for _ in range(repetitions):
        perm = rng.permutation(n_pairs)
        splits.append((np.sort(perm[n_test:]), np.sort(perm[:n_test])))
    return splits


_worker_data: Dict[str, object] = {}


def _init_worker(X: np.ndarray, y: np.ndarray, cfg: EvalConfig) -> None:
    _worker_data.update(X=X, y=y, cfg=cfg)


def _evaluate_split(
    X: np.ndarray,
    y: np.ndarray,
    cfg: EvalConfig,
    index: int,
    split: Split,
    seed: np.random.SeedSequence,
) -> SplitResult:
    train, test = split
    rng = np.random.default_rng(seed)
    hyper = select_hyperparameters(
        X[train], y[train], cfg.rf_grid(), rng, cfg.inner_validation_fraction, cfg.average
    )
    model = rf_fit(X[train], y[train], hyper, rng)
    precision, recall, f = prf_weighted(model.predict(X[test]), y[test], average=cfg.average)
    return SplitResult(
        split=index,
        n_train=len(train),
        n_test=len(test),
        precision=precision,
        recall=recall,
        f=f,
        n_estimators=hyper.n_estimators,
        max_depth=hyper.max_depth,
    )


def _evaluate_split_in_worker(args) -> SplitResult:
    index, split, seed = args
    return _evaluate_split(_worker_data["X"], _worker_data["y"], _worker_data["cfg"], index, split, seed)


def run_mccv(X: np.ndarray, y: np.ndarray, cfg: EvalConfig, mode: str = "truewalks") -> List[SplitResult]:
    """
    Splits and per-split streams depend only on (n, seed), so every mode
    evaluated with the same config sees identical partitions.
    """
    split_seq, *split_seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.mccv_repetitions + 1)
    splits = mccv_splits(len(y), cfg.mccv_repetitions, cfg.test_fraction, np.random.default_rng(split_seq))
    tasks = list(zip(range(len(splits)), splits, split_seeds))

    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers, initializer=_init_worker, initargs=(X, y, cfg)) as pool:
            results = list(pool.map(_evaluate_split_in_worker, tasks))
    else:
        results = [_evaluate_split(X, y, cfg, *task) for task in tasks]

    metrics = get_metrics_collector()
    for r in results:
        metrics.record_split(mode, r.f)
    return results


def summarize_splits(per_split: List[SplitResult], mode: str = "truewalks") -> EvalReport:
    """Medians are taken per metric independently."""
    report = EvalReport(mode=mode, per_split=per_split)
    if per_split:
        report.precision_median = float(np.median([s.precision for s in per_split]))
        report.recall_median = float(np.median([s.recall for s in per_split]))
        report.f_median = float(np.median([s.f for s in per_split]))
    return report


def classify(
    table: EntityEmbeddingTable,
    pairs: PairDataset,
    cfg: EvalConfig,
    table_b: Optional[EntityEmbeddingTable] = None,
    mode: str = "truewalks",
) -> EvalReport:
    X, y = pair_features(table, pairs, table_b)
    per_split = run_mccv(X, y, cfg, mode)
    report = summarize_splits(per_split, mode)
    logger.info(
        f"{mode}: {len(per_split)} splits, median P={report.precision_median:.3f} "
        f"R={report.recall_median:.3f} F={report.f_median:.3f}"
    )
    return report


def compare_splits(main: List[SplitResult], baseline: List[SplitResult]) -> Dict[str, float]:
    """Per-metric Wilcoxon p-values over paired split results."""
    if len(main) != len(baseline):
        raise EvaluationError("reports were computed on different numbers of splits")
    return {
        metric: wilcoxon_signed_rank([getattr(s, metric) for s in main], [getattr(s, metric) for s in baseline])
        for metric in METRICS
    }


# --- Similarity ranking ---

def _cosines(table: EntityEmbeddingTable, anchor: str, others: Sequence[str]) -> np.ndarray:
    """Cosine similarity of `anchor` to each of `others`; zero vectors score 0."""
    v = table.vector(anchor)
    rows = np.stack([table.vector(o) for o in others]) if others else np.zeros((0, table.dim))
    dots = (rows * v).sum(axis=1)
    norms = np.sqrt((rows * rows).sum(axis=1)) * np.sqrt((v * v).sum())
    with np.errstate(divide="ignore", invalid="ignore"):
        sims = np.where(norms > 0, dots / np.where(norms > 0, norms, 1.0), 0.0)
    return sims


def pair_cosine(table: EntityEmbeddingTable, a: str, b: str) -> float:
    return float(_cosines(table, a, [b])[0])


def _positive_pairs(pairs: Union[PairDataset, Iterable]) -> List[Tuple[str, str]]:
    if isinstance(pairs, PairDataset):
        return [(p.entity_a, p.entity_b) for p in pairs.positives()]
    out = []
    for p in pairs:
        if isinstance(p, PairRecord):
            if p.label == 1:
                out.append((p.entity_a, p.entity_b))
        else:
            out.append((p[0], p[1]))
    return out


def rank_eval(
    table: EntityEmbeddingTable,
    positive_pairs: Union[PairDataset, Iterable],
    candidates: Optional[Sequence[str]] = None,
    tie_rule: str = "optimistic",
    hits_at: Tuple[int, int] = (10, 100),
) -> RankingReport:
    """
    For each positive pair (e1, e2), rank e2 among the candidates by cosine
    similarity to e1. Only strictly more similar candidates push the rank
    down; tie_rule="expected" adds half of the ties.
    """
    if tie_rule not in ("optimistic", "expected"):
        raise EvaluationError(f"unknown tie rule {tie_rule!r}")
    pairs = _positive_pairs(positive_pairs)
    candidates = list(dict.fromkeys(candidates if candidates is not None else table.entities))
    if len(candidates) < 2:
        raise EvaluationError("ranking needs at least 2 candidates")

    missing = sorted({e for pair in pairs for e in pair if e not in table})
    if missing:
        raise EvaluationError(f"pair entity missing from embedding table: {missing[0]}")
    not_candidates = sorted({e2 for _, e2 in pairs if e2 not in candidates})
    if not_candidates:
        raise EvaluationError(f"pair target is not a ranking candidate: {not_candidates[0]}")
    self_pairs = sorted({e1 for e1, e2 in pairs if e1 == e2})
    if self_pairs:
        raise EvaluationError(f"cannot rank an entity against itself: {self_pairs[0]}")

    ranks, aucs, targets = [], [], []
    all_tied = True
    for e1, e2 in pairs:
        others = [c for c in candidates if c != e1]
        sims = _cosines(table, e1, others)
        target_index = others.index(e2)
        target = sims[target_index]
        rest = np.delete(sims, target_index)
        greater = int(np.sum(rest > target))
        ties = int(np.sum(rest == target))
        rank = 1.0 + greater + (ties / 2.0 if tie_rule == "expected" else 0.0)
        n = len(others)
        ranks.append(rank)
        aucs.append((n - rank) / (n - 1) if n > 1 else 1.0)
        targets.append(float(target))
        all_tied = all_tied and ties == len(rest)

    degenerate = bool(pairs) and all_tied
    if degenerate:
        logger.warning("every candidate ties with its target; ranking metrics are degenerate")

    k10, k100 = hits_at
    ranks_arr = np.asarray(ranks)
    return RankingReport(
        hits10=float(np.mean(ranks_arr <= k10)) if pairs else 0.0,
        hits100=float(np.mean(ranks_arr <= k100)) if pairs else 0.0,
        mean_rank=float(np.mean(ranks_arr)) if pairs else 1.0,
        auc=float(np.mean(aucs)) if pairs else 0.0,
        n_pairs=len(pairs),
        n_candidates=len(candidates),
        tie_rule=tie_rule,
        degenerate=degenerate,
        target_similarities=targets,
    )


def export_similarity_distribution(
    table: EntityEmbeddingTable,
    pairs: PairDataset,
    path: Optional[Union[str, Path]] = None,
) -> str:
    """CSV `entityA,entityB,label,cosine`, one row per pair."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["entityA", "entityB", "label", "cosine"])
    for p in pairs.pairs:
        writer.writerow([p.entity_a, p.entity_b, p.label, repr(pair_cosine(table, p.entity_a, p.entity_b))])
    text = buffer.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
