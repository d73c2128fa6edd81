"""
Main Pipeline for truewalks
Orchestrates the batch stages: graph loading -> walks -> embeddings -> fusion -> evaluation.
Every stage writes its artifacts under the output directory, next to a manifest.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .config import PipelineConfig
from .core.errors import ConfigError
from .core.graph import KnowledgeGraph
from .core.schemas import EvalReport, KGSummary, PairDataset, RankingReport
from .observability import StageTimer
from .services.artifacts import write_json, write_manifest
from .services.embedding import VectorSet, train, train_dual
from .services.evaluation import classify, compare_splits, export_similarity_distribution, rank_eval
from .services.fusion import EntityEmbeddingTable, TokenVectors, build_single_table, combine
from .services.ingest import (
    load_graph,
    load_pairs,
    merged_polarity_view,
    parse_annotations,
    positive_only_view,
    summarize_graph,
)
from .services.prometheus import MetricsCollector, get_metrics_collector
from .services.synthgen import SyntheticFiles, gen_kg, write_synthetic
from .services.walker import WalkCorpus, build_corpus, read_corpus

logger = logging.getLogger(__name__)

CORPUS_FILE = "corpus.txt"
POS_VECTORS = "pos.vec"
NEG_VECTORS = "neg.vec"
SINGLE_VECTORS = "model.vec"
EMBEDDINGS_FILE = "embeddings.vec"
REPORT_FILE = "report.json"
RANKING_FILE = "ranking.json"
SIMILARITIES_FILE = "similarities.csv"
SUMMARY_FILE = "summary.json"
METRICS_FILE = "metrics.prom"


@dataclass
class TrainedModels:
    """Either a positive/negative pair (truewalks) or one model (single-model baselines)."""
    mode: str
    pos: Optional[TokenVectors] = None
    neg: Optional[TokenVectors] = None
    single: Optional[TokenVectors] = None


class TrueWalksPipeline:
    """
    Main orchestration pipeline.
    Each public method is one CLI stage; `run` chains them and adds the
    requested baselines on identical MCCV splits.
    """

    def __init__(self, cfg: PipelineConfig, metrics: Optional[MetricsCollector] = None):
        self.cfg = cfg
        self.out = Path(cfg.paths.out)
        self.metrics = metrics or get_metrics_collector()
        self._kg: Optional[KnowledgeGraph] = None
        self._pairs: Optional[PairDataset] = None
        self.artifacts: List[Path] = []

    # --- paths ---

    def mode_dir(self, mode: Optional[str] = None) -> Path:
        """Outputs of the configured mode go to `out`; baselines get `out/baselines/<mode>`."""
        mode = mode or self.cfg.mode
        return self.out if mode == self.cfg.mode else self.out / "baselines" / mode

    def _keep(self, path: Path) -> Path:
        if path not in self.artifacts:
            self.artifacts.append(path)
        return path

    def inputs(self) -> List[Path]:
        paths = self.cfg.paths
        return [Path(p) for p in (paths.ontology, paths.annotations, paths.pairs, paths.embeddings_b) if p is not None]

    # --- inputs ---

    def load_graph(self) -> KnowledgeGraph:
        if self._kg is None:
            self.cfg.check_inputs("ontology", "annotations")
            self._kg = load_graph(self.cfg.paths.ontology, self.cfg.paths.annotations)
        return self._kg

    def load_pairs(self) -> PairDataset:
        if self._pairs is None:
            self.cfg.check_inputs("pairs")
            self._pairs = load_pairs(self.cfg.paths.pairs)
        return self._pairs

    def entities(self) -> List[str]:
        """Root entities in sorted order; only the annotation file is needed."""
        if self._kg is not None:
            return [e.token for e in self._kg.sorted_roots()]
        self.cfg.check_inputs("annotations")
        path = Path(self.cfg.paths.annotations)
        records = parse_annotations(path.read_bytes(), source=str(path))
        return sorted({r.entity for r in records})

    def graph_view(self, mode: str) -> KnowledgeGraph:
        kg = self.load_graph()
        if mode == "positive_only":
            return positive_only_view(kg)
        if mode == "merged_polarity":
            return merged_polarity_view(kg)
        return kg

    # --- stages ---

    def synth(self) -> Tuple[SyntheticFiles, KGSummary]:
        with StageTimer("synth", self.metrics):
            kg, pairs = gen_kg(self.cfg.synth)
            files = write_synthetic(kg, pairs, self.out, reify_negatives=self.cfg.synth.reify_negatives)
            summary = summarize_graph(kg)
            for path in (files.ontology, files.annotations, files.pairs):
                self._keep(path)
            self._keep(write_json(self.out / SUMMARY_FILE, summary))
        return files, summary

    def walk(self, mode: Optional[str] = None) -> WalkCorpus:
        mode = mode or self.cfg.mode
        with StageTimer("walk", self.metrics):
            corpus = build_corpus(self.graph_view(mode), self.cfg.walk, workers=self.cfg.workers)
            self._keep(corpus.write(self.mode_dir(mode) / CORPUS_FILE))
        return corpus

    def read_corpus(self, mode: Optional[str] = None) -> WalkCorpus:
        path = self.mode_dir(mode) / CORPUS_FILE
        if not path.exists():
            raise ConfigError(f"No walk corpus at {path}; run the walk stage first")
        return read_corpus(path)

    def train(self, corpus: WalkCorpus, mode: Optional[str] = None) -> TrainedModels:
        """
        truewalks: one model per polarity. Single-model baselines train on the
        positive walks of their graph view with twice the dimension, so every
        mode yields vectors of the same size.
        """
        mode = mode or self.cfg.mode
        target = self.mode_dir(mode)
        with StageTimer("train", self.metrics):
            if mode == "truewalks":
                pos, neg = train_dual(corpus, self.cfg.embed)
                self._keep(pos.save(target / POS_VECTORS))
                self._keep(neg.save(target / NEG_VECTORS))
                return TrainedModels(mode, pos=pos, neg=neg)
            embed = self.cfg.embed.model_copy(update={"dim": 2 * self.cfg.embed.dim})
            single = train(corpus.positive, embed, name=mode)
            self._keep(single.save(target / SINGLE_VECTORS))
            return TrainedModels(mode, single=single)

    def load_models(self, mode: Optional[str] = None) -> TrainedModels:
        mode = mode or self.cfg.mode
        target = self.mode_dir(mode)
        names = (POS_VECTORS, NEG_VECTORS) if mode == "truewalks" else (SINGLE_VECTORS,)
        for name in names:
            if not (target / name).exists():
                raise ConfigError(f"No vectors at {target / name}; run the train stage first")
        if mode == "truewalks":
            return TrainedModels(mode, pos=VectorSet.load(target / POS_VECTORS), neg=VectorSet.load(target / NEG_VECTORS))
        return TrainedModels(mode, single=VectorSet.load(target / SINGLE_VECTORS))

    def fuse(self, models: TrainedModels, entities: Optional[List[str]] = None) -> EntityEmbeddingTable:
        entities = entities if entities is not None else self.entities()
        with StageTimer("fuse", self.metrics):
            if models.single is not None:
                table = build_single_table(models.single, entities)
            else:
                table = combine(models.pos, models.neg, entities)
            self._keep(table.save(self.mode_dir(models.mode) / EMBEDDINGS_FILE))
        logger.info(f"{models.mode}: {len(table)} entity vectors of dimension {table.dim}")
        return table

    def load_table(self, mode: Optional[str] = None) -> EntityEmbeddingTable:
        path = self.mode_dir(mode) / EMBEDDINGS_FILE
        if not path.exists():
            raise ConfigError(f"No entity embeddings at {path}; run the fuse stage first")
        return EntityEmbeddingTable.load(path)

    def embed(self, mode: str) -> EntityEmbeddingTable:
        """walk -> train -> fuse for one mode."""
        corpus = self.walk(mode)
        models = self.train(corpus, mode)
        return self.fuse(models)

    def classify(self, table: EntityEmbeddingTable, mode: Optional[str] = None) -> EvalReport:
        mode = mode or self.cfg.mode
        table_b = None
        if self.cfg.paths.embeddings_b is not None:
            self.cfg.check_inputs("embeddings_b")
            table_b = EntityEmbeddingTable.load(self.cfg.paths.embeddings_b)
        with StageTimer("classify", self.metrics):
            report = classify(table, self.load_pairs(), self.cfg.eval, table_b=table_b, mode=mode)
        return report

    def rank(self, table: EntityEmbeddingTable, mode: Optional[str] = None) -> RankingReport:
        pairs = self.load_pairs()
        with StageTimer("rank", self.metrics):
            ranking = rank_eval(
                table,
                pairs,
                tie_rule=self.cfg.eval.tie_rule,
                hits_at=tuple(self.cfg.eval.hits_at),
            )
            path = self.mode_dir(mode) / SIMILARITIES_FILE
            path.parent.mkdir(parents=True, exist_ok=True)
            export_similarity_distribution(table, pairs, path)
            self._keep(path)
        return ranking

    def evaluate(self, mode: str) -> EvalReport:
        table = self.embed(mode)
        report = self.classify(table, mode)
        report.ranking = self.rank(table, mode)
        return report

    def run(self) -> EvalReport:
        """All stages for the configured mode, then every requested baseline."""
        report = self.evaluate(self.cfg.mode)
        baselines: Dict[str, EvalReport] = {}
        for mode in self.cfg.eval.baselines:
            if mode == self.cfg.mode or mode in baselines:
                continue
            logger.info(f"Running baseline {mode}")
            baselines[mode] = self.evaluate(mode)

        for mode, baseline in baselines.items():
            report.wilcoxon[mode] = compare_splits(report.per_split, baseline.per_split)
            p_f = report.wilcoxon[mode]["f"]
            verdict = "significant" if p_f < self.cfg.eval.alpha else "not significant"
            logger.info(f"{self.cfg.mode} vs {mode}: F p={p_f:.4g} ({verdict} at alpha={self.cfg.eval.alpha})")
        report.baselines = baselines
        self.write_report(report)
        return report

    # --- outputs ---

    def write_report(self, report: EvalReport, name: str = REPORT_FILE) -> Path:
        return self._keep(write_json(self.out / name, report))

    def finish(self, command: str) -> Path:
        """Manifest over every artifact this run wrote, plus the metrics dump."""
        self.metrics.set_run_info(command=command, seed=str(self.cfg.seed), mode=self.cfg.mode)
        manifest = write_manifest(self.out, command, self.cfg, self.artifacts, self.inputs())
        self.metrics.write(self.out / METRICS_FILE)
        return manifest


def create_pipeline(cfg: PipelineConfig, metrics: Optional[MetricsCollector] = None) -> TrueWalksPipeline:
    """Create a new pipeline instance."""
    return TrueWalksPipeline(cfg, metrics=metrics)
