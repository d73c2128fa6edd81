"""
Command-line entry point for truewalks
Subcommands: synth, walk, train, fuse, classify, rank, pipeline.
Failures print exactly one `error {json}` line on stderr.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from pydantic import ValidationError

from . import __version__
from .config import PipelineConfig, Settings, build_pipeline_config, load_config_file
from .core.errors import ConfigError, TrueWalksError
from .core.schemas import EvalReport
from .observability import configure_logging
from .pipeline import RANKING_FILE, REPORT_FILE, TrueWalksPipeline, create_pipeline
from .services.artifacts import load_manifest
from .services.prometheus import reset_metrics_collector

logger = logging.getLogger(__name__)

COMMANDS = ("synth", "walk", "train", "fuse", "classify", "rank", "pipeline")

# argparse dest -> (config section or None, field)
FLAG_KEYS: Dict[str, tuple] = {
    "ontology": ("paths", "ontology"),
    "annotations": ("paths", "annotations"),
    "pairs": ("paths", "pairs"),
    "out": ("paths", "out"),
    "embeddings_b": ("paths", "embeddings_b"),
    "seed": (None, "seed"),
    "workers": (None, "workers"),
    "deterministic": (None, "deterministic"),
    "mode": (None, "mode"),
    "walks": ("walk", "max_walks"),
    "depth": ("walk", "max_depth"),
    "dim": ("embed", "dim"),
    "window": ("embed", "window"),
    "epochs": ("embed", "epochs"),
    "neg_k": ("embed", "noise_k"),
    "order_aware": ("embed", "order_aware"),
    "repetitions": ("eval", "mccv_repetitions"),
    "test_fraction": ("eval", "test_fraction"),
    "tie_rule": ("eval", "tie_rule"),
    "baselines": ("eval", "baselines"),
    "classes": ("synth", "n_classes"),
    "branching": ("synth", "branching"),
    "tree_depth": ("synth", "depth"),
    "entities": ("synth", "n_entities"),
    "n_pairs": ("synth", "n_pairs"),
    "signal": ("synth", "signal"),
    "min_shared": ("synth", "min_shared"),
    "positives": ("synth", "positive_per_entity"),
    "negatives": ("synth", "negative_per_entity"),
    "reify_negatives": ("synth", "reify_negatives"),
}


class _Parser(argparse.ArgumentParser):
    """Usage errors become ConfigError so they follow the one-line error format."""

    def error(self, message: str):
        raise ConfigError(message)


def _common_flags() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="key=value config file, or a manifest.json to replay")
    common.add_argument("--ontology", type=Path, help="Ontology N-Triples file")
    common.add_argument("--annotations", type=Path, help="Annotation TSV (entity, property, class, polarity)")
    common.add_argument("--pairs", type=Path, help="Pair TSV (entityA, entityB, label)")
    common.add_argument("--out", type=Path, help="Output directory")
    common.add_argument("--embeddings-b", dest="embeddings_b", type=Path, help="Second entity table for side B of each pair")
    common.add_argument("--seed", type=int, help="Master seed (falls back to TRUEWALKS_SEED)")
    common.add_argument("--workers", type=int, help="Worker processes for walks and MCCV")
    common.add_argument("--deterministic", action="store_true", default=None, help="Single-worker training")
    common.add_argument("--mode", choices=["truewalks", "positive_only", "merged_polarity"], help="Walk/training mode")
    common.add_argument("--walks", type=int, help="Walks per entity and polarity")
    common.add_argument("--depth", type=int, help="Maximum walk depth")
    common.add_argument("--dim", type=int, help="Embedding dimension per polarity")
    common.add_argument("--window", type=int, help="Context window")
    common.add_argument("--epochs", type=int, help="Training epochs")
    common.add_argument("--neg-k", dest="neg_k", type=int, help="Noise samples per context")
    common.add_argument("--order-aware", dest="order_aware", action="store_true", default=None, help="One output matrix per context offset")
    common.add_argument("--repetitions", type=int, help="MCCV repetitions")
    common.add_argument("--test-fraction", dest="test_fraction", type=float, help="MCCV test fraction")
    common.add_argument("--tie-rule", dest="tie_rule", choices=["optimistic", "expected"], help="Ranking tie rule")
    common.add_argument("--baselines", help="Comma-separated baseline modes for the pipeline command")
    return common


def _synth_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--classes", type=int, help="Number of ontology classes")
    parser.add_argument("--branching", type=int, help="Class tree branching factor")
    parser.add_argument("--tree-depth", dest="tree_depth", type=int, help="Class tree depth")
    parser.add_argument("--entities", type=int, help="Number of entities")
    parser.add_argument("--n-pairs", dest="n_pairs", type=int, help="Number of labeled pairs")
    parser.add_argument("--signal", type=float, help="Probability that a positive pair shares a planted negative class")
    parser.add_argument("--min-shared", dest="min_shared", type=int, help="Negative-entailed classes every same-group pair shares")
    parser.add_argument("--positives", type=int, help="Positive annotations per entity")
    parser.add_argument("--negatives", type=int, help="Negative annotations per entity")
    parser.add_argument("--reify-negatives", dest="reify_negatives", action="store_true", default=None,
                        help="Write every negative statement as a reification cluster")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="truewalks", description="Polarity-aware random walk embeddings for knowledge graphs")
    parser.add_argument("--version", action="version", version=f"truewalks {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True
    common = _common_flags()
    helps = {
        "synth": "Generate a synthetic graph with a planted signal",
        "walk": "Generate the walk corpus",
        "train": "Train embeddings from the walk corpus",
        "fuse": "Build the entity embedding table",
        "classify": "MCCV pair classification with a random forest",
        "rank": "Similarity ranking evaluation",
        "pipeline": "Run every stage, plus baselines",
    }
    for name in COMMANDS:
        command = sub.add_parser(name, parents=[common], help=helps[name])
        if name == "synth":
            _synth_flags(command)
    return parser


def flag_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Nested config overrides for every flag given on the command line."""
    overrides: Dict[str, Any] = {}
    for dest, (section, key) in FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is None:
            continue
        if isinstance(value, Path):
            value = str(value)
        target = overrides if section is None else overrides.setdefault(section, {})
        target[key] = value
    return overrides


def _file_config(path: Optional[Path]) -> Dict[str, Any]:
    if path is None:
        return {}
    if path.suffix == ".json":
        if not path.exists():
            raise ConfigError(f"Config file not found: {path}")
        return dict(load_manifest(path).config)
    return load_config_file(path)


def resolve_config(args: argparse.Namespace, settings: Settings) -> PipelineConfig:
    return build_pipeline_config(_file_config(args.config), flag_overrides(args), settings)


def run(command: str, pipeline: TrueWalksPipeline) -> Dict[str, Any]:
    """Run one subcommand. Returns the one-line summary printed on stdout."""
    cfg = pipeline.cfg
    result: Dict[str, Any] = {"command": command, "out": str(pipeline.out)}

    if command == "synth":
        _, summary = pipeline.synth()
        result["summary"] = summary.model_dump()
    elif command == "walk":
        corpus = pipeline.walk()
        result["walks"] = {"pos": len(corpus.positive), "neg": len(corpus.negative)}
    elif command == "train":
        models = pipeline.train(pipeline.read_corpus())
        result["models"] = ["pos", "neg"] if models.single is None else [models.mode]
    elif command == "fuse":
        table = pipeline.fuse(pipeline.load_models())
        result["entities"], result["dim"] = len(table), table.dim
    elif command == "classify":
        report = pipeline.classify(pipeline.load_table())
        pipeline.write_report(report, REPORT_FILE)
        result["f_median"] = report.f_median
    elif command == "rank":
        ranking = pipeline.rank(pipeline.load_table())
        pipeline.write_report(EvalReport(mode=cfg.mode, ranking=ranking), RANKING_FILE)
        result["auc"] = ranking.auc
    elif command == "pipeline":
        report = pipeline.run()
        result["f_median"] = report.f_median
        result["auc"] = report.ranking.auc if report.ranking else None
    else:
        raise ConfigError(f"unknown command {command!r}")

    result["manifest"] = str(pipeline.finish(command))
    return result


def _emit_error(payload: Dict[str, Any]) -> None:
    sys.stderr.write("error " + json.dumps(payload, sort_keys=True, default=str) + "\n")
    sys.stderr.flush()


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        settings = Settings.from_env()
        configure_logging(settings.LOG_LEVEL, settings.LOG_FORMAT)
        args = build_parser().parse_args(argv)
        cfg = resolve_config(args, settings)
        pipeline = create_pipeline(cfg, metrics=reset_metrics_collector())
        result = run(args.command, pipeline)
    except TrueWalksError as e:
        _emit_error(e.to_dict())
        return 2
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(p) for p in first["loc"])
        _emit_error({"type": "ValidationError", "message": f"{location}: {first['msg']}" if location else first["msg"]})
        return 2
    except SystemExit as e:
        # --help / --version
        return int(e.code or 0)
    except Exception as e:
        logger.debug("Unhandled exception", exc_info=True)
        _emit_error({"type": type(e).__name__, "message": str(e)})
        return 1

    print(json.dumps(result, sort_keys=True, default=str))
    return 0


def entrypoint(argv: Optional[List[str]] = None) -> None:
    sys.exit(main(argv))
