"""
Shared test fixtures and configuration.
"""
import pytest
import os
import sys
from pathlib import Path
from types import SimpleNamespace

# Add src to path for imports
src_path = Path(__file__).parent.parent / "src"
sys.path.insert(0, str(src_path))

# Set test environment
os.environ["TRUEWALKS_LOG_LEVEL"] = "WARNING"
os.environ["TRUEWALKS_LOG_FORMAT"] = "text"
os.environ["TRUEWALKS_WORKERS"] = "1"
os.environ.pop("TRUEWALKS_SEED", None)

DATA_DIR = Path(__file__).parent.parent / "data" / "protein_example"

PROTEIN = "http://example.org/protein/"
GO = "http://purl.obolibrary.org/obo/GO_"


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run the slow acceptance experiments")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance experiments")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def terms():
    """IRIs of the protein function example."""
    return SimpleNamespace(
        P1=PROTEIN + "P1",
        P2=PROTEIN + "P2",
        HAS_FUNCTION=PROTEIN + "hasFunction",
        METAL=GO + "0046872",    # metal ion binding
        IRON=GO + "0005506",     # iron ion binding
        FERRIC=GO + "0008199",   # ferric iron binding
        CALCIUM=GO + "0005509",  # calcium ion binding
    )


def _protein_statements(t, augmented: bool):
    from truewalks.core.graph import Polarity, Statement
    from truewalks.core.vocabulary import SUBCLASS_OF

    statements = [
        Statement.of(t.IRON, SUBCLASS_OF, t.METAL),
        Statement.of(t.FERRIC, SUBCLASS_OF, t.IRON),
        Statement.of(t.P1, t.HAS_FUNCTION, t.IRON, Polarity.POSITIVE),
        Statement.of(t.P1, t.HAS_FUNCTION, t.FERRIC, Polarity.POSITIVE),
        Statement.of(t.P2, t.HAS_FUNCTION, t.IRON, Polarity.NEGATIVE),
    ]
    if augmented:
        statements += [
            Statement.of(t.CALCIUM, SUBCLASS_OF, t.METAL),
            Statement.of(t.P2, t.HAS_FUNCTION, t.CALCIUM, Polarity.POSITIVE),
            Statement.of(t.P1, t.HAS_FUNCTION, t.CALCIUM, Polarity.NEGATIVE),
        ]
    return statements


@pytest.fixture
def protein_kg(terms):
    """Two proteins, three functions, two subclass edges, three annotations."""
    from truewalks.core.graph import KnowledgeGraph, NodeId

    return KnowledgeGraph.from_statements(
        _protein_statements(terms, augmented=False),
        [NodeId.iri(terms.P1), NodeId.iri(terms.P2)],
    )


@pytest.fixture
def augmented_protein_kg(terms):
    """Protein example where both proteins carry both polarities (adds calcium ion binding)."""
    from truewalks.core.graph import KnowledgeGraph, NodeId

    return KnowledgeGraph.from_statements(
        _protein_statements(terms, augmented=True),
        [NodeId.iri(terms.P1), NodeId.iri(terms.P2)],
    )


@pytest.fixture
def protein_files():
    """Sample ontology, annotation and pair files shipped under data/."""
    return SimpleNamespace(
        ontology=DATA_DIR / "ontology.nt",
        annotations=DATA_DIR / "annotations.tsv",
        pairs=DATA_DIR / "pairs.tsv",
    )


@pytest.fixture
def tiny_config(tmp_path, protein_files):
    """Pipeline config small enough for unit tests."""
    from truewalks.config import PipelineConfig

    return PipelineConfig.model_validate({
        "paths": {
            "ontology": str(protein_files.ontology),
            "annotations": str(protein_files.annotations),
            "pairs": str(protein_files.pairs),
            "out": str(tmp_path / "out"),
        },
        "walk": {"max_walks": 10, "max_depth": 4},
        "embed": {"dim": 8, "window": 2, "epochs": 3, "noise_k": 3},
        "eval": {"mccv_repetitions": 5, "rf_estimators": [5], "rf_max_depths": [2, None]},
        "seed": 7,
        "deterministic": True,
    })


@pytest.fixture
def metrics():
    """Fresh metrics registry per test."""
    from truewalks.services.prometheus import reset_metrics_collector

    return reset_metrics_collector()


@pytest.fixture
def restore_logging():
    """Put the root logger back the way pytest set it up."""
    import logging

    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    for handler in list(root.handlers):
        root.removeHandler(handler)
    for handler in handlers:
        root.addHandler(handler)
    root.setLevel(level)
