"""
Prometheus Metrics Service
Run-scoped counters and histograms, written as a textfile next to the run artifacts.
"""
import logging
from pathlib import Path
from typing import Optional, Union

logger = logging.getLogger(__name__)

# Try to import prometheus_client, fallback to mock if not available
try:
    from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram, Info, write_to_textfile
    PROMETHEUS_AVAILABLE = True
except ImportError:
    PROMETHEUS_AVAILABLE = False
    logger.warning("prometheus_client not installed. Metrics will be mocked.")


class MetricsCollector:
    """
    Collects metrics for one CLI run. Each collector owns its registry so
    repeated runs in one process never clash on metric names.
    """

    def __init__(self, app_name: str = "truewalks"):
        self.app_name = app_name
        self.registry = None
        self._setup_metrics()

    def _setup_metrics(self):
        if not PROMETHEUS_AVAILABLE:
            self._mock_metrics()
            return

        self.registry = CollectorRegistry()
        prefix = self.app_name

        self.stage_duration = Histogram(
            f"{prefix}_stage_duration_seconds",
            "Wall time per pipeline stage",
            ["stage"],
            buckets=[0.01, 0.1, 0.5, 1.0, 5.0, 30.0, 120.0, 600.0],
            registry=self.registry,
        )

        self.walks_total = Counter(
            f"{prefix}_walks_total",
            "Walks emitted",
            ["status"],
            registry=self.registry,
        )

        self.walk_length = Histogram(
            f"{prefix}_walk_length_tokens",
            "Tokens per emitted walk",
            ["status"],
            buckets=[3, 5, 7, 9, 13, 17],
            registry=self.registry,
        )

        self.training_pairs_total = Counter(
            f"{prefix}_training_pairs_total",
            "Center/context pairs consumed by skip-gram training",
            ["model"],
            registry=self.registry,
        )

        self.epoch_loss = Gauge(
            f"{prefix}_epoch_loss",
            "Mean loss of the latest epoch",
            ["model"],
            registry=self.registry,
        )

        self.parse_warnings = Counter(
            f"{prefix}_parse_warnings_total",
            "Non-fatal input warnings",
            ["kind"],
            registry=self.registry,
        )

        self.split_f_score = Histogram(
            f"{prefix}_split_f_score",
            "Weighted F per Monte Carlo split",
            ["mode"],
            buckets=[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
            registry=self.registry,
        )

        self.run_info = Info(
            f"{prefix}_run",
            "Run information",
            registry=self.registry,
        )

    def _mock_metrics(self):
        """Create mock metrics when prometheus_client is not available."""
        class MockMetric:
            def labels(self, *args, **kwargs): return self
            def inc(self, *args, **kwargs): pass
            def observe(self, *args, **kwargs): pass
            def set(self, *args, **kwargs): pass
            def info(self, *args, **kwargs): pass

        self.stage_duration = MockMetric()
        self.walks_total = MockMetric()
        self.walk_length = MockMetric()
        self.training_pairs_total = MockMetric()
        self.epoch_loss = MockMetric()
        self.parse_warnings = MockMetric()
        self.split_f_score = MockMetric()
        self.run_info = MockMetric()

    # Helper methods
    def observe_stage(self, stage: str, seconds: float):
        self.stage_duration.labels(stage=stage).observe(seconds)

    def record_walks(self, status: str, lengths):
        """Record emitted walks of one polarity, given their token lengths."""
        count = 0
        for n in lengths:
            self.walk_length.labels(status=status).observe(n)
            count += 1
        if count:
            self.walks_total.labels(status=status).inc(count)

    def record_training(self, model: str, pairs: int, last_loss: Optional[float]):
        if pairs:
            self.training_pairs_total.labels(model=model).inc(pairs)
        if last_loss is not None:
            self.epoch_loss.labels(model=model).set(last_loss)

    def record_parse_warning(self, kind: str, n: int = 1):
        self.parse_warnings.labels(kind=kind).inc(n)

    def record_split(self, mode: str, f_score: float):
        self.split_f_score.labels(mode=mode).observe(f_score)

    def set_run_info(self, **info: str):
        self.run_info.info({k: str(v) for k, v in info.items()})

    def write(self, path: Union[str, Path]) -> Optional[Path]:
        """Write the registry in Prometheus text format. Returns None when mocked."""
        if not PROMETHEUS_AVAILABLE:
            logger.debug("Metrics are mocked; skipping textfile export")
            return None
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        write_to_textfile(str(path), self.registry)
        return path


# Singleton
_metrics: Optional[MetricsCollector] = None


def get_metrics_collector() -> MetricsCollector:
    global _metrics
    if _metrics is None:
        _metrics = MetricsCollector()
    return _metrics


def reset_metrics_collector() -> MetricsCollector:
    """Start a fresh run-scoped collector."""
    global _metrics
    _metrics = MetricsCollector()
    return _metrics
