"""
Observability module for truewalks
Structured JSON logging, stage timing and stage events.
"""
import json
import logging
import sys
import time
from typing import Any, Dict, Optional

from pythonjsonlogger import jsonlogger

from .services.prometheus import MetricsCollector, get_metrics_collector

logger = logging.getLogger(__name__)

_LOG_FIELDS = "%(asctime)s %(levelname)s %(name)s %(message)s"


def configure_logging(level: str = "INFO", fmt: str = "json") -> None:
    """Install the root handler. Logs go to stderr so stdout stays machine-readable."""
    handler = logging.StreamHandler(sys.stderr)
    if fmt == "json":
        handler.setFormatter(
            jsonlogger.JsonFormatter(
                _LOG_FIELDS,
                rename_fields={"asctime": "timestamp", "levelname": "level", "name": "logger"},
            )
        )
    else:
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s [%(name)s] %(message)s"))

    root = logging.getLogger()
    for existing in list(root.handlers):
        root.removeHandler(existing)
    root.addHandler(handler)
    root.setLevel(getattr(logging, level.upper(), logging.INFO))


class StageTimer:
    """Context manager timing one pipeline stage."""

    def __init__(self, stage: str, collector: Optional[MetricsCollector] = None):
        self.stage = stage
        self.collector = collector or get_metrics_collector()
        self.start_time: Optional[float] = None
        self.duration_s: float = 0.0
        self.failed = False

    def __enter__(self) -> "StageTimer":
        self.start_time = time.perf_counter()
        logger.info(f"Stage {self.stage} started")
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if self.start_time is not None:
            self.duration_s = time.perf_counter() - self.start_time
        self.failed = exc_type is not None
        self.collector.observe_stage(self.stage, self.duration_s)
        log_stage_event(
            self.stage,
            status="failed" if self.failed else "ok",
            duration_s=self.duration_s,
            error=str(exc_val) if exc_val else None,
        )
        return False


def log_stage_event(
    stage: str,
    status: str,
    duration_s: float = 0.0,
    error: Optional[str] = None,
    **details: Any,
) -> None:
    """Log a structured stage event."""
    event: Dict[str, Any] = {
        "event_type": "stage",
        "stage": stage,
        "status": status,
        "duration_ms": round(duration_s * 1000, 2),
    }
    if error:
        event["error"] = error
    if details:
        event["details"] = details

    # Keep the event greppable in plain-text mode too
    logger.info(f"STAGE_EVENT: {json.dumps(event, default=str)}", extra={"stage_event": event})
