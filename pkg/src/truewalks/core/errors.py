"""
Error types shared by the truewalks modules.
"""
from typing import Any, Dict, Optional


class TrueWalksError(Exception):
    """Base class for every error raised on purpose by truewalks."""

    def to_dict(self) -> Dict[str, Any]:
        return {"type": type(self).__name__, "message": str(self)}


class ParseError(TrueWalksError, ValueError):
    """Malformed input file, located by line and column (both 1-based)."""

    def __init__(
        self,
        message: str,
        line: Optional[int] = None,
        column: Optional[int] = None,
        source: Optional[str] = None,
    ):
        self.message = message
        self.line = line
        self.column = column
        self.source = source
        super().__init__(self._render())

    def _render(self) -> str:
        where = []
        if self.source:
            where.append(self.source)
        if self.line is not None:
            where.append(f"line {self.line}")
        if self.column is not None:
            where.append(f"column {self.column}")
        if where:
            return f"{', '.join(where)}: {self.message}"
        return self.message

    def to_dict(self) -> Dict[str, Any]:
        data = super().to_dict()
        data["message"] = self.message
        for key in ("source", "line", "column"):
            value = getattr(self, key)
            if value is not None:
                data[key] = value
        return data


class GraphError(TrueWalksError, ValueError):
    """A statement violates the knowledge graph invariants."""


class FusionError(TrueWalksError, ValueError):
    """Entity representations cannot be assembled."""


class EvaluationError(TrueWalksError, ValueError):
    """Evaluation inputs are inconsistent (length mismatch, unknown entity...)."""


class ConfigError(TrueWalksError, ValueError):
    """Invalid configuration file or flag."""
