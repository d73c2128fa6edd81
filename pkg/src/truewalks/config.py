"""
Configuration module for truewalks
Pydantic stage configs, flat key=value config files and environment settings.
"""
import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .core.errors import ConfigError

BaselineMode = Literal["truewalks", "positive_only", "merged_polarity"]
AverageMode = Literal["positive", "weighted"]


class WalkConfig(BaseModel):
    """Walk generation parameters (defaults: 100 walks of depth 4 per entity)."""
    model_config = ConfigDict(extra="forbid")

    max_walks: int = Field(default=100, ge=1)
    max_depth: int = Field(default=4, ge=2)
    seed: int = Field(default=0, ge=0, lt=2**64)


class SkipGramConfig(BaseModel):
    """Skip-gram with negative sampling, one model per polarity."""
    model_config = ConfigDict(extra="forbid")

    dim: int = Field(default=100, ge=1)
    window: int = Field(default=5, ge=1)
    epochs: int = Field(default=5, ge=1)
    noise_k: int = Field(default=5, ge=0)
    learning_rate: float = Field(default=0.025, gt=0.0)
    min_learning_rate_ratio: float = Field(default=1e-4, gt=0.0, le=1.0)
    noise_exponent: float = Field(default=0.75, ge=0.0)
    min_count: int = Field(default=1, ge=1)
    order_aware: bool = False
    seed: int = Field(default=0, ge=0, lt=2**64)
    workers: int = Field(default=1, ge=1)

    @property
    def min_learning_rate(self) -> float:
        return self.learning_rate * self.min_learning_rate_ratio

    @property
    def n_output_matrices(self) -> int:
        return 2 * self.window if self.order_aware else 1


# Random forest grid: estimators x depth (None = unbounded)
DEFAULT_RF_ESTIMATORS: List[int] = [50, 100, 200]
DEFAULT_RF_DEPTHS: List[Optional[int]] = [2, 4, 6, None]


class EvalConfig(BaseModel):
    """Classifier (MCCV + random forest) and ranking protocol parameters."""
    model_config = ConfigDict(extra="forbid")

    mccv_repetitions: int = Field(default=30, ge=1)
    test_fraction: float = Field(default=0.3, gt=0.0, lt=1.0)
    rf_estimators: List[int] = Field(default_factory=lambda: list(DEFAULT_RF_ESTIMATORS))
    rf_max_depths: List[Optional[int]] = Field(default_factory=lambda: list(DEFAULT_RF_DEPTHS))
    inner_validation_fraction: float = Field(default=0.2, gt=0.0, lt=1.0)
    alpha: float = Field(default=0.05, gt=0.0, lt=1.0)
    average: AverageMode = "positive"
    tie_rule: Literal["optimistic", "expected"] = "optimistic"
    hits_at: Tuple[int, int] = (10, 100)
    baselines: List[BaselineMode] = Field(default_factory=list)
    seed: int = Field(default=0, ge=0, lt=2**64)
    workers: int = Field(default=1, ge=1)

    @field_validator("rf_estimators", "rf_max_depths", "baselines", mode="before")
    @classmethod
    def _listify(cls, value: Any) -> Any:
        if isinstance(value, str) and "," in value:
            value = [part.strip() for part in value.split(",") if part.strip()]
        if not isinstance(value, (list, tuple)):
            value = [value]
        return [None if isinstance(v, str) and v.lower() in ("none", "null") else v for v in value]

    @field_validator("rf_estimators")
    @classmethod
    def _positive_estimators(cls, value: List[int]) -> List[int]:
        if not value or any(v < 1 for v in value):
            raise ValueError("rf_estimators must be a non-empty list of positive integers")
        return value

    @field_validator("rf_max_depths")
    @classmethod
    def _valid_depths(cls, value: List[Optional[int]]) -> List[Optional[int]]:
        if not value or any(v is not None and v < 1 for v in value):
            raise ValueError("rf_max_depths must be non-empty; depths are positive or None")
        return value

    def rf_grid(self) -> List[Tuple[int, Optional[int]]]:
        return [(n, d) for n in self.rf_estimators for d in self.rf_max_depths]


class SynthConfig(BaseModel):
    """Synthetic graph generator parameters."""
    model_config = ConfigDict(extra="forbid")

    n_classes: Optional[int] = Field(default=None, ge=1)
    branching: int = Field(default=5, ge=1)
    depth: int = Field(default=3, ge=1)
    n_entities: int = Field(default=40, ge=2)
    positive_per_entity: int = Field(default=2, ge=1)
    negative_per_entity: int = Field(default=2, ge=1)
    n_pairs: int = Field(default=100, ge=2)
    signal: float = Field(default=0.9, ge=0.0, le=1.0)
    min_shared: int = Field(default=1, ge=1)  # negative-entailed classes every same-group pair shares
    extra_edge_fraction: float = Field(default=0.05, ge=0.0, le=1.0)
    reify_negatives: bool = False
    namespace: str = "http://example.org/synth/"
    seed: int = Field(default=0, ge=0, lt=2**64)


class PathsConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    ontology: Optional[Path] = None
    annotations: Optional[Path] = None
    pairs: Optional[Path] = None
    out: Path = Path("./out")
    embeddings_b: Optional[Path] = None


class PipelineConfig(BaseModel):
    """Everything a pipeline stage needs. Serialized into every manifest."""
    model_config = ConfigDict(extra="forbid")

    paths: PathsConfig = Field(default_factory=PathsConfig)
    walk: WalkConfig = Field(default_factory=WalkConfig)
    embed: SkipGramConfig = Field(default_factory=SkipGramConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    synth: SynthConfig = Field(default_factory=SynthConfig)
    mode: BaselineMode = "truewalks"
    seed: int = Field(default=0, ge=0, lt=2**64)
    workers: int = Field(default=1, ge=1)
    deterministic: bool = False

    @model_validator(mode="after")
    def _propagate_seed_and_workers(self) -> "PipelineConfig":
        """The top-level seed and worker count drive every stage."""
        for section in (self.walk, self.embed, self.eval, self.synth):
            section.seed = self.seed
        self.eval.workers = self.workers
        self.embed.workers = 1 if self.deterministic else self.workers
        return self

    def config_hash(self) -> str:
        payload = json.dumps(self.model_dump(mode="json"), sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def check_inputs(self, *names: str) -> None:
        """Raise ConfigError unless the named input paths are set and exist."""
        for name in names:
            path = getattr(self.paths, name)
            if path is None:
                raise ConfigError(f"--{name.replace('_', '-')} is required for this command")
            if not Path(path).exists():
                raise ConfigError(f"Input file not found: {path}")


# --- Flat key=value config files ---

def _coerce(value: str) -> Any:
    """Turn a raw config value into JSON-ish Python data; pydantic validates later."""
    text = value.strip()
    lowered = text.lower()
    if lowered in ("none", "null", ""):
        return None
    if lowered in ("true", "false"):
        return lowered == "true"
    if "," in text:
        return [_coerce(part) for part in text.split(",") if part.strip()]
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


_SECTIONS: Dict[str, type] = {
    "paths": PathsConfig,
    "walk": WalkConfig,
    "embed": SkipGramConfig,
    "eval": EvalConfig,
    "synth": SynthConfig,
}
# filled in from the top-level fields by PipelineConfig
_DERIVED_KEYS = ("seed", "workers")


def _check_key(parts: List[str], source: str, lineno: int) -> None:
    key = ".".join(parts)
    if len(parts) == 1:
        if parts[0] in _SECTIONS or parts[0] not in PipelineConfig.model_fields:
            raise ConfigError(f"{source}, line {lineno}: unknown config key {key!r}")
        return
    section = _SECTIONS.get(parts[0])
    if section is None or parts[1] not in section.model_fields:
        raise ConfigError(f"{source}, line {lineno}: unknown config key {key!r}")
    if parts[1] in _DERIVED_KEYS:
        raise ConfigError(f"{source}, line {lineno}: {key} cannot be set per section; set top-level {parts[1]} instead")


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, Any]:
    """
    Parse `section.key=value` lines into a nested dict.
    Keys without a section prefix are top-level PipelineConfig fields.
    """
    data: Dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}, line {lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}, line {lineno}: empty key")
        parts = key.split(".")
        if len(parts) > 2:
            raise ConfigError(f"{source}, line {lineno}: keys have at most one section prefix ({key})")
        _check_key(parts, source, lineno)
        target = data
        if len(parts) == 2:
            target = data.setdefault(parts[0], {})
            if not isinstance(target, dict):
                raise ConfigError(f"{source}, line {lineno}: {parts[0]} is not a section")
        target[parts[-1]] = _coerce(value)
    return data


def merge_overrides(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_overrides(merged[key], value)
        else:
            merged[key] = value
    return merged


def build_pipeline_config(
    file_data: Optional[Dict[str, Any]] = None,
    overrides: Optional[Dict[str, Any]] = None,
    settings: Optional["Settings"] = None,
) -> PipelineConfig:
    """Defaults < config file < environment seed fallback < flags."""
    data = merge_overrides(file_data or {}, overrides or {})
    if "seed" not in data and settings is not None and settings.SEED is not None:
        data["seed"] = settings.SEED
    if "workers" not in data and settings is not None:
        data["workers"] = settings.WORKERS
    try:
        return PipelineConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(p) for p in first["loc"])
        raise ConfigError(f"Invalid config value for {location}: {first['msg']}") from e


def load_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"), source=str(path))


@dataclass
class Settings:
    """Process-level settings taken from the environment."""

    SEED: Optional[int] = None
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: Literal["json", "text"] = "json"
    WORKERS: int = 1

    @classmethod
    def from_env(cls) -> "Settings":
        """Create settings from TRUEWALKS_* environment variables (and a .env file)."""
        load_dotenv()
        seed = os.getenv("TRUEWALKS_SEED")
        try:
            parsed_seed = int(seed) if seed not in (None, "") else None
            workers = int(os.getenv("TRUEWALKS_WORKERS", "1"))
        except ValueError as e:
            raise ConfigError(f"Invalid TRUEWALKS_* environment value: {e}") from e
        log_format = os.getenv("TRUEWALKS_LOG_FORMAT", "json").lower()
        return cls(
            SEED=parsed_seed,
            LOG_LEVEL=os.getenv("TRUEWALKS_LOG_LEVEL", "INFO").upper(),
            LOG_FORMAT="text" if log_format == "text" else "json",
            WORKERS=max(workers, 1),
        )
