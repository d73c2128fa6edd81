import re
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .graph import Polarity

# --- Enums (defined as Literals for Pydantic) ---

PolarityToken = Literal["pos", "neg"]
PairLabel = Literal[0, 1]

_IRI_FORBIDDEN = re.compile(r'[<>"{}|^`\\\x00-\x20]')

# --- Input records ---

class AnnotationRecord(BaseModel):
    """One row of the annotation TSV: (entity, property, class) with a polarity."""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    entity: str = Field(..., min_length=1)
    property: str = Field(..., min_length=1)
    cls: str = Field(..., min_length=1, alias="class")
    polarity: Polarity

    @field_validator("entity", "property", "cls", mode="before")
    @classmethod
    def _bare_iri(cls, value):
        text = str(value).strip()
        if text.startswith("<") and text.endswith(">"):
            text = text[1:-1]
        if _IRI_FORBIDDEN.search(text):
            raise ValueError(f"not a valid IRI: {text!r}")
        return text

    @field_validator("polarity", mode="before")
    @classmethod
    def _known_polarity(cls, value):
        if isinstance(value, Polarity):
            return value
        token = str(value).strip()
        if token not in ("pos", "neg"):
            raise ValueError(f"unknown polarity token {token!r} (expected pos or neg)")
        return Polarity(token)


class PairRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    entity_a: str = Field(..., min_length=1)
    entity_b: str = Field(..., min_length=1)
    label: PairLabel

    @field_validator("label", mode="before")
    @classmethod
    def _int_label(cls, value):
        if isinstance(value, str):
            value = value.strip()
            if value not in ("0", "1"):
                raise ValueError(f"label must be 0 or 1, got {value!r}")
            return int(value)
        return value

    @property
    def unordered_key(self) -> Tuple[str, str]:
        return tuple(sorted((self.entity_a, self.entity_b)))


class PairDataset(BaseModel):
    """Labeled entity pairs. No unordered pair appears twice."""
    pairs: List[PairRecord] = Field(default_factory=list)

    @model_validator(mode="after")
    def _no_duplicate_pairs(self) -> "PairDataset":
        seen = set()
        for record in self.pairs:
            key = record.unordered_key
            if key in seen:
                raise ValueError(f"duplicate unordered pair: {key[0]} / {key[1]}")
            seen.add(key)
        return self

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def labels(self) -> List[int]:
        return [p.label for p in self.pairs]

    def positives(self) -> List[PairRecord]:
        return [p for p in self.pairs if p.label == 1]

    def entities(self) -> List[str]:
        return sorted({p.entity_a for p in self.pairs} | {p.entity_b for p in self.pairs})


# --- Reports ---

class KGSummary(BaseModel):
    """Graph statistics in the usual dataset-table shape."""
    classes: int = 0
    instances: int = 0
    blank_nodes: int = 0
    literals: int = 0
    subclass_edges: int = 0
    edges: int = 0
    positive_statements: int = 0
    negative_statements: int = 0
    root_entities: int = 0


class SplitResult(BaseModel):
    split: int = Field(..., ge=0)
    n_train: int = Field(..., ge=1)
    n_test: int = Field(..., ge=1)
    precision: float = Field(..., ge=0.0, le=1.0)
    recall: float = Field(..., ge=0.0, le=1.0)
    f: float = Field(..., ge=0.0, le=1.0)
    n_estimators: int = Field(..., ge=1)
    max_depth: Optional[int] = None


class RankingReport(BaseModel):
    hits10: float = Field(..., ge=0.0, le=1.0)
    hits100: float = Field(..., ge=0.0, le=1.0)
    mean_rank: float = Field(..., ge=1.0)
    auc: float = Field(..., ge=0.0, le=1.0)
    n_pairs: int = Field(..., ge=0)
    n_candidates: int = Field(..., ge=0)
    tie_rule: Literal["optimistic", "expected"] = "optimistic"
    degenerate: bool = False
    # cosine of each (e1, e2) pair, in pair order; not serialized
    target_similarities: List[float] = Field(default_factory=list, exclude=True)


class EvalReport(BaseModel):
    """Serialized with the key names downstream tooling expects."""
    mode: str = "truewalks"
    precision_median: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    recall_median: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    f_median: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    per_split: List[SplitResult] = Field(default_factory=list)
    ranking: Optional[RankingReport] = None
    # baseline -> metric -> p-value
    wilcoxon: Dict[str, Dict[str, float]] = Field(default_factory=dict)
    baselines: Dict[str, "EvalReport"] = Field(default_factory=dict)

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)


class ArtifactRecord(BaseModel):
    path: str
    sha256: str
    size_bytes: int


class RunManifest(BaseModel):
    """Written next to every stage output. Carries no wall-clock data."""
    command: str
    seed: int
    config_hash: str
    config: Dict
    versions: Dict[str, str]
    inputs: List[ArtifactRecord] = Field(default_factory=list)
    artifacts: List[ArtifactRecord] = Field(default_factory=list)


EvalReport.model_rebuild()
