"""
Artifact Service
Stage manifests: seed, config hash, package versions and output checksums.
"""
import hashlib
import json
import logging
from importlib import metadata
from pathlib import Path
from typing import Dict, Iterable, Optional, Union

from pydantic import BaseModel

from ..config import PipelineConfig
from ..core.schemas import ArtifactRecord, RunManifest

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
TRACKED_PACKAGES = (
    "numpy",
    "scipy",
    "networkx",
    "rdflib",
    "pydantic",
    "prometheus-client",
    "python-json-logger",
    "python-dotenv",
)


def sha256_file(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def package_versions() -> Dict[str, str]:
    from .. import __version__

    versions = {"truewalks": __version__}
    for name in TRACKED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "not installed"
    return versions


def _record(path: Path, base: Optional[Path]) -> ArtifactRecord:
    shown = path.relative_to(base) if base is not None and path.is_relative_to(base) else path
    return ArtifactRecord(path=shown.as_posix(), sha256=sha256_file(path), size_bytes=path.stat().st_size)


def write_json(path: Union[str, Path], payload: Union[BaseModel, dict]) -> Path:
    """Stable JSON: sorted keys, two-space indent, trailing newline."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = payload.model_dump(mode="json") if isinstance(payload, BaseModel) else payload
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_manifest(
    out_dir: Union[str, Path],
    command: str,
    cfg: PipelineConfig,
    artifacts: Iterable[Union[str, Path]],
    inputs: Iterable[Union[str, Path]] = (),
) -> Path:
    out_dir = Path(out_dir)
    manifest = RunManifest(
        command=command,
        seed=cfg.seed,
        config_hash=cfg.config_hash(),
        config=cfg.model_dump(mode="json"),
        versions=package_versions(),
        inputs=[_record(Path(p), None) for p in inputs if p is not None],
        artifacts=[_record(Path(p), out_dir) for p in artifacts],
    )
    path = write_json(out_dir / MANIFEST_NAME, manifest)
    logger.info(f"Wrote {path} ({len(manifest.artifacts)} artifacts)")
    return path


def load_manifest(path: Union[str, Path]) -> RunManifest:
    return RunManifest.model_validate_json(Path(path).read_text(encoding="utf-8"))
