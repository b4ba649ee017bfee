"""In-memory corpus bundle: manifest, reference annotations and score streams."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

from .decoding import ScoreStream, merge_streams
from .splits import CorpusManifest, Interview
from .timeline import Annotation

log = logging.getLogger(__name__)


@dataclass
class Corpus:
    manifest: CorpusManifest
    references: dict[str, Annotation]
    streams: dict[str, ScoreStream] = field(default_factory=dict)

    def interview(self, file_id: str) -> Interview:
        return self.manifest[file_id]

    def role_reference(self, file_id: str) -> Annotation:
        return self.references[file_id].relabel(self.manifest[file_id].roles)


def load_corpus(manifest_path: str | Path, load_streams: bool = True) -> Corpus:
    """Read a manifest and everything it points to; paths resolve against the manifest's folder."""
    from . import io

    manifest_path = Path(manifest_path)
    manifest = io.parse_manifest(manifest_path.read_text(encoding="utf-8"), source=str(manifest_path))
    root = manifest_path.parent
    references: dict[str, Annotation] = {}
    streams: dict[str, ScoreStream] = {}
    rttm_cache: dict[Path, dict[str, Annotation]] = {}
    for it in manifest:
        ref_path = root / it.reference_path
        if ref_path not in rttm_cache:
            rttm_cache[ref_path] = io.parse_rttm(ref_path.read_text(encoding="utf-8"), source=str(ref_path))
        references[it.file_id] = rttm_cache[ref_path].get(it.file_id, Annotation(it.file_id))
        if load_streams and it.score_paths:
            missing = [p for p in it.score_paths if not (root / p).is_file()]
            if missing:
                # the pipelines skip this file with "missing score stream"
                log.warning("%s: score stream not found: %s", it.file_id, ", ".join(missing))
                continue
            parts = [
                io.parse_score_stream((root / p).read_text(encoding="utf-8"), source=str(root / p))
                for p in it.score_paths
            ]
            streams[it.file_id] = merge_streams(parts) if len(parts) > 1 else parts[0]
    return Corpus(manifest, references, streams)
