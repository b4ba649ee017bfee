"""Speaker enrollment back end: templates, cosine scoring, identification, pipeline runs."""

from __future__ import annotations

import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Protocol, Sequence

import numpy as np

from .corpus import Corpus
from .decoding import BinarizeConfig, binarize, candidate_segments, detect_change_points
from .metrics import FileReport, IerReport, aggregate, identification_error_rate
from .splits import SplitAssignment, split_interview
from .timeline import Annotation, Segment, Timeline, crop, support, to_ticks

MIN_EMBED_DURATION = 0.1
VARIANTS = ("pipeline", "topline", "chance")


class EnrollmentError(ValueError):
    """A speaker has no usable enrollment segment."""


class EmbeddingProvider(Protocol):
    """Deterministic segment embedding: the same ``(file_id, segment)`` gives the same vector."""

    dim: int

    def embed(self, file_id: str, segment: Segment) -> np.ndarray: ...


class CachedEmbeddingProvider:
    """Embeddings precomputed offline, looked up by exact ``(file_id, start, end)``."""

    def __init__(self, table: dict[tuple[str, int, int], np.ndarray]) -> None:
        dims = {len(v) for v in table.values()}
        if len(dims) > 1:
            raise ValueError(f"inconsistent embedding dimensions: {sorted(dims)}")
        self.dim = dims.pop() if dims else 0
        self._table = {k: np.asarray(v, dtype=float) for k, v in table.items()}

    def embed(self, file_id: str, segment: Segment) -> np.ndarray:
        try:
            return self._table[(file_id, segment.start, segment.end)]
        except KeyError:
            raise KeyError(f"no cached embedding for {file_id} {segment!r}") from None


@dataclass(frozen=True, eq=False)
class SpeakerTemplate:
    speaker: str
    vector: np.ndarray
    support_count: int
    support_duration: float
    skipped: int = 0


def build_template(
    provider: EmbeddingProvider,
    dev_segments: Iterable[tuple[str, Segment]],
    speaker: str,
    min_duration: float = MIN_EMBED_DURATION,
) -> SpeakerTemplate:
    """Unweighted mean of the embeddings of every dev segment long enough to embed."""
    min_ticks = to_ticks(min_duration)
    vectors, duration, skipped = [], 0, 0
    for file_id, s in dev_segments:
        if s.duration < min_ticks:
            skipped += 1
            continue
        vectors.append(np.asarray(provider.embed(file_id, s), dtype=float))
        duration += s.duration
    if not vectors:
        raise EnrollmentError(f"no embeddable enrollment segment for speaker {speaker!r}")
    return SpeakerTemplate(speaker, np.mean(vectors, axis=0), len(vectors), duration / 10_000, skipped)


def cosine_distance(u: np.ndarray, m: np.ndarray) -> float:
    """``(1 - cos(u, m)) / 2``, in [0, 1]."""
    u, m = np.asarray(u, dtype=float), np.asarray(m, dtype=float)
    if u.shape != m.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {m.shape}")
    nu, nm = np.linalg.norm(u), np.linalg.norm(m)
    if nu == 0 or nm == 0:
        raise ValueError("cosine distance undefined for a zero-norm vector")
    cos = float(np.dot(u, m) / (nu * nm))
    return min(1.0, max(0.0, 0.5 * (1.0 - cos)))


def distance_matrix(embeddings: np.ndarray, templates: Sequence[SpeakerTemplate]) -> np.ndarray:
    e = np.asarray(embeddings, dtype=float)
    t = np.stack([tp.vector for tp in templates])
    tn = np.linalg.norm(t, axis=1)
    if np.any(tn == 0):
        raise ValueError("zero-norm speaker template")
    en = np.linalg.norm(e, axis=1)
    cos = (e @ t.T) / (en[:, None] * tn[None, :])
    return np.clip(0.5 * (1.0 - cos), 0.0, 1.0)


def chance_baseline(distances: np.ndarray, seed: int | np.random.SeedSequence) -> np.ndarray:
    """Shuffle all entries of the distance matrix together, then argmin per row.

    Ties after shuffling are broken at random: with well-separated embeddings
    many distances are equal, and a fixed tie order would bias the baseline
    toward the first template.
    """
    d = np.asarray(distances, dtype=float)
    if d.ndim != 2 or not np.all(np.isfinite(d)):
        raise ValueError("chance baseline needs a complete finite distance matrix")
    rng = np.random.default_rng(seed)
    shuffled = rng.permutation(d.ravel()).reshape(d.shape)
    keys = rng.random(d.shape)
    keys[shuffled > shuffled.min(axis=1, keepdims=True)] = np.inf
    return np.argmin(keys, axis=1)


@dataclass(frozen=True, eq=False)
class Identification:
    annotation: Annotation
    labels: list[str]
    distances: np.ndarray  # NaN rows for candidates that were not embedded
    short: int = 0
    zero_norm: int = 0


def _self_overlapping(ordered: list[Segment]) -> bool:
    reach = -1
    for s in ordered:
        if s.start < reach:
            return True
        reach = max(reach, s.end)
    return False


def _gap(a: Segment, b: Segment) -> int:
    return max(0, a.start - b.end, b.start - a.end)


def identify(
    provider: EmbeddingProvider,
    candidates: Sequence[tuple[str, Segment]],
    templates: Sequence[SpeakerTemplate],
    min_duration: float = MIN_EMBED_DURATION,
    chance_seed: int | np.random.SeedSequence | None = None,
) -> Identification:
    """Label each candidate with its closest template (ties: template order).

    Candidates too short to embed take the label of their nearest identified
    neighbor in time. With ``chance_seed`` the distances are shuffled first.
    Overlapping candidates that end up with the same label are merged.
    """
    if not templates:
        raise ValueError("identify needs at least one template")
    file_ids = {f for f, _ in candidates}
    if len(file_ids) > 1:
        raise ValueError(f"candidates span several files: {sorted(file_ids)}")
    file_id = file_ids.pop() if file_ids else ""
    min_ticks = to_ticks(min_duration)
    speakers = [t.speaker for t in templates]

    n = len(candidates)
    distances = np.full((n, len(templates)), np.nan)
    assigned: list[int | None] = [None] * n
    embedded, zero_norm, short = [], 0, 0
    vectors = []
    for i, (f, s) in enumerate(candidates):
        if s.duration < min_ticks:
            short += 1
            continue
        v = np.asarray(provider.embed(f, s), dtype=float)
        if not np.linalg.norm(v) > 0:
            zero_norm += 1
            assigned[i] = 0
            continue
        embedded.append(i)
        vectors.append(v)
    if embedded:
        d = distance_matrix(np.stack(vectors), templates)
        distances[embedded] = d
        picks = np.argmin(d, axis=1) if chance_seed is None else chance_baseline(d, chance_seed)
        for i, k in zip(embedded, picks.tolist()):
            assigned[i] = k

    known = [i for i in range(n) if assigned[i] is not None]
    for i in range(n):
        if assigned[i] is None:
            seg_i = candidates[i][1]
            nearest = min(known, key=lambda j: (_gap(seg_i, candidates[j][1]), j), default=None)
            assigned[i] = assigned[nearest] if nearest is not None else 0

    labels = [speakers[k] for k in assigned]  # type: ignore[index]
    entries = []
    for speaker in dict.fromkeys(labels):
        own = sorted(candidates[i][1] for i in range(n) if labels[i] == speaker)
        entries.extend((s, speaker) for s in (support(own) if _self_overlapping(own) else own))
    return Identification(Annotation(file_id, entries), labels, distances, short, zero_norm)


@dataclass(frozen=True)
class EnrollmentConfig:
    t_dev: float = 120.0
    variant: str = "pipeline"
    vad: BinarizeConfig = BinarizeConfig()
    speech_channel: str = "speech"
    change_channel: str = "change"
    change_threshold: float = 0.5
    change_min_gap: float = 0.5
    change_smoothing: float = 0.1
    min_embed_duration: float = MIN_EMBED_DURATION
    collar: float = 0.0
    seed: int = 0
    subset: str = "test"

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")


@dataclass
class FileOutcome:
    file_id: str
    group: str
    report: IerReport | None = None
    hypothesis: Annotation | None = None
    skipped: str | None = None
    diagnostics: dict[str, int] = field(default_factory=dict)
    extent: Segment | None = None  # the scored region


@dataclass
class PipelineResult:
    outcomes: list[FileOutcome]

    @property
    def reports(self) -> list[FileReport]:
        return [FileReport(o.file_id, o.group, o.report) for o in self.outcomes if o.report is not None]

    @property
    def skipped(self) -> dict[str, str]:
        return {o.file_id: o.skipped for o in self.outcomes if o.skipped is not None}

    def overall(self) -> IerReport:
        reports = self.reports
        return aggregate(reports).overall if reports else IerReport()


def file_seed(seed: int, file_id: str) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, zlib.crc32(file_id.encode())])


def enroll_file(
    corpus: Corpus,
    file_id: str,
    splits: SplitAssignment,
    provider: EmbeddingProvider,
    cfg: EnrollmentConfig,
) -> FileOutcome:
    interview = corpus.interview(file_id)
    outcome = FileOutcome(file_id, interview.group)
    ref = corpus.references[file_id]
    speakers = interview.speakers_in_role_order()
    isplit = split_interview(ref, cfg.t_dev, splits.t_test_boundary, interview.audio_duration, speakers)
    if not isplit.enrollable:
        outcome.skipped = f"enrollment impossible for {', '.join(isplit.missing_speakers)}"
        return outcome
    try:
        templates = [
            build_template(
                provider,
                [(file_id, s) for s, lab in isplit.dev if lab == spk],
                spk,
                cfg.min_embed_duration,
            )
            for spk in speakers
        ]
    except EnrollmentError as exc:
        outcome.skipped = str(exc)
        return outcome

    test = isplit.test_extent
    if cfg.variant == "topline":
        segments: Timeline = ref.timeline()
    else:
        if file_id not in corpus.streams:
            outcome.skipped = "missing score stream"
            return outcome
        stream = corpus.streams[file_id]
        vad = binarize(stream, cfg.speech_channel, cfg.vad)
        changes = detect_change_points(
            stream, cfg.change_channel, cfg.change_threshold, cfg.change_min_gap, cfg.change_smoothing
        )
        segments = candidate_segments(vad, changes)
    candidates = [(file_id, s) for s in segments if s.overlaps(test)]
    chance = file_seed(cfg.seed, file_id) if cfg.variant == "chance" else None
    ident = identify(provider, candidates, templates, cfg.min_embed_duration, chance)

    hyp = crop(ident.annotation.relabel(interview.roles), test)
    reference = crop(corpus.role_reference(file_id), test)
    outcome.report = identification_error_rate(reference, hyp, test, cfg.collar)
    outcome.hypothesis = hyp
    outcome.extent = test
    outcome.diagnostics = {"short": ident.short, "zero_norm": ident.zero_norm, "candidates": len(candidates)}
    return outcome


def _enroll_task(args):
    return enroll_file(*args)


def run_enrollment_pipeline(
    corpus: Corpus,
    splits: SplitAssignment,
    provider: EmbeddingProvider,
    cfg: EnrollmentConfig = EnrollmentConfig(),
    jobs: int = 1,
) -> PipelineResult:
    """VAD, change detection, candidates, enrollment at ``cfg.t_dev``, identification,
    then IER on the fixed test extent of every interview in ``cfg.subset``."""
    members = splits.members(cfg.subset)
    file_ids = [f for f in corpus.manifest.file_ids() if f in members]
    tasks = [(corpus, f, splits, provider, cfg) for f in file_ids]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_enroll_task, tasks))
    else:
        outcomes = [_enroll_task(t) for t in tasks]
    return PipelineResult(outcomes)


TDEV_GRID = tuple(float(t) for t in range(90, 181, 10))


def sweep_tdev(
    corpus: Corpus,
    splits: SplitAssignment,
    provider: EmbeddingProvider,
    grid: Sequence[float] = TDEV_GRID,
    cfg: EnrollmentConfig = EnrollmentConfig(),
    jobs: int = 1,
) -> list[tuple[float, IerReport, dict[str, str]]]:
    """One full enrollment run per ``t_dev``; the test extent never moves."""
    if not grid:
        raise ValueError("empty tDev grid")
    for t in grid:
        if not 0 <= t <= splits.t_test_boundary:
            raise ValueError(f"tDev {t} outside [0, {splits.t_test_boundary}]")
    rows = []
    for t in grid:
        result = run_enrollment_pipeline(corpus, splits, provider, replace(cfg, t_dev=float(t)), jobs)
        rows.append((float(t), result.overall(), result.skipped))
    return rows

