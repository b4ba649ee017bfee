"""Speaker role recognition path and the head-to-head comparison table."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .corpus import Corpus
from .decoding import BinarizeConfig, decode_roles, tune_thresholds
from .enrollment import FileOutcome, PipelineResult
from .metrics import FileReport, aggregate, identification_error_rate
from .splits import ROLES, SplitAssignment
from .timeline import Segment, crop, to_ticks


@dataclass(frozen=True)
class RolePipelineConfig:
    cfg_per_role: Mapping[str, BinarizeConfig] = field(
        default_factory=lambda: {r: BinarizeConfig() for r in ROLES}
    )
    t_test_boundary: float | None = None  # None: take it from the split assignment
    collar: float = 0.0
    subset: str = "test"

    def __post_init__(self) -> None:
        if sorted(self.cfg_per_role) != sorted(ROLES):
            raise ValueError(f"role configs must cover exactly {ROLES}")


def _test_extent(corpus: Corpus, file_id: str, boundary: float) -> Segment:
    return Segment(to_ticks(boundary), to_ticks(corpus.interview(file_id).audio_duration))


def role_file(corpus: Corpus, file_id: str, boundary: float, cfg: RolePipelineConfig) -> FileOutcome:
    interview = corpus.interview(file_id)
    outcome = FileOutcome(file_id, interview.group)
    stream = corpus.streams.get(file_id)
    if stream is None:
        outcome.skipped = "missing score stream"
        return outcome
    try:
        hyp = decode_roles(stream, cfg.cfg_per_role)
    except KeyError as exc:
        outcome.skipped = str(exc.args[0])
        return outcome
    test = _test_extent(corpus, file_id, boundary)
    hyp = crop(hyp, test)
    reference = crop(corpus.role_reference(file_id), test)
    outcome.report = identification_error_rate(reference, hyp, test, cfg.collar)
    outcome.hypothesis = hyp
    outcome.extent = test
    return outcome


def _role_task(args):
    return role_file(*args)


def run_role_pipeline(
    corpus: Corpus,
    splits: SplitAssignment,
    cfg: RolePipelineConfig = RolePipelineConfig(),
    jobs: int = 1,
) -> PipelineResult:
    """Decode role streams and score them on the same test extent the enrollment path uses."""
    boundary = splits.t_test_boundary if cfg.t_test_boundary is None else cfg.t_test_boundary
    members = splits.members(cfg.subset)
    tasks = [(corpus, f, boundary, cfg) for f in corpus.manifest.file_ids() if f in members]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return PipelineResult(list(pool.map(_role_task, tasks)))
    return PipelineResult([_role_task(t) for t in tasks])


def tune_role_thresholds(
    corpus: Corpus,
    splits: SplitAssignment,
    grid: Sequence[BinarizeConfig],
    subset: str = "dev",
) -> dict[str, BinarizeConfig]:
    """Per-role thresholds chosen on the test extents of one meta set (meta-dev by default)."""
    streams, refs, extents = [], [], []
    for f in corpus.manifest.file_ids():
        if f not in splits.members(subset) or f not in corpus.streams:
            continue
        test = _test_extent(corpus, f, splits.t_test_boundary)
        streams.append(corpus.streams[f])
        refs.append(crop(corpus.role_reference(f), test))
        extents.append(test)
    return tune_thresholds(streams, refs, grid, ROLES, "ier", extents)


APPROACHES = ("role", "enroll", "topline", "chance")


@dataclass(frozen=True)
class ComparisonRow:
    file_id: str
    group: str
    ier: dict[str, float | None]
    winner: str


def _winner(role: float | None, enroll: float | None) -> str:
    if role is None or enroll is None:
        return "undefined"
    if role < enroll:
        return "role"
    if enroll < role:
        return "enroll"
    return "tie"


def compare_approaches(
    role: Sequence[FileReport],
    enroll: Sequence[FileReport],
    topline: Sequence[FileReport] | None = None,
    chance: Sequence[FileReport] | None = None,
) -> list[ComparisonRow]:
    """Align report sets by file; the last row (``file_id="TOTAL"``) holds aggregate rates.

    ``winner`` compares the role and enrollment pipelines only.
    """
    sets = {"role": role, "enroll": enroll, "topline": topline, "chance": chance}
    present = {k: {r.file_id: r for r in v} for k, v in sets.items() if v is not None}
    ids = set(present["role"])
    for name, reports in present.items():
        if set(reports) != ids:
            diff = sorted(set(reports) ^ ids)
            raise ValueError(f"{name} reports cover different files: {diff}")
    rows = []
    for fid in sorted(ids):
        iers = {name: reports[fid].report.ier for name, reports in present.items()}
        rows.append(ComparisonRow(fid, present["role"][fid].group, iers, _winner(iers["role"], iers["enroll"])))
    if ids:
        totals: dict[str, float | None] = {
            name: aggregate(reports.values()).overall.ier for name, reports in present.items()
        }
        rows.append(ComparisonRow("TOTAL", "ALL", totals, _winner(totals["role"], totals["enroll"])))
    return rows

