"""Corpus inventory and the meta-train/dev/test split protocol."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from .timeline import Annotation, Segment, to_ticks

GROUPS = ("C", "preHD", "HD")
NEUROPSYCHOLOGIST = "Neuropsychologist"
INTERVIEWEE = "Interviewee"
ROLES = (NEUROPSYCHOLOGIST, INTERVIEWEE)
SETS = ("train", "dev", "test")
SPLIT_RATIOS = (0.6, 0.2, 0.2)
TDEV_RANGE = (90.0, 180.0)
DEFAULT_TEST_BOUNDARY = 180.0
ABLATION_FRACTIONS = (0.1, 0.2, 0.5, 1.0)


@dataclass(frozen=True)
class Interview:
    file_id: str
    audio_duration: float
    reference_path: str
    score_paths: tuple[str, ...]
    group: str
    roles: dict[str, str]

    def __post_init__(self) -> None:
        if self.group not in GROUPS:
            raise ValueError(f"{self.file_id}: unknown group {self.group!r}")
        if sorted(self.roles.values()) != sorted(ROLES) or len(self.roles) != 2:
            raise ValueError(
                f"{self.file_id}: roles must map two labels onto {ROLES}, got {self.roles}"
            )
        if self.audio_duration <= 0:
            raise ValueError(f"{self.file_id}: audio duration must be positive")

    def speaker_for(self, role: str) -> str:
        return next(label for label, r in self.roles.items() if r == role)

    def speakers_in_role_order(self) -> list[str]:
        """Speaker labels with the neuropsychologist first (the argmin tie-break order)."""
        return [self.speaker_for(r) for r in ROLES]


@dataclass(frozen=True)
class CorpusManifest:
    interviews: tuple[Interview, ...]

    def __init__(self, interviews: Iterable[Interview]) -> None:
        items = tuple(interviews)
        seen: set[str] = set()
        for it in items:
            if it.file_id in seen:
                raise ValueError(f"duplicate fileId {it.file_id!r}")
            seen.add(it.file_id)
        object.__setattr__(self, "interviews", items)

    def __len__(self) -> int:
        return len(self.interviews)

    def __iter__(self):
        return iter(self.interviews)

    def __getitem__(self, file_id: str) -> Interview:
        for it in self.interviews:
            if it.file_id == file_id:
                return it
        raise KeyError(file_id)

    def file_ids(self) -> list[str]:
        return [it.file_id for it in self.interviews]


@dataclass(frozen=True)
class SplitAssignment:
    meta_train: frozenset[str]
    meta_dev: frozenset[str]
    meta_test: frozenset[str]
    t_dev: float = 120.0
    t_test_boundary: float = DEFAULT_TEST_BOUNDARY
    seed: int = 0

    def __post_init__(self) -> None:
        if self.meta_train & self.meta_dev or self.meta_train & self.meta_test or self.meta_dev & self.meta_test:
            raise ValueError("meta sets must be disjoint")
        if self.t_dev > self.t_test_boundary:
            raise ValueError(f"tDev={self.t_dev} exceeds tTestBoundary={self.t_test_boundary}")

    def set_of(self, file_id: str) -> str:
        if file_id in self.meta_train:
            return "train"
        if file_id in self.meta_dev:
            return "dev"
        if file_id in self.meta_test:
            return "test"
        raise KeyError(file_id)

    def members(self, name: str) -> frozenset[str]:
        return {"train": self.meta_train, "dev": self.meta_dev, "test": self.meta_test}[name]

    def with_tdev(self, t_dev: float) -> SplitAssignment:
        return replace(self, t_dev=t_dev)


def split_sizes(n: int) -> tuple[int, int, int]:
    """Interview counts for train/dev/test: dev floored, test gets the next share, train the rest."""
    n_dev = math.floor(SPLIT_RATIOS[1] * n)
    n_train = math.ceil(SPLIT_RATIOS[0] * n - 1e-9)
    return n_train, n_dev, n - n_train - n_dev


def _apportion(total: int, weights: list[int], caps: list[int]) -> list[int]:
    # largest remainder, ties in group order
    norm = sum(weights)
    ideal = [total * w / norm if norm else 0.0 for w in weights]
    alloc = [min(math.floor(x), c) for x, c in zip(ideal, caps)]
    order = sorted(range(len(weights)), key=lambda i: (-(ideal[i] - math.floor(ideal[i])), i))
    while sum(alloc) < total:
        progressed = False
        for i in order:
            if sum(alloc) == total:
                break
            if alloc[i] < caps[i]:
                alloc[i] += 1
                progressed = True
        if not progressed:
            raise ValueError("cannot apportion split across groups")
    return alloc


def make_meta_split(
    manifest: CorpusManifest,
    seed: int,
    stratify: bool = True,
    t_dev: float = 120.0,
    t_test_boundary: float = DEFAULT_TEST_BOUNDARY,
) -> SplitAssignment:
    """Partition interviews 60/20/20, stratified by clinical group when ``stratify``."""
    n = len(manifest)
    if n < 5:
        raise ValueError(f"need at least 5 interviews for a meta split, got {n}")
    n_train, n_dev, n_test = split_sizes(n)
    rng = np.random.default_rng(seed)

    if not stratify:
        ids = sorted(manifest.file_ids())
        perm = [ids[i] for i in rng.permutation(n)]
        return SplitAssignment(
            frozenset(perm[:n_train]),
            frozenset(perm[n_train : n_train + n_dev]),
            frozenset(perm[n_train + n_dev :]),
            t_dev,
            t_test_boundary,
            seed,
        )

    by_group = {g: sorted(it.file_id for it in manifest if it.group == g) for g in GROUPS}
    sizes = [len(by_group[g]) for g in GROUPS]
    dev_alloc = _apportion(n_dev, sizes, sizes)
    test_alloc = _apportion(n_test, sizes, [s - d for s, d in zip(sizes, dev_alloc)])
    train, dev, test = set(), set(), set()
    for g, nd, nt in zip(GROUPS, dev_alloc, test_alloc):
        ids = by_group[g]
        perm = [ids[i] for i in rng.permutation(len(ids))]
        dev.update(perm[:nd])
        test.update(perm[nd : nd + nt])
        train.update(perm[nd + nt :])
    return SplitAssignment(frozenset(train), frozenset(dev), frozenset(test), t_dev, t_test_boundary, seed)


@dataclass(frozen=True)
class InterviewSplit:
    dev: Annotation
    test_extent: Segment
    missing_speakers: tuple[str, ...] = field(default=())

    @property
    def enrollable(self) -> bool:
        return not self.missing_speakers


def split_interview(
    annotation: Annotation,
    t_dev: float,
    t_test_boundary: float = DEFAULT_TEST_BOUNDARY,
    file_end: float | None = None,
    speakers: Iterable[str] | None = None,
) -> InterviewSplit:
    """Dev segments are those starting before ``t_dev`` (kept whole); test is ``[boundary, end]``.

    ``speakers`` lists who must be enrollable; any of them without a dev
    segment is reported in ``missing_speakers``.
    """
    end = to_ticks(file_end) if file_end is not None else None
    if end is None:
        ext = annotation.extent()
        if ext is None:
            raise ValueError(f"{annotation.file_id}: empty annotation and no file end")
        end = ext.end
    tdev, boundary = to_ticks(t_dev), to_ticks(t_test_boundary)
    if not tdev <= boundary < end:
        raise ValueError(
            f"{annotation.file_id}: need tDev <= tTestBoundary < file end, "
            f"got {t_dev}, {t_test_boundary}, {end / 10_000}"
        )
    dev = Annotation(annotation.file_id, ((s, lab) for s, lab in annotation if s.start < tdev))
    wanted = list(speakers) if speakers is not None else annotation.labels()
    present = set(dev.labels())
    missing = tuple(s for s in wanted if s not in present)
    return InterviewSplit(dev, Segment(boundary, end), missing)


def subsample_train(assignment: SplitAssignment, fraction: float, seed: int) -> SplitAssignment:
    """Keep ``ceil(fraction * |train|)`` training interviews, chosen by ``seed``."""
    if fraction not in ABLATION_FRACTIONS:
        raise ValueError(f"fraction must be one of {ABLATION_FRACTIONS}, got {fraction}")
    ids = sorted(assignment.meta_train)
    k = math.ceil(fraction * len(ids) - 1e-9)
    if k == len(ids):
        return assignment
    rng = np.random.default_rng(seed)
    chosen = frozenset(ids[i] for i in rng.choice(len(ids), size=k, replace=False))
    return replace(assignment, meta_train=chosen)
