"""Identification error rate and its aggregation across files and groups."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .timeline import (
    Annotation,
    Segment,
    Timeline,
    cotemporal_regions,
    gaps,
    to_seconds,
    to_ticks,
)


@dataclass(frozen=True, slots=True)
class IerReport:
    """Duration-weighted error components, in seconds.

    ``ier`` is ``None`` when the reference holds no speech in the scored
    extent; the rate is undefined there rather than zero.
    """

    false_alarm: float = 0.0
    missed_detection: float = 0.0
    confusion: float = 0.0
    total: float = 0.0

    @property
    def ier(self) -> float | None:
        if self.total <= 0:
            return None
        return (self.false_alarm + self.missed_detection + self.confusion) / self.total

    @property
    def defined(self) -> bool:
        return self.total > 0

    def __add__(self, other: IerReport) -> IerReport:
        # sums go through integer ticks so folding is order-independent
        def add(a: float, b: float) -> float:
            return to_seconds(to_ticks(a) + to_ticks(b))

        return IerReport(
            add(self.false_alarm, other.false_alarm),
            add(self.missed_detection, other.missed_detection),
            add(self.confusion, other.confusion),
            add(self.total, other.total),
        )


@dataclass(frozen=True, slots=True)
class FileReport:
    file_id: str
    group: str
    report: IerReport


def _collar_zones(ref: Annotation, extent: Segment, collar: float) -> Timeline:
    half = to_ticks(collar) // 2
    zones = []
    for s, _ in ref.entries:
        for b in (s.start, s.end):
            lo, hi = max(extent.start, b - half), min(extent.end, b + half)
            if hi > lo:
                zones.append(Segment(lo, hi))
    return Timeline(zones)


def identification_error_rate(
    ref: Annotation,
    hyp: Annotation,
    extent: Segment,
    collar: float = 0.0,
    vocabulary: Iterable[str] | None = None,
) -> IerReport:
    """Score ``hyp`` against ``ref`` over ``extent`` with shared labels (no mapping).

    Within each cotemporal region of duration ``d`` with reference labels R
    and hypothesis labels H::

        total     += |R| d
        missed    += max(0, |R| - |H|) d
        false     += max(0, |H| - |R|) d
        confusion += (min(|R|, |H|) - |R & H|) d

    With ``collar > 0``, regions within ``collar / 2`` of any reference
    boundary are excluded.
    """
    if collar < 0:
        raise ValueError("collar must be non-negative")
    if vocabulary is not None:
        vocab = set(vocabulary)
        unknown = (set(hyp.labels()) | set(ref.labels())) - vocab
        if unknown:
            raise ValueError(f"{hyp.file_id}: labels outside vocabulary: {sorted(unknown)}")

    pieces = [extent] if collar == 0 else list(gaps(_collar_zones(ref, extent, collar), extent))
    fa = miss = conf = total = 0
    for piece in pieces:
        for region, r, h in cotemporal_regions(ref, hyp, piece):
            d = region.duration
            nr, nh = len(r), len(h)
            total += nr * d
            if nr > nh:
                miss += (nr - nh) * d
            elif nh > nr:
                fa += (nh - nr) * d
            conf += (min(nr, nh) - len(r & h)) * d
    return IerReport(to_seconds(fa), to_seconds(miss), to_seconds(conf), to_seconds(total))


def detection_error_rate(ref: Annotation, hyp: Annotation, extent: Segment) -> IerReport:
    """Speech/non-speech error: both sides collapsed to one label, overlap counted once."""
    return identification_error_rate(ref.collapse(), hyp.collapse(), extent)


@dataclass(frozen=True)
class Aggregate:
    files: list[FileReport]
    groups: dict[str, IerReport]
    overall: IerReport


def aggregate(reports: Iterable[FileReport]) -> Aggregate:
    """Component-wise sums per group and overall; rates recomputed from the sums."""
    files = list(reports)
    if not files:
        raise ValueError("aggregate needs at least one report")
    groups: dict[str, IerReport] = {}
    overall = IerReport()
    for fr in files:
        groups[fr.group] = groups.get(fr.group, IerReport()) + fr.report
        overall = overall + fr.report
    return Aggregate(files, dict(sorted(groups.items())), overall)
