"""Exact interval arithmetic over segments, timelines and labeled annotations.

Times are held as integer ticks of 0.1 ms so that unions, intersections and
duration sums are exact. Floats appear only when converting to and from
seconds at I/O boundaries.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Iterable, Iterator

TICKS_PER_SECOND = 10_000


def to_ticks(seconds: float) -> int:
    return int(round(seconds * TICKS_PER_SECOND))


def to_seconds(ticks: int) -> float:
    return ticks / TICKS_PER_SECOND


@dataclass(frozen=True, order=True, slots=True)
class Segment:
    """Half-open interval ``[start, end)`` in ticks."""

    start: int
    end: int

    def __post_init__(self) -> None:
        if not isinstance(self.start, int) or not isinstance(self.end, int):
            raise TypeError("Segment bounds are integer ticks; use Segment.from_seconds")
        if self.start < 0:
            raise ValueError(f"negative segment start: {self.start}")
        if self.end <= self.start:
            raise ValueError(f"empty or reversed segment: [{self.start}, {self.end}]")

    @classmethod
    def from_seconds(cls, start: float, end: float) -> Segment:
        return cls(to_ticks(start), to_ticks(end))

    @property
    def duration(self) -> int:
        return self.end - self.start

    @property
    def start_sec(self) -> float:
        return to_seconds(self.start)

    @property
    def end_sec(self) -> float:
        return to_seconds(self.end)

    @property
    def duration_sec(self) -> float:
        return to_seconds(self.end - self.start)

    def intersection(self, other: Segment) -> Segment | None:
        lo, hi = max(self.start, other.start), min(self.end, other.end)
        return Segment(lo, hi) if hi > lo else None

    def overlaps(self, other: Segment) -> bool:
        return self.start < other.end and other.start < self.end

    def __repr__(self) -> str:
        return f"[{self.start_sec:g}, {self.end_sec:g}]"


def seg(start: float, end: float) -> Segment:
    """Shorthand for :meth:`Segment.from_seconds`."""
    return Segment.from_seconds(start, end)


@dataclass(frozen=True, slots=True)
class Timeline:
    """Sorted collection of (possibly overlapping) unlabeled segments."""

    segments: tuple[Segment, ...] = ()

    def __init__(self, segments: Iterable[Segment] = ()) -> None:
        object.__setattr__(self, "segments", tuple(sorted(segments)))

    def __iter__(self) -> Iterator[Segment]:
        return iter(self.segments)

    def __len__(self) -> int:
        return len(self.segments)

    def __bool__(self) -> bool:
        return bool(self.segments)

    def duration(self) -> int:
        """Total duration of the support, in ticks (overlap counted once)."""
        return sum(s.duration for s in support(self))

    def extent(self) -> Segment | None:
        if not self.segments:
            return None
        return Segment(self.segments[0].start, max(s.end for s in self.segments))


def support(t: Timeline | Iterable[Segment]) -> Timeline:
    """Minimal set of disjoint segments covering the same union; abutting segments merge."""
    merged: list[list[int]] = []
    for s in sorted(t):
        if merged and s.start <= merged[-1][1]:
            if s.end > merged[-1][1]:
                merged[-1][1] = s.end
        else:
            merged.append([s.start, s.end])
    return Timeline(Segment(a, b) for a, b in merged)


def gaps(t: Timeline | Iterable[Segment], extent: Segment) -> Timeline:
    """Complement of ``support(t)`` inside ``extent``."""
    out = []
    cursor = extent.start
    for s in support(t):
        if s.end <= cursor:
            continue
        if s.start >= extent.end:
            break
        if s.start > cursor:
            out.append(Segment(cursor, s.start))
        cursor = max(cursor, s.end)
    if cursor < extent.end:
        out.append(Segment(cursor, extent.end))
    return Timeline(out)


def crop_timeline(t: Timeline | Iterable[Segment], extent: Segment) -> Timeline:
    out = (s.intersection(extent) for s in t)
    return Timeline(s for s in out if s is not None)


@dataclass(frozen=True, slots=True)
class Annotation:
    """Labeled segments of one file ("who speaks when").

    Entries of different labels may overlap; two entries with the same label
    may touch but not overlap. Abutting same-label entries are kept apart.
    """

    file_id: str
    entries: tuple[tuple[Segment, str], ...] = field(default=())

    def __init__(self, file_id: str, entries: Iterable[tuple[Segment, str]] = ()) -> None:
        items = tuple(sorted(entries, key=lambda e: (e[0].start, e[0].end, e[1])))
        last_end: dict[str, tuple[Segment, int]] = {}
        for s, label in items:
            prev = last_end.get(label)
            if prev is not None and s.start < prev[1]:
                raise ValueError(
                    f"{file_id}: label {label!r} overlaps itself: {prev[0]!r} and {s!r}"
                )
            if prev is None or s.end > prev[1]:
                last_end[label] = (s, s.end)
        object.__setattr__(self, "file_id", file_id)
        object.__setattr__(self, "entries", items)

    def __iter__(self) -> Iterator[tuple[Segment, str]]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def labels(self) -> list[str]:
        return sorted({label for _, label in self.entries})

    def label_timeline(self, label: str) -> Timeline:
        return Timeline(s for s, lab in self.entries if lab == label)

    def timeline(self) -> Timeline:
        return Timeline(s for s, _ in self.entries)

    def label_duration(self, label: str) -> int:
        return sum(s.duration for s, lab in self.entries if lab == label)

    def extent(self) -> Segment | None:
        return self.timeline().extent()

    def relabel(self, mapping: dict[str, str]) -> Annotation:
        """Rename labels; labels absent from ``mapping`` are kept as-is."""
        return Annotation(self.file_id, ((s, mapping.get(lab, lab)) for s, lab in self.entries))

    def subset(self, labels: Iterable[str]) -> Annotation:
        keep = set(labels)
        return Annotation(self.file_id, ((s, lab) for s, lab in self.entries if lab in keep))

    def collapse(self, label: str = "speech") -> Annotation:
        """Single-label annotation over the support of all speech."""
        return Annotation(self.file_id, ((s, label) for s in support(self.timeline())))


def crop(a: Annotation, extent: Segment) -> Annotation:
    """Intersect every entry with ``extent``, dropping empty intersections."""
    out = []
    for s, label in a.entries:
        inter = s.intersection(extent)
        if inter is not None:
            out.append((inter, label))
    return Annotation(a.file_id, out)


@dataclass(frozen=True, slots=True)
class TimeGrid:
    """Strictly increasing boundaries covering an evaluation extent."""

    boundaries: tuple[int, ...]

    def __post_init__(self) -> None:
        b = self.boundaries
        if any(b[i] >= b[i + 1] for i in range(len(b) - 1)):
            raise ValueError("TimeGrid boundaries must be strictly increasing")

    @classmethod
    def from_annotations(cls, extent: Segment, *annotations: Annotation) -> TimeGrid:
        points = {extent.start, extent.end}
        for a in annotations:
            for s, _ in a.entries:
                for p in (s.start, s.end):
                    if extent.start < p < extent.end:
                        points.add(p)
        return cls(tuple(sorted(points)))

    def cells(self) -> Iterator[Segment]:
        for a, b in zip(self.boundaries, self.boundaries[1:]):
            yield Segment(a, b)


def _label_events(a: Annotation, extent: Segment) -> list[tuple[int, int, str]]:
    # (time, kind, label) with kind 0 = end, 1 = start so ends apply first
    events = []
    for s, label in a.entries:
        inter = s.intersection(extent)
        if inter is None:
            continue
        events.append((inter.start, 1, label))
        events.append((inter.end, 0, label))
    events.sort()
    return events


def cotemporal_regions(
    ref: Annotation, hyp: Annotation, extent: Segment
) -> list[tuple[Segment, frozenset[str], frozenset[str]]]:
    """Partition ``extent`` into regions where both label sets are constant.

    Adjacent regions always differ in at least one of the two label sets.
    """
    ref_events = _label_events(ref, extent)
    hyp_events = _label_events(hyp, extent)
    merged = heapq.merge(
        ((t, k, lab, 0) for t, k, lab in ref_events),
        ((t, k, lab, 1) for t, k, lab in hyp_events),
    )
    active: tuple[set[str], set[str]] = (set(), set())
    regions: list[tuple[Segment, frozenset[str], frozenset[str]]] = []
    cursor = extent.start
    current = (frozenset(), frozenset())

    def close(until: int) -> None:
        if until <= cursor:
            return
        if regions and regions[-1][1:] == current and regions[-1][0].end == cursor:
            prev = regions.pop()
            regions.append((Segment(prev[0].start, until), *current))
        else:
            regions.append((Segment(cursor, until), *current))

    for t, kind, label, side in merged:
        if t > cursor:
            close(t)
            cursor = t
        if kind:
            active[side].add(label)
        else:
            active[side].discard(label)
        current = (frozenset(active[0]), frozenset(active[1]))
    close(extent.end)
    return regions


def overlap_duration(a: Annotation, extent: Segment | None = None) -> int:
    """Ticks during which two or more labels are simultaneously active."""
    if extent is None:
        extent = a.extent()
        if extent is None:
            return 0
    empty = Annotation(a.file_id)
    return sum(r.duration for r, labels, _ in cotemporal_regions(a, empty, extent) if len(labels) >= 2)
