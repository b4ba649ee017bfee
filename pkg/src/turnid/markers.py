"""Speech markers (silence ratio, utterance-duration spread) and their agreement."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .timeline import TICKS_PER_SECOND, Annotation, Segment, crop, support, to_seconds


def silence_ratio(a: Annotation, extent: Segment, labels: Iterable[str] | None = None) -> float:
    """Fraction of ``extent`` where nobody speaks; overlap counts as speech once.

    ``labels`` restricts "speech" to those speakers/roles.
    """
    if extent.duration <= 0:
        raise ValueError("extent must have positive duration")
    cropped = crop(a if labels is None else a.subset(labels), extent)
    speech = sum(s.duration for s in support(cropped.timeline()))
    return 1.0 - speech / extent.duration


def utterance_durations(a: Annotation, label: str, extent: Segment) -> list[float]:
    return [to_seconds(s.duration) for s, lab in crop(a, extent) if lab == label]


def utterance_duration_sd(a: Annotation, label: str, extent: Segment) -> float | None:
    """Population SD of the cropped utterance durations; ``None`` below two utterances.

    The variance is accumulated exactly in integer ticks, so equal durations
    give exactly 0 and identical annotations give identical values.
    """
    ticks = [s.duration for s, lab in crop(a, extent) if lab == label]
    n = len(ticks)
    if n < 2:
        return None
    total = sum(ticks)
    scaled_var = n * sum(t * t for t in ticks) - total * total  # n^2 * variance, in ticks^2
    return math.sqrt(scaled_var) / n / TICKS_PER_SECOND


@dataclass(frozen=True)
class MarkerReport:
    file_id: str
    group: str
    source: str
    silence_ratio: float
    utterance_duration_sd: float | None
    utterance_count: int

    def __post_init__(self) -> None:
        if self.source not in ("reference", "predicted"):
            raise ValueError(f"source must be 'reference' or 'predicted', got {self.source!r}")


def marker_report(
    a: Annotation,
    extent: Segment,
    group: str,
    source: str,
    role: str = "Interviewee",
) -> MarkerReport:
    return MarkerReport(
        a.file_id,
        group,
        source,
        silence_ratio(a, extent),
        utterance_duration_sd(a, role, extent),
        len(utterance_durations(a, role, extent)),
    )


@dataclass(frozen=True)
class MarkerPair:
    file_id: str
    group: str
    silence_ratio: tuple[float, float]
    utterance_duration_sd: tuple[float | None, float | None]


@dataclass(frozen=True)
class MarkerAgreement:
    pairs: list[MarkerPair]
    # group -> mean(predicted - reference); NaN when no file of the group has the marker defined
    silence_ratio_error: dict[str, float]
    utterance_duration_sd_error: dict[str, float]


def marker_agreement(refs: Sequence[MarkerReport], preds: Sequence[MarkerReport]) -> MarkerAgreement:
    ref_by = {r.file_id: r for r in refs}
    pred_by = {p.file_id: p for p in preds}
    if set(ref_by) != set(pred_by) or len(ref_by) != len(refs) or len(pred_by) != len(preds):
        raise ValueError("reference and predicted marker reports are not aligned by fileId")
    pairs = []
    sil: dict[str, list[float]] = {}
    sd: dict[str, list[float]] = {}
    for fid in sorted(ref_by):
        r, p = ref_by[fid], pred_by[fid]
        if r.group != p.group:
            raise ValueError(f"{fid}: group differs between reference and prediction")
        pairs.append(
            MarkerPair(fid, r.group, (r.silence_ratio, p.silence_ratio), (r.utterance_duration_sd, p.utterance_duration_sd))
        )
        sil.setdefault(r.group, []).append(p.silence_ratio - r.silence_ratio)
        sd.setdefault(r.group, [])
        if r.utterance_duration_sd is not None and p.utterance_duration_sd is not None:
            sd[r.group].append(p.utterance_duration_sd - r.utterance_duration_sd)

    def means(d: dict[str, list[float]]) -> dict[str, float]:
        return {g: (float(np.mean(v)) if v else math.nan) for g, v in sorted(d.items())}

    return MarkerAgreement(pairs, means(sil), means(sd))
