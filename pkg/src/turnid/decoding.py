"""Frame-level score streams to segments: VAD, change points, candidates, roles."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .metrics import IerReport, detection_error_rate, identification_error_rate
from .timeline import Annotation, Segment, Timeline, crop_timeline, support, to_ticks


@dataclass(frozen=True, eq=False)
class ScoreStream:
    """Scores in [0, 1], one column per channel; frame ``i`` covers
    ``[start + i * frame_step, start + (i + 1) * frame_step)``."""

    file_id: str
    frame_step: float
    start_time: float
    channels: tuple[str, ...]
    scores: np.ndarray

    def __post_init__(self) -> None:
        scores = np.asarray(self.scores, dtype=float)
        if scores.ndim != 2 or scores.shape[1] != len(self.channels):
            raise ValueError(
                f"{self.file_id}: scores shape {scores.shape} does not match {len(self.channels)} channels"
            )
        if len(set(self.channels)) != len(self.channels):
            raise ValueError(f"{self.file_id}: duplicate channel names")
        if not self.frame_step > 0:
            raise ValueError(f"{self.file_id}: frame step must be positive")
        if not np.all(np.isfinite(scores)) or scores.size and (scores.min() < 0 or scores.max() > 1):
            raise ValueError(f"{self.file_id}: scores must be finite and within [0, 1]")
        scores.setflags(write=False)
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "scores", scores)

    @property
    def n_frames(self) -> int:
        return self.scores.shape[0]

    def channel(self, name: str) -> np.ndarray:
        try:
            return self.scores[:, self.channels.index(name)]
        except ValueError:
            raise KeyError(f"{self.file_id}: no channel {name!r} (have {list(self.channels)})") from None

    def frame_time(self, i: int | np.ndarray) -> float | np.ndarray:
        return self.start_time + np.asarray(i) * self.frame_step

    def frame_tick(self, i: int) -> int:
        return to_ticks(self.start_time + i * self.frame_step)

    def extent(self) -> Segment:
        return Segment(self.frame_tick(0), self.frame_tick(self.n_frames))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ScoreStream):
            return NotImplemented
        return (
            self.file_id == other.file_id
            and self.frame_step == other.frame_step
            and self.start_time == other.start_time
            and self.channels == other.channels
            and np.array_equal(self.scores, other.scores)
        )


def merge_streams(streams: Sequence[ScoreStream]) -> ScoreStream:
    """Stack the channels of streams sharing one frame grid."""
    first = streams[0]
    for s in streams[1:]:
        if (s.file_id, s.frame_step, s.start_time, s.n_frames) != (
            first.file_id,
            first.frame_step,
            first.start_time,
            first.n_frames,
        ):
            raise ValueError(f"{s.file_id}: streams do not share a frame grid")
    channels = tuple(c for s in streams for c in s.channels)
    return ScoreStream(
        first.file_id, first.frame_step, first.start_time, channels, np.hstack([s.scores for s in streams])
    )


@dataclass(frozen=True)
class BinarizeConfig:
    onset: float = 0.5
    offset: float = 0.5
    min_duration_on: float = 0.1
    min_duration_off: float = 0.1
    pad_onset: float = 0.0
    pad_offset: float = 0.0

    def __post_init__(self) -> None:
        if not 0 <= self.offset <= self.onset <= 1:
            raise ValueError(f"need 0 <= offset <= onset <= 1, got {self.offset}, {self.onset}")
        if min(self.min_duration_on, self.min_duration_off, self.pad_onset, self.pad_offset) < 0:
            raise ValueError("durations and pads must be non-negative")


def _hysteresis(x: np.ndarray, onset: float, offset: float) -> np.ndarray:
    # 1 = switch on, 0 = switch off, -1 = hold previous state
    trig = np.full(x.shape, -1, dtype=np.int8)
    trig[x < offset] = 0
    trig[x >= onset] = 1
    idx = np.where(trig >= 0, np.arange(len(x)), -1)
    np.maximum.accumulate(idx, out=idx)
    state = np.zeros(len(x), dtype=bool)
    has = idx >= 0
    state[has] = trig[idx[has]] == 1
    return state


def _runs(active: np.ndarray) -> list[tuple[int, int]]:
    padded = np.concatenate(([False], active, [False]))
    d = np.flatnonzero(np.diff(padded.astype(np.int8)))
    return list(zip(d[::2].tolist(), d[1::2].tolist()))


def binarize(stream: ScoreStream, channel: str, cfg: BinarizeConfig = BinarizeConfig()) -> Timeline:
    """Hysteresis decoding of one channel into disjoint active regions.

    Regions open at ``score >= onset`` and close at ``score < offset``.
    Regions shorter than ``min_duration_on`` are dropped, then gaps shorter
    than ``min_duration_off`` are filled, then pads are applied and the
    result is re-supported and clipped to the stream extent.
    """
    x = stream.channel(channel)
    runs = _runs(_hysteresis(x, cfg.onset, cfg.offset))
    regions = [(stream.frame_tick(a), stream.frame_tick(b)) for a, b in runs]
    min_on, min_off = to_ticks(cfg.min_duration_on), to_ticks(cfg.min_duration_off)
    regions = [r for r in regions if r[1] - r[0] >= min_on]
    filled: list[list[int]] = []
    for a, b in regions:
        if filled and a - filled[-1][1] < min_off:
            filled[-1][1] = b
        else:
            filled.append([a, b])
    pad_on, pad_off = to_ticks(cfg.pad_onset), to_ticks(cfg.pad_offset)
    extent = stream.extent()
    padded = [Segment(max(0, a - pad_on), b + pad_off) for a, b in filled]
    return crop_timeline(support(padded), extent)


def _smooth(x: np.ndarray, window: int) -> np.ndarray:
    if window <= 1:
        return x
    half = window // 2
    kernel = np.ones(2 * half + 1) / (2 * half + 1)
    return np.convolve(np.pad(x, half, mode="edge"), kernel, mode="valid")


def detect_change_points(
    stream: ScoreStream,
    channel: str = "change",
    threshold: float = 0.5,
    min_gap: float = 0.5,
    smoothing: float = 0.1,
) -> list[float]:
    """Peak-pick a change score: local maxima above ``threshold``, highest first,
    each suppressing weaker peaks closer than ``min_gap`` seconds."""
    if min_gap < 0:
        raise ValueError("min_gap must be non-negative")
    x = _smooth(np.asarray(stream.channel(channel)), int(round(smoothing / stream.frame_step)))
    if len(x) == 0:
        return []
    left = np.concatenate(([-np.inf], x[:-1]))
    right = np.concatenate((x[1:], [-np.inf]))
    # plateaus report their first frame
    peaks = np.flatnonzero((x > left) & (x >= right) & (x > threshold))
    order = sorted(peaks.tolist(), key=lambda i: (-x[i], i))
    kept: list[int] = []
    for i in order:
        t = stream.frame_time(i)
        if all(abs(t - stream.frame_time(k)) >= min_gap for k in kept):
            kept.append(i)
    return [float(stream.frame_time(i)) for i in sorted(kept)]


def candidate_segments(vad: Timeline, change_points: Iterable[float]) -> Timeline:
    """Split every VAD region at the change points strictly inside it."""
    cuts = sorted({to_ticks(t) for t in change_points})
    out = []
    for s in support(vad):
        cursor = s.start
        for c in cuts:
            if cursor < c < s.end:
                out.append(Segment(cursor, c))
                cursor = c
        out.append(Segment(cursor, s.end))
    return Timeline(out)


def decode_roles(
    stream: ScoreStream,
    cfg_per_role: Mapping[str, BinarizeConfig],
) -> Annotation:
    """Binarize each role channel independently; overlapping activations are kept."""
    entries = []
    for role, cfg in cfg_per_role.items():
        if role not in stream.channels:
            raise KeyError(f"{stream.file_id}: missing role channel {role!r}")
        entries.extend((s, role) for s in binarize(stream, role, cfg))
    return Annotation(stream.file_id, entries)


def tune_thresholds(
    streams: Sequence[ScoreStream],
    refs: Sequence[Annotation],
    grid: Sequence[BinarizeConfig],
    channels: Sequence[str],
    objective: str = "ier",
    extents: Sequence[Segment] | None = None,
) -> dict[str, BinarizeConfig]:
    """Pick, per channel, the grid element with the lowest aggregate error.

    With ``objective="ier"`` the channel's decoded timeline is scored
    against the reference entries carrying the channel's label. With
    ``"detection"`` it is scored against the whole reference speech support
    (the usual VAD setup). Ties go to the earlier grid element.
    """
    if not streams:
        raise ValueError("tune_thresholds needs at least one file")
    if not grid:
        raise ValueError("empty configuration grid")
    if len(streams) != len(refs):
        raise ValueError("streams and references are not aligned")
    if objective not in ("ier", "detection"):
        raise ValueError(f"unknown objective {objective!r}")
    for s, r in zip(streams, refs):
        if s.file_id != r.file_id:
            raise ValueError(f"stream {s.file_id} aligned with reference {r.file_id}")
    if extents is None:
        extents = [s.extent() for s in streams]

    best: dict[str, BinarizeConfig] = {}
    for channel in channels:
        best_err = None
        for cfg in grid:
            total = IerReport()
            for stream, ref, extent in zip(streams, refs, extents):
                hyp = Annotation(stream.file_id, ((s, channel) for s in binarize(stream, channel, cfg)))
                if objective == "ier":
                    total = total + identification_error_rate(ref.subset([channel]), hyp, extent)
                else:
                    total = total + detection_error_rate(ref, hyp, extent)
            err = total.false_alarm + total.missed_detection + total.confusion
            if best_err is None or err < best_err:
                best_err, best[channel] = err, cfg
    return best
