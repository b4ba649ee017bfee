"""Synthetic two-party interviews with controllable ground truth.

Each file is an alternating dialogue between a neuropsychologist and an
interviewee. Score streams are ground-truth indicators plus clipped Gaussian
noise; embeddings are per-speaker centroids plus a time-coherent Gaussian noise field.
"""

from __future__ import annotations

import zlib
from bisect import bisect_left
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .corpus import Corpus
from .decoding import ScoreStream
from .splits import GROUPS, INTERVIEWEE, NEUROPSYCHOLOGIST, CorpusManifest, Interview, SplitAssignment
from .timeline import Annotation, Segment, overlap_duration, support, to_seconds


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    file_count: int = 20
    file_duration: float = 600.0
    turn_duration_np: float = 2.5
    turn_duration_it: float = 5.0
    pause_duration: float = 0.8
    overlap_probability: float = 0.1
    score_noise_sigma: float = 0.0
    embedding_dim: int = 32
    centroid_separation: float = 1.0
    embedding_noise_sigma: float = 0.0
    frame_step: float = 0.01
    group_labels: tuple[str, ...] = GROUPS
    min_turn: float = 0.3
    min_pause: float = 0.2
    change_width: float = 0.1

    def __post_init__(self) -> None:
        if self.file_count < 0:
            raise ValueError("file_count must be non-negative")
        if not 0 <= self.overlap_probability <= 1:
            raise ValueError("overlap_probability must lie in [0, 1]")
        for name in ("score_noise_sigma", "centroid_separation", "embedding_noise_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("file_duration", "frame_step", "min_turn", "min_pause", "change_width"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.embedding_dim < 2:
            raise ValueError("embedding_dim must be at least 2")
        if min(self.turn_duration_np, self.turn_duration_it) <= self.min_turn:
            raise ValueError("mean turn durations must exceed min_turn")
        if self.pause_duration <= self.min_pause:
            raise ValueError("pause_duration must exceed min_pause")
        if not self.group_labels or any(g not in GROUPS for g in self.group_labels):
            raise ValueError(f"group labels must be drawn from {GROUPS}")

    @classmethod
    def from_text(cls, text: str) -> SynthConfig:
        """Parse ``key=value`` lines; ``#`` starts a comment."""
        types = {f.name: f.type for f in fields(cls)}
        kwargs: dict[str, object] = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = (p.strip() for p in line.partition("="))
            if not sep or key not in types:
                raise ValueError(f"line {lineno}: expected key=value with a known key, got {raw!r}")
            kind = types[key]
            try:
                if key == "group_labels":
                    kwargs[key] = tuple(v.strip() for v in value.split(",") if v.strip())
                elif kind in ("int", int):
                    kwargs[key] = int(value)
                else:
                    kwargs[key] = float(value)
            except ValueError:
                raise ValueError(f"line {lineno}: bad value for {key}: {value!r}") from None
        return cls(**kwargs)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name}={','.join(v)}" if isinstance(v, tuple) else f"{f.name}={v!r}")
        return "\n".join(lines) + "\n"


NOISE_FRAME = 0.1  # seconds per frame of the embedding noise field


class SynthEmbeddingProvider:
    """Embedding of a segment = duration-weighted mix of the speaker centroids
    it covers, plus the file's Gaussian noise field averaged over the segment.

    The noise field is fixed per file, so two candidates covering nearly the
    same speech get nearly the same embedding. ``noise_sigma`` is the noise
    standard deviation of a one-second segment; it shrinks as 1/sqrt(duration).
    """

    def __init__(
        self,
        references: dict[str, Annotation],
        centroids: dict[str, dict[str, np.ndarray]],
        base: dict[str, np.ndarray],
        noise_sigma: float,
        seed: int,
        durations: dict[str, float] | None = None,
    ) -> None:
        self.references = references
        self.centroids = centroids
        self.base = base
        self.noise_sigma = noise_sigma
        self.seed = seed
        self.dim = len(next(iter(base.values()))) if base else 0
        self._durations = durations or {}
        self._fields: dict[str, np.ndarray] = {}
        self._index = {}
        for fid, a in references.items():
            longest = max((seg.duration for seg, _ in a.entries), default=0)
            self._index[fid] = ([seg.start for seg, _ in a.entries], list(a.entries), longest)

    def speaker_weights(self, file_id: str, segment: Segment) -> dict[str, int]:
        starts, entries, longest = self._index[file_id]
        weights: dict[str, int] = {}
        lo = bisect_left(starts, segment.start - longest)
        for s, label in entries[lo:]:
            if s.start >= segment.end:
                break
            inter = s.intersection(segment)
            if inter is not None:
                weights[label] = weights.get(label, 0) + inter.duration
        return weights

    def _cumulative_noise(self, file_id: str, frames_needed: int) -> np.ndarray:
        field = self._fields.get(file_id)
        if field is None or len(field) <= frames_needed:
            ext = self.references[file_id].extent()
            span = max(self._durations.get(file_id, 0.0), to_seconds(ext.end) if ext else 0.0)
            n = max(frames_needed, int(np.ceil(span / NOISE_FRAME))) + 1
            rng = np.random.default_rng([self.seed, zlib.crc32(file_id.encode())])
            field = np.vstack([np.zeros(self.dim), np.cumsum(rng.normal(size=(n, self.dim)), axis=0)])
            self._fields[file_id] = field
        return field

    def noise(self, file_id: str, segment: Segment) -> np.ndarray:
        a, b = to_seconds(segment.start) / NOISE_FRAME, to_seconds(segment.end) / NOISE_FRAME
        if b <= a:
            return np.zeros(self.dim)
        cum = self._cumulative_noise(file_id, int(np.ceil(b)) + 1)

        def integral(x: float) -> np.ndarray:
            k = int(np.floor(x))
            return cum[k] + (x - k) * (cum[k + 1] - cum[k])

        mean = (integral(b) - integral(a)) / (b - a)
        return self.noise_sigma * np.sqrt(1.0 / NOISE_FRAME) * mean

    def embed(self, file_id: str, segment: Segment) -> np.ndarray:
        weights = self.speaker_weights(file_id, segment)
        total = sum(weights.values())
        if total:
            vec = sum(w * self.centroids[file_id][spk] for spk, w in weights.items()) / total
        else:
            vec = self.base[file_id].copy()
        if self.noise_sigma > 0:
            vec = vec + self.noise(file_id, segment)
        return np.asarray(vec, dtype=float)


@dataclass
class SynthCorpus(Corpus):
    provider: SynthEmbeddingProvider | None = None
    config: SynthConfig | None = None


def _ms(x: float) -> float:
    return round(x, 3)


def _dialogue(cfg: SynthConfig, rng: np.random.Generator) -> list[tuple[float, float, str]]:
    """Turns as (start, end, role), times rounded to the millisecond."""
    means = {NEUROPSYCHOLOGIST: cfg.turn_duration_np, INTERVIEWEE: cfg.turn_duration_it}
    turns: list[tuple[float, float, str]] = []
    last_end = {NEUROPSYCHOLOGIST: -np.inf, INTERVIEWEE: -np.inf}
    role = NEUROPSYCHOLOGIST
    start = _ms(rng.exponential(cfg.pause_duration))
    while start < cfg.file_duration - cfg.min_turn:
        dur = cfg.min_turn + rng.exponential(means[role] - cfg.min_turn)
        end = _ms(min(start + dur, cfg.file_duration))
        if end - start < cfg.min_turn - 1e-9:
            break
        turns.append((start, end, role))
        last_end[role] = end
        other = INTERVIEWEE if role == NEUROPSYCHOLOGIST else NEUROPSYCHOLOGIST
        floor = max(last_end[other] + cfg.min_pause, start + cfg.min_turn)
        if rng.random() < cfg.overlap_probability and end - floor > 0.05:
            nxt = end - rng.uniform(0.05, min(1.0, end - floor))
        else:
            nxt = end + cfg.min_pause + rng.exponential(cfg.pause_duration - cfg.min_pause)
        start = _ms(max(nxt, floor))
        role = other
    return turns


def _indicator(segments: list[Segment], midpoints: np.ndarray) -> np.ndarray:
    if not segments:
        return np.zeros(len(midpoints))
    starts = np.array([s.start for s in segments], dtype=float)
    ends = np.array([s.end for s in segments], dtype=float)
    idx = np.searchsorted(starts, midpoints, side="right") - 1
    ok = idx >= 0
    out = np.zeros(len(midpoints))
    out[ok] = (midpoints[ok] < ends[idx[ok]]).astype(float)
    return out


def _change_channel(boundaries: list[int], n: int, step_ticks: float, width_frames: int) -> np.ndarray:
    out = np.zeros(n)
    ramp = 1.0 - np.abs(np.arange(-width_frames, width_frames + 1)) / (width_frames + 1)
    for b in boundaries:
        c = int(b // step_ticks)
        lo, hi = max(0, c - width_frames), min(n, c + width_frames + 1)
        if lo >= hi:
            continue
        np.maximum(out[lo:hi], ramp[lo - (c - width_frames) : hi - (c - width_frames)], out=out[lo:hi])
    return out


def synth_stream(ref_roles: Annotation, cfg: SynthConfig, rng: np.random.Generator) -> ScoreStream:
    """Channels ``speech``, ``change`` and one per role, on a grid starting at 0."""
    n = int(round(cfg.file_duration / cfg.frame_step))
    step_ticks = cfg.frame_step * 10_000
    midpoints = (np.arange(n) + 0.5) * step_ticks
    cols = {
        "speech": _indicator(list(support(ref_roles.timeline())), midpoints),
        "change": _change_channel(
            sorted({p for s, _ in ref_roles for p in (s.start, s.end)}),
            n,
            step_ticks,
            max(1, int(round(cfg.change_width / cfg.frame_step))),
        ),
    }
    for role in (NEUROPSYCHOLOGIST, INTERVIEWEE):
        cols[role] = _indicator(list(ref_roles.label_timeline(role)), midpoints)
    scores = np.column_stack(list(cols.values()))
    if cfg.score_noise_sigma > 0:
        scores = np.clip(scores + rng.normal(0.0, cfg.score_noise_sigma, scores.shape), 0.0, 1.0)
    return ScoreStream(ref_roles.file_id, cfg.frame_step, 0.0, tuple(cols), scores)


def _centroids(rng: np.random.Generator, dim: int, separation: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    base = rng.normal(size=dim)
    base /= np.linalg.norm(base)
    u = rng.normal(size=dim)
    u -= u.dot(base) * base
    u /= np.linalg.norm(u)
    return base, base + 0.5 * separation * u, base - 0.5 * separation * u


def generate_corpus(cfg: SynthConfig) -> SynthCorpus:
    """Deterministic given ``cfg.seed``; each file draws from its own spawned seed."""
    interviews, references, streams = [], {}, {}
    centroids: dict[str, dict[str, np.ndarray]] = {}
    bases: dict[str, np.ndarray] = {}
    for i, child in enumerate(np.random.SeedSequence(cfg.seed).spawn(cfg.file_count)):
        dialog_rng, stream_rng, emb_rng = (np.random.default_rng(s) for s in child.spawn(3))
        fid = f"S{cfg.seed}_{i:03d}"
        a, b = f"{fid}_A", f"{fid}_B"
        roles = {a: NEUROPSYCHOLOGIST, b: INTERVIEWEE} if dialog_rng.random() < 0.5 else {a: INTERVIEWEE, b: NEUROPSYCHOLOGIST}
        speaker_of = {r: spk for spk, r in roles.items()}
        turns = _dialogue(cfg, dialog_rng)
        ref = Annotation(fid, ((Segment.from_seconds(s, e), speaker_of[r]) for s, e, r in turns))
        references[fid] = ref
        streams[fid] = synth_stream(ref.relabel(roles), cfg, stream_rng)
        base, ca, cb = _centroids(emb_rng, cfg.embedding_dim, cfg.centroid_separation)
        bases[fid], centroids[fid] = base, {a: ca, b: cb}
        interviews.append(
            Interview(
                fid,
                cfg.file_duration,
                "reference.rttm",
                (f"scores/{fid}.csv",),
                cfg.group_labels[i % len(cfg.group_labels)],
                roles,
            )
        )
    provider = SynthEmbeddingProvider(
        references, centroids, bases, cfg.embedding_noise_sigma, cfg.seed,
        {fid: cfg.file_duration for fid in references},
    )
    return SynthCorpus(CorpusManifest(interviews), references, streams, provider, cfg)


def write_corpus(corpus: SynthCorpus, out_dir: str | Path) -> Path:
    """Write manifest, RTTM, score streams and the generating config; returns the manifest path."""
    from . import io

    out = Path(out_dir)
    (out / "scores").mkdir(parents=True, exist_ok=True)
    (out / "reference.rttm").write_text(io.emit_rttm(corpus.references.values()), encoding="utf-8")
    for fid, stream in corpus.streams.items():
        (out / "scores" / f"{fid}.csv").write_text(io.emit_score_stream(stream), encoding="utf-8")
    if corpus.config is not None:
        (out / "synth.cfg").write_text(corpus.config.to_text(), encoding="utf-8")
    manifest = out / "manifest.csv"
    manifest.write_text(io.emit_manifest(corpus.manifest), encoding="utf-8")
    return manifest


STAT_ROWS = (
    "#Interviews",
    "#Segments IT",
    "#Segments NP",
    "Dur Role IT (h)",
    "Dur Role NP (h)",
    "Dur Overlap (h)",
    "#(C/preHD/HD)",
)


def corpus_statistics(
    manifest: CorpusManifest,
    annotations: dict[str, Annotation],
    splits: SplitAssignment | None = None,
) -> dict[str, dict[str, object]]:
    """Per-split corpus inventory: segment counts, role durations and overlap in hours, group mix."""
    if splits is None:
        columns = {"all": set(manifest.file_ids())}
    else:
        columns = {"M_train": splits.meta_train, "M_dev": splits.meta_dev, "M_test": splits.meta_test}
    table: dict[str, dict[str, object]] = {}
    for name, members in columns.items():
        seg = {INTERVIEWEE: 0, NEUROPSYCHOLOGIST: 0}
        dur = {INTERVIEWEE: 0, NEUROPSYCHOLOGIST: 0}
        overlap = 0
        groups = {g: 0 for g in GROUPS}
        count = 0
        for it in manifest:
            if it.file_id not in members:
                continue
            count += 1
            groups[it.group] += 1
            a = annotations.get(it.file_id, Annotation(it.file_id)).relabel(it.roles)
            for role in seg:
                seg[role] += sum(1 for _, lab in a if lab == role)
                dur[role] += a.label_duration(role)
            overlap += overlap_duration(a)
        table[name] = {
            "#Interviews": count,
            "#Segments IT": seg[INTERVIEWEE],
            "#Segments NP": seg[NEUROPSYCHOLOGIST],
            "Dur Role IT (h)": to_seconds(dur[INTERVIEWEE]) / 3600,
            "Dur Role NP (h)": to_seconds(dur[NEUROPSYCHOLOGIST]) / 3600,
            "Dur Overlap (h)": to_seconds(overlap) / 3600,
            "#(C/preHD/HD)": "/".join(str(groups[g]) for g in GROUPS),
        }
    return table
