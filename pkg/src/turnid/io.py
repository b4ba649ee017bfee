"""On-disk formats: RTTM, score-stream CSV, manifest, split files, UEM, embedding
caches and the report CSVs.

Every parser either returns a value or raises :class:`FormatError` carrying
the line (and, where meaningful, column) of the problem.
"""

from __future__ import annotations

import csv
import functools
import io as _io
import math
from typing import Iterable, Sequence

import numpy as np

from .decoding import ScoreStream
from .markers import MarkerReport
from .metrics import Aggregate, FileReport, IerReport
from .splits import CorpusManifest, Interview, SplitAssignment
from .timeline import TICKS_PER_SECOND, Annotation, Segment, to_ticks


class FormatError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None, source: str = "<input>"):
        self.message = message
        self.line = line
        self.column = column
        self.source = source
        where = source
        if line is not None:
            where += f":{line}"
            if column is not None:
                where += f":{column}"
        super().__init__(f"{where}: {message}")


def _total(parser):
    """Turn any unexpected failure inside a parser into an unlocated FormatError."""

    @functools.wraps(parser)
    def wrapper(text: str, source: str | None = None):
        src = source if source is not None else f"<{parser.__name__.removeprefix('parse_')}>"
        try:
            return parser(text, src)
        except FormatError:
            raise
        except (ValueError, TypeError, IndexError, KeyError, csv.Error) as exc:
            raise FormatError(str(exc), None, None, src) from None

    return wrapper


def _float(token: str, what: str, line: int, column: int, source: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise FormatError(f"{what} is not a number: {token!r}", line, column, source) from None
    if not math.isfinite(value):
        raise FormatError(f"{what} must be finite, got {token!r}", line, column, source)
    return value


def _lines(text: str) -> Iterable[tuple[int, str]]:
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line and not line.startswith("#") and not line.startswith(";;"):
            yield lineno, raw


def _fmt(x: float, places: int = 4) -> str:
    return f"{x:.{places}f}"


# --- RTTM -----------------------------------------------------------------

def _token_columns(raw: str) -> list[tuple[int, str]]:
    out, i = [], 0
    for tok in raw.split():
        i = raw.index(tok, i)
        out.append((i + 1, tok))
        i += len(tok)
    return out


@_total
def parse_rttm(text: str, source: str = "<input>") -> dict[str, Annotation]:
    """One annotation per file id, in order of first appearance."""
    records: dict[str, list[tuple[Segment, str, int]]] = {}
    for lineno, raw in _lines(text):
        toks = _token_columns(raw)
        if toks[0][1] != "SPEAKER":
            raise FormatError(f"unknown record type {toks[0][1]!r}", lineno, toks[0][0], source)
        if len(toks) < 8:
            raise FormatError(f"expected at least 8 fields, got {len(toks)}", lineno, None, source)
        file_id = toks[1][1]
        onset = _float(toks[3][1], "onset", lineno, toks[3][0], source)
        duration = _float(toks[4][1], "duration", lineno, toks[4][0], source)
        if onset < 0:
            raise FormatError(f"negative onset {onset}", lineno, toks[3][0], source)
        if duration <= 0:
            raise FormatError(f"duration must be positive, got {duration}", lineno, toks[4][0], source)
        start, length = to_ticks(onset), to_ticks(duration)
        if length <= 0:
            raise FormatError(f"duration below time resolution: {duration}", lineno, toks[4][0], source)
        records.setdefault(file_id, []).append((Segment(start, start + length), toks[7][1], lineno))

    out = {}
    for file_id, recs in records.items():
        reach: dict[str, tuple[int, int]] = {}
        for s, label, lineno in sorted(recs, key=lambda r: (r[0], r[2])):
            prev = reach.get(label)
            if prev is not None and s.start < prev[0]:
                raise FormatError(
                    f"speaker {label!r} overlaps itself (see line {prev[1]})", lineno, None, source
                )
            if prev is None or s.end > prev[0]:
                reach[label] = (s.end, lineno)
        out[file_id] = Annotation(file_id, ((s, label) for s, label, _ in recs))
    return out


def emit_rttm(annotations: Iterable[Annotation]) -> str:
    """Records sorted by (fileId, onset), times rounded to the millisecond."""
    rows = []
    per_ms = TICKS_PER_SECOND // 1000
    for a in annotations:
        for s, label in a:
            start_ms = round(s.start / per_ms)
            end_ms = max(round(s.end / per_ms), start_ms + 1)
            rows.append((a.file_id, start_ms, end_ms, label))
    rows.sort()
    return "".join(
        f"SPEAKER {f} 1 {a / 1000:.3f} {(b - a) / 1000:.3f} <NA> <NA> {lab} <NA> <NA>\n"
        for f, a, b, lab in rows
    )


# --- score streams --------------------------------------------------------

@_total
def parse_score_stream(text: str, source: str = "<input>") -> ScoreStream:
    meta: dict[str, str] = {}
    header: list[str] | None = None
    rows: list[list[float]] = []
    times_ok_tol = 0.5 / TICKS_PER_SECOND
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                key, sep, value = tok.partition("=")
                if not sep:
                    raise FormatError(f"metadata token without '=': {tok!r}", lineno, None, source)
                meta[key] = value
            continue
        fields = [f.strip() for f in line.split(",")]
        if header is None:
            for key in ("fileId", "frameStep", "start"):
                if key not in meta:
                    raise FormatError(f"missing metadata {key!r} before header", lineno, None, source)
            if fields[0] != "time" or len(fields) < 2:
                raise FormatError("header must be 'time,<label>,...'", lineno, 1, source)
            if len(set(fields[1:])) != len(fields) - 1 or any(not f for f in fields[1:]):
                raise FormatError("channel labels must be unique and non-empty", lineno, None, source)
            header = fields
            step = _float(meta["frameStep"], "frameStep", lineno, None, source)
            start = _float(meta["start"], "start", lineno, None, source)
            if step <= 0:
                raise FormatError("frameStep must be positive", lineno, None, source)
            continue
        if len(fields) != len(header):
            raise FormatError(f"expected {len(header)} fields, got {len(fields)}", lineno, None, source)
        t = _float(fields[0], "time", lineno, 1, source)
        expected = start + len(rows) * step
        if abs(t - expected) > times_ok_tol:
            raise FormatError(
                f"row {len(rows)}: time {fields[0]} breaks the frame grid (expected {expected:.6f})",
                lineno,
                1,
                source,
            )
        values = []
        for col, tok in enumerate(fields[1:], 2):
            v = _float(tok, f"score {header[col - 1]!r}", lineno, col, source)
            if not 0.0 <= v <= 1.0:
                raise FormatError(f"score out of [0, 1]: {tok}", lineno, col, source)
            values.append(v)
        rows.append(values)
    if header is None:
        raise FormatError("no header row", None, None, source)
    scores = np.array(rows, dtype=float).reshape(len(rows), len(header) - 1)
    return ScoreStream(meta["fileId"], step, start, tuple(header[1:]), scores)


def emit_score_stream(stream: ScoreStream) -> str:
    if any(c.isspace() for c in stream.file_id):
        raise ValueError("file ids must not contain whitespace")
    buf = _io.StringIO()
    buf.write(f"#fileId={stream.file_id} frameStep={stream.frame_step!r} start={stream.start_time!r}\n")
    buf.write("time," + ",".join(stream.channels) + "\n")
    times = stream.start_time + np.arange(stream.n_frames) * stream.frame_step
    for t, row in zip(times.tolist(), stream.scores.tolist()):
        buf.write(f"{t:.6f}," + ",".join(repr(v) for v in row) + "\n")
    return buf.getvalue()


# --- manifest ---------------------------------------------------------------

MANIFEST_COLUMNS = ("fileId", "audioDuration", "reference", "scores", "group", "roles")


def _csv_rows(text: str) -> Iterable[tuple[int, list[str]]]:
    for lineno, raw in _lines(text):
        yield lineno, next(csv.reader([raw]))


@_total
def parse_manifest(text: str, source: str = "<input>") -> CorpusManifest:
    """CSV with columns fileId,audioDuration,reference,scores,group,roles.

    ``scores`` holds ``;``-separated paths; ``roles`` holds
    ``label:Role`` pairs separated by ``;``.
    """
    header: list[str] | None = None
    interviews: list[Interview] = []
    seen: dict[str, int] = {}
    for lineno, fields in _csv_rows(text):
        if header is None:
            missing = [c for c in MANIFEST_COLUMNS if c not in fields]
            if missing:
                raise FormatError(f"header lacks required columns {missing}", lineno, None, source)
            header = fields
            continue
        if len(fields) != len(header):
            raise FormatError(f"expected {len(header)} fields, got {len(fields)}", lineno, None, source)
        rec = dict(zip(header, fields))
        col = {c: header.index(c) + 1 for c in MANIFEST_COLUMNS}
        fid = rec["fileId"].strip()
        if not fid or any(c.isspace() for c in fid):
            raise FormatError(f"invalid fileId {fid!r}", lineno, col["fileId"], source)
        if fid in seen:
            raise FormatError(f"duplicate fileId {fid!r} (first on line {seen[fid]})", lineno, col["fileId"], source)
        seen[fid] = lineno
        duration = _float(rec["audioDuration"], "audioDuration", lineno, col["audioDuration"], source)
        if not rec["reference"].strip():
            raise FormatError("empty reference path", lineno, col["reference"], source)
        roles: dict[str, str] = {}
        for pair in filter(None, (p.strip() for p in rec["roles"].split(";"))):
            label, sep, role = pair.partition(":")
            if not sep or not label or not role:
                raise FormatError(f"malformed role pair {pair!r}", lineno, col["roles"], source)
            roles[label] = role
        try:
            interviews.append(
                Interview(
                    fid,
                    duration,
                    rec["reference"].strip(),
                    tuple(p.strip() for p in rec["scores"].split(";") if p.strip()),
                    rec["group"].strip(),
                    roles,
                )
            )
        except ValueError as exc:
            raise FormatError(str(exc), lineno, None, source) from None
    if header is None:
        raise FormatError("no header row", None, None, source)
    return CorpusManifest(interviews)


def emit_manifest(manifest: CorpusManifest) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MANIFEST_COLUMNS)
    for it in manifest:
        w.writerow(
            [
                it.file_id,
                repr(it.audio_duration),
                it.reference_path,
                ";".join(it.score_paths),
                it.group,
                ";".join(f"{k}:{v}" for k, v in it.roles.items()),
            ]
        )
    return buf.getvalue()


# --- split files ------------------------------------------------------------

def emit_split(split: SplitAssignment) -> str:
    lines = [f"tDev={split.t_dev!r}", f"tTestBoundary={split.t_test_boundary!r}", f"seed={split.seed}"]
    for name in ("train", "dev", "test"):
        lines.extend(f"{fid},{name}" for fid in sorted(split.members(name)))
    return "\n".join(lines) + "\n"


@_total
def parse_split(text: str, source: str = "<input>") -> SplitAssignment:
    meta: dict[str, str] = {}
    sets: dict[str, set[str]] = {"train": set(), "dev": set(), "test": set()}
    seen: set[str] = set()
    for lineno, raw in _lines(text):
        line = raw.strip()
        if "=" in line and "," not in line:
            key, _, value = line.partition("=")
            meta[key.strip()] = value.strip()
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != 2 or fields[1] not in sets:
            raise FormatError("expected 'fileId,{train|dev|test}'", lineno, None, source)
        if fields[0] in seen:
            raise FormatError(f"fileId {fields[0]!r} assigned twice", lineno, 1, source)
        seen.add(fields[0])
        sets[fields[1]].add(fields[0])
    for key in ("tDev", "tTestBoundary", "seed"):
        if key not in meta:
            raise FormatError(f"missing header {key}=...", None, None, source)
    try:
        seed = int(meta["seed"])
    except ValueError:
        raise FormatError(f"seed is not an integer: {meta['seed']!r}", None, None, source) from None
    try:
        return SplitAssignment(
            frozenset(sets["train"]),
            frozenset(sets["dev"]),
            frozenset(sets["test"]),
            _float(meta["tDev"], "tDev", None, None, source),
            _float(meta["tTestBoundary"], "tTestBoundary", None, None, source),
            seed,
        )
    except FormatError:
        raise
    except ValueError as exc:
        raise FormatError(str(exc), None, None, source) from None


# --- UEM and embedding caches ---------------------------------------------

@_total
def parse_uem(text: str, source: str = "<input>") -> dict[str, Segment]:
    """``fileId channel start end`` per line."""
    out = {}
    for lineno, raw in _lines(text):
        toks = _token_columns(raw)
        if len(toks) != 4:
            raise FormatError(f"expected 4 fields, got {len(toks)}", lineno, None, source)
        start = _float(toks[2][1], "start", lineno, toks[2][0], source)
        end = _float(toks[3][1], "end", lineno, toks[3][0], source)
        if start < 0 or to_ticks(end) <= to_ticks(start):
            raise FormatError(f"invalid extent [{start}, {end}]", lineno, None, source)
        out[toks[0][1]] = Segment.from_seconds(start, end)
    return out


def emit_uem(extents: dict[str, Segment]) -> str:
    return "".join(
        f"{fid} 1 {s.start / TICKS_PER_SECOND:.4f} {s.end / TICKS_PER_SECOND:.4f}\n" for fid, s in sorted(extents.items())
    )


@_total
def parse_embeddings(text: str, source: str = "<input>") -> dict[tuple[str, int, int], np.ndarray]:
    table = {}
    dim = None
    for lineno, fields in _csv_rows(text):
        if len(fields) < 4:
            raise FormatError("expected fileId,start,end,v1,...", lineno, None, source)
        start = _float(fields[1], "start", lineno, 2, source)
        end = _float(fields[2], "end", lineno, 3, source)
        vec = [_float(v, "embedding value", lineno, i, source) for i, v in enumerate(fields[3:], 4)]
        if dim is None:
            dim = len(vec)
        elif len(vec) != dim:
            raise FormatError(f"dimension {len(vec)} differs from {dim}", lineno, None, source)
        table[(fields[0].strip(), to_ticks(start), to_ticks(end))] = np.array(vec)
    return table


def emit_embeddings(table: dict[tuple[str, int, int], np.ndarray]) -> str:
    return "".join(
        f"{fid},{start / TICKS_PER_SECOND:.4f},{end / TICKS_PER_SECOND:.4f},"
        + ",".join(repr(float(v)) for v in vec)
        + "\n"
        for (fid, start, end), vec in sorted(table.items(), key=lambda kv: kv[0])
    )


# --- reports ------------------------------------------------------------------

IER_COLUMNS = ("fileId", "group", "falseAlarm", "missedDetection", "confusion", "total", "ier")
TOTAL = "TOTAL"


def _ier_fields(r: IerReport) -> list[str]:
    return [
        _fmt(r.false_alarm),
        _fmt(r.missed_detection),
        _fmt(r.confusion),
        _fmt(r.total),
        "undefined" if r.ier is None else _fmt(r.ier),
    ]


def emit_ier_report(agg: Aggregate) -> str:
    """Per-file rows, then one ``TOTAL,<group>`` row per group and ``TOTAL,ALL``."""
    lines = [",".join(IER_COLUMNS)]
    for fr in agg.files:
        lines.append(",".join([fr.file_id, fr.group, *_ier_fields(fr.report)]))
    for group, r in agg.groups.items():
        lines.append(",".join([TOTAL, group, *_ier_fields(r)]))
    lines.append(",".join([TOTAL, "ALL", *_ier_fields(agg.overall)]))
    return "\n".join(lines) + "\n"


@_total
def parse_ier_report(text: str, source: str = "<input>") -> list[FileReport]:
    """Per-file rows only; aggregate rows are recomputed by callers."""
    out = []
    header = None
    for lineno, fields in _csv_rows(text):
        if header is None:
            if tuple(fields) != IER_COLUMNS:
                raise FormatError(f"header must be {','.join(IER_COLUMNS)}", lineno, None, source)
            header = fields
            continue
        if len(fields) != len(IER_COLUMNS):
            raise FormatError(f"expected {len(IER_COLUMNS)} fields", lineno, None, source)
        if fields[0] == TOTAL:
            continue
        values = [_float(v, IER_COLUMNS[i], lineno, i + 1, source) for i, v in enumerate(fields[2:6], 2)]
        out.append(FileReport(fields[0], fields[1], IerReport(*values)))
    if header is None:
        raise FormatError("no header row", None, None, source)
    return out


SWEEP_COLUMNS = ("tDev", "falseAlarm", "missedDetection", "confusion", "total", "ier")


def emit_sweep(rows: Sequence[tuple[float, IerReport]]) -> str:
    lines = [",".join(SWEEP_COLUMNS)]
    lines.extend(",".join([f"{t:g}", *_ier_fields(r)]) for t, r in rows)
    return "\n".join(lines) + "\n"


ABLATION_COLUMNS = ("fraction", "MD", "FA", "Conf", "IER")


def emit_ablation(rows: Sequence[tuple[float, IerReport]]) -> str:
    """Error components as percentages of the total reference speech."""
    lines = [",".join(ABLATION_COLUMNS)]
    for fraction, r in rows:
        if r.total > 0:
            pct = [100 * r.missed_detection / r.total, 100 * r.false_alarm / r.total, 100 * r.confusion / r.total]
            lines.append(",".join([f"{fraction:g}", *(_fmt(p, 2) for p in pct), _fmt(100 * r.ier, 2)]))
        else:
            lines.append(",".join([f"{fraction:g}", "undefined", "undefined", "undefined", "undefined"]))
    return "\n".join(lines) + "\n"


MARKER_COLUMNS = ("fileId", "group", "source", "silenceRatio", "utteranceDurationSD", "utteranceCount")


def emit_markers(reports: Iterable[MarkerReport]) -> str:
    lines = [",".join(MARKER_COLUMNS)]
    for m in reports:
        sd = "undefined" if m.utterance_duration_sd is None else _fmt(m.utterance_duration_sd)
        lines.append(",".join([m.file_id, m.group, m.source, _fmt(m.silence_ratio), sd, str(m.utterance_count)]))
    return "\n".join(lines) + "\n"


def emit_table(rows: Sequence[dict[str, object]], columns: Sequence[str]) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def _cell(v: object) -> str:
    if v is None:
        return "undefined"
    if isinstance(v, float):
        return "undefined" if math.isnan(v) else _fmt(v)
    return str(v)
