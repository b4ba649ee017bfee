"""Batch command line: evaluation, splits, pipelines, sweeps, ablation, markers, synthesis."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from . import io
from .corpus import Corpus, load_corpus
from .decoding import BinarizeConfig
from .enrollment import (
    CachedEmbeddingProvider,
    EmbeddingProvider,
    EnrollmentConfig,
    PipelineResult,
    run_enrollment_pipeline,
    sweep_tdev,
)
from .markers import marker_agreement, marker_report
from .metrics import FileReport, aggregate, identification_error_rate
from .roles import RolePipelineConfig, compare_approaches, run_role_pipeline, tune_role_thresholds
from .splits import ABLATION_FRACTIONS, make_meta_split, subsample_train
from .synth import SynthConfig, corpus_statistics, generate_corpus, write_corpus
from .timeline import Annotation, Segment, to_ticks


class CliError(Exception):
    pass


def _read(path: str | Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from None


def _write(path: str | Path, text: str) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text, encoding="utf-8")


def _parse_grid(spec: str) -> list[float]:
    try:
        if ":" in spec:
            lo, hi, step = (float(x) for x in spec.split(":"))
            if step <= 0:
                raise ValueError
            n = int(round((hi - lo) / step))
            return [lo + i * step for i in range(n + 1) if lo + i * step <= hi + 1e-9]
        return [float(x) for x in spec.split(",") if x.strip()]
    except ValueError:
        raise CliError(f"bad grid {spec!r}; use start:stop:step or a comma list") from None


def _report_skips(result: PipelineResult) -> None:
    for fid, reason in result.skipped.items():
        print(f"skipped {fid}: {reason}", file=sys.stderr)


def _provider(args: argparse.Namespace) -> EmbeddingProvider:
    if args.embeddings:
        return CachedEmbeddingProvider(io.parse_embeddings(_read(args.embeddings), source=args.embeddings))
    cfg_path = Path(args.synth_config) if args.synth_config else Path(args.manifest).parent / "synth.cfg"
    if not cfg_path.exists():
        raise CliError("no embedding source: pass --embeddings or --synth-config")
    return generate_corpus(SynthConfig.from_text(_read(cfg_path))).provider


def _load(args: argparse.Namespace) -> tuple[Corpus, object]:
    corpus = load_corpus(args.manifest)
    split = io.parse_split(_read(args.split), source=args.split)
    return corpus, split


def _write_pipeline(out: Path, result: PipelineResult) -> None:
    out.mkdir(parents=True, exist_ok=True)
    reports = result.reports
    if reports:
        _write(out / "reports.csv", io.emit_ier_report(aggregate(reports)))
    hyps = [o.hypothesis for o in result.outcomes if o.hypothesis is not None]
    _write(out / "hypothesis.rttm", io.emit_rttm(hyps))
    _write(out / "scored.uem", io.emit_uem({o.file_id: o.extent for o in result.outcomes if o.extent is not None}))
    _write(out / "skipped.txt", "".join(f"{f}\t{r}\n" for f, r in result.skipped.items()))
    _report_skips(result)
    overall = result.overall()
    ier = "undefined" if overall.ier is None else f"{overall.ier:.4f}"
    print(f"files={len(reports)} skipped={len(result.skipped)} ier={ier}")


def _enroll_cfg(args: argparse.Namespace, t_dev: float | None = None) -> EnrollmentConfig:
    return EnrollmentConfig(
        t_dev=args.tdev if t_dev is None else t_dev,
        variant=args.variant,
        vad=BinarizeConfig(onset=args.vad_onset, offset=min(args.vad_onset, args.vad_offset)),
        change_threshold=args.change_threshold,
        change_min_gap=args.change_min_gap,
        seed=args.seed,
        subset=args.subset,
    )


def _role_grid(onsets: str) -> list[BinarizeConfig]:
    return [BinarizeConfig(onset=t, offset=t) for t in _parse_grid(onsets)]


def _role_cfg(corpus: Corpus, split, args: argparse.Namespace) -> RolePipelineConfig:
    if args.tune_on:
        tuned = tune_role_thresholds(corpus, split, _role_grid(args.onsets), subset=args.tune_on)
        for role, c in tuned.items():
            print(f"tuned {role}: onset={c.onset:g} offset={c.offset:g}", file=sys.stderr)
        return RolePipelineConfig(cfg_per_role=tuned, subset=args.subset)
    return RolePipelineConfig(subset=args.subset)


# --- subcommands -----------------------------------------------------------

def cmd_evaluate(args: argparse.Namespace) -> int:
    refs = io.parse_rttm(_read(args.ref), source=args.ref)
    hyps = io.parse_rttm(_read(args.hyp), source=args.hyp)
    uem = io.parse_uem(_read(args.uem), source=args.uem) if args.uem else {}
    groups = {}
    if args.manifest:
        manifest = io.parse_manifest(_read(args.manifest), source=args.manifest)
        groups = {it.file_id: it.group for it in manifest}
        refs = {f: a.relabel(manifest[f].roles) if f in groups else a for f, a in refs.items()}
    if uem:
        # a UEM defines what is scored: files it does not list are left out
        refs = {f: a for f, a in refs.items() if f in uem}
    reports = []
    for fid in sorted(refs):
        ref = refs[fid]
        hyp = hyps.get(fid, Annotation(fid))
        extent = uem.get(fid)
        if extent is None:
            ends = [s.end for s, _ in ref] + [s.end for s, _ in hyp]
            if not ends:
                print(f"skipped {fid}: empty reference and hypothesis", file=sys.stderr)
                continue
            extent = Segment(0, max(ends))
        report = identification_error_rate(ref, hyp, extent, args.collar)
        reports.append(FileReport(fid, groups.get(fid, "-"), report))
    if not reports:
        raise CliError("nothing to evaluate")
    sys.stdout.write(io.emit_ier_report(aggregate(reports)))
    return 0


def cmd_split(args: argparse.Namespace) -> int:
    manifest = io.parse_manifest(_read(args.manifest), source=args.manifest)
    split = make_meta_split(manifest, args.seed, args.stratify, args.tdev, args.test_boundary)
    _write(args.out, io.emit_split(split))
    print(f"train={len(split.meta_train)} dev={len(split.meta_dev)} test={len(split.meta_test)}")
    return 0


def cmd_enroll(args: argparse.Namespace) -> int:
    corpus, split = _load(args)
    result = run_enrollment_pipeline(corpus, split, _provider(args), _enroll_cfg(args), jobs=args.jobs)
    _write_pipeline(Path(args.out), result)
    return 0


def cmd_roles(args: argparse.Namespace) -> int:
    corpus, split = _load(args)
    result = run_role_pipeline(corpus, split, _role_cfg(corpus, split, args), jobs=args.jobs)
    _write_pipeline(Path(args.out), result)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    corpus, split = _load(args)
    grid = _parse_grid(args.grid)
    rows = sweep_tdev(corpus, split, _provider(args), grid, _enroll_cfg(args, grid[0]), jobs=args.jobs)
    for t, _, skipped in rows:
        for fid, reason in skipped.items():
            print(f"tDev={t:g} skipped {fid}: {reason}", file=sys.stderr)
    text = io.emit_sweep([(t, r) for t, r, _ in rows])
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    corpus, split = _load(args)
    fractions = _parse_grid(args.fractions)
    for f in fractions:
        if f not in ABLATION_FRACTIONS:
            raise CliError(f"fraction {f:g} not in {ABLATION_FRACTIONS}")
    overrides: dict[float, Path] = {}
    for item in args.streams or []:
        key, sep, path = item.partition("=")
        if not sep:
            raise CliError(f"--streams expects FRACTION=DIR, got {item!r}")
        overrides[float(key)] = Path(path)
    rows = []
    for f in fractions:
        sub = subsample_train(split, f, args.seed)
        if args.save_splits:
            _write(Path(args.save_splits) / f"split_{f:g}.txt", io.emit_split(sub))
        fcorpus = corpus
        if f in overrides:
            streams = dict(corpus.streams)
            for fid in corpus.manifest.file_ids():
                p = overrides[f] / f"{fid}.csv"
                if p.exists():
                    streams[fid] = io.parse_score_stream(_read(p), source=str(p))
            fcorpus = replace(corpus, streams=streams)
        result = run_role_pipeline(fcorpus, sub, _role_cfg(fcorpus, sub, args), jobs=args.jobs)
        _report_skips(result)
        rows.append((f, result.overall()))
    text = io.emit_ablation(rows)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_markers(args: argparse.Namespace) -> int:
    refs = io.parse_rttm(_read(args.annotations), source=args.annotations)
    preds = io.parse_rttm(_read(args.pred), source=args.pred) if args.pred else None
    manifest = io.parse_manifest(_read(args.manifest), source=args.manifest) if args.manifest else None
    split = io.parse_split(_read(args.split), source=args.split) if args.split else None
    ref_reports, pred_reports = [], []
    for fid in sorted(refs):
        ref = refs[fid]
        group, end = "-", None
        if manifest is not None:
            try:
                it = manifest[fid]
            except KeyError:
                print(f"skipped {fid}: not in manifest", file=sys.stderr)
                continue
            ref, group, end = ref.relabel(it.roles), it.group, to_ticks(it.audio_duration)
        if split is not None and fid not in split.meta_test:
            continue
        if end is None:
            ext = ref.extent()
            end = ext.end if ext else 0
        start = to_ticks(split.t_test_boundary) if split is not None else 0
        if end <= start:
            print(f"skipped {fid}: empty extent", file=sys.stderr)
            continue
        extent = Segment(start, end)
        ref_reports.append(marker_report(ref, extent, group, "reference", args.role))
        if preds is not None:
            pred = preds.get(fid, Annotation(fid))
            pred_reports.append(marker_report(pred, extent, group, "predicted", args.role))
    _write(args.out, io.emit_markers(ref_reports + pred_reports))
    if preds is not None and ref_reports:
        agreement = marker_agreement(ref_reports, pred_reports)
        rows = [
            {"group": g, "silenceRatioError": agreement.silence_ratio_error[g], "utteranceDurationSDError": agreement.utterance_duration_sd_error[g]}
            for g in agreement.silence_ratio_error
        ]
        sys.stdout.write(io.emit_table(rows, ["group", "silenceRatioError", "utteranceDurationSDError"]))
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = SynthConfig.from_text(_read(args.config)) if args.config else SynthConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    corpus = generate_corpus(cfg)
    manifest = write_corpus(corpus, args.out)
    print(f"wrote {len(corpus.manifest)} interviews to {manifest}")
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    def load(d: str | None) -> list[FileReport] | None:
        if d is None:
            return None
        path = Path(d) / "reports.csv" if Path(d).is_dir() else Path(d)
        return io.parse_ier_report(_read(path), source=str(path))

    rows = compare_approaches(load(args.role), load(args.enroll), load(args.topline), load(args.chance))
    names = [n for n in ("role", "enroll", "topline", "chance") if getattr(args, n)]
    table = [{"fileId": r.file_id, "group": r.group, **r.ier, "winner": r.winner} for r in rows]
    text = io.emit_table(table, ["fileId", "group", *names, "winner"])
    if args.out:
        _write(args.out, text)
    sys.stdout.write(text)
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.manifest, load_streams=False)
    split = io.parse_split(_read(args.split), source=args.split) if args.split else None
    table = corpus_statistics(corpus.manifest, corpus.references, split)
    cols = list(table)
    rows = [{"row": name, **{c: table[c][name] for c in cols}} for name in next(iter(table.values()))]
    sys.stdout.write(io.emit_table(rows, ["row", *cols]))
    return 0


# --- parser ------------------------------------------------------------------

def _add_corpus(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--subset", default="test", choices=("train", "dev", "test"))
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)


def _add_enroll(p: argparse.ArgumentParser) -> None:
    p.add_argument("--embeddings", help="embedding cache CSV")
    p.add_argument("--synth-config", help="regenerate synthetic embeddings from this config")
    p.add_argument("--variant", default="pipeline", choices=("pipeline", "topline", "chance"))
    p.add_argument("--vad-onset", type=float, default=0.5)
    p.add_argument("--vad-offset", type=float, default=0.5)
    p.add_argument("--change-threshold", type=float, default=0.5)
    p.add_argument("--change-min-gap", type=float, default=0.5)


def _add_roles(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tune-on", choices=("dev", "train", "test"), help="tune role thresholds on this meta set")
    p.add_argument("--onsets", default="0.2:0.8:0.1", help="threshold grid for --tune-on")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="turnid", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="IER of a hypothesis RTTM against a reference RTTM")
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--uem")
    p.add_argument("--collar", type=float, default=0.0)
    p.add_argument("--manifest", help="maps reference speakers to roles and files to groups")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("split", help="meta-train/dev/test split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stratify", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--tdev", type=float, default=120.0)
    p.add_argument("--test-boundary", type=float, default=180.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("pipeline", help="run one pipeline over a meta set")
    psub = p.add_subparsers(dest="pipeline", required=True)
    e = psub.add_parser("enroll")
    _add_corpus(e)
    _add_enroll(e)
    e.add_argument("--tdev", type=float, default=120.0)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_enroll)
    r = psub.add_parser("roles")
    _add_corpus(r)
    _add_roles(r)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_roles)

    p = sub.add_parser("sweep-tdev", help="enrollment IER as a function of tDev")
    _add_corpus(p)
    _add_enroll(p)
    p.add_argument("--grid", default="90:180:10")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep, tdev=None)

    p = sub.add_parser("ablate", help="role-recognition IER per meta-train fraction")
    _add_corpus(p)
    _add_roles(p)
    p.add_argument("--fractions", default="0.1,0.2,0.5,1.0")
    p.add_argument("--streams", action="append", metavar="FRACTION=DIR", help="score streams of the model trained on that fraction")
    p.add_argument("--save-splits", metavar="DIR")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("markers", help="silence ratio and utterance-duration SD")
    p.add_argument("--annotations", required=True)
    p.add_argument("--pred")
    p.add_argument("--manifest")
    p.add_argument("--split", help="restrict to the test extents of the meta-test set")
    p.add_argument("--role", default="Interviewee")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_markers)

    p = sub.add_parser("synth", help="write a synthetic corpus")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("compare", help="align per-file reports of several approaches")
    p.add_argument("--role", required=True)
    p.add_argument("--enroll", required=True)
    p.add_argument("--topline")
    p.add_argument("--chance")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("stats", help="corpus statistics per meta set")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except OSError as exc:
        print(f"turnid {args.command}: error: cannot read {exc.filename}: {exc.strerror}", file=sys.stderr)
        return 1
    except (CliError, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"turnid {args.command}: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
