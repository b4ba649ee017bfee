from __future__ import annotations

import pytest

from turnid.decoding import BinarizeConfig
from turnid.enrollment import EnrollmentConfig, run_enrollment_pipeline
from turnid.metrics import FileReport, IerReport
from turnid.roles import RolePipelineConfig, compare_approaches, run_role_pipeline, tune_role_thresholds
from turnid.splits import INTERVIEWEE, NEUROPSYCHOLOGIST, SplitAssignment
from turnid.synth import SynthConfig, generate_corpus


@pytest.fixture(scope="module")
def corpus():
    return generate_corpus(SynthConfig(seed=2, file_count=5, file_duration=300.0, overlap_probability=0.0))


@pytest.fixture(scope="module")
def split(corpus):
    ids = corpus.manifest.file_ids()
    return SplitAssignment(frozenset(ids[:2]), frozenset(ids[2:3]), frozenset(ids[3:]))


def test_zero_noise_role_pipeline(corpus, split):
    res = run_role_pipeline(corpus, split)
    assert len(res.reports) == 2 and res.overall().ier < 0.01


def test_same_test_extent_as_enrollment(corpus, split):
    role = run_role_pipeline(corpus, split)
    enroll = run_enrollment_pipeline(corpus, split, corpus.provider, EnrollmentConfig())
    for a, b in zip(role.reports, enroll.reports):
        assert a.file_id == b.file_id and a.report.total == b.report.total


def test_missing_stream_skipped(corpus, split):
    fid = sorted(split.meta_test)[0]
    streams = {k: v for k, v in corpus.streams.items() if k != fid}
    stripped = type(corpus)(corpus.manifest, corpus.references, streams)
    res = run_role_pipeline(stripped, split)
    assert res.skipped == {fid: "missing score stream"}


def test_config_must_cover_roles():
    with pytest.raises(ValueError):
        RolePipelineConfig({NEUROPSYCHOLOGIST: BinarizeConfig()})


def test_tuning_with_noise(corpus, split):
    noisy = generate_corpus(
        SynthConfig(seed=2, file_count=5, file_duration=300.0, overlap_probability=0.0, score_noise_sigma=0.3)
    )
    grid = [BinarizeConfig(t, t) for t in (0.1, 0.5, 0.9)]
    best = tune_role_thresholds(noisy, split, grid)
    assert set(best) == {NEUROPSYCHOLOGIST, INTERVIEWEE}
    assert all(b in grid for b in best.values())

    def dev_ier(cfg_per_role):
        return run_role_pipeline(noisy, split, RolePipelineConfig(cfg_per_role, subset="dev")).overall().ier

    tuned = dev_ier(best)
    for g in grid:
        assert tuned <= dev_ier({NEUROPSYCHOLOGIST: g, INTERVIEWEE: g}) + 1e-12


def fr(fid, group, miss, total):
    return FileReport(fid, group, IerReport(0.0, miss, 0.0, total))


class TestCompare:
    def test_rows_and_total(self):
        role = [fr("a", "C", 1, 10), fr("b", "HD", 3, 10)]
        enroll = [fr("a", "C", 2, 10), fr("b", "HD", 1, 10)]
        rows = compare_approaches(role, enroll)
        assert [r.file_id for r in rows] == ["a", "b", "TOTAL"]
        assert [r.winner for r in rows] == ["role", "enroll", "enroll"]
        assert rows[-1].ier["role"] == pytest.approx(0.2)

    def test_toplines_do_not_win(self):
        role = [fr("a", "C", 1, 10)]
        enroll = [fr("a", "C", 2, 10)]
        rows = compare_approaches(role, enroll, topline=[fr("a", "C", 0, 10)], chance=[fr("a", "C", 5, 10)])
        assert rows[0].winner == "role" and set(rows[0].ier) == {"role", "enroll", "topline", "chance"}

    def test_mismatched_files(self):
        with pytest.raises(ValueError, match="different files"):
            compare_approaches([fr("a", "C", 1, 10)], [fr("b", "C", 1, 10)])

    def test_tie(self):
        rows = compare_approaches([fr("a", "C", 1, 10)], [fr("a", "C", 1, 10)])
        assert rows[0].winner == "tie"

    def test_undefined(self):
        rows = compare_approaches([fr("a", "C", 0, 0)], [fr("a", "C", 0, 0)])
        assert rows[0].winner == "undefined"

    def test_empty(self):
        assert compare_approaches([], []) == []
