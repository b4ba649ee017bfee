"""Seed-averaged behaviour of the pipelines on synthetic corpora."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.stats import ttest_1samp, ttest_rel

from turnid.enrollment import EnrollmentConfig, run_enrollment_pipeline
from turnid.markers import silence_ratio
from turnid.metrics import identification_error_rate
from turnid.roles import run_role_pipeline
from turnid.splits import INTERVIEWEE, NEUROPSYCHOLOGIST, SplitAssignment
from turnid.synth import SynthConfig, generate_corpus
from turnid.timeline import Annotation, Segment, crop, to_ticks

SMALL = dict(file_count=3, file_duration=300.0, overlap_probability=0.0, score_noise_sigma=0.1)
SIGMAS = (0.0, 0.5, 1.0, 2.0)
SEEDS = range(20)


def all_test(corpus):
    return SplitAssignment(frozenset(), frozenset(), frozenset(corpus.manifest.file_ids()))


def enroll_ier(corpus, **kw):
    return run_enrollment_pipeline(corpus, all_test(corpus), corpus.provider, EnrollmentConfig(**kw)).overall().ier


@pytest.fixture(scope="module")
def degradation():
    table = np.zeros((len(SEEDS), len(SIGMAS)))
    for i, seed in enumerate(SEEDS):
        for j, sigma in enumerate(SIGMAS):
            table[i, j] = enroll_ier(generate_corpus(SynthConfig(seed=seed, embedding_noise_sigma=sigma, **SMALL)))
    return table


def test_embedding_noise_never_helps(degradation):
    # a significant decrease between neighbouring noise levels would refute monotone degradation
    for j in range(len(SIGMAS) - 1):
        result = ttest_rel(degradation[:, j + 1], degradation[:, j], alternative="less")
        assert not result.pvalue < 0.05, (SIGMAS[j], SIGMAS[j + 1], result)


def test_embedding_noise_hurts_overall(degradation):
    assert ttest_rel(degradation[:, -1], degradation[:, 0], alternative="greater").pvalue < 0.05


def test_chance_matches_analytic_level():
    corpus = generate_corpus(SynthConfig(seed=1, **SMALL))
    split = all_test(corpus)
    reports = []
    for role in (NEUROPSYCHOLOGIST, INTERVIEWEE):
        for fid in corpus.manifest.file_ids():
            test = Segment(to_ticks(180), to_ticks(300))
            ref = crop(corpus.role_reference(fid), test)
            constant = Annotation(fid, [(s, role) for s, _ in ref])
            reports.append(identification_error_rate(ref, constant, test))
    half = len(reports) // 2
    analytic = 0.5 * (aggregate_rate(reports[:half]) + aggregate_rate(reports[half:]))
    samples = [
        run_enrollment_pipeline(corpus, split, corpus.provider, EnrollmentConfig(variant="chance", seed=s)).overall().ier
        for s in range(30)
    ]
    assert ttest_1samp(samples, analytic).pvalue > 0.01
    assert abs(np.mean(samples) - analytic) < 0.05


def aggregate_rate(reports):
    total = sum(r.total for r in reports)
    return sum(r.false_alarm + r.missed_detection + r.confusion for r in reports) / total


def test_role_beats_enrollment_with_noisy_embeddings():
    for seed in range(5):
        corpus = generate_corpus(
            SynthConfig(seed=seed, file_count=4, file_duration=300.0, score_noise_sigma=0.1, embedding_noise_sigma=2.0)
        )
        role = run_role_pipeline(corpus, all_test(corpus)).overall().ier
        assert role < enroll_ier(corpus)


def test_zero_noise_silence_ratio_error_below_floor():
    corpus = generate_corpus(SynthConfig(seed=2, file_count=4, file_duration=300.0, overlap_probability=0.0))
    result = run_role_pipeline(corpus, all_test(corpus))
    test = Segment(to_ticks(180), to_ticks(300))
    for outcome in result.outcomes:
        ref = corpus.role_reference(outcome.file_id)
        turns = sum(1 for s, _ in ref if s.overlaps(test))
        floor = 2 * corpus.config.frame_step * turns / 120.0
        error = abs(silence_ratio(outcome.hypothesis, test) - silence_ratio(ref, test))
        assert error <= floor
