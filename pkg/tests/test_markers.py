from __future__ import annotations

import math

import pytest
from hypothesis import given, settings

from turnid.markers import (
    MarkerReport,
    marker_agreement,
    marker_report,
    silence_ratio,
    utterance_duration_sd,
    utterance_durations,
)
from turnid.timeline import Annotation, seg

from .conftest import ann, annotations
from .oracles import population_sd


def test_silence_ratio_basic():
    a = ann("f", ("A", 0, 3), ("B", 2, 5))
    assert silence_ratio(a, seg(0, 10)) == pytest.approx(0.5)


def test_silence_ratio_restricted_labels():
    a = ann("f", ("A", 0, 3), ("B", 5, 6))
    assert silence_ratio(a, seg(0, 10), labels=["B"]) == pytest.approx(0.9)


def test_silence_ratio_bounds():
    assert silence_ratio(Annotation("f"), seg(0, 10)) == 1.0
    assert silence_ratio(ann("f", ("A", 0, 10)), seg(0, 10)) == 0.0
    with pytest.raises(ValueError):
        silence_ratio(Annotation("f"), seg(5, 5))


def test_sd_population():
    a = ann("f", ("IT", 0, 1), ("IT", 2, 5), ("IT", 6, 8), ("NP", 10, 30))
    assert utterance_duration_sd(a, "IT", seg(0, 30)) == pytest.approx(population_sd([1, 3, 2]))


def test_sd_undefined_below_two():
    a = ann("f", ("IT", 0, 1))
    assert utterance_duration_sd(a, "IT", seg(0, 30)) is None
    assert utterance_duration_sd(Annotation("f"), "IT", seg(0, 30)) is None


def test_sd_split_sensitive_ratio_invariant():
    whole = ann("f", ("IT", 0, 4), ("IT", 6, 8))
    split = ann("f", ("IT", 0, 2), ("IT", 2, 4), ("IT", 6, 8))
    ext = seg(0, 10)
    assert silence_ratio(whole, ext) == silence_ratio(split, ext)
    assert utterance_duration_sd(whole, "IT", ext) != utterance_duration_sd(split, "IT", ext)


def test_durations_cropped():
    a = ann("f", ("IT", 0, 4), ("IT", 6, 12))
    assert utterance_durations(a, "IT", seg(2, 10)) == [2.0, 4.0]


@given(annotations(labels=("A", "B")))
@settings(max_examples=100)
def test_silence_ratio_in_unit_interval(a):
    r = silence_ratio(a, seg(0, 20))
    assert 0 <= r <= 1


def rep(fid, group, source, sil, sd):
    return MarkerReport(fid, group, source, sil, sd, 3)


class TestAgreement:
    def test_perfect(self):
        a = ann("f", ("Interviewee", 0, 3), ("Interviewee", 4, 9))
        r = marker_report(a, seg(0, 10), "HD", "reference")
        p = marker_report(a, seg(0, 10), "HD", "predicted")
        agg = marker_agreement([r], [p])
        assert agg.silence_ratio_error == {"HD": 0.0}
        assert agg.utterance_duration_sd_error == {"HD": 0.0}

    def test_signed_group_means(self):
        refs = [rep("a", "C", "reference", 0.5, 1.0), rep("b", "C", "reference", 0.3, 2.0), rep("c", "HD", "reference", 0.2, None)]
        preds = [rep("a", "C", "predicted", 0.6, 1.5), rep("b", "C", "predicted", 0.2, 2.5), rep("c", "HD", "predicted", 0.4, 1.0)]
        agg = marker_agreement(refs, preds)
        assert agg.silence_ratio_error["C"] == pytest.approx(0.0)
        assert agg.silence_ratio_error["HD"] == pytest.approx(0.2)
        assert agg.utterance_duration_sd_error["C"] == pytest.approx(0.5)
        assert math.isnan(agg.utterance_duration_sd_error["HD"])

    def test_misaligned(self):
        with pytest.raises(ValueError):
            marker_agreement([rep("a", "C", "reference", 0.1, 1.0)], [rep("b", "C", "predicted", 0.1, 1.0)])
        with pytest.raises(ValueError):
            marker_agreement([rep("a", "C", "reference", 0.1, 1.0)], [rep("a", "HD", "predicted", 0.1, 1.0)])

    def test_bad_source(self):
        with pytest.raises(ValueError):
            rep("a", "C", "guess", 0.1, 1.0)
