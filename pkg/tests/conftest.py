from __future__ import annotations

import random

import pytest
from hypothesis import strategies as st

from turnid.timeline import Annotation, Segment, seg


def ann(file_id="f", *items):
    """``ann("f", ("A", 0, 10), ("B", 5, 10))``"""
    return Annotation(file_id, [(seg(a, b), label) for label, a, b in items])


def as_tuples(a: Annotation):
    return [(s.start_sec, s.end_sec, label) for s, label in a]


def random_annotation(rng: random.Random, file_id="f", labels=("A", "B"), span=60.0, grid=0.0001):
    """Per-label non-overlapping segments on a ``grid``-second lattice; labels may overlap each other."""
    entries = []
    for label in labels:
        t = rng.uniform(0, 3)
        while True:
            dur = rng.expovariate(1 / 4)
            if t + dur >= span:
                break
            a, b = round(t / grid) * grid, round((t + dur) / grid) * grid
            if b > a:
                entries.append((Segment.from_seconds(a, b), label))
            t = b + rng.expovariate(1 / 3)
    return Annotation(file_id, entries)


@st.composite
def annotations(draw, labels=("A", "B", "C"), max_ticks=200_000, max_per_label=6):
    entries = []
    for label in draw(st.lists(st.sampled_from(labels), unique=True, max_size=len(labels))):
        points = sorted(draw(st.lists(st.integers(0, max_ticks), min_size=0, max_size=2 * max_per_label, unique=True)))
        for a, b in zip(points[::2], points[1::2]):
            entries.append((Segment(a, b), label))
    return Annotation("f", entries)


@pytest.fixture
def rng():
    return random.Random(1234)


# --- acceptance summary ------------------------------------------------------
# Tests tagged ``@pytest.mark.acceptance(n, "title")`` are folded into one
# pass/fail line per criterion at the end of the run.

_ACCEPTANCE: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or (report.when != "call" and report.passed):
        return
    number, title = marker.args
    entry = _ACCEPTANCE.setdefault(number, {"title": title, "failed": [], "ran": 0})
    if report.when == "call":
        entry["ran"] += 1
    if report.failed or report.skipped:
        entry["failed"].append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        entry = _ACCEPTANCE[number]
        status = "FAIL" if entry["failed"] or not entry["ran"] else "PASS"
        line = f"criterion {number}: {status}  {entry['title']}"
        if entry["failed"]:
            line += f"  (failed: {', '.join(entry['failed'])})"
        terminalreporter.write_line(line)
