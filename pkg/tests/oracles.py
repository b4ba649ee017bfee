"""Independent brute-force references used by the tests.

Nothing here touches the interval code paths under test: annotations are
read as plain (start, end, label) seconds and sampled on a fixed frame grid.
"""

from __future__ import annotations

import numpy as np


def sample_labels(entries, extent, step=0.001):
    """Boolean activity per label, sampled at frame midpoints of ``extent``."""
    lo, hi = extent
    n = int(round((hi - lo) / step))
    mids = lo + (np.arange(n) + 0.5) * step
    active = {}
    for start, end, label in entries:
        mask = (mids >= start) & (mids < end)
        active[label] = active.get(label, np.zeros(n, dtype=bool)) | mask
    return active, n


def frame_ier(ref, hyp, extent, step=0.001):
    """(false alarm, missed, confusion, total) in seconds by per-frame counting."""
    r, n = sample_labels(ref, extent, step)
    h, _ = sample_labels(hyp, extent, step)
    labels = sorted(set(r) | set(h))
    zeros = np.zeros(n, dtype=bool)
    R = np.stack([r.get(lab, zeros) for lab in labels]) if labels else np.zeros((0, n), bool)
    H = np.stack([h.get(lab, zeros) for lab in labels]) if labels else np.zeros((0, n), bool)
    nr, nh = R.sum(0), H.sum(0)
    both = (R & H).sum(0)
    fa = np.maximum(0, nh - nr).sum() * step
    miss = np.maximum(0, nr - nh).sum() * step
    conf = (np.minimum(nr, nh) - both).sum() * step
    total = nr.sum() * step
    return fa, miss, conf, total


def frame_ier_rate(ref, hyp, extent, step=0.001):
    fa, miss, conf, total = frame_ier(ref, hyp, extent, step)
    return (fa + miss + conf) / total if total > 0 else None


def naive_mean(vectors):
    acc = [0.0] * len(vectors[0])
    for v in vectors:
        for i, x in enumerate(v):
            acc[i] += x
    return [x / len(vectors) for x in acc]


def population_sd(values):
    m = sum(values) / len(values)
    return (sum((v - m) ** 2 for v in values) / len(values)) ** 0.5
