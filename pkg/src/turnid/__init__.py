"""Detect speaker turns and identify who speaks when in two-party interviews.

Two routes are provided and scored under one identification error rate:
direct role recognition from role score streams, and speaker enrollment
(VAD, change detection, per-speaker templates, cosine identification).
"""

from .metrics import FileReport, IerReport, aggregate, detection_error_rate, identification_error_rate
from .timeline import Annotation, Segment, Timeline, cotemporal_regions, crop, gaps, seg, support

__all__ = [
    "Annotation",
    "FileReport",
    "IerReport",
    "Segment",
    "Timeline",
    "aggregate",
    "cotemporal_regions",
    "crop",
    "detection_error_rate",
    "gaps",
    "identification_error_rate",
    "seg",
    "support",
]
