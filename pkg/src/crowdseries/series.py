"""Aggregation of detection records into 15-minute interval series.

Two series are produced per input directory: the per-interval maximum of
the per-frame people counts, and the heatmap saturation percentage (sum of
the interval's normalized occupancy map over its theoretical maximum).
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

from .errors import AlignmentError, GeometryError, ValidationError
from .ingest import FrameGeometry, rasterize_mask

STEP_15_MIN = timedelta(minutes=15)

KIND_COUNT = "count"
KIND_SATURATION = "saturation"


@dataclass
class IntervalSeries:
    """Regularly spaced series; t_i = start + i * step, no gaps in the grid.

    Intervals with no data are zero-filled and listed in ``gaps``.
    """

    start: datetime
    step: timedelta
    values: np.ndarray
    kind: str
    gaps: tuple = ()

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("series values must be finite", field="values")
        if self.kind == KIND_COUNT:
            if np.any(self.values < 0) or np.any(self.values != np.round(self.values)):
                raise ValidationError(
                    "count series must hold non-negative integers", field="values"
                )
        elif self.kind == KIND_SATURATION:
            if np.any(self.values < 0) or np.any(self.values > 1):
                raise ValidationError(
                    "saturation series must lie in [0, 1]", field="values"
                )
        else:
            raise ValidationError(f"unknown series kind {self.kind!r}", field="kind")

    def __len__(self):
        return len(self.values)

    def timestamp(self, i: int) -> datetime:
        return self.start + i * self.step

    def timestamps(self):
        return [self.timestamp(i) for i in range(len(self.values))]

    def index_of(self, ts: datetime) -> int:
        delta = ts - self.start
        if delta % self.step != timedelta(0):
            raise AlignmentError(f"{ts} not aligned to {self.step} grid")
        return delta // self.step


@dataclass
class Heatmap:
    """Per-interval occupancy accumulator.

    ``grid`` holds occupied-frame counts per cell before normalize(), and
    values in [0, 255] afterwards.
    """

    grid: np.ndarray
    frames: int
    normalized: bool = field(default=False)

    def normalize(self) -> "Heatmap":
        if self.normalized:
            return self
        return Heatmap(self.grid * (255.0 / self.frames), self.frames, normalized=True)


def per_frame_counts(records):
    """Number of detections per distinct frame timestamp."""
    return dict(Counter(r.timestamp for r in records))


def _check_window(window, step):
    start, end = window
    if (end - start) % step != timedelta(0) or end <= start:
        raise AlignmentError(f"window {window} not aligned to step {step}")


def count_series(records, window, step=STEP_15_MIN) -> IntervalSeries:
    """Max per-frame detection count in each interval of the window.

    The maximum (rather than mean or median) absorbs frames where the
    detector missed people. Intervals without detections get 0 and a gap
    flag.
    """
    _check_window(window, step)
    start, end = window
    n = (end - start) // step
    frame_counts = per_frame_counts(records)
    values = np.zeros(n)
    seen = np.zeros(n, dtype=bool)
    for ts, count in frame_counts.items():
        if ts < start or ts >= end:
            continue
        i = (ts - start) // step
        values[i] = max(values[i], count)
        seen[i] = True
    gaps = tuple(int(i) for i in np.nonzero(~seen)[0])
    return IntervalSeries(start, step, values, KIND_COUNT, gaps=gaps)


def accumulate_heatmap(records, geometry: FrameGeometry, frames: int) -> Heatmap:
    """Accumulate one interval's segmentation masks into an occupancy map.

    Masks of the same frame are unioned first, so a cell can contribute at
    most once per frame and a cell occupied in every frame saturates to 255
    after normalization.
    """
    if frames <= 0:
        raise ValidationError("frames must be positive", field="frames")
    raw = np.zeros((geometry.height, geometry.width), dtype=float)
    by_frame = defaultdict(list)
    for r in records:
        by_frame[r.timestamp].append(r)
    for frame_records in by_frame.values():
        union = np.zeros((geometry.height, geometry.width), dtype=bool)
        for r in frame_records:
            mask_grid = rasterize_mask(r.mask, geometry)
            if mask_grid.shape != raw.shape:
                raise GeometryError("mask grid does not match frame geometry")
            union |= mask_grid.astype(bool)
        raw += union
    return Heatmap(raw, frames)


def saturation_value(heatmap: Heatmap, geometry: FrameGeometry) -> float:
    """Sum of the normalized map over its theoretical maximum w*h*255."""
    normalized = heatmap.normalize()
    return float(normalized.grid.sum() / (geometry.width * geometry.height * 255.0))


def nominal_frames(step: timedelta, fps: float) -> int:
    # dropouts do not reduce the normalization denominator
    return max(1, round(step.total_seconds() * fps))


def heatmap_series(
    interval_records, window, geometry: FrameGeometry, step=STEP_15_MIN
) -> IntervalSeries:
    """Saturation series over the window.

    ``interval_records`` maps interval-start timestamps to the records of
    that interval; missing intervals are zero-filled and flagged as gaps.
    """
    _check_window(window, step)
    start, end = window
    n = (end - start) // step
    frames = nominal_frames(step, geometry.fps)
    values = np.zeros(n)
    gaps = []
    for i in range(n):
        ts = start + i * step
        records = interval_records.get(ts)
        if not records:
            gaps.append(i)
            continue
        heatmap = accumulate_heatmap(records, geometry, frames)
        values[i] = saturation_value(heatmap, geometry)
    return IntervalSeries(start, step, values, KIND_SATURATION, gaps=tuple(gaps))


def group_records_by_interval(records, window, step=STEP_15_MIN):
    """Bucket records by the start timestamp of their enclosing interval."""
    _check_window(window, step)
    start, end = window
    buckets = defaultdict(list)
    for r in records:
        if r.timestamp < start or r.timestamp >= end:
            continue
        i = (r.timestamp - start) // step
        buckets[start + i * step].append(r)
    return dict(buckets)
