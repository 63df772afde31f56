"""Torso point-cloud primitives: ROI filtering, centroids, signal projection.

A capture is a sequence of frames, each holding the 3D points of one sensor
sweep.  The chest oscillates as the subject breathes, so the centroid of the
points inside a fixed box around the torso traces a small periodic motion.
Projecting that centroid trajectory onto a scalar per frame yields the breath
signal consumed by the analysis stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class EmptyFrameError(ValueError):
    """Raised when an operation needs points but the frame has none."""


class EmptyInputError(ValueError):
    """Raised when a series-level operation receives no samples."""


class TooManyEmptyFramesError(ValueError):
    """Raised when ROI filtering empties more frames than the pipeline tolerates."""


@dataclass(frozen=True)
class Point3:
    """A single return in sensor coordinates, meters."""

    x: float
    y: float
    z: float

    def is_finite(self) -> bool:
        return math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)


@dataclass
class PointFrame:
    """One sweep: frame ordinal, capture-relative timestamp (s), and an (N, 3) point array."""

    index: int
    timestamp: float
    points: np.ndarray

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.size == 0:
            pts = pts.reshape(0, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must be (N, 3), got {pts.shape}")
        self.points = pts

    @property
    def n_points(self) -> int:
        return self.points.shape[0]


@dataclass
class FrameSequence:
    """Ordered frames plus the nominal capture rate in frames per second."""

    frames: list[PointFrame]
    nominal_rate: float

    def __post_init__(self) -> None:
        if self.nominal_rate <= 0:
            raise ValueError("nominal_rate must be positive")
        indices = [f.index for f in self.frames]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ValueError("frame indices must be strictly increasing")
        stamps = [f.timestamp for f in self.frames]
        if any(b < a for a, b in zip(stamps, stamps[1:])):
            raise ValueError("timestamps must be non-decreasing")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def duration(self) -> float:
        """Wall-clock span of the capture; falls back to frame count over rate."""
        if len(self.frames) >= 2:
            span = self.frames[-1].timestamp - self.frames[0].timestamp
            if span > 0:
                return span
        return len(self.frames) / self.nominal_rate


@dataclass(frozen=True)
class Roi:
    """Axis-aligned box isolating the torso; bounds in meters, inclusive."""

    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float
    z_lo: float
    z_hi: float

    def __post_init__(self) -> None:
        if self.x_lo > self.x_hi or self.y_lo > self.y_hi or self.z_lo > self.z_hi:
            raise ValueError("ROI bounds require lo <= hi on every axis")

    @classmethod
    def unbounded(cls) -> "Roi":
        """A box that keeps every point; used when the scene is already torso-only."""
        big = math.inf
        return cls(-big, big, -big, big, -big, big)

    def contains(self, x: float, y: float, z: float) -> bool:
        return (
            self.x_lo <= x <= self.x_hi
            and self.y_lo <= y <= self.y_hi
            and self.z_lo <= z <= self.z_hi
        )


@dataclass(frozen=True)
class CentroidSample:
    """Mean position of a frame's retained points."""

    frame: int
    cx: float
    cy: float
    cz: float

    def as_array(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.cz])


class ProjectionAxis(Enum):
    X = "x"
    Y = "y"
    Z = "z"
    MEAN = "mean"


@dataclass(frozen=True)
class ProjectionMode:
    """How the centroid trajectory collapses to a scalar per frame.

    ``MEAN`` averages the three coordinates and works regardless of subject
    orientation; a single axis is more sensitive when the motion direction is
    known.  ``inverted`` negates every sample, for captures where inhalation
    moves the chest toward the sensor and breaths appear as negative peaks.
    """

    axis: ProjectionAxis = ProjectionAxis.MEAN
    inverted: bool = False


def filter_roi(frame: PointFrame, roi: Roi) -> PointFrame:
    """Keep exactly the points inside ``roi`` (inclusive bounds), preserving order."""
    pts = frame.points
    if pts.shape[0] == 0:
        return PointFrame(frame.index, frame.timestamp, pts.copy())
    mask = (
        (pts[:, 0] >= roi.x_lo)
        & (pts[:, 0] <= roi.x_hi)
        & (pts[:, 1] >= roi.y_lo)
        & (pts[:, 1] <= roi.y_hi)
        & (pts[:, 2] >= roi.z_lo)
        & (pts[:, 2] <= roi.z_hi)
    )
    return PointFrame(frame.index, frame.timestamp, pts[mask])


def centroid(frame: PointFrame) -> CentroidSample:
    """Arithmetic mean of the frame's points.

    Raises:
        EmptyFrameError: the frame has no points, e.g. the ROI removed everything.
    """
    if frame.n_points == 0:
        raise EmptyFrameError(f"frame {frame.index} has no points to average")
    cx, cy, cz = frame.points.mean(axis=0)
    return CentroidSample(frame.index, float(cx), float(cy), float(cz))


# Tolerated fraction of ROI-emptied frames before the run is treated as misconfigured.
MAX_EMPTY_FRAME_FRACTION = 0.05


def centroid_series(
    frames: FrameSequence,
    roi: Roi,
    max_empty_fraction: float = MAX_EMPTY_FRAME_FRACTION,
) -> list[CentroidSample]:
    """ROI-filter every frame and extract its centroid.

    Isolated empty frames are filled by repeating the neighbouring centroid so
    the series stays aligned with the frame axis (a leading run of empty frames
    borrows the first available centroid).  If more than ``max_empty_fraction``
    of the frames come out empty the ROI is presumed mis-set and the run fails.
    """
    if len(frames) == 0:
        raise EmptyInputError("frame sequence is empty")
    samples: list[CentroidSample | None] = []
    n_empty = 0
    for frame in frames.frames:
        kept = filter_roi(frame, roi)
        if kept.n_points == 0:
            n_empty += 1
            samples.append(None)
        else:
            samples.append(centroid(kept))
    if n_empty > max_empty_fraction * len(frames):
        raise TooManyEmptyFramesError(
            f"{n_empty} of {len(frames)} frames have no points inside the ROI "
            f"(limit {max_empty_fraction:.0%}); check the ROI bounds"
        )
    # Fill gaps: repeat the previous centroid, backfilling a leading gap.
    first_real = next((s for s in samples if s is not None), None)
    if first_real is None:
        raise TooManyEmptyFramesError("every frame is empty after ROI filtering")
    filled: list[CentroidSample] = []
    prev = first_real
    for frame, sample in zip(frames.frames, samples):
        if sample is None:
            sample = CentroidSample(frame.index, prev.cx, prev.cy, prev.cz)
        filled.append(sample)
        prev = sample
    return filled


def project_series(
    centroids: list[CentroidSample],
    mode: ProjectionMode,
    sample_rate: float = 1.0,
):
    """Collapse a centroid trajectory to one scalar per frame.

    Returns a :class:`~lidarbreath.breathing.BreathSignal`; imported lazily to
    keep this module free of the analysis layer.
    """
    from .breathing import BreathSignal

    if not centroids:
        raise EmptyInputError("no centroids to project")
    coords = np.array([[c.cx, c.cy, c.cz] for c in centroids])
    if mode.axis is ProjectionAxis.MEAN:
        values = coords.mean(axis=1)
    else:
        column = {ProjectionAxis.X: 0, ProjectionAxis.Y: 1, ProjectionAxis.Z: 2}[mode.axis]
        values = coords[:, column].copy()
    if mode.inverted:
        values = -values
    return BreathSignal(samples=values, sample_rate=sample_rate)
