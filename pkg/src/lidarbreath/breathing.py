"""Breath-signal analysis: smoothing, event detection, rate, depth, holds.

The projected centroid signal carries one sample per frame.  Breath events are
below-mean local minima of the moving-average-smoothed signal; the respiratory
rate follows from the event count over the measurement time; breath holds are
stretches where the moving variance of the smoothed signal stays at or below a
threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import peak_prominences

from .pointcloud import (
    CentroidSample,
    EmptyInputError,
    FrameSequence,
    ProjectionMode,
    Roi,
    centroid_series,
    project_series,
)


class InvalidWindowError(ValueError):
    """Raised for window lengths the operation cannot accept."""


class TooShortError(ValueError):
    """Raised when a signal has too few samples for the operation."""


class InvalidDurationError(ValueError):
    """Raised for non-positive measurement times."""


class TooFewFramesError(ValueError):
    """Raised when a capture is shorter than the configured windows allow."""


@dataclass
class BreathSignal:
    """Scalar per-frame series (meters) with its sample rate in Hz."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 1 or self.samples.size < 1:
            raise ValueError("samples must be a non-empty 1-D array")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    def __len__(self) -> int:
        return self.samples.size


@dataclass
class PeakSet:
    """Detected event positions and the smoothed-signal values at them."""

    frames: np.ndarray
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        self.frames = np.asarray(self.frames, dtype=int)
        self.amplitudes = np.asarray(self.amplitudes, dtype=float)
        if self.frames.shape != self.amplitudes.shape or self.frames.ndim != 1:
            raise ValueError("frames and amplitudes must be matching 1-D arrays")
        if self.frames.size > 1 and np.any(np.diff(self.frames) <= 0):
            raise ValueError("frames must be strictly increasing")

    def __len__(self) -> int:
        return self.frames.size

    @classmethod
    def empty(cls) -> "PeakSet":
        return cls(np.array([], dtype=int), np.array([]))


@dataclass
class HoldSet:
    """Breath-hold frames, both as a flat set and as merged [start, end] episodes."""

    frames: set[int]
    episodes: list[tuple[int, int]]

    def __post_init__(self) -> None:
        for start, end in self.episodes:
            if end < start:
                raise ValueError(f"empty episode [{start}, {end}]")
        starts = [s for s, _ in self.episodes]
        ends = [e for _, e in self.episodes]
        if any(s2 <= e1 for e1, s2 in zip(ends, starts[1:])):
            raise ValueError("episodes must be disjoint and sorted")
        expected = set()
        for start, end in self.episodes:
            expected.update(range(start, end + 1))
        if self.frames != expected:
            raise ValueError("frames must equal the union of the episodes")

    @classmethod
    def empty(cls) -> "HoldSet":
        return cls(set(), [])


@dataclass(frozen=True)
class AnalysisConfig:
    """Tunables for one analysis run.

    ``ma_window`` and ``var_window`` are frame counts; ``hold_threshold`` is a
    variance in m^2.  ``min_hold_duration`` (seconds) drops momentary
    low-variance dips at breath turnarounds; 0 disables it.  ``min_prominence``
    is the fraction of the smoothed signal's range an event trough must rise to
    on both sides; 0 disables prominence screening and basin snapping, leaving
    bare below-mean minima.
    """

    ma_window: int = 10
    var_window: int = 25
    hold_threshold: float = 1e-6
    min_hold_duration: float = 2.0
    projection: ProjectionMode = field(default_factory=ProjectionMode)
    roi: Roi = field(default_factory=Roi.unbounded)
    min_prominence: float = 0.2

    def validate(self) -> None:
        if self.ma_window < 1:
            raise InvalidWindowError("ma_window must be >= 1")
        if self.var_window < 2:
            raise InvalidWindowError("var_window must be >= 2")
        if self.hold_threshold <= 0:
            raise ValueError("hold_threshold must be positive")
        if self.min_hold_duration < 0:
            raise ValueError("min_hold_duration must be >= 0")
        if not 0 <= self.min_prominence < 1:
            raise ValueError("min_prominence must be in [0, 1)")


@dataclass
class BreathReport:
    """Outcome of one analysis run, in external frame ids."""

    breath_frames: PeakSet
    respiratory_rate: float
    depths: np.ndarray
    holds: HoldSet
    measurement_time: float
    total_frames: int
    smoothed_mean: float

    def __post_init__(self) -> None:
        self.depths = np.asarray(self.depths, dtype=float)
        if self.respiratory_rate < 0:
            raise ValueError("respiratory_rate must be >= 0")
        if self.measurement_time <= 0:
            raise ValueError("measurement_time must be positive")
        overlap = set(self.breath_frames.frames.tolist()) & self.holds.frames
        if overlap:
            raise ValueError(f"breath events overlap hold frames: {sorted(overlap)[:5]}")


@dataclass
class AnalysisTrace:
    """Intermediate per-frame series kept for reporting and plotting."""

    frame_ids: np.ndarray
    raw: np.ndarray
    smoothed: np.ndarray
    variance: np.ndarray
    centroids: np.ndarray  # (T, 3)


def moving_average(signal: BreathSignal, window: int) -> BreathSignal:
    """Causal moving average; the first ``window - 1`` samples average what is available.

    Output sample n is the mean of samples max(0, n - window + 1) .. n, so the
    series keeps its length and no data is invented ahead of the first frame.
    """
    if window < 1:
        raise InvalidWindowError(f"window must be >= 1, got {window}")
    y = signal.samples
    n = y.size
    if window == 1 or n == 1:
        return BreathSignal(y.copy(), signal.sample_rate)
    out = np.empty(n)
    head = min(window - 1, n)
    for i in range(head):
        out[i] = y[: i + 1].mean()
    if n >= window:
        windows = np.lib.stride_tricks.sliding_window_view(y, window)
        out[window - 1 :] = windows.mean(axis=1)
    return BreathSignal(out, signal.sample_rate)


def detect_local_minima(smoothed: BreathSignal) -> PeakSet:
    """Interior local minima of the signal.

    A sample qualifies when both neighbours are strictly greater; a flat
    plateau strictly below both flanks yields its first index.  Endpoints never
    qualify.
    """
    y = smoothed.samples
    n = y.size
    if n < 3:
        raise TooShortError(f"need at least 3 samples, got {n}")
    frames: list[int] = []
    i = 1
    while i < n - 1:
        if y[i] < y[i - 1]:
            j = i
            while j + 1 < n and y[j + 1] == y[i]:
                j += 1
            if j < n - 1 and y[j + 1] > y[i]:
                frames.append(i)
            i = j + 1
        else:
            i += 1
    idx = np.array(frames, dtype=int)
    return PeakSet(idx, y[idx])


def filter_peaks_below_mean(peaks: PeakSet, smoothed: BreathSignal) -> PeakSet:
    """Keep peaks whose amplitude is at or below the global mean of the smoothed signal."""
    if len(peaks) == 0:
        return PeakSet.empty()
    threshold = smoothed.samples.mean()
    keep = peaks.amplitudes <= threshold
    return PeakSet(peaks.frames[keep], peaks.amplitudes[keep])


def respiratory_rate(filtered: PeakSet, measurement_time: float) -> float:
    """Breaths per minute: event count times 60 over the measurement time in seconds."""
    if measurement_time <= 0:
        raise InvalidDurationError(f"measurement_time must be positive, got {measurement_time}")
    return len(filtered) * 60.0 / measurement_time


def moving_variance(smoothed: BreathSignal, window: int) -> np.ndarray:
    """Centered moving sample variance (divisor count - 1), window clamped at the edges.

    Sample n uses the window [n - floor((window-1)/2), n + floor(window/2)]
    intersected with the signal; a clamped window of a single sample yields 0.
    """
    if window < 2:
        raise InvalidWindowError(f"window must be >= 2, got {window}")
    y = smoothed.samples
    n = y.size
    left = (window - 1) // 2
    right = window // 2
    out = np.empty(n)
    if n >= window:
        full = np.lib.stride_tricks.sliding_window_view(y, window)
        out[left : n - right] = full.var(axis=1, ddof=1)
        edge_idx = list(range(left)) + list(range(n - right, n))
    else:
        edge_idx = list(range(n))
    for i in edge_idx:
        lo = max(0, i - left)
        hi = min(n, i + right + 1)
        seg = y[lo:hi]
        out[i] = 0.0 if seg.size < 2 else seg.var(ddof=1)
    return out


def _merge_runs(indices: np.ndarray) -> list[tuple[int, int]]:
    """Merge sorted indices into inclusive [start, end] runs of consecutive values."""
    if indices.size == 0:
        return []
    breaks = np.where(np.diff(indices) > 1)[0]
    starts = np.concatenate(([0], breaks + 1))
    ends = np.concatenate((breaks, [indices.size - 1]))
    return [(int(indices[s]), int(indices[e])) for s, e in zip(starts, ends)]


def detect_holds(
    variance: np.ndarray,
    gamma: float,
    min_hold_duration: float,
    sample_rate: float,
    breath_frames: PeakSet,
) -> HoldSet:
    """Breath-hold episodes from the moving-variance series.

    Frames with variance at or below ``gamma`` are candidates; consecutive
    candidates merge into episodes; episodes lasting less than
    ``min_hold_duration`` seconds (frame count over sample rate) are dropped;
    finally any breath-event frame is removed and the episodes re-split so hold
    frames and breath events never overlap.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    variance = np.asarray(variance, dtype=float)
    candidates = np.flatnonzero(variance <= gamma)
    episodes = _merge_runs(candidates)
    if min_hold_duration > 0:
        min_frames = min_hold_duration * sample_rate
        episodes = [(s, e) for s, e in episodes if (e - s + 1) >= min_frames]
    event_frames = set(breath_frames.frames.tolist())
    frames = sorted(
        f for s, e in episodes for f in range(s, e + 1) if f not in event_frames
    )
    episodes = _merge_runs(np.array(frames, dtype=int))
    return HoldSet(set(frames), episodes)


def _prominence_gate(minima: PeakSet, smoothed: np.ndarray, min_fraction: float) -> PeakSet:
    """Drop minima whose topographic prominence is below a fraction of the signal range.

    Noise wiggles on flat stretches (holds, crests) form shallow minima that the
    below-mean amplitude test cannot reject because holds sit at the bottom of
    the signal; requiring a rise on both sides proportional to the overall
    excursion keeps only genuine breath troughs.
    """
    if len(minima) == 0 or min_fraction <= 0:
        return minima
    span = float(smoothed.max() - smoothed.min())
    if span <= 0:
        return PeakSet.empty()
    prominences = peak_prominences(-smoothed, minima.frames)[0]
    keep = prominences >= min_fraction * span
    return PeakSet(minima.frames[keep], minima.amplitudes[keep])


def _snap_to_basin_start(minima: PeakSet, smoothed: np.ndarray, tolerance: float) -> PeakSet:
    """Move each minimum to the first frame of its near-flat basin.

    A trough followed by a motionless stretch produces its deepest sample at an
    arbitrary position inside the flat run; walking left while the signal stays
    within ``tolerance`` of the minimum anchors the event where the descent
    ends, mirroring the first-plateau-index rule under noise.
    """
    if len(minima) == 0 or tolerance <= 0:
        return minima
    snapped: list[int] = []
    for frame in minima.frames:
        limit = smoothed[frame] + tolerance
        j = int(frame)
        while j > 0 and smoothed[j - 1] <= limit:
            j -= 1
        snapped.append(j)
    frames: list[int] = []
    for f in snapped:
        if not frames or f > frames[-1]:
            frames.append(f)
    idx = np.array(frames, dtype=int)
    return PeakSet(idx, smoothed[idx])


def _event_depths(events: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Per-event breath depth as the centroid excursion over the cycle.

    Each event closes one inhale-exhale cycle; the depth is the Euclidean norm
    of the per-axis peak-to-trough range of the centroid trajectory between the
    previous event (or the capture start) and this one.  Unlike any projected
    quantity this recovers the physical chest displacement regardless of the
    projection mode.
    """
    depths = np.empty(events.size)
    prev = 0
    for k, frame in enumerate(events):
        window = centroids[prev : frame + 1]
        if window.shape[0] < 2:
            depths[k] = 0.0
        else:
            extent = window.max(axis=0) - window.min(axis=0)
            depths[k] = float(np.linalg.norm(extent))
        prev = frame
    return depths


def analyze(frames: FrameSequence, config: AnalysisConfig) -> BreathReport:
    """Run the full pipeline on a capture and summarise it as a report."""
    report, _ = analyze_with_trace(frames, config)
    return report


def analyze_with_trace(
    frames: FrameSequence, config: AnalysisConfig
) -> tuple[BreathReport, AnalysisTrace]:
    """As :func:`analyze`, also returning the intermediate series for plots and traces."""
    config.validate()
    n = len(frames)
    if n < max(config.ma_window, config.var_window, 3):
        raise TooFewFramesError(
            f"{n} frames is fewer than the configured windows need "
            f"(ma={config.ma_window}, var={config.var_window}, minimum 3)"
        )

    centroids = centroid_series(frames, config.roi)
    raw = project_series(centroids, config.projection, sample_rate=frames.nominal_rate)
    smoothed = moving_average(raw, config.ma_window)

    minima = detect_local_minima(smoothed)
    minima = _prominence_gate(minima, smoothed.samples, config.min_prominence)
    span = float(smoothed.samples.max() - smoothed.samples.min())
    snap_tol = config.min_prominence * span / 2.0
    minima = _snap_to_basin_start(minima, smoothed.samples, snap_tol)
    events = filter_peaks_below_mean(minima, smoothed)

    tau = frames.duration
    rate = respiratory_rate(events, tau)

    variance = moving_variance(smoothed, config.var_window)
    holds = detect_holds(
        variance,
        config.hold_threshold,
        config.min_hold_duration,
        frames.nominal_rate,
        events,
    )

    centroid_xyz = np.array([[c.cx, c.cy, c.cz] for c in centroids])
    depths = _event_depths(events.frames, centroid_xyz)

    # Map signal positions to the capture's external frame ids.  Episodes are
    # re-merged in id space so gaps in the id numbering split them cleanly.
    ids = np.array([f.index for f in frames.frames], dtype=int)
    events_ids = PeakSet(ids[events.frames], events.amplitudes)
    hold_frame_ids = np.array(sorted(int(ids[f]) for f in holds.frames), dtype=int)
    report = BreathReport(
        breath_frames=events_ids,
        respiratory_rate=rate,
        depths=depths,
        holds=HoldSet(set(hold_frame_ids.tolist()), _merge_runs(hold_frame_ids)),
        measurement_time=tau,
        total_frames=n,
        smoothed_mean=float(smoothed.samples.mean()),
    )
    trace = AnalysisTrace(
        frame_ids=ids,
        raw=raw.samples,
        smoothed=smoothed.samples,
        variance=variance,
        centroids=centroid_xyz,
    )
    return report, trace
