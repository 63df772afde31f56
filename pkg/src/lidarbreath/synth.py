"""Synthetic torso scenes with exact ground truth.

A breathing session is simulated as sets of raised-cosine breaths separated by
motionless holds: a patch of points shaped like a shallow chest section is
rigidly displaced along the scenario's chest-normal direction.  Ground truth
records the exact trough frame of every breath, every hold frame, the true
rate, and the displacement amplitude, which makes generated scenes usable as
an oracle for the analysis pipeline.

The five scenarios mirror a sensor placed in front of, behind, to either side
of, and above the subject.  Placement only changes which axis carries the
breathing motion and how strongly that surface of the torso moves: the rear of
the chest moves far less than the front, the sides sit in between.  Scenes are
laid out so the motion axis points in the positive direction, which keeps the
projected signal rising with chest displacement and its minima at exhalation
troughs under the default (non-inverted) projection.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .pointcloud import FrameSequence, PointFrame

HOLD_STILL_DISPLACEMENT = 0.0


class OutOfRangeError(ValueError):
    """Raised when a time falls outside the simulated session."""


class InvalidConfigError(ValueError):
    pass


class Scenario(Enum):
    """Sensor placements a-e: front, rear, right side, left side, supine overhead."""

    FRONT_SEATED = "a"
    REAR_SEATED = "b"
    RIGHT_SIDE = "c"
    LEFT_SIDE = "d"
    SUPINE_OVERHEAD = "e"

    @classmethod
    def from_label(cls, label: str) -> "Scenario":
        label = label.strip().lower()
        for member in cls:
            if label in (member.value, member.name.lower()):
                return cls(member.value)
        raise InvalidConfigError(f"unknown scenario {label!r} (use a-e)")


# Per-scenario geometry: displacement axis, lateral axis, vertical axis, and
# how strongly the observed torso surface moves relative to the front chest.
_SCENARIO_LAYOUT: dict[Scenario, tuple[np.ndarray, np.ndarray, np.ndarray, float]] = {
    Scenario.FRONT_SEATED: (np.eye(3)[1], np.eye(3)[0], np.eye(3)[2], 1.0),
    Scenario.REAR_SEATED: (np.eye(3)[1], np.eye(3)[0], np.eye(3)[2], 0.3),
    Scenario.RIGHT_SIDE: (np.eye(3)[0], np.eye(3)[1], np.eye(3)[2], 0.6),
    Scenario.LEFT_SIDE: (np.eye(3)[0], -np.eye(3)[1], np.eye(3)[2], 0.6),
    Scenario.SUPINE_OVERHEAD: (np.eye(3)[2], np.eye(3)[0], np.eye(3)[1], 1.0),
}


def scenario_motion_axis(scenario: Scenario) -> str:
    """Name of the axis ('x' | 'y' | 'z') carrying the breathing motion."""
    axis_vec = _SCENARIO_LAYOUT[scenario][0]
    return "xyz"[int(np.argmax(axis_vec != 0.0))]


def scenario_attenuation(scenario: Scenario) -> float:
    return _SCENARIO_LAYOUT[scenario][3]


@dataclass(frozen=True)
class TorsoParams:
    """Point-grid parameters for the simulated chest patch (meters)."""

    points: int = 400
    width: float = 0.35
    height: float = 0.45
    bulge: float = 0.08

    def grid_shape(self) -> tuple[int, int]:
        if self.points < 4:
            raise InvalidConfigError("torso patch needs at least 4 points")
        cols = max(2, round(np.sqrt(self.points * self.width / self.height)))
        rows = max(2, round(self.points / cols))
        return rows, cols


@dataclass(frozen=True)
class SynthConfig:
    scenario: Scenario = Scenario.FRONT_SEATED
    sets: int = 3
    breaths_per_set: int = 5
    breath_period: float = 5.0
    hold_duration: float = 10.0
    amplitude: float = 0.005
    noise_sigma: float = 0.0
    frame_rate: float = 10.0
    torso: TorsoParams = field(default_factory=TorsoParams)
    sensor_distance: float = 2.0
    seed: int = 0

    def validate(self) -> None:
        if self.sets < 1 or self.breaths_per_set < 1:
            raise InvalidConfigError("sets and breaths_per_set must be >= 1")
        if min(self.breath_period, self.hold_duration, self.amplitude) <= 0:
            raise InvalidConfigError("breath_period, hold_duration, amplitude must be > 0")
        if self.noise_sigma < 0:
            raise InvalidConfigError("noise_sigma must be >= 0")
        if self.frame_rate <= 0 or self.sensor_distance <= 0:
            raise InvalidConfigError("frame_rate and sensor_distance must be > 0")
        self.torso.grid_shape()

    @property
    def set_length(self) -> float:
        return self.breaths_per_set * self.breath_period

    @property
    def tail_length(self) -> float:
        """A final half breath (rise only) so the last trough sits strictly inside the capture."""
        return self.breath_period / 2.0

    @property
    def total_duration(self) -> float:
        return (
            self.sets * self.set_length
            + (self.sets - 1) * self.hold_duration
            + self.tail_length
        )


@dataclass
class GroundTruth:
    """Oracle annotations for a generated scene."""

    breath_event_frames: list[int]
    hold_frames: set[int]
    true_rate: float
    true_depth: float
    total_duration: float

    def __post_init__(self) -> None:
        overlap = set(self.breath_event_frames) & self.hold_frames
        if overlap:
            raise ValueError(f"breath events overlap hold frames: {sorted(overlap)[:5]}")

    def hold_episodes(self) -> list[tuple[int, int]]:
        """Hold frames merged into inclusive [start, end] runs."""
        frames = sorted(self.hold_frames)
        episodes: list[tuple[int, int]] = []
        for f in frames:
            if episodes and f == episodes[-1][1] + 1:
                episodes[-1] = (episodes[-1][0], f)
            else:
                episodes.append((f, f))
        return episodes


def _raised_cosine(local_t: float, period: float, amplitude: float) -> float:
    frac = (local_t / period) % 1.0
    return amplitude * (1.0 - np.cos(2.0 * np.pi * frac)) / 2.0


def displacement_profile(t: float, config: SynthConfig) -> float:
    """Chest displacement (meters) at session time ``t``.

    Zero at every breath-period boundary and during holds; peaks at the
    amplitude mid-breath.  The session ends with a rise-only half breath.
    """
    total = config.total_duration
    if t < 0 or t > total + 1e-9:
        raise OutOfRangeError(f"t={t} outside the session [0, {total}]")
    cycle = config.set_length + config.hold_duration
    for s in range(config.sets):
        set_start = s * cycle
        if t < set_start:
            return HOLD_STILL_DISPLACEMENT
        if t <= set_start + config.set_length:
            return _raised_cosine(t - set_start, config.breath_period, config.amplitude)
    tail_t = t - ((config.sets - 1) * cycle + config.set_length)
    return _raised_cosine(min(tail_t, config.tail_length), config.breath_period, config.amplitude)


def _base_patch(config: SynthConfig) -> np.ndarray:
    """Static torso patch in world coordinates, bulging toward the sensor."""
    rows, cols = config.torso.grid_shape()
    torso = config.torso
    u = np.linspace(-torso.width / 2.0, torso.width / 2.0, cols)
    v = np.linspace(-torso.height / 2.0, torso.height / 2.0, rows)
    uu, vv = np.meshgrid(u, v)
    ww = torso.bulge * np.sqrt(
        np.maximum(0.0, 1.0 - (2 * uu / torso.width) ** 2 - (2 * vv / torso.height) ** 2)
    )
    normal, lateral, vertical, _ = _SCENARIO_LAYOUT[config.scenario]
    center = -config.sensor_distance * normal
    flat_u = uu.ravel()
    flat_v = vv.ravel()
    flat_w = ww.ravel()
    return (
        center
        + flat_u[:, None] * lateral
        + flat_v[:, None] * vertical
        + flat_w[:, None] * normal
    )


def _event_and_hold_frames(config: SynthConfig) -> tuple[list[int], set[int]]:
    rate = config.frame_rate
    cycle = config.set_length + config.hold_duration
    events: list[int] = []
    holds: set[int] = set()
    for s in range(config.sets):
        set_start = s * cycle
        for b in range(1, config.breaths_per_set + 1):
            events.append(int(round((set_start + b * config.breath_period) * rate)))
        if s < config.sets - 1:
            hold_start = set_start + config.set_length
            hold_end = hold_start + config.hold_duration
            first = int(np.floor(hold_start * rate)) + 1
            last = int(round(hold_end * rate))
            holds.update(range(first, last + 1))
    return events, holds


def generate_scene(config: SynthConfig) -> tuple[FrameSequence, GroundTruth]:
    """Build the frame sequence and its ground truth for one configuration.

    Deterministic for a given (seed, scenario): the noise stream is derived
    from both so paired scenarios differ even at the same seed.
    """
    config.validate()
    base = _base_patch(config)
    normal, _, _, attenuation = _SCENARIO_LAYOUT[config.scenario]
    rate = config.frame_rate
    n_frames = int(round(config.total_duration * rate)) + 1
    timestamps = [k / rate for k in range(n_frames)]
    rng = np.random.default_rng([config.seed, ord(config.scenario.value)])

    frames: list[PointFrame] = []
    for k, t in enumerate(timestamps):
        displacement = attenuation * displacement_profile(t, config)
        points = base + displacement * normal
        if config.noise_sigma > 0:
            points = points + rng.normal(0.0, config.noise_sigma, size=base.shape)
        frames.append(PointFrame(index=k, timestamp=t, points=points))

    events, holds = _event_and_hold_frames(config)
    tau = timestamps[-1] - timestamps[0]
    truth = GroundTruth(
        breath_event_frames=events,
        hold_frames=holds,
        true_rate=len(events) * 60.0 / tau,
        true_depth=config.amplitude,
        total_duration=tau,
    )
    return FrameSequence(frames=frames, nominal_rate=rate), truth


TRUTH_CSV_HEADER = "kind,frame"


def write_truth_csv(truth: GroundTruth, path: str | Path) -> None:
    """Truth file: breath/hold rows plus true_rate, true_depth, tau metadata rows."""
    lines = [TRUTH_CSV_HEADER]
    lines.extend(f"breath,{f}" for f in truth.breath_event_frames)
    lines.extend(f"hold,{f}" for f in sorted(truth.hold_frames))
    lines.append(f"true_rate,{truth.true_rate!r}")
    lines.append(f"true_depth,{truth.true_depth!r}")
    lines.append(f"tau,{truth.total_duration!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_truth_csv(path: str | Path) -> GroundTruth:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != TRUTH_CSV_HEADER:
        raise ValueError(f"expected header {TRUTH_CSV_HEADER!r}")
    events: list[int] = []
    holds: set[int] = set()
    meta: dict[str, float] = {}
    for line in lines[1:]:
        if not line.strip():
            continue
        kind, _, value = line.partition(",")
        if kind == "breath":
            events.append(int(value))
        elif kind == "hold":
            holds.add(int(value))
        elif kind in ("true_rate", "true_depth", "tau"):
            meta[kind] = float(value)
        else:
            raise ValueError(f"unknown row kind {kind!r}")
    missing = {"true_rate", "true_depth", "tau"} - meta.keys()
    if missing:
        raise ValueError(f"truth file missing metadata: {sorted(missing)}")
    return GroundTruth(
        breath_event_frames=events,
        hold_frames=holds,
        true_rate=meta["true_rate"],
        true_depth=meta["true_depth"],
        total_duration=meta["tau"],
    )
