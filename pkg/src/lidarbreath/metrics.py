"""Scoring a breath report against ground truth: accuracy and RMSE."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .breathing import BreathReport, HoldSet, PeakSet
from .synth import GroundTruth


class LengthMismatchError(ValueError):
    pass


class EmptyInputError(ValueError):
    pass


@dataclass(frozen=True)
class Confusion:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def accuracy(self) -> float:
        total = self.tp + self.tn + self.fp + self.fn
        return (self.tp + self.tn) / total if total else 1.0


@dataclass(frozen=True)
class EvalResult:
    breathing_accuracy: float
    hold_accuracy: float
    depth_rmse: float
    rate_rmse: float
    breathing_confusion: Confusion
    hold_confusion: Confusion
    n_matched_events: int


def match_events(
    detected: Sequence[int], truth: Sequence[int], tol: int
) -> list[tuple[int, int]]:
    """Greedy one-to-one pairing of detected and truth frames, nearest pairs first.

    Returns (detected_index, truth_index) pairs with |frame difference| <= tol.
    Ties break on the earlier detection, keeping the matching deterministic.
    """
    if tol < 0:
        raise ValueError("tol must be >= 0")
    candidates = sorted(
        (abs(d - t), di, ti)
        for di, d in enumerate(detected)
        for ti, t in enumerate(truth)
        if abs(d - t) <= tol
    )
    used_d: set[int] = set()
    used_t: set[int] = set()
    pairs: list[tuple[int, int]] = []
    for _, di, ti in candidates:
        if di in used_d or ti in used_t:
            continue
        pairs.append((di, ti))
        used_d.add(di)
        used_t.add(ti)
    return pairs


def breath_event_accuracy(
    detected: PeakSet, truth: GroundTruth, tol: int
) -> tuple[Confusion, float]:
    """Event-level accuracy.

    Matched detections are true positives, unmatched truth events false
    negatives, unmatched detections false positives.  Each truth hold episode
    free of any detection counts one true negative, so a run that stays quiet
    while the subject holds breath is credited for it.
    """
    det_frames = detected.frames.tolist()
    pairs = match_events(det_frames, truth.breath_event_frames, tol)
    tp = len(pairs)
    fn = len(truth.breath_event_frames) - tp
    fp = len(det_frames) - tp
    tn = 0
    for start, end in truth.hold_episodes():
        if not any(start <= f <= end for f in det_frames):
            tn += 1
    confusion = Confusion(tp=tp, tn=tn, fp=fp, fn=fn)
    return confusion, confusion.accuracy


def hold_frame_accuracy(
    holds: HoldSet, truth: GroundTruth, total_frames: int
) -> tuple[Confusion, float]:
    """Per-frame binary accuracy of hold flagging over frames 0 .. total_frames - 1."""
    if total_frames < 1:
        raise ValueError("total_frames must be >= 1")
    flagged = holds.frames
    true_hold = truth.hold_frames
    tp = len(flagged & true_hold)
    fp = len(flagged - true_hold)
    fn = len(true_hold - flagged)
    tn = total_frames - tp - fp - fn
    confusion = Confusion(tp=tp, tn=tn, fp=fp, fn=fn)
    return confusion, confusion.accuracy


def rmse(estimates: Sequence[float], truths: Sequence[float]) -> float:
    """Root mean square error between paired estimates and ground truths."""
    est = np.asarray(estimates, dtype=float)
    ref = np.asarray(truths, dtype=float)
    if est.size != ref.size:
        raise LengthMismatchError(f"{est.size} estimates vs {ref.size} truths")
    if est.size == 0:
        raise EmptyInputError("rmse needs at least one pair")
    return float(np.sqrt(np.mean((est - ref) ** 2)))


def evaluate(report: BreathReport, truth: GroundTruth, tol: int) -> EvalResult:
    """Score a report: event accuracy, hold accuracy, depth RMSE, rate RMSE.

    Depth is scored only over correctly matched events (an unmatched detection
    has no meaningful truth to compare against); with no matches the depth RMSE
    is NaN.  Rate RMSE is the single-pair error against the true rate.
    """
    breathing_conf, breathing_acc = breath_event_accuracy(report.breath_frames, truth, tol)
    hold_conf, hold_acc = hold_frame_accuracy(report.holds, truth, report.total_frames)
    pairs = match_events(
        report.breath_frames.frames.tolist(), truth.breath_event_frames, tol
    )
    if pairs:
        matched_depths = [float(report.depths[di]) for di, _ in pairs]
        depth_rmse = rmse(matched_depths, [truth.true_depth] * len(pairs))
    else:
        depth_rmse = math.nan
    rate_rmse = rmse([report.respiratory_rate], [truth.true_rate])
    return EvalResult(
        breathing_accuracy=breathing_acc,
        hold_accuracy=hold_acc,
        depth_rmse=depth_rmse,
        rate_rmse=rate_rmse,
        breathing_confusion=breathing_conf,
        hold_confusion=hold_conf,
        n_matched_events=len(pairs),
    )


EVAL_CSV_HEADER = "label,breathing_accuracy,holding_breath_accuracy,breath_depth_rmse,respiratory_rate_rmse"


def write_eval_csv(result: EvalResult, path: str | Path, label: str = "run") -> None:
    """One-row CSV with the four headline metrics."""
    line = ",".join(
        [
            label,
            f"{result.breathing_accuracy:.4f}",
            f"{result.hold_accuracy:.4f}",
            repr(result.depth_rmse),
            repr(result.rate_rmse),
        ]
    )
    Path(path).write_text(EVAL_CSV_HEADER + "\n" + line + "\n", encoding="utf-8")


def write_eval_txt(result: EvalResult, path: str | Path) -> None:
    """Flat key=value dump, one metric per line."""
    b, h = result.breathing_confusion, result.hold_confusion
    lines = [
        f"breathing_accuracy={result.breathing_accuracy:.4f}",
        f"holding_breath_accuracy={result.hold_accuracy:.4f}",
        f"breath_depth_rmse={result.depth_rmse!r}",
        f"respiratory_rate_rmse={result.rate_rmse!r}",
        f"matched_events={result.n_matched_events}",
        f"breathing_tp={b.tp}",
        f"breathing_tn={b.tn}",
        f"breathing_fp={b.fp}",
        f"breathing_fn={b.fn}",
        f"hold_tp={h.tp}",
        f"hold_tn={h.tn}",
        f"hold_fp={h.fp}",
        f"hold_fn={h.fn}",
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
