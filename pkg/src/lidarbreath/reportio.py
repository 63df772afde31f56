"""On-disk formats for analysis outputs: report.csv and signal.csv.

The report file is a tagged CSV: ``param`` rows echo every analysis setting so
a run is self-describing, ``summary`` rows carry the scalar results, ``breath``
rows list one event per line (frame, amplitude, depth), and ``hold`` rows list
the merged hold episodes (start, end).  The signal file is a plain per-frame
table used for plotting and downstream inspection.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

import numpy as np

from .breathing import AnalysisTrace, BreathReport, HoldSet, PeakSet

REPORT_CSV_HEADER = "kind,a,b,c"
SIGNAL_CSV_HEADER = "frame,raw,smoothed,variance,is_breath,is_hold"


def write_report_csv(
    report: BreathReport, path: str | Path, params: Mapping[str, object] | None = None
) -> None:
    lines = [REPORT_CSV_HEADER]
    for key, value in (params or {}).items():
        lines.append(f"param,{key},{value},")
    lines.append(f"summary,respiratory_rate_bpm,{report.respiratory_rate!r},")
    lines.append(f"summary,measurement_time_s,{report.measurement_time!r},")
    lines.append(f"summary,total_frames,{report.total_frames},")
    lines.append(f"summary,smoothed_mean_m,{report.smoothed_mean!r},")
    lines.append(f"summary,n_breath_events,{len(report.breath_frames)},")
    lines.append(f"summary,n_hold_episodes,{len(report.holds.episodes)},")
    for frame, amp, depth in zip(
        report.breath_frames.frames, report.breath_frames.amplitudes, report.depths
    ):
        lines.append(f"breath,{frame},{amp!r},{depth!r}")
    for start, end in report.holds.episodes:
        lines.append(f"hold,{start},{end},")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_report_csv(path: str | Path) -> tuple[BreathReport, dict[str, str]]:
    """Rebuild a report (and the echoed parameter map) from report.csv."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != REPORT_CSV_HEADER:
        raise ValueError(f"expected header {REPORT_CSV_HEADER!r}")
    params: dict[str, str] = {}
    summary: dict[str, str] = {}
    event_rows: list[tuple[int, float, float]] = []
    episodes: list[tuple[int, int]] = []
    for line in lines[1:]:
        if not line.strip():
            continue
        kind, a, b, c = (line.split(",") + [""])[:4]
        if kind == "param":
            params[a] = b
        elif kind == "summary":
            summary[a] = b
        elif kind == "breath":
            event_rows.append((int(a), float(b), float(c)))
        elif kind == "hold":
            episodes.append((int(a), int(b)))
        else:
            raise ValueError(f"unknown report row kind {kind!r}")
    frames = np.array([r[0] for r in event_rows], dtype=int)
    amplitudes = np.array([r[1] for r in event_rows])
    depths = np.array([r[2] for r in event_rows])
    hold_frames = {f for s, e in episodes for f in range(s, e + 1)}
    report = BreathReport(
        breath_frames=PeakSet(frames, amplitudes),
        respiratory_rate=float(summary["respiratory_rate_bpm"]),
        depths=depths,
        holds=HoldSet(hold_frames, episodes),
        measurement_time=float(summary["measurement_time_s"]),
        total_frames=int(summary["total_frames"]),
        smoothed_mean=float(summary["smoothed_mean_m"]),
    )
    return report, params


def write_signal_csv(trace: AnalysisTrace, report: BreathReport, path: str | Path) -> None:
    """Per-frame trace: raw and smoothed signal, moving variance, event/hold flags."""
    breath = set(report.breath_frames.frames.tolist())
    holds = report.holds.frames
    lines = [SIGNAL_CSV_HEADER]
    for i, frame in enumerate(trace.frame_ids):
        fid = int(frame)
        lines.append(
            f"{fid},{trace.raw[i]!r},{trace.smoothed[i]!r},{trace.variance[i]!r},"
            f"{int(fid in breath)},{int(fid in holds)}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
