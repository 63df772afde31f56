"""Figure rendering for analysis runs.

Two PNGs accompany each analyze report: the breath signal with detected events
and hold spans, and the moving variance against the hold threshold.  Figures
are written headlessly and with fixed metadata so repeated runs produce
byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .breathing import AnalysisTrace, BreathReport

_SAVE_KWARGS = {"dpi": 120, "metadata": {"Software": None}}


def _shade_holds(ax, report: BreathReport) -> None:
    for i, (start, end) in enumerate(report.holds.episodes):
        ax.axvspan(
            start,
            end,
            color="orange",
            alpha=0.25,
            label="hold episode" if i == 0 else None,
        )


def save_signal_figure(trace: AnalysisTrace, report: BreathReport, path: str | Path) -> None:
    """Raw and smoothed breath signal with event markers and hold shading."""
    fig, ax = plt.subplots(figsize=(9, 4))
    ax.plot(trace.frame_ids, trace.raw, color="0.75", lw=0.8, label="raw")
    ax.plot(trace.frame_ids, trace.smoothed, color="crimson", lw=1.4, label="smoothed")
    ax.axhline(report.smoothed_mean, color="0.4", ls=":", lw=1.0, label="signal mean")
    if len(report.breath_frames):
        ax.plot(
            report.breath_frames.frames,
            report.breath_frames.amplitudes,
            "v",
            color="seagreen",
            ms=7,
            label="breath event",
        )
    _shade_holds(ax, report)
    ax.set_xlabel("frame")
    ax.set_ylabel("projected centroid (m)")
    ax.set_title(f"breath signal - {report.respiratory_rate:.2f} breaths/min")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)


def save_variance_figure(trace: AnalysisTrace, report: BreathReport, gamma: float, path: str | Path) -> None:
    """Moving variance with the hold threshold and the detected hold spans."""
    fig, ax = plt.subplots(figsize=(9, 3.2))
    ax.semilogy(trace.frame_ids, trace.variance.clip(min=1e-18), color="seagreen", lw=1.2, label="moving variance")
    ax.axhline(gamma, color="goldenrod", ls="--", lw=1.2, label="hold threshold")
    _shade_holds(ax, report)
    ax.set_xlabel("frame")
    ax.set_ylabel("variance (m$^2$)")
    ax.set_title("breath-hold detection")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)
