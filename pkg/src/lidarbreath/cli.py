"""Command-line interface: synthesize, analyze, evaluate, convert.

Exit codes: 0 on success, 1 on usage errors, 2 on data errors (missing or
malformed input files, mis-set ROI, captures too short to analyze).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import breathing, metrics, plots, reportio, synth, vlp16
from .pointcloud import ProjectionAxis, ProjectionMode, Roi

USAGE_ERROR = 1
DATA_ERROR = 2


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this tool reserves 2 for data errors."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _parse_roi(text: str) -> Roi:
    parts = text.split(",")
    if len(parts) != 6:
        raise argparse.ArgumentTypeError("ROI needs 6 comma-separated numbers: x1,x2,y1,y2,z1,z2")
    try:
        x1, x2, y1, y2, z1, z2 = (float(p) for p in parts)
        return Roi(x1, x2, y1, y2, z1, z2)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


_AXES = {
    "x": ProjectionAxis.X,
    "y": ProjectionAxis.Y,
    "z": ProjectionAxis.Z,
    "mean": ProjectionAxis.MEAN,
}


def _add_analysis_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--roi", type=_parse_roi, default=Roi.unbounded(),
                   help="torso box as x1,x2,y1,y2,z1,z2 in meters (default: keep all points)")
    p.add_argument("--projection", choices=sorted(_AXES), default="mean",
                   help="centroid projection: one axis or the mean of all three (default mean)")
    p.add_argument("--invert", action="store_true",
                   help="negate the projected signal (chest motion toward the sensor)")
    p.add_argument("--ma-window", type=int, default=10, metavar="M",
                   help="moving average window, frames (default 10)")
    p.add_argument("--var-window", type=int, default=25, metavar="W",
                   help="moving variance window, frames (default 25)")
    p.add_argument("--gamma", type=float, default=1e-6,
                   help="hold threshold on the moving variance, m^2 (default 1e-6)")
    p.add_argument("--min-hold", type=float, default=2.0, metavar="SECONDS",
                   help="drop hold episodes shorter than this; 0 disables (default 2)")
    p.add_argument("--min-prominence", type=float, default=0.2, metavar="FRACTION",
                   help="required trough prominence as a fraction of the signal range; "
                        "0 keeps every below-mean minimum (default 0.2)")
    p.add_argument("--frame-rate", type=float, default=None,
                   help="override the frame rate inferred from timestamps, Hz")


def _build_parser() -> _Parser:
    parser = _Parser(prog="lidarbreath",
                     description="Breathing metrics from torso point-cloud sequences.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_synth = sub.add_parser("synth", help="generate a synthetic scene with ground truth")
    p_synth.add_argument("--scenario", default="a",
                         help="a=front, b=rear, c=right side, d=left side, e=supine (default a)")
    p_synth.add_argument("--sets", type=int, default=3, help="breathing sets (default 3)")
    p_synth.add_argument("--breaths", type=int, default=5, help="breaths per set (default 5)")
    p_synth.add_argument("--period", type=float, default=5.0, help="breath period, s (default 5)")
    p_synth.add_argument("--hold-duration", type=float, default=10.0,
                         help="inter-set breath hold, s (default 10)")
    p_synth.add_argument("--amplitude", type=float, default=0.005,
                         help="chest displacement amplitude, m (default 0.005)")
    p_synth.add_argument("--noise", type=float, default=0.0,
                         help="per-point Gaussian noise sigma, m (default 0)")
    p_synth.add_argument("--frame-rate", type=float, default=10.0, help="frames per second (default 10)")
    p_synth.add_argument("--points", type=int, default=400, help="torso patch point count (default 400)")
    p_synth.add_argument("--distance", type=float, default=2.0,
                         help="sensor-to-torso distance, m (default 2)")
    p_synth.add_argument("--seed", type=int, default=0, help="noise seed (default 0)")
    p_synth.add_argument("--out", required=True, metavar="DIR",
                         help="output directory for frames.csv and truth.csv")

    p_analyze = sub.add_parser("analyze", help="compute a breath report from a capture")
    p_analyze.add_argument("input", help="frames CSV (*.csv) or raw packet file")
    _add_analysis_flags(p_analyze)
    p_analyze.add_argument("--out", required=True, metavar="DIR",
                           help="output directory for report.csv, signal.csv and figures")
    p_analyze.add_argument("--no-figures", action="store_true", help="skip PNG rendering")

    p_eval = sub.add_parser("evaluate", help="score a report against ground truth")
    p_eval.add_argument("report", help="report.csv from analyze")
    p_eval.add_argument("truth", help="truth.csv from synth")
    p_eval.add_argument("--tolerance-frames", type=int, default=None,
                        help="event matching tolerance (default: one second of frames)")
    p_eval.add_argument("--label", default="run", help="row label for eval.csv")
    p_eval.add_argument("--out", required=True, metavar="DIR",
                        help="output directory for eval.csv and eval.txt")

    p_convert = sub.add_parser("convert", help="raw packets to the frame CSV format")
    p_convert.add_argument("input", nargs="?", help="file of concatenated 1206-byte payloads")
    p_convert.add_argument("--listen", type=int, metavar="PORT",
                           help="capture packets from a UDP port instead of a file")
    p_convert.add_argument("--count", type=int, default=100,
                           help="packets to capture with --listen (default 100)")
    p_convert.add_argument("--out", required=True, metavar="DIR",
                           help="output directory for frames.csv")
    return parser


def _ensure_out(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_frames(args) -> "vlp16.FrameSequence":
    path = Path(args.input)
    if not path.exists():
        raise FileNotFoundError(f"input file not found: {path}")
    if path.suffix.lower() == ".csv":
        frames = vlp16.read_frames_csv(path)
    else:
        frames = vlp16.assemble_frames(vlp16.read_packet_file(path))
    if args.frame_rate:
        frames.nominal_rate = args.frame_rate
    return frames


def _cmd_synth(args) -> int:
    config = synth.SynthConfig(
        scenario=synth.Scenario.from_label(args.scenario),
        sets=args.sets,
        breaths_per_set=args.breaths,
        breath_period=args.period,
        hold_duration=args.hold_duration,
        amplitude=args.amplitude,
        noise_sigma=args.noise,
        frame_rate=args.frame_rate,
        torso=synth.TorsoParams(points=args.points),
        sensor_distance=args.distance,
        seed=args.seed,
    )
    frames, truth = synth.generate_scene(config)
    out = _ensure_out(args.out)
    vlp16.write_frames_csv(frames, out / "frames.csv")
    synth.write_truth_csv(truth, out / "truth.csv")
    print(f"wrote {len(frames)} frames ({len(truth.breath_event_frames)} breaths, "
          f"{len(truth.hold_episodes())} holds) to {out}")
    return 0


def _cmd_analyze(args) -> int:
    frames = _load_frames(args)
    config = breathing.AnalysisConfig(
        ma_window=args.ma_window,
        var_window=args.var_window,
        hold_threshold=args.gamma,
        min_hold_duration=args.min_hold,
        projection=ProjectionMode(axis=_AXES[args.projection], inverted=args.invert),
        roi=args.roi,
        min_prominence=args.min_prominence,
    )
    report, trace = breathing.analyze_with_trace(frames, config)
    out = _ensure_out(args.out)
    roi = config.roi
    params = {
        "ma_window": config.ma_window,
        "var_window": config.var_window,
        "gamma": repr(config.hold_threshold),
        "min_hold": repr(config.min_hold_duration),
        "min_prominence": repr(config.min_prominence),
        "projection": args.projection,
        "invert": int(config.projection.inverted),
        "roi": ";".join(repr(v) for v in (roi.x_lo, roi.x_hi, roi.y_lo, roi.y_hi, roi.z_lo, roi.z_hi)),
        "frame_rate": repr(frames.nominal_rate),
    }
    reportio.write_report_csv(report, out / "report.csv", params)
    reportio.write_signal_csv(trace, report, out / "signal.csv")
    if not args.no_figures:
        plots.save_signal_figure(trace, report, out / "breath_signal.png")
        plots.save_variance_figure(trace, report, config.hold_threshold, out / "hold_variance.png")
    print(f"{len(report.breath_frames)} breath events, "
          f"respiratory rate {report.respiratory_rate:.2f} breaths/min, "
          f"{len(report.holds.episodes)} hold episodes over {report.measurement_time:.1f} s")
    for frame, depth in zip(report.breath_frames.frames, report.depths):
        print(f"  breath at frame {frame}, depth {depth * 1000:.2f} mm")
    for start, end in report.holds.episodes:
        print(f"  hold from frame {start} to {end}")
    return 0


def _cmd_evaluate(args) -> int:
    for name in (args.report, args.truth):
        if not Path(name).exists():
            raise FileNotFoundError(f"input file not found: {name}")
    report, params = reportio.read_report_csv(args.report)
    truth = synth.read_truth_csv(args.truth)
    tol = args.tolerance_frames
    if tol is None:
        rate = float(params.get("frame_rate", 10.0))
        tol = max(1, round(rate))
    result = metrics.evaluate(report, truth, tol)
    out = _ensure_out(args.out)
    metrics.write_eval_csv(result, out / "eval.csv", label=args.label)
    metrics.write_eval_txt(result, out / "eval.txt")
    print(f"breathing accuracy   {result.breathing_accuracy:.2f}")
    print(f"holding accuracy     {result.hold_accuracy:.2f}")
    print(f"breath depth RMSE    {result.depth_rmse} m")
    print(f"respiratory rate RMSE {result.rate_rmse} breaths/min")
    return 0


def _cmd_convert(args) -> int:
    if args.listen is not None:
        packets = vlp16.capture_udp(args.listen, args.count)
    elif args.input:
        path = Path(args.input)
        if not path.exists():
            raise FileNotFoundError(f"input file not found: {path}")
        packets = vlp16.read_packet_file(path)
    else:
        raise argparse.ArgumentTypeError("convert needs an input file or --listen PORT")
    frames = vlp16.assemble_frames(packets)
    out = _ensure_out(args.out)
    vlp16.write_frames_csv(frames, out / "frames.csv")
    print(f"assembled {len(frames)} frames from {len(packets)} packets into {out / 'frames.csv'}")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "analyze": _cmd_analyze,
    "evaluate": _cmd_evaluate,
    "convert": _cmd_convert,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except argparse.ArgumentTypeError as exc:
        print(f"lidarbreath: error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (OSError, ValueError) as exc:
        print(f"lidarbreath: {type(exc).__name__}: {exc}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
