"""Breathing metrics from time-sequenced torso point clouds.

The pipeline crops each sweep to a torso box, tracks the centroid of the
retained points, projects that trajectory to a scalar breath signal, and reads
breath events, respiratory rate, breath depth, and breath-hold episodes off
the smoothed series.  A synthetic scene generator with exact ground truth and
an evaluation harness support end-to-end verification, and a VLP-16 packet
parser plus a portable frame CSV format cover ingestion.
"""

from .breathing import (
    AnalysisConfig,
    BreathReport,
    BreathSignal,
    HoldSet,
    PeakSet,
    analyze,
    analyze_with_trace,
    detect_holds,
    detect_local_minima,
    filter_peaks_below_mean,
    moving_average,
    moving_variance,
    respiratory_rate,
)
from .metrics import (
    Confusion,
    EvalResult,
    breath_event_accuracy,
    evaluate,
    hold_frame_accuracy,
    rmse,
)
from .pointcloud import (
    CentroidSample,
    FrameSequence,
    Point3,
    PointFrame,
    ProjectionAxis,
    ProjectionMode,
    Roi,
    centroid,
    centroid_series,
    filter_roi,
    project_series,
)
from .synth import (
    GroundTruth,
    Scenario,
    SynthConfig,
    TorsoParams,
    displacement_profile,
    generate_scene,
)
from .vlp16 import (
    LaserCalibration,
    assemble_frames,
    parse_packet,
    read_frames_csv,
    to_cartesian,
    write_frames_csv,
)

__version__ = "0.1.0"
