import numpy as np
import pytest
from hypothesis import given, strategies as st

from lidarbreath.pointcloud import (
    CentroidSample,
    EmptyFrameError,
    EmptyInputError,
    FrameSequence,
    PointFrame,
    ProjectionAxis,
    ProjectionMode,
    Roi,
    TooManyEmptyFramesError,
    centroid,
    centroid_series,
    filter_roi,
    project_series,
)


def frame(points, index=0, t=0.0):
    return PointFrame(index=index, timestamp=t, points=np.array(points, dtype=float))


class TestFilterRoi:
    def test_all_inside_retained(self):
        f = frame([[1, 2, 3], [-4, 5, -6], [0, 0, 0]])
        out = filter_roi(f, Roi(-10, 10, -10, 10, -10, 10))
        assert out.n_points == 3
        np.testing.assert_array_equal(out.points, f.points)

    def test_boundary_point_retained(self):
        # bounds are inclusive on both sides
        f = frame([[10.0, 0, 0]])
        out = filter_roi(f, Roi(-10, 10, -1, 1, -1, 1))
        assert out.n_points == 1

    def test_matches_per_point_predicate_scan(self):
        rng = np.random.default_rng(7)
        pts = rng.uniform(-1, 1, size=(5, 3))
        roi = Roi(-0.3, 0.5, -0.6, 0.2, -0.9, 0.9)
        out = filter_roi(frame(pts), roi)
        expected = [p for p in pts if roi.contains(*p)]
        np.testing.assert_allclose(out.points, np.array(expected).reshape(-1, 3))

    def test_idempotent_and_subsequence(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            pts = rng.normal(0, 2, size=(rng.integers(0, 40), 3))
            roi = Roi(-1, 1, -2, 0.5, -1.5, 3)
            once = filter_roi(frame(pts), roi)
            twice = filter_roi(once, roi)
            np.testing.assert_array_equal(once.points, twice.points)
            assert once.n_points <= pts.shape[0]

    def test_preserves_index_and_timestamp(self):
        f = frame([[0, 0, 0]], index=17, t=1.7)
        out = filter_roi(f, Roi.unbounded())
        assert out.index == 17 and out.timestamp == 1.7

    def test_empty_result_is_legal(self):
        out = filter_roi(frame([[5, 5, 5]]), Roi(-1, 1, -1, 1, -1, 1))
        assert out.n_points == 0


class TestCentroid:
    def test_single_point_identity(self):
        c = centroid(frame([[1, 2, 3]]))
        assert (c.cx, c.cy, c.cz) == (1, 2, 3)

    def test_symmetric_pair(self):
        c = centroid(frame([[-1, 0, 0], [1, 0, 0]]))
        assert (c.cx, c.cy, c.cz) == (0, 0, 0)

    def test_matches_independent_summation(self):
        pts = np.array([[0.3, -1.2, 4.0], [2.0, 0.1, -0.7], [-5.5, 3.3, 2.2], [1.0, 1.0, 1.0]])
        c = centroid(frame(pts))
        sums = [sum(pts[:, k]) for k in range(3)]
        assert c.cx == pytest.approx(sums[0] / 4, abs=1e-15)
        assert c.cy == pytest.approx(sums[1] / 4, abs=1e-15)
        assert c.cz == pytest.approx(sums[2] / 4, abs=1e-15)

    def test_empty_frame_raises(self):
        with pytest.raises(EmptyFrameError):
            centroid(frame(np.empty((0, 3))))

    @given(
        st.lists(
            st.tuples(*[st.floats(-100, 100) for _ in range(3)]), min_size=1, max_size=30
        ),
        st.tuples(*[st.floats(-50, 50) for _ in range(3)]),
    )
    def test_translation_equivariant(self, pts, shift):
        base = centroid(frame(pts))
        moved = centroid(frame(np.array(pts) + np.array(shift)))
        np.testing.assert_allclose(
            moved.as_array(), base.as_array() + np.array(shift), atol=1e-9
        )

    def test_centroid_of_filtered_inside_roi(self):
        rng = np.random.default_rng(3)
        roi = Roi(-0.5, 0.5, -0.25, 1.0, 0.0, 2.0)
        for _ in range(25):
            pts = rng.uniform(-2, 2, size=(60, 3))
            kept = filter_roi(frame(pts), roi)
            if kept.n_points == 0:
                continue
            c = centroid(kept)
            assert roi.contains(c.cx, c.cy, c.cz)


class TestProjectSeries:
    def test_axis_component_selection(self):
        sig = project_series([CentroidSample(0, 1, 2, 3)], ProjectionMode(ProjectionAxis.X))
        assert sig.samples.tolist() == [1.0]

    def test_mean_of_axes(self):
        sig = project_series([CentroidSample(0, 1, 2, 3)], ProjectionMode(ProjectionAxis.MEAN))
        assert sig.samples.tolist() == [2.0]

    def test_constant_centroids_give_constant_signal(self):
        cs = [CentroidSample(i, 0.5, 1.5, -0.5) for i in range(8)]
        sig = project_series(cs, ProjectionMode())
        assert len(sig) == 8
        assert np.all(sig.samples == 0.5)

    def test_inverted_negates(self):
        cs = [CentroidSample(i, float(i), -float(i), 2.0) for i in range(5)]
        normal = project_series(cs, ProjectionMode(ProjectionAxis.Y))
        flipped = project_series(cs, ProjectionMode(ProjectionAxis.Y, inverted=True))
        np.testing.assert_array_equal(flipped.samples, -normal.samples)

    def test_empty_input_raises(self):
        with pytest.raises(EmptyInputError):
            project_series([], ProjectionMode())


class TestCentroidSeries:
    def seq(self, frames):
        return FrameSequence(frames=frames, nominal_rate=10.0)

    def test_isolated_empty_frame_repeats_previous(self):
        frames = [
            frame([[0, 0, 0], [2, 0, 0]], index=0, t=0.0),
            frame([[9, 9, 9]], index=1, t=0.1),  # outside roi -> emptied
            frame([[4, 0, 0]], index=2, t=0.2),
        ] + [frame([[1, 0, 0]], index=3 + i, t=0.3 + 0.1 * i) for i in range(18)]
        roi = Roi(-5, 5, -5, 5, -5, 5)
        series = centroid_series(self.seq(frames), roi)
        assert len(series) == len(frames)
        assert (series[1].cx, series[1].cy, series[1].cz) == (1.0, 0.0, 0.0)
        assert series[1].frame == 1

    def test_leading_empty_frames_backfill(self):
        frames = [
            frame([[9, 9, 9]], index=0, t=0.0),
            frame([[2, 0, 0]], index=1, t=0.1),
        ] + [frame([[2, 0, 0]], index=2 + i, t=0.2 + 0.1 * i) for i in range(20)]
        series = centroid_series(self.seq(frames), Roi(-5, 5, -5, 5, -5, 5))
        assert series[0].cx == 2.0

    def test_too_many_empty_frames_fails_fast(self):
        frames = [frame([[9, 9, 9]], index=i, t=0.1 * i) for i in range(10)]
        frames += [frame([[0, 0, 0]], index=10 + i, t=1.0 + 0.1 * i) for i in range(10)]
        with pytest.raises(TooManyEmptyFramesError):
            centroid_series(self.seq(frames), Roi(-1, 1, -1, 1, -1, 1))

    def test_empty_sequence_raises(self):
        with pytest.raises(EmptyInputError):
            centroid_series(self.seq([]), Roi.unbounded())


class TestInvariantValidation:
    def test_roi_rejects_inverted_bounds(self):
        with pytest.raises(ValueError):
            Roi(1, -1, 0, 0, 0, 0)

    def test_sequence_rejects_non_increasing_indices(self):
        frames = [frame([[0, 0, 0]], index=1), frame([[0, 0, 0]], index=1, t=0.1)]
        with pytest.raises(ValueError):
            FrameSequence(frames=frames, nominal_rate=10.0)

    def test_sequence_rejects_decreasing_timestamps(self):
        frames = [frame([[0, 0, 0]], index=0, t=1.0), frame([[0, 0, 0]], index=1, t=0.5)]
        with pytest.raises(ValueError):
            FrameSequence(frames=frames, nominal_rate=10.0)

    def test_sequence_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            FrameSequence(frames=[frame([[0, 0, 0]])], nominal_rate=0.0)

    def test_frame_rejects_bad_shape(self):
        with pytest.raises(ValueError):
            PointFrame(index=0, timestamp=0.0, points=np.zeros((3, 2)))
