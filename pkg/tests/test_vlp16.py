import math
import socket
import threading

import numpy as np
import pytest

from lidarbreath.pointcloud import FrameSequence, PointFrame
from lidarbreath.vlp16 import (
    BLOCKS_PER_PACKET,
    CHANNELS_PER_BLOCK,
    PACKET_SIZE,
    BadBlockFlagError,
    BadLengthError,
    DualReturnError,
    EmptyStreamError,
    LaserCalibration,
    MalformedHeaderError,
    MalformedPacketError,
    MalformedRowError,
    NonMonotonicFramesError,
    RETURN_MODE_DUAL,
    assemble_frames,
    build_packet,
    capture_udp,
    parse_packet,
    read_frames_csv,
    read_packet_file,
    to_cartesian,
    write_frames_csv,
    write_packet_file,
)


def zero_distances():
    return [[0] * CHANNELS_PER_BLOCK for _ in range(BLOCKS_PER_PACKET)]


def packet_with(azimuths=None, timestamp_us=0, **kw):
    azimuths = azimuths or [i * 200 for i in range(BLOCKS_PER_PACKET)]
    return build_packet(azimuths, zero_distances(), timestamp_us=timestamp_us, **kw)


class TestParsePacket:
    def test_hand_decoded_return(self):
        distances = zero_distances()
        distances[0][0] = 2500  # 2 mm units -> 5.000 m on channel 0 (-15 deg)
        payload = build_packet([9000] + [9020] * 11, distances, timestamp_us=123456)
        returns = parse_packet(payload)
        assert len(returns) == 1
        r = returns[0]
        assert r.azimuth_deg == 90.0
        assert r.elevation_deg == -15.0
        assert r.range_m == pytest.approx(5.0, abs=1e-12)
        assert r.timestamp_us == 123456

    def test_zero_distance_emits_nothing(self):
        assert parse_packet(packet_with()) == []

    def test_bad_length(self):
        with pytest.raises(BadLengthError):
            parse_packet(packet_with()[:-1])

    def test_bad_block_flag_reports_offset(self):
        payload = bytearray(packet_with())
        payload[300] = 0x00  # block 3 starts at offset 300
        with pytest.raises(BadBlockFlagError) as err:
            parse_packet(bytes(payload))
        assert err.value.offset == 300

    def test_dual_return_rejected(self):
        with pytest.raises(DualReturnError):
            parse_packet(packet_with(return_mode=RETURN_MODE_DUAL))

    def test_azimuth_out_of_range_rejected(self):
        payload = bytearray(packet_with())
        payload[2:4] = (36000).to_bytes(2, "little")
        with pytest.raises(MalformedPacketError):
            parse_packet(bytes(payload))

    def test_second_firing_uses_interpolated_azimuth(self):
        distances = zero_distances()
        distances[0][0] = 1000   # first firing group
        distances[0][16] = 1000  # second firing group, same laser
        payload = build_packet([100] + [300] * 11, distances)
        first, second = parse_packet(payload)
        assert first.azimuth_deg == 1.0
        assert second.azimuth_deg == 2.0  # halfway toward the next block

    def test_interpolation_wraps_past_360(self):
        distances = zero_distances()
        distances[0][16] = 1000
        payload = build_packet([35900, 100] + [300] * 10, distances)
        (ret,) = parse_packet(payload)
        assert ret.azimuth_deg == 0.0  # (35900 + 200/2) mod 36000

    def test_channel_elevation_table_cycles(self):
        cal = LaserCalibration()
        assert cal.elevation(0) == -15.0
        assert cal.elevation(15) == 15.0
        assert cal.elevation(16) == -15.0
        assert cal.elevation(31) == 15.0

    def test_round_trip_ranges_and_azimuths(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            azimuths = sorted(rng.integers(0, 36000, BLOCKS_PER_PACKET).tolist())
            distances = rng.integers(0, 4000, (BLOCKS_PER_PACKET, CHANNELS_PER_BLOCK)).tolist()
            payload = build_packet(azimuths, distances)
            returns = parse_packet(payload)
            expected = [
                (b, ch, d)
                for b, row in enumerate(distances)
                for ch, d in enumerate(row)
                if d != 0
            ]
            assert len(returns) == len(expected)
            for r, (b, ch, d) in zip(returns, expected):
                assert r.range_m == pytest.approx(d * 0.002, abs=1e-12)
                if ch < 16:
                    assert r.azimuth_deg == pytest.approx(azimuths[b] / 100.0, abs=1e-12)


class TestToCartesian:
    def test_forward_axis(self):
        p = to_cartesian(0.0, 0.0, 1.0)
        assert (round(p.x, 12), round(p.y, 12), round(p.z, 12)) == (0.0, 1.0, 0.0)

    def test_right_axis(self):
        p = to_cartesian(90.0, 0.0, 2.0)
        assert p.x == pytest.approx(2.0, abs=1e-12)
        assert p.y == pytest.approx(0.0, abs=1e-12)

    def test_oblique_example(self):
        p = to_cartesian(90.0, -15.0, 5.0)
        assert p.x == pytest.approx(4.830, abs=1e-3)
        assert p.y == pytest.approx(0.000, abs=1e-3)
        assert p.z == pytest.approx(-1.294, abs=1e-3)

    def test_preserves_range(self):
        rng = np.random.default_rng(23)
        for _ in range(200):
            az = float(rng.uniform(0, 360))
            el = float(rng.uniform(-15, 15))
            r = float(rng.uniform(0.1, 100))
            p = to_cartesian(az, el, r)
            assert math.sqrt(p.x**2 + p.y**2 + p.z**2) == pytest.approx(r, abs=1e-9)


def rotation_packets(n_rotations, blocks_per_rotation=24, distance=1000, rate_hz=10.0):
    """Packets covering n_rotations full sweeps, one return per block."""
    packets = []
    azimuth_step = 36000 // blocks_per_rotation
    block_duration_us = 1e6 / rate_hz / blocks_per_rotation
    block_counter = 0
    pending_az, pending_dist = [], []
    for _ in range(n_rotations):
        for b in range(blocks_per_rotation):
            pending_az.append(b * azimuth_step)
            row = [0] * CHANNELS_PER_BLOCK
            row[b % 16] = distance
            pending_dist.append(row)
            block_counter += 1
            if len(pending_az) == BLOCKS_PER_PACKET:
                ts = int((block_counter - BLOCKS_PER_PACKET) * block_duration_us)
                packets.append(build_packet(pending_az, pending_dist, timestamp_us=ts))
                pending_az, pending_dist = [], []
    assert not pending_az, "rotation count must fill whole packets"
    return packets


class TestAssembleFrames:
    def test_wrap_inserts_boundary(self):
        distances = zero_distances()
        for b in range(BLOCKS_PER_PACKET):
            distances[b][0] = 500
        azimuths = [35000, 35900, 100, 200, 300, 400, 500, 600, 700, 800, 900, 1000]
        seq = assemble_frames([build_packet(azimuths, distances)])
        assert len(seq) == 2
        assert seq.frames[0].n_points == 2
        assert seq.frames[1].n_points == 10

    def test_k_rotations_make_k_frames(self):
        for k in (1, 3, 5):
            seq = assemble_frames(rotation_packets(k))
            assert len(seq) == k

    def test_points_conserved(self):
        packets = rotation_packets(4)
        total_returns = sum(len(parse_packet(p)) for p in packets)
        seq = assemble_frames(packets)
        assert sum(f.n_points for f in seq.frames) == total_returns

    def test_rate_inferred_from_median_spacing(self):
        seq = assemble_frames(rotation_packets(5, rate_hz=10.0))
        assert seq.nominal_rate == pytest.approx(10.0, rel=0.05)

    def test_empty_stream_raises(self):
        with pytest.raises(EmptyStreamError):
            assemble_frames([])


def random_sequence(rng, n_frames=5, rate=10.0):
    frames = []
    for i in range(n_frames):
        pts = rng.uniform(-3, 3, size=(int(rng.integers(1, 12)), 3))
        frames.append(PointFrame(index=i, timestamp=i / rate, points=pts))
    return FrameSequence(frames=frames, nominal_rate=rate)


class TestFramesCsv:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(31)
        seq = random_sequence(rng)
        path = tmp_path / "frames.csv"
        write_frames_csv(seq, path)
        back = read_frames_csv(path)
        assert len(back) == len(seq)
        for a, b in zip(seq.frames, back.frames):
            assert a.index == b.index
            assert b.timestamp == pytest.approx(a.timestamp, abs=1e-9)
            np.testing.assert_allclose(b.points, a.points, atol=1e-6)

    def test_grouping_two_rows_one_frame(self, tmp_path):
        path = tmp_path / "f.csv"
        path.write_text("frame,t,x,y,z\n0,0.0,1,2,3\n0,0.0,4,5,6\n")
        seq = read_frames_csv(path)
        assert len(seq) == 1
        assert seq.frames[0].n_points == 2

    def test_malformed_row_reports_line(self, tmp_path):
        path = tmp_path / "f.csv"
        path.write_text("frame,t,x,y,z\n0,0.0,1,2,3\n0,0.0,oops,5,6\n")
        with pytest.raises(MalformedRowError) as err:
            read_frames_csv(path)
        assert err.value.line == 3

    def test_bad_header(self, tmp_path):
        path = tmp_path / "f.csv"
        path.write_text("frame,time,x,y,z\n0,0.0,1,2,3\n")
        with pytest.raises(MalformedHeaderError):
            read_frames_csv(path)

    def test_non_monotonic_frames(self, tmp_path):
        path = tmp_path / "f.csv"
        path.write_text("frame,t,x,y,z\n1,0.0,1,2,3\n0,0.1,4,5,6\n")
        with pytest.raises(NonMonotonicFramesError):
            read_frames_csv(path)

    def test_header_only_rejected(self, tmp_path):
        path = tmp_path / "f.csv"
        path.write_text("frame,t,x,y,z\n")
        with pytest.raises(MalformedHeaderError):
            read_frames_csv(path)


class TestPacketFile:
    def test_round_trip(self, tmp_path):
        packets = rotation_packets(2)
        path = tmp_path / "capture.bin"
        write_packet_file(packets, path)
        assert read_packet_file(path) == packets

    def test_truncated_file_rejected(self, tmp_path):
        path = tmp_path / "capture.bin"
        path.write_bytes(b"\x00" * (PACKET_SIZE + 7))
        with pytest.raises(BadLengthError):
            read_packet_file(path)


class TestUdpCapture:
    def test_loopback_capture(self):
        packets = rotation_packets(1)
        port = 47091
        received = []

        def run_capture():
            received.extend(capture_udp(port, len(packets), timeout=5.0))

        listener = threading.Thread(target=run_capture)
        listener.start()
        with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as sock:
            import time

            time.sleep(0.2)  # let the listener bind
            for p in packets:
                sock.sendto(p, ("127.0.0.1", port))
                time.sleep(0.005)
        listener.join(timeout=10)
        assert not listener.is_alive()
        assert received == packets
