import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from infrasense.dissemination import (
    MAX_ENTRIES,
    SSID_CHARS,
    FormatError,
    IntegrityError,
    PacketEntry,
    SimNode,
    SsidPacket,
    crc16_ccitt,
    decode_packet,
    encode_packet,
    run_simulation,
    step_simulation,
)
from infrasense.reports import Indicator

METERS_PER_DEG = math.pi / 180.0 * 6371000.0


def random_packet(rng):
    n = int(rng.integers(0, MAX_ENTRIES + 1))
    entries = tuple(PacketEntry(
        d_north=int(rng.integers(-128, 128)), d_east=int(rng.integers(-128, 128)),
        type=int(rng.integers(0, 16)), severity=int(rng.integers(0, 16)),
        confidence=int(rng.integers(0, 256)),
    ) for _ in range(n))
    return SsidPacket(
        version=int(rng.integers(0, 16)), flags=int(rng.integers(0, 16)),
        lat_e6=int(rng.integers(-90_000_000, 90_000_001)),
        lon_e6=int(rng.integers(-180_000_000, 180_000_001)),
        entries=entries,
    )


class TestCrc16:
    def test_check_value(self):
        # standard CRC-16/CCITT-FALSE check: "123456789" -> 0x29B1
        assert crc16_ccitt(b"123456789") == 0x29B1

    def test_empty(self):
        assert crc16_ccitt(b"") == 0xFFFF

    def test_sensitivity(self):
        assert crc16_ccitt(b"abc") != crc16_ccitt(b"abd")


class TestCodec:
    def test_ssid_is_32_chars(self, rng):
        for _ in range(200):
            assert len(random_packet(rng).to_ssid()) == SSID_CHARS

    def test_roundtrip_random(self, rng):
        for _ in range(500):
            pkt = random_packet(rng)
            assert decode_packet(pkt.to_ssid()) == pkt

    def test_field_validation(self):
        with pytest.raises(ValueError):
            PacketEntry(200, 0, 0, 0, 0)
        with pytest.raises(ValueError):
            PacketEntry(0, 0, 16, 0, 0)
        with pytest.raises(ValueError):
            SsidPacket(1, 0, 91_000_000, 0)
        with pytest.raises(ValueError):
            SsidPacket(1, 0, 0, 0, entries=(PacketEntry(0, 0, 0, 0, 0),) * 4)

    def test_wrong_length_is_format_error(self):
        with pytest.raises(FormatError):
            decode_packet("A" * 31)
        with pytest.raises(FormatError):
            decode_packet("A" * 33)

    def test_bad_alphabet_is_format_error(self):
        ssid = SsidPacket(1, 0, 0, 0).to_ssid()
        with pytest.raises(FormatError):
            decode_packet("!" + ssid[1:])
        with pytest.raises(FormatError):
            decode_packet(ssid[:-1] + "+")  # standard-b64 char, not urlsafe

    def test_corruption_never_silently_decodes(self, rng):
        alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_"
        silent = 0
        for _ in range(100):
            pkt = random_packet(rng)
            ssid = pkt.to_ssid()
            pos = int(rng.integers(0, SSID_CHARS))
            repl = alphabet[int(rng.integers(0, 64))]
            if repl == ssid[pos]:
                continue
            corrupted = ssid[:pos] + repl + ssid[pos + 1:]
            try:
                got = decode_packet(corrupted)
            except (FormatError, IntegrityError):
                continue
            if got != pkt:
                silent += 1
        assert silent == 0

    def test_checksum_matches_trailing_bytes(self, rng):
        pkt = random_packet(rng)
        raw = pkt.to_bytes()
        assert crc16_ccitt(raw[:-2]) == int.from_bytes(raw[-2:], "little")


class TestEncodePacket:
    def anomaly(self, north_m, severity=160, kind="anomaly", confidence=0.5):
        return Indicator(kind=kind, sub_kind="point",
                         lat=51.0 + north_m / METERS_PER_DEG, lon=7.0,
                         t=0.0, severity=severity, confidence=confidence, value=1.0)

    def test_100m_north_offset(self):
        ssid, report = encode_packet(51.0, 7.0, [self.anomaly(100.0)])
        pkt = decode_packet(ssid)
        assert pkt.entries[0].d_north == 10
        assert pkt.entries[0].d_east == 0
        assert report.truncated == 0 and report.clamped == 0

    def test_origin_quantization(self):
        ssid, _ = encode_packet(51.1234567, 7.7654321, [])
        lat, lon = decode_packet(ssid).origin
        assert lat == pytest.approx(51.1234567, abs=5e-7)
        assert lon == pytest.approx(7.7654321, abs=5e-7)

    def test_truncates_to_top_three_severities(self):
        inds = [self.anomaly(10.0 * i, severity=s)
                for i, s in enumerate((144, 96, 112, 80, 160))]
        ssid, report = encode_packet(51.0, 7.0, inds)
        pkt = decode_packet(ssid)
        assert report.truncated == 2
        assert [e.severity for e in pkt.entries] == [10, 9, 7]  # 160,144,112 >> 4

    def test_far_entry_clamped(self):
        ssid, report = encode_packet(51.0, 7.0, [self.anomaly(5000.0)])
        assert report.clamped == 1
        assert decode_packet(ssid).entries[0].d_north == 127

    def test_confidence_scaling(self):
        ssid, _ = encode_packet(51.0, 7.0, [self.anomaly(0.0, confidence=1.0)])
        assert decode_packet(ssid).entries[0].confidence == 255


def grid_nodes(n, spacing_m=40.0, ring=False, **kw):
    """n stationary nodes on a line (or ring) spaced `spacing_m` apart."""
    nodes = []
    for i in range(n):
        if ring:
            ang = 2 * math.pi * i / n
            radius = spacing_m / (2 * math.sin(math.pi / n))
            north, east = radius * math.cos(ang), radius * math.sin(ang)
        else:
            north, east = i * spacing_m, 0.0
        lat = 51.0 + north / METERS_PER_DEG
        lon = 7.0 + east / (METERS_PER_DEG * math.cos(math.radians(51.0)))
        nodes.append(SimNode(id=f"n{i}", waypoints=[(0.0, lat, lon)], **kw))
    return nodes


def seed_packet(node, severity=10):
    ssid = SsidPacket(1, 0, 51_000_000, 7_000_000,
                      (PacketEntry(0, 0, 1, severity, 128),)).to_ssid()
    node.receive(ssid)
    return ssid


class TestSimNode:
    def test_duty_schedule(self):
        node = SimNode(id="a", waypoints=[(0.0, 51.0, 7.0)], duty=0.5,
                       period=10.0, phase=0.0)
        assert node.mode(0.0) == "hotspot"
        assert node.mode(4.9) == "hotspot"
        assert node.mode(5.0) == "client"
        assert node.mode(10.0) == "hotspot"

    def test_phase_shifts_schedule(self):
        node = SimNode(id="a", waypoints=[(0.0, 51.0, 7.0)], phase=5.0)
        assert node.mode(0.0) == "client"
        assert node.mode(5.0) == "hotspot"

    def test_waypoint_interpolation(self):
        node = SimNode(id="a", waypoints=[(0.0, 51.0, 7.0), (10.0, 51.001, 7.0)])
        assert node.position(5.0) == (pytest.approx(51.0005), 7.0)
        assert node.position(-1.0) == (51.0, 7.0)
        assert node.position(99.0) == (51.001, 7.0)

    def test_receive_deduplicates(self):
        node = SimNode(id="a", waypoints=[(0.0, 51.0, 7.0)])
        ssid = seed_packet(node)
        assert not node.receive(ssid)
        assert len(node.inbox) == 1

    def test_best_packet_highest_severity(self):
        node = SimNode(id="a", waypoints=[(0.0, 51.0, 7.0)])
        lo = seed_packet(node, severity=3)
        hi = seed_packet(node, severity=12)
        assert node.best_packet() == hi != lo


class TestSimulation:
    def test_two_nodes_complementary_phases(self):
        a, b = grid_nodes(2, spacing_m=30.0)
        b.phase = 5.0  # b listens while a talks
        seed_packet(a)
        log = run_simulation([a, b], duration=10.0)
        assert [d.dst for d in log] == ["n1"]
        assert log[0].t == 0.0
        assert len(b.inbox) == 1

    def test_aligned_phases_never_deliver(self):
        a, b = grid_nodes(2, spacing_m=30.0)
        seed_packet(a)
        log = run_simulation([a, b], duration=30.0)
        assert log == []

    def test_out_of_range_never_delivers(self):
        a, b = grid_nodes(2, spacing_m=10_000.0)
        b.phase = 5.0
        seed_packet(a)
        assert run_simulation([a, b], duration=60.0) == []

    def test_ring_floods_within_five_cycles(self):
        nodes = grid_nodes(5, spacing_m=40.0, ring=True)
        for i, n in enumerate(nodes):
            n.phase = 5.0 * (i % 2)
        seed_packet(nodes[0])
        run_simulation(nodes, duration=5 * 10.0)
        assert all(len(n.inbox) == 1 for n in nodes)

    def test_disconnected_component_never_receives(self):
        nodes = grid_nodes(3, spacing_m=40.0)
        far = grid_nodes(1, spacing_m=0.0)[0]
        far.id = "zfar"
        far.waypoints = [(0.0, 60.0, 20.0)]
        for i, n in enumerate(nodes):
            n.phase = 5.0 * (i % 2)
        far.phase = 5.0
        seed_packet(nodes[0])
        run_simulation(nodes + [far], duration=100.0)
        assert far.inbox == {}
        assert all(len(n.inbox) == 1 for n in nodes)

    def test_packet_conservation(self):
        # every delivery carries one of the seeded checksums, nothing invented
        nodes = grid_nodes(4, spacing_m=40.0)
        for i, n in enumerate(nodes):
            n.phase = 5.0 * (i % 2)
        seeded = {seed_packet(nodes[0], 5), seed_packet(nodes[3], 9)}
        seeded_crcs = {decode_packet(s).checksum for s in seeded}
        log = run_simulation(nodes, duration=120.0)
        assert log and {d.checksum for d in log} <= seeded_crcs
        for n in nodes:
            assert set(n.inbox) <= seeded_crcs

    def test_identical_runs_identical_logs(self):
        def run():
            nodes = grid_nodes(5, spacing_m=40.0, ring=True)
            for i, n in enumerate(nodes):
                n.phase = 5.0 * (i % 2)
            seed_packet(nodes[0])
            return run_simulation(nodes, duration=50.0)

        assert run() == run()

    def test_step_argument_validation(self):
        nodes = grid_nodes(2)
        with pytest.raises(ValueError):
            step_simulation(nodes, 0.0, -1.0, 50.0)
        with pytest.raises(ValueError):
            step_simulation(nodes, 0.0, 1.0, 0.0)

    def test_invalid_node(self):
        with pytest.raises(ValueError):
            SimNode(id="a", waypoints=[])
        with pytest.raises(ValueError):
            SimNode(id="a", waypoints=[(0.0, 51.0, 7.0)], duty=1.5)
