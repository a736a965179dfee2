"""SSID beacon codec and cooperative opportunistic dissemination simulator.

Payload: 24 bytes, little-endian — [version|flags](1), count(1),
lat i32 deg*1e-6 (4), lon i32 (4), 3 x entry(4): d_north i8 (x10 m),
d_east i8 (x10 m), [type|severity](1), confidence u8; CRC-16/CCITT over
bytes 0..21 (2). URL-safe base64 turns the 24 bytes into exactly 32
printable characters, fitting the 32-octet SSID field.
"""

from __future__ import annotations

import base64
import math
import struct
from dataclasses import dataclass, field

from .aggregation import great_circle
from .reports import KINDS, Indicator

PACKET_BYTES = 24
SSID_CHARS = 32
MAX_ENTRIES = 3
OFFSET_UNIT = 10.0  # m per LSB of the i8 offsets
_B64_ALPHABET = set("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_")

TYPE_CODES = {k: i + 1 for i, k in enumerate(KINDS)}
TYPE_NAMES = {v: k for k, v in TYPE_CODES.items()}


class FormatError(ValueError):
    """Not a well-formed 32-character beacon."""


class IntegrityError(ValueError):
    """Well-formed beacon with a failing checksum."""


def crc16_ccitt(data: bytes, init: int = 0xFFFF) -> int:
    """CRC-16/CCITT-FALSE (poly 0x1021)."""
    crc = init
    for byte in data:
        crc ^= byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021) if crc & 0x8000 else (crc << 1)
            crc &= 0xFFFF
    return crc


@dataclass(frozen=True)
class PacketEntry:
    d_north: int  # i8, units of 10 m
    d_east: int  # i8
    type: int  # 4 bits
    severity: int  # 4 bits
    confidence: int  # u8

    def __post_init__(self):
        if not (-128 <= self.d_north <= 127 and -128 <= self.d_east <= 127):
            raise ValueError("offsets exceed the i8 range")
        if not (0 <= self.type <= 15 and 0 <= self.severity <= 15):
            raise ValueError("type and severity are 4-bit fields")
        if not (0 <= self.confidence <= 255):
            raise ValueError("confidence is a u8")


@dataclass(frozen=True)
class SsidPacket:
    version: int  # 4 bits
    flags: int  # 4 bits
    lat_e6: int  # i32, degrees * 1e-6
    lon_e6: int
    entries: tuple[PacketEntry, ...] = ()

    def __post_init__(self):
        if not (0 <= self.version <= 15 and 0 <= self.flags <= 15):
            raise ValueError("version and flags are 4-bit fields")
        if len(self.entries) > MAX_ENTRIES:
            raise ValueError(f"at most {MAX_ENTRIES} entries")
        for bound, val in ((90_000_000, self.lat_e6), (180_000_000, self.lon_e6)):
            if abs(val) > bound:
                raise ValueError("origin out of WGS84 range")

    @property
    def origin(self) -> tuple[float, float]:
        return self.lat_e6 / 1e6, self.lon_e6 / 1e6

    def max_severity(self) -> int:
        return max((e.severity for e in self.entries), default=0)

    def to_bytes(self) -> bytes:
        body = struct.pack("<BBii", (self.version << 4) | self.flags,
                           len(self.entries), self.lat_e6, self.lon_e6)
        for e in self.entries:
            body += struct.pack("<bbBB", e.d_north, e.d_east,
                                (e.type << 4) | e.severity, e.confidence)
        body += b"\x00" * 4 * (MAX_ENTRIES - len(self.entries))
        return body + struct.pack("<H", crc16_ccitt(body))

    def to_ssid(self) -> str:
        out = base64.urlsafe_b64encode(self.to_bytes()).decode("ascii")
        assert len(out) == SSID_CHARS
        return out

    @property
    def checksum(self) -> int:
        return struct.unpack("<H", self.to_bytes()[-2:])[0]


def decode_packet(ssid: str) -> SsidPacket:
    """Inverse of :meth:`SsidPacket.to_ssid`, with checksum verification."""
    if not isinstance(ssid, str) or len(ssid) != SSID_CHARS:
        raise FormatError(f"SSID must be exactly {SSID_CHARS} characters")
    if not set(ssid) <= _B64_ALPHABET:
        raise FormatError("SSID contains characters outside the base64url alphabet")
    raw = base64.urlsafe_b64decode(ssid)
    body, (crc,) = raw[:-2], struct.unpack("<H", raw[-2:])
    if crc16_ccitt(body) != crc:
        raise IntegrityError("checksum mismatch")
    vf, count, lat_e6, lon_e6 = struct.unpack("<BBii", body[:10])
    if count > MAX_ENTRIES:
        raise FormatError(f"entry count {count} out of range")
    entries = []
    for i in range(count):
        dn, de, ts, conf = struct.unpack("<bbBB", body[10 + 4 * i:14 + 4 * i])
        entries.append(PacketEntry(dn, de, ts >> 4, ts & 0xF, conf))
    try:
        return SsidPacket(vf >> 4, vf & 0xF, lat_e6, lon_e6, tuple(entries))
    except ValueError as e:
        raise FormatError(str(e)) from e


@dataclass(frozen=True)
class EncodeReport:
    truncated: int  # entries dropped beyond the 3 highest severities
    clamped: int  # entries whose offset hit the i8 range


def _local_offsets(origin_lat: float, origin_lon: float,
                   lat: float, lon: float) -> tuple[float, float]:
    """North/east meters of (lat, lon) from the origin, local tangent plane."""
    north = math.radians(lat - origin_lat) * 6371000.0
    east = math.radians(lon - origin_lon) * 6371000.0 * math.cos(math.radians(origin_lat))
    return north, east


def encode_packet(origin_lat: float, origin_lon: float, anomalies,
                  version: int = 1, flags: int = 0) -> tuple[str, EncodeReport]:
    """Encode up to 3 nearby indicators into a 32-character beacon.

    Excess entries are dropped by descending severity; offsets beyond the
    +-1270 m representable range are clamped and flagged.
    """
    ranked = sorted(anomalies, key=lambda a: -a.severity)
    truncated = max(0, len(ranked) - MAX_ENTRIES)
    clamped = 0
    entries = []
    for ind in ranked[:MAX_ENTRIES]:
        north, east = _local_offsets(origin_lat, origin_lon, ind.lat, ind.lon)
        dn = int(round(north / OFFSET_UNIT))
        de = int(round(east / OFFSET_UNIT))
        if not (-127 <= dn <= 127 and -127 <= de <= 127):
            clamped += 1
            dn = max(-127, min(127, dn))
            de = max(-127, min(127, de))
        entries.append(PacketEntry(
            d_north=dn, d_east=de, type=TYPE_CODES.get(ind.kind, 0),
            severity=min(15, ind.severity >> 4), confidence=int(round(ind.confidence * 255)),
        ))
    packet = SsidPacket(version, flags,
                        int(round(origin_lat * 1e6)), int(round(origin_lon * 1e6)),
                        tuple(entries))
    return packet.to_ssid(), EncodeReport(truncated=truncated, clamped=clamped)


@dataclass
class SimNode:
    """One simulated vehicle with a duty-cycled WiFi radio."""

    id: str
    waypoints: list[tuple[float, float, float]]  # (t, lat, lon), t ascending
    duty: float = 0.5  # hotspot fraction per period
    period: float = 10.0  # s
    phase: float = 0.0  # s offset of the duty schedule
    inbox: dict[int, str] = field(default_factory=dict)  # checksum -> ssid

    def __post_init__(self):
        if not (0.0 <= self.duty <= 1.0) or self.period <= 0:
            raise ValueError("invalid duty schedule")
        if not self.waypoints:
            raise ValueError("node needs at least one waypoint")

    def position(self, t: float) -> tuple[float, float]:
        ts = [w[0] for w in self.waypoints]
        if t <= ts[0]:
            return self.waypoints[0][1], self.waypoints[0][2]
        if t >= ts[-1]:
            return self.waypoints[-1][1], self.waypoints[-1][2]
        import bisect

        i = bisect.bisect_right(ts, t)
        t0, la0, lo0 = self.waypoints[i - 1]
        t1, la1, lo1 = self.waypoints[i]
        f = (t - t0) / (t1 - t0)
        return la0 + f * (la1 - la0), lo0 + f * (lo1 - lo0)

    def mode(self, t: float) -> str:
        return "hotspot" if ((t - self.phase) % self.period) < self.duty * self.period else "client"

    def receive(self, ssid: str) -> bool:
        """Deduplicated insert; True when the packet is new to this node."""
        checksum = decode_packet(ssid).checksum
        if checksum in self.inbox:
            return False
        self.inbox[checksum] = ssid
        return True

    def best_packet(self) -> str | None:
        """Highest-severity held packet (ties by checksum, deterministic)."""
        if not self.inbox:
            return None
        ranked = sorted(self.inbox.items(),
                        key=lambda kv: (-decode_packet(kv[1]).max_severity(), kv[0]))
        return ranked[0][1]


@dataclass(frozen=True)
class Delivery:
    t: float
    src: str
    dst: str
    checksum: int


def step_simulation(nodes: list[SimNode], t: float, dt: float,
                    comm_range: float) -> list[Delivery]:
    """One synchronous step: every hotspot broadcasts its best packet to all
    client nodes within `comm_range` meters. Returns the new deliveries."""
    if dt <= 0 or comm_range <= 0:
        raise ValueError("dt and range must be positive")
    ordered = sorted(nodes, key=lambda n: n.id)
    log = []
    for src in ordered:
        if src.mode(t) != "hotspot":
            continue
        ssid = src.best_packet()
        if ssid is None:
            continue
        slat, slon = src.position(t)
        for dst in ordered:
            if dst.id == src.id or dst.mode(t) != "client":
                continue
            dlat, dlon = dst.position(t)
            if great_circle(slat, slon, dlat, dlon) > comm_range:
                continue
            if dst.receive(ssid):
                log.append(Delivery(t=t, src=src.id, dst=dst.id,
                                    checksum=decode_packet(ssid).checksum))
    return log


def run_simulation(nodes: list[SimNode], duration: float, dt: float = 1.0,
                   comm_range: float = 50.0) -> list[Delivery]:
    """Step the simulation over [0, duration). Deterministic given the
    node set and schedule."""
    log = []
    steps = int(round(duration / dt))
    for i in range(steps):
        log.extend(step_simulation(nodes, i * dt, dt, comm_range))
    return log
