"""Crowd-side fusion: spatial matching of indicators to segment anchors
and time-decayed aggregation per anchor.

Matching is an exhaustive great-circle nearest-neighbor scan over anchors
of the same kind (the contract any accelerator must reproduce). Fusion
dilutes old evidence with an exponential half-life.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field, replace

from .reports import Indicator

EARTH_RADIUS = 6371000.0  # m
HISTORY_LIMIT = 64


class AggregationError(Exception):
    pass


class StoreError(AggregationError):
    pass


def great_circle(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Haversine distance in meters."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dphi = p2 - p1
    dlmb = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dlmb / 2) ** 2
    return 2 * EARTH_RADIUS * math.asin(math.sqrt(a))


@dataclass(frozen=True)
class MatchPolicy:
    radius: float = 15.0  # m
    half_life: float = 30 * 86400.0  # s

    def __post_init__(self):
        if self.radius <= 0 or self.half_life <= 0:
            raise ValueError("radius and half_life must be positive")


@dataclass
class SegmentAnchor:
    id: int
    lat: float
    lon: float
    kind: str
    contribution_count: int = 1


@dataclass
class SegmentState:
    """Time-decayed aggregate of one anchor."""

    anchor: SegmentAnchor
    value: float = 0.0
    weight_sum: float = 0.0
    last_update: float = float("-inf")
    history: deque = field(default_factory=lambda: deque(maxlen=HISTORY_LIMIT))


def fuse(state: SegmentState, t: float, value: float,
         policy: MatchPolicy, device: str = "") -> SegmentState:
    """Fold one contribution into the aggregate.

    Prior evidence decays by 2^(-|dt| / half_life); the new contribution
    enters with weight 1. Late arrivals decay against |dt| without
    rewinding `last_update`.
    """
    if not math.isfinite(value):
        raise AggregationError("non-finite contribution value")
    if state.weight_sum == 0.0:
        d, w_old = 0.0, 0.0
    else:
        dt = abs(t - state.last_update)
        d = 2.0 ** (-dt / policy.half_life)
        w_old = state.weight_sum
    w_new = d * w_old + 1.0
    v_new = (d * w_old * state.value + value) / w_new
    hist = deque(state.history, maxlen=HISTORY_LIMIT)
    hist.append((t, value, device))
    return SegmentState(
        anchor=state.anchor, value=v_new, weight_sum=w_new,
        last_update=max(t, state.last_update if state.weight_sum else t),
        history=hist,
    )


class SegmentStore:
    """In-memory anchor store with a JSONL event log for persistence."""

    def __init__(self):
        self.states: dict[int, SegmentState] = {}
        self._next_id = 0
        self.records: list[dict] = []
        self.rejected = 0

    def __len__(self) -> int:
        return len(self.states)

    def match_segment(self, indicator: Indicator, policy: MatchPolicy) -> int:
        """Nearest same-kind anchor within the policy radius, or a new one.

        Ties break toward the smaller anchor id; the matched anchor centroid
        moves to the contribution-count-weighted mean.
        """
        best_id, best_d = None, None
        for aid in sorted(self.states):
            st = self.states[aid]
            if st.anchor.kind != indicator.kind:
                continue
            d = great_circle(st.anchor.lat, st.anchor.lon, indicator.lat, indicator.lon)
            if d <= policy.radius and (best_d is None or d < best_d):
                best_id, best_d = aid, d
        if best_id is None:
            aid = self._next_id
            self._next_id += 1
            anchor = SegmentAnchor(id=aid, lat=indicator.lat, lon=indicator.lon,
                                   kind=indicator.kind)
            self.states[aid] = SegmentState(anchor=anchor)
            return aid
        anchor = self.states[best_id].anchor
        n = anchor.contribution_count
        anchor.lat = (anchor.lat * n + indicator.lat) / (n + 1)
        anchor.lon = (anchor.lon * n + indicator.lon) / (n + 1)
        anchor.contribution_count = n + 1
        return best_id

    def contribute(self, indicator: Indicator, policy: MatchPolicy,
                   device: str = "") -> int:
        """Match then fuse one indicator; logs the event. Returns anchor id."""
        if not math.isfinite(indicator.value):
            self.rejected += 1
            return -1
        aid = self.match_segment(indicator, policy)
        self.states[aid] = fuse(self.states[aid], indicator.t, indicator.value,
                                policy, device)
        self.records.append({
            "op": "fuse", "anchor_id": aid, "t": indicator.t,
            "value": indicator.value, "lat": indicator.lat, "lon": indicator.lon,
            "kind": indicator.kind,
        })
        return aid

    def snapshot(self, kind: str | None = None, bbox=None) -> list[SegmentState]:
        """States (optionally filtered by kind and (min_lat, min_lon, max_lat,
        max_lon) bbox), sorted by anchor id."""
        if bbox is not None:
            min_lat, min_lon, max_lat, max_lon = bbox
            if min_lat > max_lat or min_lon > max_lon:
                raise AggregationError("inverted bbox")
        out = []
        for aid in sorted(self.states):
            st = self.states[aid]
            if kind is not None and st.anchor.kind != kind:
                continue
            if bbox is not None and not (
                min_lat <= st.anchor.lat <= max_lat and min_lon <= st.anchor.lon <= max_lon
            ):
                continue
            out.append(st)
        return out

    def save(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec) + "\n")

    @classmethod
    def load(cls, path, policy: MatchPolicy) -> "SegmentStore":
        """Rebuild deterministically by replaying the event log."""
        store = cls()
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                    ind = Indicator(
                        kind=rec["kind"], sub_kind="", lat=rec["lat"], lon=rec["lon"],
                        t=rec["t"], severity=0, confidence=1.0, value=rec["value"],
                    )
                    expect = rec["anchor_id"]
                except (KeyError, ValueError, json.JSONDecodeError) as e:
                    raise StoreError(f"corrupt store line {lineno}: {e}") from e
                aid = store.contribute(ind, policy)
                if aid != expect:
                    raise StoreError(
                        f"store line {lineno}: replay assigned anchor {aid}, "
                        f"log says {expect} (policy mismatch?)"
                    )
        return store

    def snapshot_geojson(self, path=None, kind: str | None = None, bbox=None) -> dict:
        features = []
        for st in self.snapshot(kind, bbox):
            features.append({
                "type": "Feature",
                "geometry": {"type": "Point",
                             "coordinates": [st.anchor.lon, st.anchor.lat]},
                "properties": {
                    "anchor_id": st.anchor.id,
                    "kind": st.anchor.kind,
                    "value": st.value,
                    "weight_sum": st.weight_sum,
                    "last_update": st.last_update,
                    "contribution_count": st.anchor.contribution_count,
                },
            })
        collection = {"type": "FeatureCollection", "features": features}
        if path is not None:
            with open(path, "w") as fh:
                json.dump(collection, fh, indent=2)
        return collection
