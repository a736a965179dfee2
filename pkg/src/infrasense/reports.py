"""Maintenance indicator records and their GeoJSON / CSV exports."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

KINDS = ("anomaly", "maneuver", "roughness", "cant", "twist", "curvature")


@dataclass(frozen=True)
class Indicator:
    """A located, timestamped maintenance observation."""

    kind: str
    sub_kind: str
    lat: float
    lon: float
    t: float
    severity: int  # 0..255, monotone in the underlying score
    confidence: float  # [0, 1]
    value: float
    unit: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown indicator kind {self.kind!r}")
        if not (0 <= self.severity <= 255):
            raise ValueError("severity must lie in 0..255")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError("confidence must lie in [0, 1]")


def clamp_severity(score: float) -> int:
    return int(min(255, max(0, round(score))))


def indicators_to_geojson(indicators, path=None) -> dict:
    """Export indicators as a GeoJSON FeatureCollection of points."""
    features = []
    for ind in indicators:
        features.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [ind.lon, ind.lat]},
            "properties": {
                "kind": ind.kind,
                "sub_kind": ind.sub_kind,
                "t": ind.t,
                "severity": ind.severity,
                "confidence": ind.confidence,
                "value": ind.value,
                "unit": ind.unit,
            },
        })
    collection = {"type": "FeatureCollection", "features": features}
    if path is not None:
        with open(path, "w") as fh:
            json.dump(collection, fh, indent=2)
    return collection


def indicators_from_geojson(path) -> list[Indicator]:
    with open(path) as fh:
        data = json.load(fh)
    out = []
    for feat in data.get("features", []):
        lon, lat = feat["geometry"]["coordinates"]
        p = feat["properties"]
        out.append(Indicator(
            kind=p["kind"], sub_kind=p.get("sub_kind", ""), lat=lat, lon=lon,
            t=float(p.get("t", 0.0)), severity=int(p.get("severity", 0)),
            confidence=float(p.get("confidence", 1.0)),
            value=float(p.get("value", 0.0)), unit=p.get("unit", ""),
        ))
    return out


def indicators_to_csv(indicators, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "sub_kind", "lat", "lon", "t", "severity", "confidence", "value", "unit"])
        for ind in indicators:
            w.writerow([ind.kind, ind.sub_kind, ind.lat, ind.lon, ind.t,
                        ind.severity, ind.confidence, ind.value, ind.unit])
