"""Command-line orchestration.

Subcommands: analyze, synth, aggregate, simulate, encode, decode.
Exit codes: 0 success, 2 usage, 3 input error, 4 numeric failure.
Outputs are written to a temporary directory and moved into place on
success, so a failed run never leaves partial files.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import shutil
import sys
import tempfile

from . import __version__
from .aggregation import AggregationError, MatchPolicy, SegmentStore, StoreError
from .config import ConfigError, PipelineConfig, config_hash, config_values, load_config
from .dissemination import (
    Delivery,
    FormatError,
    IntegrityError,
    SimNode,
    decode_packet,
    encode_packet,
    run_simulation,
)
from .features import FeatureError, feature_matrix, FramePlan
from .rail_analysis import (
    RailAnalysisError,
    TrackConstants,
    cant_from_roll,
    classify_curves,
    geometry_to_csv,
)
from .reports import indicators_from_geojson, indicators_to_geojson
from .road_analysis import (
    RoadAnalysisError,
    StepInstabilityError,
    classify_maneuvers,
    detect_anomalies,
    roughness_index,
)
from .synth import SynthSpec, generate_trace
from .transforms import TransformError
from .trace_model import TraceError, gravity_split, parse_trace, reorient, write_trace_csv

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_NUMERIC = 4


def _fail(code: int, message: str) -> int:
    print(json.dumps({"error": message, "exit": code}), file=sys.stderr)
    return code


def _analyze_road(trace, cfg: PipelineConfig, out: str) -> dict:
    reoriented = reorient(trace, tau=cfg.gravity_tau)
    rt = reoriented.trace
    _, linear = gravity_split(rt, tau=cfg.gravity_tau)
    plan = FramePlan(cfg.frame_window_len, cfg.frame_overlap, rt.nominal_rate)
    matrix = feature_matrix(linear[:, 2], plan, cfg.feature_set, t0=float(rt.t[0]))
    matrix.to_csv(os.path.join(out, "features.csv"))

    result = detect_anomalies(matrix, rt.fixes, k=cfg.detector_k,
                              feature_subset=cfg.detector_features)
    indicators = list(result.indicators)
    if rt.gyro is not None:
        indicators += classify_maneuvers(rt, cfg.maneuver_omega_on, cfg.maneuver_omega_off)
    indicators_to_geojson(indicators, os.path.join(out, "indicators.geojson"))

    reports, skipped = roughness_index(
        rt, band=(cfg.roughness_band_min, cfg.roughness_band_max),
        segment_length=cfg.roughness_segment_length, tau=cfg.gravity_tau)
    with open(os.path.join(out, "roughness.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s_start", "segment_length", "index_m_per_km", "mean_speed",
                    "band_min", "band_max"])
        for r in reports:
            w.writerow([r.s_start, r.segment_length, r.index, r.mean_speed, *r.band])
    return {
        "indicators": len(indicators),
        "anomalies": len(result.indicators),
        "roughness_segments": len(reports),
        "roughness_skipped": skipped,
        "forward_resolved": reoriented.forward_resolved,
    }


def _analyze_rail(trace, cfg: PipelineConfig, out: str) -> dict:
    reoriented = reorient(trace, tau=cfg.gravity_tau)
    rt = reoriented.trace
    points, skipped = cant_from_roll(
        rt, TrackConstants(),
        wavelength_band=(cfg.rail_wavelength_min, cfg.rail_wavelength_max),
        tau=cfg.gravity_tau)
    geometry_to_csv(points, os.path.join(out, "geometry.csv"),
                    twist_bases=cfg.rail_twist_bases)
    indicators = classify_curves(points, threshold=cfg.rail_curvature_threshold)
    indicators_to_geojson(indicators, os.path.join(out, "indicators.geojson"))
    return {"indicators": len(indicators), "geometry_points": len(points),
            "spans_skipped": skipped}


def cmd_analyze(args) -> int:
    try:
        cfg = load_config(args.config) if args.config else PipelineConfig()
    except (OSError, ConfigError) as e:
        return _fail(EXIT_INPUT, f"config: {e}")
    try:
        fmt = "jsonl" if str(args.trace).endswith(".jsonl") else "csv"
        trace, report = parse_trace(args.trace, fmt)
    except (OSError, TraceError, ValueError) as e:
        return _fail(EXIT_INPUT, f"trace: {e}")

    os.makedirs(args.out, exist_ok=True)
    tmp = tempfile.mkdtemp(prefix=".infrasense-", dir=args.out)
    try:
        if cfg.context == "road":
            counts = _analyze_road(trace, cfg, tmp)
        else:
            counts = _analyze_rail(trace, cfg, tmp)
        manifest = {
            "tool": "infrasense",
            "version": __version__,
            "config_hash": config_hash(cfg),
            "config": config_values(cfg),
            "trace": str(args.trace),
            "parse_report": {"rows_read": report.rows_read,
                             "rows_dropped": report.rows_dropped,
                             "reorders": report.reorders},
            "counts": counts,
        }
        with open(os.path.join(tmp, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, default=str)
    except (TraceError, FeatureError, TransformError, RoadAnalysisError,
            RailAnalysisError, ValueError) as e:
        shutil.rmtree(tmp, ignore_errors=True)
        return _fail(EXIT_NUMERIC, f"analysis: {e}")
    except Exception:
        shutil.rmtree(tmp, ignore_errors=True)
        raise

    for name in os.listdir(tmp):
        os.replace(os.path.join(tmp, name), os.path.join(args.out, name))
    os.rmdir(tmp)
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        spec = SynthSpec.from_json(args.spec)
        if args.seed is not None:
            from dataclasses import replace

            spec = replace(spec, seed=args.seed)
    except (OSError, TypeError, ValueError, json.JSONDecodeError) as e:
        return _fail(EXIT_INPUT, f"spec: {e}")
    try:
        trace = generate_trace(spec)
    except StepInstabilityError as e:
        return _fail(EXIT_NUMERIC, f"synth: {e}")
    write_trace_csv(trace, args.out)
    return EXIT_OK


def cmd_aggregate(args) -> int:
    policy = MatchPolicy(radius=args.radius, half_life=args.half_life)
    try:
        if os.path.exists(args.store):
            store = SegmentStore.load(args.store, policy)
        else:
            store = SegmentStore()
    except StoreError as e:
        return _fail(EXIT_INPUT, f"store: {e}")
    try:
        for path in args.indicators:
            for ind in indicators_from_geojson(path):
                store.contribute(ind, policy)
    except (OSError, KeyError, ValueError, AggregationError) as e:
        return _fail(EXIT_INPUT, f"indicators: {e}")
    store.save(args.store)
    if args.out:
        store.snapshot_geojson(args.out)
    return EXIT_OK


def _load_scenario(path) -> list[SimNode]:
    nodes = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            node = SimNode(
                id=str(obj["id"]),
                waypoints=[tuple(w) for w in obj["waypoints"]],
                duty=obj.get("duty", 0.5),
                period=obj.get("period", 10.0),
                phase=obj.get("phase", 0.0),
            )
            for ssid in obj.get("packets", []):
                node.receive(ssid)
            nodes.append(node)
    return nodes


def cmd_simulate(args) -> int:
    try:
        nodes = _load_scenario(args.scenario)
    except (OSError, KeyError, ValueError, json.JSONDecodeError) as e:
        return _fail(EXIT_INPUT, f"scenario: {e}")
    log = run_simulation(nodes, duration=args.duration, dt=args.dt,
                         comm_range=args.range)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "src", "dst", "checksum"])
        for d in log:
            w.writerow([d.t, d.src, d.dst, d.checksum])
    return EXIT_OK


def cmd_encode(args) -> int:
    try:
        indicators = indicators_from_geojson(args.indicators)
    except (OSError, KeyError, ValueError) as e:
        return _fail(EXIT_INPUT, f"indicators: {e}")
    ssid, report = encode_packet(args.lat, args.lon, indicators)
    print(ssid)
    if report.truncated or report.clamped:
        print(json.dumps({"truncated": report.truncated, "clamped": report.clamped}),
              file=sys.stderr)
    return EXIT_OK


def cmd_decode(args) -> int:
    try:
        packet = decode_packet(args.ssid)
    except (FormatError, IntegrityError) as e:
        return _fail(EXIT_INPUT, f"decode: {e}")
    lat, lon = packet.origin
    print(json.dumps({
        "version": packet.version,
        "flags": packet.flags,
        "origin": {"lat": lat, "lon": lon},
        "entries": [
            {"d_north_m": e.d_north * 10, "d_east_m": e.d_east * 10,
             "type": e.type, "severity": e.severity, "confidence": e.confidence}
            for e in packet.entries
        ],
    }))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="infrasense",
        description="Crowd-sensed transport infrastructure monitoring toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="run the road or rail pipeline on a trace")
    pa.add_argument("trace")
    pa.add_argument("--config", default=None)
    pa.add_argument("--out", required=True)
    pa.set_defaults(func=cmd_analyze)

    ps = sub.add_parser("synth", help="generate a synthetic trace")
    ps.add_argument("--spec", required=True)
    ps.add_argument("--out", required=True)
    ps.add_argument("--seed", type=int, default=None)
    ps.set_defaults(func=cmd_synth)

    pg = sub.add_parser("aggregate", help="fuse indicator files into a store")
    pg.add_argument("indicators", nargs="+")
    pg.add_argument("--store", required=True)
    pg.add_argument("--out", default=None)
    pg.add_argument("--radius", type=float, default=15.0)
    pg.add_argument("--half-life", type=float, default=30 * 86400.0)
    pg.set_defaults(func=cmd_aggregate)

    pm = sub.add_parser("simulate", help="run the beacon dissemination simulator")
    pm.add_argument("--scenario", required=True)
    pm.add_argument("--out", required=True)
    pm.add_argument("--seed", type=int, default=0)
    pm.add_argument("--duration", type=float, default=60.0)
    pm.add_argument("--dt", type=float, default=1.0)
    pm.add_argument("--range", type=float, default=50.0)
    pm.set_defaults(func=cmd_simulate)

    pe = sub.add_parser("encode", help="encode indicators into an SSID beacon")
    pe.add_argument("indicators")
    pe.add_argument("--lat", type=float, required=True)
    pe.add_argument("--lon", type=float, required=True)
    pe.set_defaults(func=cmd_encode)

    pd = sub.add_parser("decode", help="decode an SSID beacon")
    pd.add_argument("ssid")
    pd.set_defaults(func=cmd_decode)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
