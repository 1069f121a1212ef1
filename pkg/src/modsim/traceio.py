"""Reading and writing simulation traces.

Two formats, both newline-delimited and byte-deterministic for a given
trace: ``csv`` writes a directory holding traversals.csv, requests.csv,
rebalancing.csv, and meta.json; ``jsonl`` writes a single file whose first
record is the meta header followed by one typed record per line.  Floats are
serialized with repr, so a round trip preserves them exactly.
"""

from __future__ import annotations

import csv
import json
import os

from .sim_engine import FlowRecord, RequestRecord, SimTrace, Traversal

__all__ = ["write_trace", "read_trace", "TraceFormatError"]

_TRAVERSAL_COLUMNS = ("vehicle", "segment", "enter_s", "exit_s", "occupancy")
_REQUEST_COLUMNS = ("request", "announce_s", "pickup_s", "dropoff_s", "vehicle",
                    "baseline_s", "origin_node", "destination_node",
                    "estimated_delay_s")
_FLOW_COLUMNS = ("tick_s", "from", "to", "count")


class TraceFormatError(ValueError):
    pass


def _meta(trace: SimTrace) -> dict:
    return {
        "mode": trace.mode,
        "q_max_s": trace.q_max,
        "sim_start_s": trace.sim_start,
        "stat_start_s": trace.stat_start,
        "end_s": trace.end,
        "fleet_size": trace.fleet_size,
        "unserved": trace.unserved,
        "final_time_s": trace.final_time,
    }


def _opt(value) -> str:
    return "" if value is None else repr(value)


def write_trace(trace: SimTrace, path, fmt: str = "csv") -> None:
    """Serialize a trace; `path` is a directory for csv, a file for jsonl."""
    if fmt == "csv":
        _write_csv(trace, path)
    elif fmt == "jsonl":
        _write_jsonl(trace, path)
    else:
        raise TraceFormatError(f"unknown trace format {fmt!r}")


def _write_csv(trace, directory):
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "traversals.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_TRAVERSAL_COLUMNS)
        for tr in trace.traversals:
            writer.writerow([tr.vehicle, tr.segment, repr(tr.enter),
                             repr(tr.exit), tr.occupancy])
    with open(os.path.join(directory, "requests.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_REQUEST_COLUMNS)
        for record in trace.requests:
            writer.writerow([
                record.request, repr(record.announce), _opt(record.pickup),
                _opt(record.dropoff),
                "" if record.vehicle is None else record.vehicle,
                repr(record.baseline), record.origin, record.destination,
                _opt(record.estimated_delay),
            ])
    with open(os.path.join(directory, "rebalancing.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_FLOW_COLUMNS)
        for flow in trace.flows:
            writer.writerow([repr(flow.tick), flow.from_station,
                             flow.to_station, flow.count])
    with open(os.path.join(directory, "meta.json"), "w") as fh:
        json.dump(_meta(trace), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_jsonl(trace, path):
    with open(path, "w") as fh:
        fh.write(json.dumps({"type": "meta", **_meta(trace)}, sort_keys=True))
        fh.write("\n")
        for tr in trace.traversals:
            fh.write(json.dumps({
                "type": "traversal", "vehicle": tr.vehicle,
                "segment": tr.segment, "enter_s": tr.enter, "exit_s": tr.exit,
                "occupancy": tr.occupancy,
            }, sort_keys=True))
            fh.write("\n")
        for record in trace.requests:
            fh.write(json.dumps({
                "type": "request", "request": record.request,
                "announce_s": record.announce, "pickup_s": record.pickup,
                "dropoff_s": record.dropoff, "vehicle": record.vehicle,
                "baseline_s": record.baseline, "origin_node": record.origin,
                "destination_node": record.destination,
                "estimated_delay_s": record.estimated_delay,
            }, sort_keys=True))
            fh.write("\n")
        for flow in trace.flows:
            fh.write(json.dumps({
                "type": "rebalancing", "tick_s": flow.tick,
                "from": flow.from_station, "to": flow.to_station,
                "count": flow.count,
            }, sort_keys=True))
            fh.write("\n")


def read_trace(path) -> SimTrace:
    """Load a trace written by :func:`write_trace` (format auto-detected)."""
    if os.path.isdir(path):
        return _read_csv(path)
    return _read_jsonl(path)


def _trace_from_parts(meta, traversals, requests, flows) -> SimTrace:
    requests.sort(key=lambda r: r.request)
    return SimTrace(
        mode=meta["mode"],
        q_max=meta["q_max_s"],
        sim_start=meta["sim_start_s"],
        stat_start=meta["stat_start_s"],
        end=meta["end_s"],
        fleet_size=meta["fleet_size"],
        unserved=meta["unserved"],
        final_time=meta["final_time_s"],
        traversals=traversals,
        requests=requests,
        flows=flows,
    )


def _read_csv(directory):
    meta_path = os.path.join(directory, "meta.json")
    if not os.path.exists(meta_path):
        raise TraceFormatError(f"{directory}: not a trace directory (no meta.json)")
    with open(meta_path) as fh:
        meta = json.load(fh)
    traversals = []
    with open(os.path.join(directory, "traversals.csv"), newline="") as fh:
        for row in csv.DictReader(fh):
            traversals.append(Traversal(
                int(row["vehicle"]), int(row["segment"]),
                float(row["enter_s"]), float(row["exit_s"]),
                int(row["occupancy"]),
            ))
    requests = []
    with open(os.path.join(directory, "requests.csv"), newline="") as fh:
        for row in csv.DictReader(fh):
            requests.append(RequestRecord(
                request=int(row["request"]),
                announce=float(row["announce_s"]),
                origin=int(row["origin_node"]),
                destination=int(row["destination_node"]),
                baseline=float(row["baseline_s"]),
                pickup=float(row["pickup_s"]) if row["pickup_s"] else None,
                dropoff=float(row["dropoff_s"]) if row["dropoff_s"] else None,
                vehicle=int(row["vehicle"]) if row["vehicle"] else None,
                estimated_delay=(float(row["estimated_delay_s"])
                                 if row["estimated_delay_s"] else None),
            ))
    flows = []
    with open(os.path.join(directory, "rebalancing.csv"), newline="") as fh:
        for row in csv.DictReader(fh):
            flows.append(FlowRecord(
                float(row["tick_s"]), int(row["from"]), int(row["to"]),
                int(row["count"]),
            ))
    return _trace_from_parts(meta, traversals, requests, flows)


def _read_jsonl(path):
    meta = None
    traversals = []
    requests = []
    flows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            kind = record.pop("type", None)
            if kind == "meta":
                meta = record
            elif kind == "traversal":
                traversals.append(Traversal(
                    record["vehicle"], record["segment"], record["enter_s"],
                    record["exit_s"], record["occupancy"],
                ))
            elif kind == "request":
                requests.append(RequestRecord(
                    request=record["request"],
                    announce=record["announce_s"],
                    origin=record["origin_node"],
                    destination=record["destination_node"],
                    baseline=record["baseline_s"],
                    pickup=record["pickup_s"],
                    dropoff=record["dropoff_s"],
                    vehicle=record["vehicle"],
                    estimated_delay=record["estimated_delay_s"],
                ))
            elif kind == "rebalancing":
                flows.append(FlowRecord(
                    record["tick_s"], record["from"], record["to"],
                    record["count"],
                ))
            else:
                raise TraceFormatError(f"{path}: unknown record type {kind!r}")
    if meta is None:
        raise TraceFormatError(f"{path}: no meta record")
    return _trace_from_parts(meta, traversals, requests, flows)
