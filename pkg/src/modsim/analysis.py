"""Post-run analysis: segment densities, fleet occupancy, and summaries.

Traffic density of a segment over a window is the time-average number of
vehicles on it: the summed overlap of its traversal intervals with the
window, divided by window length and segment length (vehicles per meter).
A segment is heavily loaded above half the critical density and congested
above the critical density itself; both thresholds are strict.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .road_network import RoadNetwork
from .sim_engine import SimTrace

__all__ = [
    "CRITICAL_DENSITY",
    "HEAVY_LOAD_DENSITY",
    "DENSITY_BIN_WIDTH",
    "AnalysisError",
    "DensityReport",
    "OccupancyReport",
    "SummaryReport",
    "edge_densities",
    "occupancy_series",
    "summarize",
    "write_density_csv",
    "write_density_histogram_csv",
    "write_occupancy_csv",
    "summary_to_dict",
]

CRITICAL_DENSITY = 0.08  # vehicles per meter; above this a segment is congested
HEAVY_LOAD_DENSITY = CRITICAL_DENSITY / 2  # heavily loaded above this
DENSITY_BIN_WIDTH = 0.004  # 20 histogram bins up to the critical density


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class DensityReport:
    window: tuple[float, float]
    densities: dict[int, float]  # segment id -> veh/m; zero-density segments omitted
    average_density: float  # mean over the segments present
    congested_segments: int
    heavily_loaded_segments: int
    histogram_edges: tuple[float, ...]
    histogram_counts: tuple[int, ...]


@dataclass(frozen=True)
class OccupancyReport:
    window: tuple[float, float]
    interval: float
    samples: np.ndarray  # one entry per (instant, moving vehicle) pair
    histogram: dict[int, int]
    mean: float
    instants: int


@dataclass(frozen=True)
class SummaryReport:
    window: tuple[float, float]
    mode: str
    q_max: float | None
    total_distance_km: float
    vehicles_used: int
    avg_distance_per_vehicle_km: float
    average_density: float
    congested_segments: int
    heavily_loaded_segments: int
    mean_occupancy: float
    served: int
    unserved: int
    requests_in_window: int
    mean_delay_s: float
    max_delay_s: float
    delay_violations: int
    delay_violation_fraction: float
    max_estimated_delay_s: float


def _window(trace: SimTrace, window) -> tuple[float, float]:
    lo, hi = window if window is not None else trace.stats_window
    if not hi > lo:
        raise AnalysisError(f"empty time window [{lo}, {hi})")
    return float(lo), float(hi)


def edge_densities(trace: SimTrace, network: RoadNetwork, window=None,
                   bin_width: float = DENSITY_BIN_WIDTH) -> DensityReport:
    """Per-segment time-averaged densities over the window, with histogram.

    Only segments with positive in-window vehicle time appear; unused ones
    would otherwise drown the distribution in zeros.  Histogram bins have
    width `bin_width` starting at zero and extend far enough to hold the
    maximum observed density.
    """
    lo, hi = _window(trace, window)
    span = hi - lo
    vehicle_time: dict[int, float] = {}
    for tr in trace.traversals:
        overlap = min(tr.exit, hi) - max(tr.enter, lo)
        if overlap > 0:
            vehicle_time[tr.segment] = vehicle_time.get(tr.segment, 0.0) + overlap

    densities = {
        sid: vt / (span * network.segments[sid].length)
        for sid, vt in sorted(vehicle_time.items())
    }
    values = np.array(list(densities.values()))
    congested = int((values > CRITICAL_DENSITY).sum()) if values.size else 0
    heavy = int((values > HEAVY_LOAD_DENSITY).sum()) if values.size else 0
    average = float(values.mean()) if values.size else 0.0

    if values.size:
        nbins = max(1, int(math.ceil(float(values.max()) / bin_width)))
    else:
        nbins = 1
    edges = np.arange(nbins + 1) * bin_width
    counts, _ = np.histogram(values, bins=edges)
    return DensityReport(
        window=(lo, hi),
        densities=densities,
        average_density=average,
        congested_segments=congested,
        heavily_loaded_segments=heavy,
        histogram_edges=tuple(float(e) for e in edges),
        histogram_counts=tuple(int(c) for c in counts),
    )


def occupancy_series(trace: SimTrace, window=None,
                     interval: float = 60.0) -> OccupancyReport:
    """Occupancy of moving vehicles sampled at fixed instants.

    Sampling instants are window start plus multiples of `interval`, which
    must divide the window length; each vehicle on a segment at an instant
    (entry inclusive, exit exclusive) contributes its passenger count.
    Parked vehicles contribute nothing.
    """
    lo, hi = _window(trace, window)
    steps = (hi - lo) / interval
    if abs(steps - round(steps)) > 1e-9 or round(steps) < 1:
        raise AnalysisError(
            f"interval {interval} does not divide window [{lo}, {hi})"
        )
    instants = lo + np.arange(int(round(steps))) * interval

    if trace.traversals:
        enters = np.array([tr.enter for tr in trace.traversals])
        exits = np.array([tr.exit for tr in trace.traversals])
        occs = np.array([tr.occupancy for tr in trace.traversals])
        chunks = [
            occs[(enters <= t) & (t < exits)]
            for t in instants
        ]
        samples = np.concatenate(chunks) if chunks else np.array([], dtype=int)
    else:
        samples = np.array([], dtype=int)

    histogram = {
        int(v): int(c) for v, c in zip(*np.unique(samples, return_counts=True))
    } if samples.size else {}
    mean = float(samples.mean()) if samples.size else 0.0
    return OccupancyReport(
        window=(lo, hi),
        interval=float(interval),
        samples=samples,
        histogram=histogram,
        mean=mean,
        instants=len(instants),
    )


def summarize(trace: SimTrace, network: RoadNetwork, window=None) -> SummaryReport:
    """Headline comparison figures for one run over the window.

    Distance prorates each traversal by its in-window share, so paired runs
    of different scenario modes are measured over identical spans.  Delay
    statistics cover requests announced within the window; realized delay is
    (dropoff - announce) - baseline and violations count served requests
    whose realized delay exceeds the run's q_max.
    """
    lo, hi = _window(trace, window)
    per_vehicle: dict[int, float] = {}
    for tr in trace.traversals:
        overlap = min(tr.exit, hi) - max(tr.enter, lo)
        if overlap > 0:
            meters = network.segments[tr.segment].length * (
                overlap / (tr.exit - tr.enter)
            )
            per_vehicle[tr.vehicle] = per_vehicle.get(tr.vehicle, 0.0) + meters
    total_m = sum(per_vehicle.values())
    used = len(per_vehicle)

    density = edge_densities(trace, network, (lo, hi))

    interval = 60.0
    steps = (hi - lo) / interval
    if abs(steps - round(steps)) > 1e-9 or round(steps) < 1:
        interval = (hi - lo) / 60.0
    occupancy = occupancy_series(trace, (lo, hi), interval)

    in_window = [r for r in trace.requests if lo <= r.announce < hi]
    served = [r for r in in_window if r.served]
    delays = np.array([(r.dropoff - r.announce) - r.baseline for r in served])
    estimated = np.array([r.estimated_delay for r in served
                          if r.estimated_delay is not None])
    if trace.q_max is not None and delays.size:
        violations = int((delays > trace.q_max).sum())
    else:
        violations = 0
    return SummaryReport(
        window=(lo, hi),
        mode=trace.mode,
        q_max=trace.q_max,
        total_distance_km=total_m / 1000.0,
        vehicles_used=used,
        avg_distance_per_vehicle_km=(total_m / used / 1000.0) if used else 0.0,
        average_density=density.average_density,
        congested_segments=density.congested_segments,
        heavily_loaded_segments=density.heavily_loaded_segments,
        mean_occupancy=occupancy.mean,
        served=len(served),
        unserved=len(in_window) - len(served),
        requests_in_window=len(in_window),
        mean_delay_s=float(delays.mean()) if delays.size else 0.0,
        max_delay_s=float(delays.max()) if delays.size else 0.0,
        delay_violations=violations,
        delay_violation_fraction=(violations / len(served)) if served else 0.0,
        max_estimated_delay_s=float(estimated.max()) if estimated.size else 0.0,
    )


def write_density_csv(report: DensityReport, network: RoadNetwork, path) -> None:
    """Per-segment densities with endpoint geometry, for mapping."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["segment", "from_x", "from_y", "to_x", "to_y", "length_m",
             "density_veh_per_m"]
        )
        for sid, density in report.densities.items():
            seg = network.segments[sid]
            fx, fy = network.position(seg.from_node)
            tx, ty = network.position(seg.to_node)
            writer.writerow([sid, repr(fx), repr(fy), repr(tx), repr(ty),
                             repr(seg.length), repr(density)])


def write_density_histogram_csv(report: DensityReport, path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["bin_lo", "bin_hi", "count"])
        for k, count in enumerate(report.histogram_counts):
            writer.writerow([repr(report.histogram_edges[k]),
                             repr(report.histogram_edges[k + 1]), count])


def write_occupancy_csv(report: OccupancyReport, path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["occupancy", "count"])
        for occ in sorted(report.histogram):
            writer.writerow([occ, report.histogram[occ]])


def summary_to_dict(report: SummaryReport) -> dict:
    out = {
        "window_s": list(report.window),
        "mode": report.mode,
        "q_max_s": report.q_max,
        "total_distance_km": report.total_distance_km,
        "vehicles_used": report.vehicles_used,
        "avg_distance_per_vehicle_km": report.avg_distance_per_vehicle_km,
        "average_density_veh_per_m": report.average_density,
        "congested_segments": report.congested_segments,
        "heavily_loaded_segments": report.heavily_loaded_segments,
        "mean_occupancy": report.mean_occupancy,
        "served": report.served,
        "unserved": report.unserved,
        "requests_in_window": report.requests_in_window,
        "mean_delay_s": report.mean_delay_s,
        "max_delay_s": report.max_delay_s,
        "delay_violations": report.delay_violations,
        "delay_violation_fraction": report.delay_violation_fraction,
        "max_estimated_delay_s": report.max_estimated_delay_s,
    }
    return out
