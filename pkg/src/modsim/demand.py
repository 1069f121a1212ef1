"""Transportation demand: recorded-trip loading and synthetic generation.

A travel request is announced at a point in time and asks for transport from
one network node to another.  Requests can be loaded from CSV trip records or
generated synthetically from cluster-weighted Gaussian mixtures, which gives
commute-shaped demand (a few residential blobs feeding a few work blobs).
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass

import numpy as np

from .road_network import RoadNetwork

__all__ = [
    "TravelRequest",
    "DemandCluster",
    "DemandConfig",
    "DemandError",
    "load_requests",
    "write_requests",
    "generate_demand",
]

log = logging.getLogger(__name__)

_REQUEST_COLUMNS = ("id", "announcement_time_s", "origin_node", "destination_node")
_MAX_REDRAWS = 64


class DemandError(ValueError):
    """Demand input failed to parse or validate."""


@dataclass(frozen=True)
class TravelRequest:
    id: int
    announcement_time: float  # seconds from scenario start
    origin: int  # node id
    destination: int  # node id, != origin


@dataclass(frozen=True)
class DemandCluster:
    """One Gaussian component of a demand mixture (planar meters)."""

    x: float
    y: float
    weight: float
    spread: float  # standard deviation, meters; 0 collapses to the center


@dataclass(frozen=True)
class DemandConfig:
    """Recipe for synthetic demand.

    Origins are drawn from `origin_clusters`; destinations from
    `destination_clusters`, or from the same mixture when that is None.
    Arrival times are uniform over [start, end) when `uniform_arrivals`,
    otherwise evenly spaced.
    """

    start: float
    end: float
    request_count: int
    origin_clusters: tuple[DemandCluster, ...]
    destination_clusters: tuple[DemandCluster, ...] | None = None
    seed: int = 0
    uniform_arrivals: bool = True

    def __post_init__(self):
        if not self.end > self.start:
            raise DemandError("time window must have end > start")
        if self.request_count <= 0:
            raise DemandError("request_count must be positive")
        for clusters in (self.origin_clusters, self.destination_clusters):
            if clusters is None:
                continue
            if not clusters:
                raise DemandError("cluster list must be non-empty")
            if any(c.weight < 0 or c.spread < 0 for c in clusters):
                raise DemandError("cluster weights and spreads must be >= 0")
            total = sum(c.weight for c in clusters)
            if abs(total - 1.0) > 1e-9:
                raise DemandError(f"cluster weights must sum to 1, got {total}")


def load_requests(path, network: RoadNetwork) -> tuple[list[TravelRequest], int]:
    """Load trip records from CSV, sorted by (announcement time, id).

    Rows whose origin equals their destination, or whose destination is not
    reachable from the origin, are rejected with a warning.  Returns the kept
    requests together with the rejected-row count.  Unknown nodes or
    malformed fields raise :class:`DemandError` naming the offending row.
    """
    requests = []
    rejected = 0
    seen: set[int] = set()
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        missing = [c for c in _REQUEST_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise DemandError(f"{path}: missing columns {missing}")
        for lineno, row in enumerate(reader, start=2):
            try:
                rid = int(row["id"])
                announce = float(row["announcement_time_s"])
                origin = int(row["origin_node"])
                destination = int(row["destination_node"])
            except (TypeError, ValueError) as exc:
                raise DemandError(f"{path}:{lineno}: bad request row ({exc})")
            if rid in seen:
                raise DemandError(f"{path}:{lineno}: duplicate request id {rid}")
            seen.add(rid)
            for nid in (origin, destination):
                if nid not in network.nodes:
                    raise DemandError(f"{path}:{lineno}: unknown node {nid}")
            if origin == destination:
                log.warning("%s:%d: request %d has origin == destination, skipped",
                            path, lineno, rid)
                rejected += 1
                continue
            if destination not in network.reachable_from(origin):
                log.warning("%s:%d: request %d destination unreachable, skipped",
                            path, lineno, rid)
                rejected += 1
                continue
            requests.append(TravelRequest(rid, announce, origin, destination))
    requests.sort(key=lambda r: (r.announcement_time, r.id))
    return requests, rejected


def write_requests(path, requests) -> None:
    """Write requests as a CSV trip file (full float precision)."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(_REQUEST_COLUMNS)
        for req in requests:
            writer.writerow(
                [req.id, repr(req.announcement_time), req.origin, req.destination]
            )


def generate_demand(config: DemandConfig, network: RoadNetwork) -> list[TravelRequest]:
    """Generate seeded synthetic requests snapped to network nodes.

    Each request samples an origin point and a destination point from the
    configured mixtures and snaps them to their nearest nodes.  When the two
    snaps coincide, or the destination is unreachable, the destination is
    redrawn; redraws snap to the nearest node other than the origin, so a
    degenerate mixture (zero variance) still resolves to the closest distinct
    node.  After a bounded number of redraws the generator gives up with
    :class:`DemandError`.

    Output is sorted by announcement time with ids 0..n-1 in that order, and
    is byte-reproducible for a fixed (config, network).
    """
    if len(network) < 2:
        raise DemandError("need at least two nodes to generate trips")
    rng = np.random.default_rng(config.seed)
    n = config.request_count
    if config.uniform_arrivals:
        times = np.sort(rng.uniform(config.start, config.end, n))
    else:
        step = (config.end - config.start) / n
        times = config.start + (np.arange(n) + 0.5) * step

    origin_mix = _mixture_arrays(config.origin_clusters)
    dest_mix = _mixture_arrays(config.destination_clusters or config.origin_clusters)

    requests = []
    for k in range(n):
        origin = _draw_node(rng, origin_mix, network)
        reachable = network.reachable_from(origin)
        destination = None
        for attempt in range(_MAX_REDRAWS):
            exclude = (origin,) if attempt > 0 else None
            candidate = _draw_node(rng, dest_mix, network, exclude)
            if candidate != origin and candidate in reachable:
                destination = candidate
                break
        if destination is None:
            raise DemandError(
                f"no reachable destination distinct from node {origin} "
                f"after {_MAX_REDRAWS} redraws"
            )
        requests.append(TravelRequest(k, float(times[k]), origin, destination))
    return requests


def _mixture_arrays(clusters):
    weights = np.array([c.weight for c in clusters], dtype=float)
    weights = weights / weights.sum()
    return (
        np.array([c.x for c in clusters]),
        np.array([c.y for c in clusters]),
        weights,
        np.array([c.spread for c in clusters]),
    )


def _draw_node(rng, mixture, network, exclude=None) -> int:
    xs, ys, weights, spreads = mixture
    idx = int(rng.choice(len(weights), p=weights))
    x = rng.normal(xs[idx], spreads[idx])
    y = rng.normal(ys[idx], spreads[idx])
    return network.nearest_node(float(x), float(y), exclude)
