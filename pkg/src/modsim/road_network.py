"""Road network graphs, fastest paths, and the Euclidean travel-time estimator.

Coordinates are planar and in meters; geographic input must be projected
first (see :func:`convert_geojson`).  Segments are directed, so a two-way
street appears as two segment rows.  All durations are seconds, speeds m/s.
"""

from __future__ import annotations

import csv
import heapq
import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Node",
    "RoadSegment",
    "RoadNetwork",
    "Path",
    "TravelTimeEstimator",
    "NetworkError",
    "NoPathError",
    "CalibrationError",
    "fill_missing_speeds",
    "load_network",
    "fastest_path",
    "calibrate_estimator",
    "estimate_time",
    "convert_geojson",
]

KMH_TO_MS = 1.0 / 3.6
EARTH_RADIUS_M = 6_371_000.0

# Speed-limit defaults, by road class, for segments without a posted limit.
_CLASS_SPEEDS_KMH = {
    "highway": 130.0,
    "living_street": 20.0,
}
_FALLBACK_SPEED_KMH = 50.0

_NODE_COLUMNS = ("id", "x", "y")
_SEGMENT_COLUMNS = ("id", "from", "to", "length_m", "speed_kmh", "class")


class NetworkError(ValueError):
    """A network file failed to parse or validate."""


class NoPathError(LookupError):
    """No route exists between the requested nodes."""


class CalibrationError(ValueError):
    """The travel-time estimator could not be fitted."""


def fill_missing_speeds(road_class: str | None) -> float:
    """Return the default speed limit in m/s for a segment without a posted one.

    Motorway-grade roads default to 130 km/h, living streets to 20 km/h, and
    everything else (including an absent or unknown class) to 50 km/h.
    """
    tag = (road_class or "").strip().lower().replace(" ", "_")
    return _CLASS_SPEEDS_KMH.get(tag, _FALLBACK_SPEED_KMH) * KMH_TO_MS


@dataclass(frozen=True)
class Node:
    id: int
    x: float
    y: float


@dataclass(frozen=True)
class RoadSegment:
    id: int
    from_node: int
    to_node: int
    length: float  # meters, > 0
    speed_limit: float  # m/s, > 0

    @property
    def traversal_time(self) -> float:
        """Seconds to drive the segment at its speed limit."""
        return self.length / self.speed_limit


@dataclass(frozen=True)
class Path:
    """A directed route: ordered segment ids plus totals."""

    segments: tuple[int, ...]
    duration: float  # seconds
    distance: float  # meters


class RoadNetwork:
    """Directed road graph with deterministic queries.

    The graph is immutable after construction; fastest-path results are
    memoized internally, so repeated queries between the same nodes are cheap.
    """

    def __init__(self, nodes, segments):
        self.nodes: dict[int, Node] = {}
        for node in nodes:
            if node.id in self.nodes:
                raise NetworkError(f"duplicate node id {node.id}")
            if not (math.isfinite(node.x) and math.isfinite(node.y)):
                raise NetworkError(f"node {node.id}: non-finite coordinates")
            self.nodes[node.id] = node

        self.segments: dict[int, RoadSegment] = {}
        self.out_segments: dict[int, list[RoadSegment]] = {
            nid: [] for nid in self.nodes
        }
        for seg in segments:
            if seg.id in self.segments:
                raise NetworkError(f"duplicate segment id {seg.id}")
            for endpoint in (seg.from_node, seg.to_node):
                if endpoint not in self.nodes:
                    raise NetworkError(f"segment {seg.id}: unknown node {endpoint}")
            if not seg.length > 0:
                raise NetworkError(f"segment {seg.id}: non-positive length")
            if not seg.speed_limit > 0:
                raise NetworkError(f"segment {seg.id}: non-positive speed")
            self.segments[seg.id] = seg
            self.out_segments[seg.from_node].append(seg)
        for adjacent in self.out_segments.values():
            adjacent.sort(key=lambda s: s.id)

        # Snapping arrays are ordered by node id so that argmin resolves
        # distance ties toward the lowest id.
        self._ids = np.array(sorted(self.nodes), dtype=np.int64)
        self._xy = np.array(
            [(self.nodes[nid].x, self.nodes[nid].y) for nid in self._ids],
            dtype=float,
        ).reshape(len(self._ids), 2)
        self._path_cache: dict[tuple[int, int], Path] = {}
        self._reach_cache: dict[int, frozenset[int]] = {}

    def __len__(self) -> int:
        return len(self.nodes)

    def position(self, node_id: int) -> tuple[float, float]:
        node = self.nodes[node_id]
        return (node.x, node.y)

    def node_ids(self) -> list[int]:
        return list(self._ids)

    def nearest_node(self, x: float, y: float, exclude=None) -> int:
        """Snap a point to the closest node by Euclidean distance.

        Ties resolve to the lowest node id.  `exclude` is an optional
        container of node ids to skip.
        """
        d2 = (self._xy[:, 0] - x) ** 2 + (self._xy[:, 1] - y) ** 2
        if exclude:
            mask = np.isin(self._ids, np.fromiter(exclude, dtype=np.int64))
            if mask.all():
                raise NetworkError("no nodes left to snap to")
            d2 = np.where(mask, np.inf, d2)
        return int(self._ids[int(np.argmin(d2))])

    def reachable_from(self, origin: int) -> frozenset[int]:
        """All nodes reachable from `origin` along directed segments."""
        cached = self._reach_cache.get(origin)
        if cached is not None:
            return cached
        if origin not in self.nodes:
            raise NetworkError(f"unknown node {origin}")
        seen = {origin}
        frontier = [origin]
        while frontier:
            nid = frontier.pop()
            for seg in self.out_segments[nid]:
                if seg.to_node not in seen:
                    seen.add(seg.to_node)
                    frontier.append(seg.to_node)
        result = frozenset(seen)
        self._reach_cache[origin] = result
        return result


def load_network(nodes_path, segments_path) -> RoadNetwork:
    """Load a network from the node/segment CSV pair.

    Node files carry `id,x,y`; segment files `id,from,to,length_m,speed_kmh,class`.
    An empty `speed_kmh` cell falls back to the class default via
    :func:`fill_missing_speeds`.  Raises :class:`NetworkError` on malformed
    rows, dangling endpoints, or non-positive lengths/speeds.
    """
    nodes = []
    with open(nodes_path, newline="") as handle:
        reader = csv.DictReader(handle)
        _require_columns(reader.fieldnames, _NODE_COLUMNS, nodes_path)
        for lineno, row in enumerate(reader, start=2):
            try:
                nodes.append(Node(int(row["id"]), float(row["x"]), float(row["y"])))
            except (TypeError, ValueError) as exc:
                raise NetworkError(f"{nodes_path}:{lineno}: bad node row ({exc})")

    segments = []
    with open(segments_path, newline="") as handle:
        reader = csv.DictReader(handle)
        _require_columns(reader.fieldnames, _SEGMENT_COLUMNS, segments_path)
        for lineno, row in enumerate(reader, start=2):
            try:
                posted = (row["speed_kmh"] or "").strip()
                if posted:
                    speed = float(posted) * KMH_TO_MS
                else:
                    speed = fill_missing_speeds(row["class"])
                segments.append(
                    RoadSegment(
                        id=int(row["id"]),
                        from_node=int(row["from"]),
                        to_node=int(row["to"]),
                        length=float(row["length_m"]),
                        speed_limit=speed,
                    )
                )
            except (TypeError, ValueError) as exc:
                raise NetworkError(f"{segments_path}:{lineno}: bad segment row ({exc})")

    return RoadNetwork(nodes, segments)


def _require_columns(fieldnames, expected, path):
    missing = [col for col in expected if col not in (fieldnames or [])]
    if missing:
        raise NetworkError(f"{path}: missing columns {missing}")


def fastest_path(network: RoadNetwork, origin: int, destination: int) -> Path:
    """Time-minimal route between two nodes.

    Label-setting search over (duration, segment-id sequence) keys: among
    equal-duration routes the lexicographically smallest segment sequence
    wins, which keeps results independent of insertion order.  Because every
    traversal time is positive, no equal-duration route's sequence is a
    proper prefix of another's, so the composite key ordering is preserved
    when labels are extended and the usual settling argument goes through.

    Raises :class:`NoPathError` when the destination is unreachable.
    """
    for nid in (origin, destination):
        if nid not in network.nodes:
            raise NetworkError(f"unknown node {nid}")
    if origin == destination:
        return Path((), 0.0, 0.0)
    cached = network._path_cache.get((origin, destination))
    if cached is not None:
        return cached

    segments = network.segments
    heap: list[tuple[float, tuple[int, ...], int]] = [(0.0, (), origin)]
    settled: set[int] = set()
    while heap:
        duration, route, nid = heapq.heappop(heap)
        if nid in settled:
            continue
        settled.add(nid)
        if nid != origin:
            distance = sum(segments[sid].length for sid in route)
            network._path_cache[(origin, nid)] = Path(route, duration, distance)
        if nid == destination:
            return network._path_cache[(origin, destination)]
        for seg in network.out_segments[nid]:
            if seg.to_node not in settled:
                heapq.heappush(
                    heap,
                    (duration + seg.traversal_time, route + (seg.id,), seg.to_node),
                )
    raise NoPathError(f"no route from node {origin} to node {destination}")


@dataclass(frozen=True)
class TravelTimeEstimator:
    """Linear travel-time model: seconds ~ intercept + slope * euclidean_m.

    Negative predictions clamp to zero.  `calibration_error` is the RMS
    residual, in seconds, against the fastest-path durations it was fitted on.
    """

    intercept: float
    slope: float
    calibration_error: float = 0.0

    def __post_init__(self):
        if not self.slope > 0:
            raise CalibrationError(f"slope must be positive, got {self.slope}")

    def estimate(self, a: tuple[float, float], b: tuple[float, float]) -> float:
        """Estimated seconds between two planar points (symmetric, >= 0)."""
        dist = math.hypot(a[0] - b[0], a[1] - b[1])
        return max(0.0, self.intercept + self.slope * dist)


def estimate_time(
    estimator: TravelTimeEstimator,
    a: tuple[float, float],
    b: tuple[float, float],
) -> float:
    return estimator.estimate(a, b)


def calibrate_estimator(
    network: RoadNetwork, sample_count: int, seed: int
) -> TravelTimeEstimator:
    """Fit the linear estimator on seeded random node pairs.

    Each sample pairs the Euclidean distance between two distinct random
    nodes with the fastest-path duration between them; pairs whose
    destination is unreachable are redrawn.  The fit is ordinary least
    squares.  Raises :class:`CalibrationError` when fewer than two samples
    are requested, when the sampled distances are degenerate (all equal), or
    when the fitted slope is not positive.
    """
    if sample_count < 2:
        raise CalibrationError("need at least two samples")
    ids = network._ids
    if len(ids) < 2:
        raise CalibrationError("need at least two nodes")

    rng = np.random.default_rng(seed)
    distances = np.empty(sample_count)
    durations = np.empty(sample_count)
    for k in range(sample_count):
        for _ in range(1000):
            o = int(ids[rng.integers(len(ids))])
            d = int(ids[rng.integers(len(ids))])
            if o != d and d in network.reachable_from(o):
                break
        else:
            raise CalibrationError("could not sample a reachable node pair")
        ax, ay = network.position(o)
        bx, by = network.position(d)
        distances[k] = math.hypot(ax - bx, ay - by)
        durations[k] = fastest_path(network, o, d).duration

    if float(np.ptp(distances)) < 1e-9:
        raise CalibrationError("degenerate sample: all distances equal")

    design = np.column_stack([distances, np.ones(sample_count)])
    (slope, intercept), *_ = np.linalg.lstsq(design, durations, rcond=None)
    residuals = durations - (intercept + slope * distances)
    rms = float(np.sqrt(np.mean(residuals**2)))
    if not slope > 0:
        raise CalibrationError(f"fitted slope not positive ({slope})")
    return TravelTimeEstimator(float(intercept), float(slope), rms)


def convert_geojson(source, nodes_path, segments_path) -> tuple[int, int]:
    """Convert a GeoJSON-like road dump to the node/segment CSV pair.

    Point features become nodes (`properties.id`); LineString features become
    directed segments (`properties` id/from/to plus optional speed_kmh and
    class).  Longitude/latitude pairs are projected to planar meters with an
    equirectangular projection about the mean node latitude, and segment
    lengths are the projected polyline lengths.  The conversion is lossy: only
    ids, geometry, posted speeds, and road classes survive.

    Returns (node_count, segment_count).
    """
    with open(source) as handle:
        data = json.load(handle)
    points = []
    lines = []
    for feature in data.get("features", []):
        geom = feature.get("geometry", {})
        props = feature.get("properties", {})
        if geom.get("type") == "Point":
            lon, lat = geom["coordinates"]
            points.append((int(props["id"]), float(lon), float(lat)))
        elif geom.get("type") == "LineString":
            lines.append(
                (
                    int(props["id"]),
                    int(props["from"]),
                    int(props["to"]),
                    geom["coordinates"],
                    props.get("speed_kmh"),
                    props.get("class"),
                )
            )
    if not points:
        raise NetworkError(f"{source}: no Point features")

    lat0 = math.radians(sum(p[2] for p in points) / len(points))
    scale_x = EARTH_RADIUS_M * math.cos(lat0)

    def project(lon, lat):
        return (math.radians(lon) * scale_x, math.radians(lat) * EARTH_RADIUS_M)

    with open(nodes_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(_NODE_COLUMNS)
        for nid, lon, lat in points:
            x, y = project(lon, lat)
            writer.writerow([nid, repr(x), repr(y)])

    with open(segments_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(_SEGMENT_COLUMNS)
        for sid, from_node, to_node, coords, speed, cls in lines:
            projected = [project(lon, lat) for lon, lat in coords]
            length = sum(
                math.hypot(bx - ax, by - ay)
                for (ax, ay), (bx, by) in zip(projected, projected[1:])
            )
            writer.writerow(
                [
                    sid,
                    from_node,
                    to_node,
                    repr(length),
                    "" if speed is None else speed,
                    cls or "",
                ]
            )
    return len(points), len(lines)
