"""Station placement, demand weights, and minimal fleet sizing.

Stations are placed by clustering demand points with k-means and snapping the
centroids to road nodes.  The fleet sizer searches for the smallest total
vehicle count whose proportional station stocks serve every request in a
no-ridesharing run.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .rebalancing import compute_targets
from .road_network import RoadNetwork, TravelTimeEstimator

__all__ = [
    "Station",
    "StationLayout",
    "StationError",
    "kmeans",
    "build_stations",
    "load_stations",
    "write_stations",
    "nearest_station",
    "demand_weights",
    "average_access_time",
    "size_fleet",
]

_STATION_COLUMNS = ("id", "node", "center_x", "center_y", "initial_stock")


class StationError(ValueError):
    pass


@dataclass(frozen=True)
class Station:
    id: int
    node: int  # network node the station occupies
    center: tuple[float, float]  # cluster centroid the node was snapped from
    initial_stock: int = 0


@dataclass(frozen=True)
class StationLayout:
    stations: tuple[Station, ...]

    def __post_init__(self):
        nodes = [s.node for s in self.stations]
        if len(set(nodes)) != len(nodes):
            raise StationError("stations must occupy distinct nodes")
        if any(s.initial_stock < 0 for s in self.stations):
            raise StationError("initial stocks must be >= 0")

    @property
    def n(self) -> int:
        return len(self.stations)

    def with_stocks(self, stocks) -> "StationLayout":
        if len(stocks) != self.n:
            raise StationError(f"expected {self.n} stocks, got {len(stocks)}")
        return StationLayout(
            tuple(replace(s, initial_stock=int(c))
                  for s, c in zip(self.stations, stocks))
        )


def kmeans(points, k: int, seed: int = 0, max_iter: int = 100):
    """Lloyd's algorithm with distance-weighted (k-means++ style) seeding.

    Seeding draws the first center uniformly (`rng.integers`) and each later
    one with probability proportional to squared distance from the chosen
    centers (`rng.choice`).  Iteration stops when assignments stabilize or
    after `max_iter` rounds; ties in assignment go to the lowest center
    index.  Returns (centers, labels, inertia_history) where the history
    holds the objective after each assignment step.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise StationError("points must be an (n, 2) array")
    n = len(pts)
    if not 1 <= k <= n:
        raise StationError(f"need 1 <= k <= {n}, got {k}")

    rng = np.random.default_rng(seed)
    centers = np.empty((k, 2))
    centers[0] = pts[int(rng.integers(n))]
    d2 = ((pts - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = float(d2.sum())
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        centers[c] = pts[idx]
        d2 = np.minimum(d2, ((pts - centers[c]) ** 2).sum(axis=1))

    labels = None
    history: list[float] = []
    for _ in range(max_iter):
        dist2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = dist2.argmin(axis=1)
        history.append(float(dist2[np.arange(n), new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            members = pts[labels == c]
            if len(members):
                centers[c] = members.mean(axis=0)
            else:
                # re-seat an emptied cluster at the worst-fit point
                centers[c] = pts[int(dist2.min(axis=1).argmax())]
    return centers, labels, history


def build_stations(points, n: int, seed: int, network: RoadNetwork) -> StationLayout:
    """Cluster demand points and snap the centroids to distinct road nodes.

    Station ids follow cluster index order; when two centroids snap to the
    same node, later stations take the next nearest unused node.  Stocks
    start at zero.
    """
    centers, _, _ = kmeans(points, n, seed)
    used: set[int] = set()
    stations = []
    for sid, (cx, cy) in enumerate(centers):
        node = network.nearest_node(float(cx), float(cy), exclude=used)
        used.add(node)
        stations.append(Station(sid, node, (float(cx), float(cy))))
    return StationLayout(tuple(stations))


def load_stations(path, network: RoadNetwork) -> StationLayout:
    """Load a station CSV (`id,node,center_x,center_y,initial_stock`)."""
    stations = []
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        missing = [c for c in _STATION_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise StationError(f"{path}: missing columns {missing}")
        for lineno, row in enumerate(reader, start=2):
            try:
                station = Station(
                    id=int(row["id"]),
                    node=int(row["node"]),
                    center=(float(row["center_x"]), float(row["center_y"])),
                    initial_stock=int(row["initial_stock"]),
                )
            except (TypeError, ValueError) as exc:
                raise StationError(f"{path}:{lineno}: bad station row ({exc})")
            if station.node not in network.nodes:
                raise StationError(f"{path}:{lineno}: unknown node {station.node}")
            stations.append(station)
    if len({s.id for s in stations}) != len(stations):
        raise StationError(f"{path}: duplicate station ids")
    stations.sort(key=lambda s: s.id)
    return StationLayout(tuple(stations))


def write_stations(layout: StationLayout, path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(_STATION_COLUMNS)
        for s in layout.stations:
            writer.writerow([s.id, s.node, repr(s.center[0]), repr(s.center[1]),
                             s.initial_stock])


def nearest_station(layout: StationLayout, node: int, network: RoadNetwork,
                    estimator: TravelTimeEstimator) -> Station:
    """Station with the smallest estimated travel time to `node` (ties by id)."""
    if not layout.stations:
        raise StationError("layout has no stations")
    target = network.position(node)
    return min(
        layout.stations,
        key=lambda s: (estimator.estimate(network.position(s.node), target), s.id),
    )


def demand_weights(layout: StationLayout, requests, network: RoadNetwork):
    """Share of request origins falling in each station's region.

    A request belongs to the station whose cluster center is Euclidean
    closest to its origin node (ties toward the lower station id).
    """
    if not layout.stations:
        raise StationError("layout has no stations")
    if not requests:
        raise StationError("no requests to weigh")
    centers = np.array([s.center for s in layout.stations])
    counts = np.zeros(layout.n)
    for req in requests:
        x, y = network.position(req.origin)
        d2 = ((centers[:, 0] - x) ** 2) + ((centers[:, 1] - y) ** 2)
        counts[int(np.argmin(d2))] += 1
    return counts / counts.sum()


def average_access_time(layout: StationLayout, requests, network: RoadNetwork,
                        estimator: TravelTimeEstimator) -> float:
    """Mean estimated travel time from each request's nearest station to its
    origin; the figure to watch when choosing the station count."""
    if not requests:
        raise StationError("no requests")
    total = 0.0
    for req in requests:
        origin = network.position(req.origin)
        station = nearest_station(layout, req.origin, network, estimator)
        total += estimator.estimate(network.position(station.node), origin)
    return total / len(requests)


def size_fleet(network: RoadNetwork, requests, layout: StationLayout, *,
               sim_start: float, end: float,
               rebalancing_period: float | None = 600.0,
               service_time: float = 0.0,
               estimator: TravelTimeEstimator | None = None) -> list[int]:
    """Smallest total fleet whose proportional stocks serve all requests.

    Stocks are apportioned to stations by demand weight (largest remainder),
    and feasibility means a dispatch-only run with those stocks leaves no
    request unserved.  Binary search on the total keeps a verified infeasible
    lower end and feasible upper end, so the result is feasible while one
    vehicle fewer is not.  Raises :class:`StationError` when even one vehicle
    per request is not enough.
    """
    from .sim_engine import ScenarioConfig, run_scenario  # deferred: sizing runs sims

    if not requests:
        raise StationError("no requests to size for")
    weights = demand_weights(layout, requests, network)
    config = ScenarioConfig(
        mode="mod",
        sim_start=sim_start,
        stat_start=sim_start,
        end=end,
        rebalancing_period=rebalancing_period,
        service_time=service_time,
    )

    def feasible(total: int) -> bool:
        trial = layout.with_stocks(compute_targets(weights, total))
        trace = run_scenario(config, network, requests, trial, estimator=estimator)
        return trace.unserved == 0

    lo, hi = 0, len(requests)  # zero vehicles serve nothing; one per request must
    if not feasible(hi):
        raise StationError(f"even {hi} vehicles cannot serve every request")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return compute_targets(weights, hi)
