"""Station placement, nearest-station queries, demand weights, fleet sizing.

The clustering test re-derives k-means with plain Python loops following the
documented seeding protocol, and the fleet sizer is checked against a linear
scan over candidate totals.
"""

import math

import numpy as np
import pytest

from conftest import make_grid, make_line, std_config
from modsim import run_scenario
from modsim.rebalancing import compute_targets
from modsim.road_network import TravelTimeEstimator, calibrate_estimator
from modsim.demand import TravelRequest
from modsim.stations import (
    Station,
    StationError,
    StationLayout,
    average_access_time,
    build_stations,
    demand_weights,
    kmeans,
    load_stations,
    nearest_station,
    size_fleet,
    write_stations,
)


# --- oracles ---------------------------------------------------------------


def mirror_kmeans(points, k, seed, max_iter=100):
    """Plain-loop Lloyd's with the documented seeding: first center by a
    uniform index draw, later ones by squared-distance-weighted choice.
    Assignment ties go to the lowest center index."""
    pts = [(float(x), float(y)) for x, y in points]
    n = len(pts)
    rng = np.random.default_rng(seed)

    def sq(a, b):
        return (a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2

    centers = [pts[int(rng.integers(n))]]
    d2 = np.array([sq(p, centers[0]) for p in pts])
    for _ in range(1, k):
        total = float(d2.sum())
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        centers.append(pts[idx])
        d2 = np.minimum(d2, np.array([sq(p, centers[-1]) for p in pts]))

    labels = None
    for _ in range(max_iter):
        new_labels = []
        for p in pts:
            best, best_d = 0, sq(p, centers[0])
            for c in range(1, k):
                d = sq(p, centers[c])
                if d < best_d:
                    best, best_d = c, d
            new_labels.append(best)
        if labels is not None and new_labels == labels:
            break
        labels = new_labels
        worst = max(range(n), key=lambda i: sq(pts[i], centers[labels[i]]))
        for c in range(k):
            members = [pts[i] for i in range(n) if labels[i] == c]
            if members:
                centers[c] = (sum(p[0] for p in members) / len(members),
                              sum(p[1] for p in members) / len(members))
            else:
                centers[c] = pts[worst]
    return centers, labels


def scan_fleet_total(network, requests, layout, estimator):
    """Smallest total for which the proportional stocks serve everything,
    found by trying each candidate in turn."""
    weights = demand_weights(layout, requests, network)
    config = std_config("mod")
    for total in range(1, len(requests) + 1):
        trial = layout.with_stocks(compute_targets(weights, total))
        trace = run_scenario(config, network, requests, trial,
                             estimator=estimator)
        if trace.unserved == 0:
            return total
    raise AssertionError("no feasible total found")


def _blobs(seed=0):
    """Four tight, well-separated point clouds; returns (points, blob_of)."""
    rng = np.random.default_rng(seed)
    centers = [(0.0, 0.0), (2000.0, 0.0), (0.0, 2000.0), (2000.0, 2000.0)]
    points, blob_of = [], []
    for b, (cx, cy) in enumerate(centers):
        for _ in range(50):
            points.append((cx + rng.normal(0, 30), cy + rng.normal(0, 30)))
            blob_of.append(b)
    return points, blob_of


# --- k-means -----------------------------------------------------------------


def test_kmeans_single_cluster_is_the_mean():
    points = [(0.0, 0.0), (10.0, 0.0), (0.0, 6.0), (10.0, 6.0)]
    centers, labels, history = kmeans(points, 1, seed=0)
    assert centers[0] == pytest.approx([5.0, 3.0])
    assert list(labels) == [0, 0, 0, 0]
    assert history[-1] == pytest.approx(sum((x - 5) ** 2 + (y - 3) ** 2
                                            for x, y in points))


def test_kmeans_k_equals_n_puts_a_center_on_every_point():
    points = [(0.0, 0.0), (100.0, 0.0), (0.0, 100.0)]
    centers, labels, _ = kmeans(points, 3, seed=5)
    assert sorted(map(tuple, centers.tolist())) == sorted(points)
    assert sorted(labels.tolist()) == [0, 1, 2]


def test_kmeans_recovers_separated_blobs():
    points, blob_of = _blobs()
    centers, labels, history = kmeans(points, 4, seed=1)
    # objective never increases
    assert all(b <= a + 1e-9 for a, b in zip(history, history[1:]))
    # each k-means cluster maps onto exactly one blob
    mapping = {}
    for label, blob in zip(labels.tolist(), blob_of):
        mapping.setdefault(label, blob)
        assert mapping[label] == blob
    assert len(mapping) == 4


def test_kmeans_matches_plain_loop_reimplementation():
    points, _ = _blobs(seed=3)
    for seed in (0, 1, 7):
        centers, labels, _ = kmeans(points, 4, seed=seed)
        mirror_centers, mirror_labels = mirror_kmeans(points, 4, seed=seed)
        assert labels.tolist() == mirror_labels
        for got, want in zip(centers.tolist(), mirror_centers):
            assert got == pytest.approx(want, rel=1e-9)


def test_kmeans_is_deterministic():
    points, _ = _blobs(seed=2)
    a = kmeans(points, 4, seed=9)
    b = kmeans(points, 4, seed=9)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_kmeans_rejects_bad_k():
    points = [(0.0, 0.0), (1.0, 1.0)]
    with pytest.raises(StationError):
        kmeans(points, 0, seed=0)
    with pytest.raises(StationError):
        kmeans(points, 3, seed=0)


# --- building, loading, writing ------------------------------------------------


def test_build_single_station_snaps_the_centroid(grid5):
    # centroid of the cloud is (150, 100) -> nearest grid node is node 11
    points = [(100.0, 100.0), (200.0, 100.0), (150.0, 100.0)]
    layout = build_stations(points, 1, seed=0, network=grid5)
    assert layout.n == 1
    station = layout.stations[0]
    assert station.id == 0 and station.initial_stock == 0
    assert station.node == grid5.nearest_node(150.0, 100.0)


def test_build_stations_keeps_nodes_distinct(grid5):
    # all points hug one node; the second centroid must take the next nearest
    points = [(102.0, 101.0), (99.0, 98.0), (101.0, 99.0), (98.0, 102.0)]
    layout = build_stations(points, 2, seed=0, network=grid5)
    nodes = [s.node for s in layout.stations]
    assert len(set(nodes)) == 2


def test_build_stations_lands_near_blobs(std_network):
    points, _ = _blobs(seed=4)
    layout = build_stations(points, 4, seed=0, network=std_network)
    blob_centers = [(0, 0), (2000, 0), (0, 2000), (2000, 2000)]
    for station in layout.stations:
        x, y = std_network.position(station.node)
        assert min(math.hypot(x - bx, y - by)
                   for bx, by in blob_centers) < 300


def test_layout_validation():
    with pytest.raises(StationError, match="distinct"):
        StationLayout((Station(0, 5, (0, 0)), Station(1, 5, (1, 1))))
    with pytest.raises(StationError):
        StationLayout((Station(0, 5, (0, 0), initial_stock=-1),))
    layout = StationLayout((Station(0, 5, (0, 0)), Station(1, 6, (1, 1))))
    stocked = layout.with_stocks([3, 2])
    assert [s.initial_stock for s in stocked.stations] == [3, 2]
    with pytest.raises(StationError):
        layout.with_stocks([1])


def test_station_csv_roundtrip(tmp_path, grid5):
    layout = StationLayout((
        Station(0, 3, (305.5, 12.25), 4),
        Station(1, 17, (210.0, 390.75), 0),
    ))
    path = tmp_path / "stations.csv"
    write_stations(layout, str(path))
    assert load_stations(str(path), grid5) == layout


def test_load_stations_rejects_unknown_node(tmp_path, grid5):
    path = tmp_path / "stations.csv"
    path.write_text("id,node,center_x,center_y,initial_stock\n0,999,0,0,1\n")
    with pytest.raises(StationError, match="unknown node 999"):
        load_stations(str(path), grid5)


def test_load_stations_rejects_duplicate_ids(tmp_path, grid5):
    path = tmp_path / "stations.csv"
    path.write_text("id,node,center_x,center_y,initial_stock\n"
                    "0,1,0,0,1\n0,2,0,0,1\n")
    with pytest.raises(StationError, match="duplicate"):
        load_stations(str(path), grid5)


# --- nearest station and demand weights -----------------------------------------


def _line_layout():
    # stations on the 10-node line at nodes 2 and 6
    return StationLayout((Station(0, 2, (200.0, 0.0)),
                          Station(1, 6, (600.0, 0.0))))


def test_nearest_station_brute_force(line10):
    layout = _line_layout()
    estimator = TravelTimeEstimator(5.0, 0.1)
    for node in line10.nodes:
        got = nearest_station(layout, node, line10, estimator)
        target = line10.position(node)
        want = min(layout.stations,
                   key=lambda s: (estimator.estimate(
                       line10.position(s.node), target), s.id))
        assert got == want


def test_nearest_station_tie_goes_to_lower_id(line10):
    layout = _line_layout()
    estimator = TravelTimeEstimator(5.0, 0.1)
    # node 4 sits exactly between the stations at nodes 2 and 6
    assert nearest_station(layout, 4, line10, estimator).id == 0


def test_demand_weights_split_by_origin_region(line10):
    layout = _line_layout()
    requests = [TravelRequest(0, 0.0, 0, 9), TravelRequest(1, 1.0, 1, 9),
                TravelRequest(2, 2.0, 3, 9), TravelRequest(3, 3.0, 8, 0),
                TravelRequest(4, 4.0, 4, 0)]  # node 4 ties toward station 0
    weights = demand_weights(layout, requests, line10)
    assert weights == pytest.approx([0.8, 0.2])


def test_average_access_time_simple_case(line10):
    layout = _line_layout()
    estimator = TravelTimeEstimator(5.0, 0.1)
    requests = [TravelRequest(0, 0.0, 3, 9), TravelRequest(1, 1.0, 7, 0)]
    # station 0 -> node 3 spans 100 m, station 1 -> node 7 spans 100 m
    assert average_access_time(layout, requests, line10, estimator) == \
        pytest.approx(15.0)


# --- fleet sizing ------------------------------------------------------------------


def test_size_fleet_single_request_needs_one_vehicle(line10):
    layout = StationLayout((Station(0, 0, (0.0, 0.0)),))
    estimator = TravelTimeEstimator(1.0, 0.1)
    requests = [TravelRequest(0, 10.0, 3, 8)]
    stocks = size_fleet(line10, requests, layout, sim_start=0.0, end=5400.0,
                        rebalancing_period=None, estimator=estimator)
    assert stocks == [1]


def test_size_fleet_simultaneous_requests_need_two(line10):
    layout = StationLayout((Station(0, 0, (0.0, 0.0)),))
    estimator = TravelTimeEstimator(1.0, 0.1)
    requests = [TravelRequest(0, 10.0, 3, 8), TravelRequest(1, 10.5, 4, 9)]
    stocks = size_fleet(line10, requests, layout, sim_start=0.0, end=5400.0,
                        rebalancing_period=None, estimator=estimator)
    assert sum(stocks) == 2


def test_size_fleet_matches_linear_scan(std_network, std_estimator):
    rng = np.random.default_rng(31)
    nodes = std_network.node_ids()
    requests = []
    for k in range(50):
        origin, destination = rng.choice(len(nodes), size=2, replace=False)
        requests.append(TravelRequest(
            k, float(rng.uniform(0.0, 4800.0)), int(nodes[origin]),
            int(nodes[destination])))
    requests.sort(key=lambda r: r.announcement_time)
    requests = [TravelRequest(i, r.announcement_time, r.origin, r.destination)
                for i, r in enumerate(requests)]
    layout = build_stations(
        [std_network.position(r.origin) for r in requests], 3, 11, std_network)

    stocks = size_fleet(std_network, requests, layout, sim_start=0.0,
                        end=5400.0, rebalancing_period=600.0,
                        estimator=std_estimator)
    weights = demand_weights(layout, requests, std_network)
    expected_total = scan_fleet_total(std_network, requests, layout,
                                      std_estimator)
    assert sum(stocks) == expected_total
    assert stocks == compute_targets(weights, expected_total)


def test_size_fleet_needs_requests(line10):
    layout = StationLayout((Station(0, 0, (0.0, 0.0)),))
    with pytest.raises(StationError):
        size_fleet(line10, [], layout, sim_start=0.0, end=100.0)


def test_size_fleet_surfaces_infeasibility(line10, monkeypatch):
    # force every trial run to report an unserved request: the sizer must
    # give up rather than return a fleet that cannot work
    import modsim.sim_engine as engine

    real = engine.run_scenario

    def always_short(config, network, requests, layout=None, estimator=None):
        trace = real(config, network, requests, layout, estimator=estimator)
        trace.unserved += 1
        return trace

    monkeypatch.setattr(engine, "run_scenario", always_short)
    layout = StationLayout((Station(0, 0, (0.0, 0.0)),))
    estimator = TravelTimeEstimator(1.0, 0.1)
    requests = [TravelRequest(0, 10.0, 3, 8)]
    with pytest.raises(StationError, match="cannot serve"):
        size_fleet(line10, requests, layout, sim_start=0.0, end=5400.0,
                   rebalancing_period=None, estimator=estimator)
