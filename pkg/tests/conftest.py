"""Shared fixtures and network builders.

`make_grid` / `make_line` build small planar road networks directly.  The
std_* session fixtures freeze one benchmark city (a 20x20 grid with a few
fast arterials, clustered demand, four stations, a 160-vehicle fleet) used
by the behavioural and acceptance tests; its scenario runs take a few
seconds, so the traces are built once per session.
"""

import csv
import time

import pytest

from modsim import (
    DemandCluster,
    DemandConfig,
    RoadNetwork,
    ScenarioConfig,
    build_stations,
    calibrate_estimator,
    compute_targets,
    demand_weights,
    generate_demand,
    run_scenario,
)
from modsim.road_network import Node, RoadSegment

KMH = 1 / 3.6


def make_grid(nx, ny, spacing=250.0, speed_kmh=50.0, fast_rows=(), fast_kmh=70.0):
    """Bidirectional 4-connected grid; node r*nx+c sits at (c*s, r*s).

    Horizontal segments on the rows in `fast_rows` get `fast_kmh`; everything
    else drives at `speed_kmh`.
    """
    nodes = [Node(r * nx + c, c * spacing, r * spacing)
             for r in range(ny) for c in range(nx)]
    segments = []
    sid = 0
    for r in range(ny):
        for c in range(nx):
            nid = r * nx + c
            if c + 1 < nx:
                speed = (fast_kmh if r in fast_rows else speed_kmh) * KMH
                segments.append(RoadSegment(sid, nid, nid + 1, spacing, speed))
                sid += 1
                segments.append(RoadSegment(sid, nid + 1, nid, spacing, speed))
                sid += 1
            if r + 1 < ny:
                segments.append(
                    RoadSegment(sid, nid, nid + nx, spacing, speed_kmh * KMH))
                sid += 1
                segments.append(
                    RoadSegment(sid, nid + nx, nid, spacing, speed_kmh * KMH))
                sid += 1
    return RoadNetwork(nodes, segments)


def make_line(n, spacing=100.0, speed_ms=10.0):
    """Bidirectional chain of n nodes on the x axis; speed given in m/s so
    traversal times stay exact in tests."""
    nodes = [Node(i, i * spacing, 0.0) for i in range(n)]
    segments = []
    for i in range(n - 1):
        segments.append(RoadSegment(2 * i, i, i + 1, spacing, speed_ms))
        segments.append(RoadSegment(2 * i + 1, i + 1, i, spacing, speed_ms))
    return RoadNetwork(nodes, segments)


def write_network_csv(network, nodes_path, segments_path):
    """Dump a network to the node/segment CSV pair the loader reads."""
    with open(nodes_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["id", "x", "y"])
        for nid in network.node_ids():
            node = network.nodes[nid]
            writer.writerow([nid, repr(node.x), repr(node.y)])
    with open(segments_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["id", "from", "to", "length_m", "speed_kmh", "class"])
        for sid in sorted(network.segments):
            seg = network.segments[sid]
            writer.writerow([sid, seg.from_node, seg.to_node, repr(seg.length),
                             repr(seg.speed_limit * 3.6), ""])


@pytest.fixture(scope="session")
def grid5():
    return make_grid(5, 5, spacing=100.0)


@pytest.fixture(scope="session")
def line10():
    return make_line(10)


# --- the benchmark city -----------------------------------------------------

STD_ORIGINS = (
    DemandCluster(700, 700, 0.35, 450),
    DemandCluster(4000, 900, 0.30, 450),
    DemandCluster(900, 4100, 0.25, 450),
    DemandCluster(4100, 4100, 0.10, 500),
)
STD_DESTINATIONS = (
    DemandCluster(2400, 2500, 0.70, 400),
    DemandCluster(3300, 2000, 0.30, 450),
)
STD_END = 5400.0
STD_STAT_START = 1800.0
STD_Q_MAX = 600.0
SWEEP_BOUNDS = (420.0, 600.0, 720.0, 900.0)


def std_config(mode, q_max=None):
    return ScenarioConfig(mode=mode, end=STD_END, stat_start=STD_STAT_START,
                          q_max=q_max)


@pytest.fixture(scope="session")
def std_network():
    return make_grid(20, 20, fast_rows=(0, 5, 10, 15))


@pytest.fixture(scope="session")
def std_estimator(std_network):
    return calibrate_estimator(std_network, 300, seed=17)


@pytest.fixture(scope="session")
def std_requests(std_network):
    config = DemandConfig(start=0.0, end=STD_END, request_count=750,
                          origin_clusters=STD_ORIGINS,
                          destination_clusters=STD_DESTINATIONS, seed=29)
    return generate_demand(config, std_network)


@pytest.fixture(scope="session")
def std_layout(std_network, std_requests):
    points = []
    for req in std_requests:
        points.append(std_network.position(req.origin))
        points.append(std_network.position(req.destination))
    layout = build_stations(points, 4, 5, std_network)
    weights = demand_weights(layout, std_requests, std_network)
    return layout.with_stocks(compute_targets(weights, 160))


@pytest.fixture(scope="session")
def std_traces(std_network, std_estimator, std_requests, std_layout):
    """One trace per scenario mode over the benchmark city, plus the wall
    time the three runs took (key 'elapsed_s')."""
    started = time.perf_counter()
    traces = {
        "present": run_scenario(std_config("present"), std_network,
                                std_requests),
        "mod": run_scenario(std_config("mod"), std_network, std_requests,
                            std_layout, estimator=std_estimator),
        "mod_rideshare": run_scenario(
            std_config("mod_rideshare", q_max=STD_Q_MAX), std_network,
            std_requests, std_layout, estimator=std_estimator),
    }
    traces["elapsed_s"] = time.perf_counter() - started
    return traces


@pytest.fixture(scope="session")
def std_sweep(std_network, std_estimator, std_requests, std_layout, std_traces):
    """Rideshare traces per delay bound; the 600 s run is shared with
    std_traces to avoid repeating it."""
    runs = {}
    for q_max in SWEEP_BOUNDS:
        if q_max == STD_Q_MAX:
            runs[q_max] = std_traces["mod_rideshare"]
        else:
            runs[q_max] = run_scenario(
                std_config("mod_rideshare", q_max=q_max), std_network,
                std_requests, std_layout, estimator=std_estimator)
    return runs
