"""Discrete-event engine: exact movement arithmetic, the three scenario
modes, reassignment consistency, rebalancing, and determinism."""

import pytest

from conftest import make_grid, make_line, std_config
from modsim.demand import DemandCluster, DemandConfig, TravelRequest, \
    generate_demand
from modsim.rebalancing import compute_targets
from modsim.road_network import TravelTimeEstimator, fastest_path
from modsim.sim_engine import (
    FlowRecord,
    ScenarioConfig,
    SimulationError,
    run_scenario,
)
from modsim.stations import Station, StationLayout, demand_weights


def _exact_estimator():
    # slope 0.1 s/m == line speed of 10 m/s, so projections match road time
    return TravelTimeEstimator(0.0, 0.1)


def _present(end=600.0):
    return ScenarioConfig(mode="present", end=end)


def _total_length(trace, network):
    return sum(network.segments[tr.segment].length for tr in trace.traversals)


# --- config validation -------------------------------------------------------


def test_config_validation():
    with pytest.raises(SimulationError, match="unknown mode"):
        ScenarioConfig(mode="carpool", end=10.0)
    with pytest.raises(SimulationError):
        ScenarioConfig(mode="present", end=0.0, sim_start=0.0)
    with pytest.raises(SimulationError):
        ScenarioConfig(mode="present", end=10.0, stat_start=20.0)
    with pytest.raises(SimulationError, match="q_max"):
        ScenarioConfig(mode="mod_rideshare", end=10.0)
    with pytest.raises(SimulationError):
        ScenarioConfig(mode="mod", end=10.0, rebalancing_period=0.0)
    with pytest.raises(SimulationError):
        ScenarioConfig(mode="present", end=10.0, service_time=-1.0)
    with pytest.raises(SimulationError):
        ScenarioConfig(mode="present", end=10.0, vehicle_capacity=0)


def test_request_validation(line10):
    with pytest.raises(SimulationError, match="outside"):
        run_scenario(_present(), line10, [TravelRequest(0, 600.0, 0, 5)])
    with pytest.raises(SimulationError, match="origin == destination"):
        run_scenario(_present(), line10, [TravelRequest(0, 5.0, 3, 3)])
    with pytest.raises(SimulationError, match="duplicate"):
        run_scenario(_present(), line10, [TravelRequest(0, 5.0, 0, 1),
                                          TravelRequest(0, 6.0, 1, 2)])
    with pytest.raises(SimulationError, match="at least one station"):
        run_scenario(ScenarioConfig(mode="mod", end=600.0), line10,
                     [TravelRequest(0, 5.0, 0, 1)])


def test_unreachable_request_rejected():
    from modsim.road_network import Node, RoadNetwork, RoadSegment
    net = RoadNetwork([Node(0, 0, 0), Node(1, 100, 0)],
                      [RoadSegment(0, 0, 1, 100, 10)])
    with pytest.raises(SimulationError, match="unreachable"):
        run_scenario(_present(), net, [TravelRequest(0, 5.0, 1, 0)])


# --- exact movement arithmetic ---------------------------------------------------


def test_single_edge_takes_length_over_speed(line10):
    trace = run_scenario(_present(), line10, [TravelRequest(0, 5.0, 0, 1)])
    assert len(trace.traversals) == 1
    tr = trace.traversals[0]
    assert (tr.enter, tr.exit) == (5.0, 15.0)
    assert tr.vehicle == 0 and tr.occupancy == 1


def test_multi_edge_route_is_contiguous(line10):
    trace = run_scenario(_present(), line10, [TravelRequest(0, 2.0, 0, 3)])
    segments = [tr.segment for tr in trace.traversals]
    assert segments == [0, 2, 4]  # forward chain segments of the line
    times = [(tr.enter, tr.exit) for tr in trace.traversals]
    assert times == [(2.0, 12.0), (12.0, 22.0), (22.0, 32.0)]
    record = trace.requests[0]
    assert record.pickup == 2.0 and record.dropoff == 32.0


def test_present_vehicle_drives_the_fastest_route(grid5):
    request = TravelRequest(0, 10.0, 0, 24)
    trace = run_scenario(_present(), grid5, [request])
    path = fastest_path(grid5, 0, 24)
    assert tuple(tr.segment for tr in trace.traversals) == path.segments
    assert _total_length(trace, grid5) == pytest.approx(path.distance)
    record = trace.requests[0]
    assert record.pickup == 10.0
    assert record.dropoff == pytest.approx(10.0 + path.duration, rel=1e-9)
    assert record.baseline == path.duration
    assert record.vehicle == 0 and record.estimated_delay == 0.0


def test_present_spawns_one_vehicle_per_request(grid5):
    requests = [TravelRequest(3, 5.0, 0, 7), TravelRequest(8, 5.0, 24, 13)]
    trace = run_scenario(_present(), grid5, requests)
    assert {tr.vehicle for tr in trace.traversals} == {3, 8}
    assert trace.fleet_size == 0  # no standing fleet in the present scenario


# --- dedicated station dispatch ------------------------------------------------------


def test_colocated_stations_add_no_empty_mileage(line10):
    # stations on both endpoints of the trip: approach and return are 0 m
    layout = StationLayout((Station(0, 2, (200.0, 0.0), 1),
                            Station(1, 7, (700.0, 0.0), 0)))
    config = ScenarioConfig(mode="mod", end=600.0, rebalancing_period=None)
    trace = run_scenario(config, line10, [TravelRequest(0, 30.0, 2, 7)],
                         layout, estimator=_exact_estimator())
    record = trace.requests[0]
    assert record.pickup == 30.0  # the vehicle starts at the origin
    trip = fastest_path(line10, 2, 7)
    assert record.dropoff == pytest.approx(30.0 + trip.duration, rel=1e-9)
    assert _total_length(trace, line10) == pytest.approx(trip.distance)


def test_dispatch_adds_approach_and_return_legs(line10):
    layout = StationLayout((Station(0, 0, (0.0, 0.0), 1),))
    config = ScenarioConfig(mode="mod", end=600.0, rebalancing_period=None)
    trace = run_scenario(config, line10, [TravelRequest(0, 30.0, 3, 6)],
                         layout, estimator=_exact_estimator())
    record = trace.requests[0]
    approach = fastest_path(line10, 0, 3)
    trip = fastest_path(line10, 3, 6)
    giveback = fastest_path(line10, 6, 0)
    assert record.pickup == pytest.approx(30.0 + approach.duration, rel=1e-9)
    assert record.dropoff == pytest.approx(
        30.0 + approach.duration + trip.duration, rel=1e-9)
    assert _total_length(trace, line10) == pytest.approx(
        approach.distance + trip.distance + giveback.distance)
    # empty legs carry nobody; the trip leg carries one passenger
    for tr in trace.traversals:
        assert tr.occupancy == (1 if approach.duration + 30.0 <= tr.enter
                                < record.dropoff else 0)


def test_service_time_delays_departure(line10):
    layout = StationLayout((Station(0, 2, (200.0, 0.0), 1),))
    config = ScenarioConfig(mode="mod", end=600.0, rebalancing_period=None,
                            service_time=30.0)
    trace = run_scenario(config, line10, [TravelRequest(0, 10.0, 2, 5)],
                         layout, estimator=_exact_estimator())
    record = trace.requests[0]
    trip = fastest_path(line10, 2, 5)
    assert record.pickup == 10.0
    assert record.dropoff == pytest.approx(10.0 + 30.0 + trip.duration,
                                           rel=1e-9)


def test_empty_stations_leave_requests_unserved(line10):
    layout = StationLayout((Station(0, 0, (0.0, 0.0), 0),))
    config = ScenarioConfig(mode="mod", end=600.0, rebalancing_period=None)
    requests = [TravelRequest(0, 10.0, 2, 5), TravelRequest(1, 20.0, 3, 8)]
    trace = run_scenario(config, line10, requests, layout,
                         estimator=_exact_estimator())
    assert trace.unserved == 2 and trace.served == 0
    assert all(r.pickup is None and r.vehicle is None for r in trace.requests)
    assert trace.traversals == []


def test_stock_recovers_after_return(line10):
    # one vehicle, two well-separated requests: the second must wait for the
    # first return, then be served from wherever the vehicle parked
    layout = StationLayout((Station(0, 0, (0.0, 0.0), 1),
                            Station(1, 9, (900.0, 0.0), 0)))
    config = ScenarioConfig(mode="mod", end=3000.0, rebalancing_period=None)
    requests = [TravelRequest(0, 10.0, 1, 8), TravelRequest(1, 500.0, 8, 1)]
    trace = run_scenario(config, line10, requests, layout,
                         estimator=_exact_estimator())
    assert trace.unserved == 0
    first, second = trace.requests
    assert first.vehicle == second.vehicle == 0
    # after dropping at node 8 the car parks at station 1 (node 9), so the
    # second pickup approaches from there
    assert second.pickup == pytest.approx(500.0 + 10.0, rel=1e-9)


# --- ridesharing ----------------------------------------------------------------------


def test_overlapping_identical_trips_share_one_car(line10):
    layout = StationLayout((Station(0, 0, (0.0, 0.0), 2),))
    share = ScenarioConfig(mode="mod_rideshare", end=2000.0, q_max=600.0,
                           rebalancing_period=None)
    solo = ScenarioConfig(mode="mod", end=2000.0, rebalancing_period=None)
    requests = [TravelRequest(0, 10.0, 2, 7), TravelRequest(1, 11.0, 2, 7)]
    shared = run_scenario(share, line10, requests, layout,
                          estimator=_exact_estimator())
    dedicated = run_scenario(solo, line10, requests, layout,
                             estimator=_exact_estimator())
    assert shared.unserved == 0 and dedicated.unserved == 0
    assert shared.requests[0].vehicle == shared.requests[1].vehicle
    assert len({r.vehicle for r in dedicated.requests}) == 2
    assert _total_length(shared, line10) < _total_length(dedicated, line10)
    assert max(tr.occupancy for tr in shared.traversals) == 2


def test_rideshare_falls_back_to_dispatch_when_buses_are_full(line10):
    # capacity 1 and a tight delay bound: the second request cannot ride
    # along, so the second parked vehicle serves it
    layout = StationLayout((Station(0, 0, (0.0, 0.0), 2),))
    config = ScenarioConfig(mode="mod_rideshare", end=4000.0, q_max=80.0,
                            rebalancing_period=None, vehicle_capacity=1)
    requests = [TravelRequest(0, 10.0, 1, 9), TravelRequest(1, 40.0, 2, 8)]
    trace = run_scenario(config, line10, requests, layout,
                         estimator=_exact_estimator())
    assert trace.unserved == 0
    assert trace.requests[0].vehicle != trace.requests[1].vehicle


def _small_city():
    network = make_grid(6, 6, spacing=200.0)
    config = DemandConfig(
        start=0.0, end=1200.0, request_count=30,
        origin_clusters=(DemandCluster(150.0, 150.0, 0.6, 250.0),
                         DemandCluster(900.0, 900.0, 0.4, 250.0)),
        destination_clusters=(DemandCluster(500.0, 800.0, 1.0, 300.0),),
        seed=13)
    requests = generate_demand(config, network)
    layout = StationLayout((
        Station(0, network.nearest_node(200.0, 200.0), (200.0, 200.0), 4),
        Station(1, network.nearest_node(800.0, 800.0), (800.0, 800.0), 4),
    ))
    scenario = ScenarioConfig(mode="mod_rideshare", end=1200.0, q_max=420.0,
                              rebalancing_period=300.0)
    return network, requests, layout, scenario


def test_rideshare_run_keeps_every_vehicle_trajectory_contiguous():
    network, requests, layout, scenario = _small_city()
    trace = run_scenario(scenario, network, requests, layout,
                         estimator=TravelTimeEstimator(2.0, 0.075))
    by_vehicle = {}
    for tr in trace.traversals:
        by_vehicle.setdefault(tr.vehicle, []).append(tr)
    assert by_vehicle, "expected some driving"
    for moves in by_vehicle.values():
        for a, b in zip(moves, moves[1:]):
            assert b.enter >= a.exit - 1e-12
            assert network.segments[b.segment].from_node == \
                network.segments[a.segment].to_node
        for tr in moves:
            seg = network.segments[tr.segment]
            assert tr.exit - tr.enter == pytest.approx(seg.traversal_time,
                                                       rel=1e-9)


def test_request_lifecycle_and_conservation():
    network, requests, layout, scenario = _small_city()
    trace = run_scenario(scenario, network, requests, layout,
                         estimator=TravelTimeEstimator(2.0, 0.075))
    assert len(trace.requests) == len(requests)
    assert trace.served + trace.unserved == len(requests)
    for record in trace.requests:
        assert record.baseline > 0
        if record.served:
            assert record.vehicle is not None
            assert record.announce <= record.pickup <= record.dropoff
            assert record.dropoff <= trace.final_time
            assert record.estimated_delay is not None
            assert record.estimated_delay <= scenario.q_max + 1e-12
        else:
            assert record.pickup is None and record.vehicle is None


def test_runs_are_deterministic_and_input_order_free():
    network, requests, layout, scenario = _small_city()
    estimator = TravelTimeEstimator(2.0, 0.075)
    first = run_scenario(scenario, network, requests, layout,
                         estimator=estimator)
    second = run_scenario(scenario, network, requests, layout,
                          estimator=estimator)
    shuffled = run_scenario(scenario, network, list(reversed(requests)),
                            layout, estimator=estimator)
    assert first == second
    assert first == shuffled


# --- rebalancing ------------------------------------------------------------------------


def test_idle_stock_flows_toward_demand_weighted_targets(line10):
    # all demand sits by station 1, so both idle vehicles relocate at the
    # first tick, before any request arrives
    layout = StationLayout((Station(0, 0, (0.0, 0.0), 2),
                            Station(1, 9, (900.0, 0.0), 0)))
    config = ScenarioConfig(mode="mod", end=2000.0, rebalancing_period=300.0)
    requests = [TravelRequest(0, 1500.0, 8, 5), TravelRequest(1, 1600.0, 9, 4)]
    trace = run_scenario(config, line10, requests, layout,
                         estimator=_exact_estimator())
    assert trace.flows[0] == FlowRecord(300.0, 0, 1, 2)
    assert trace.unserved == 0
    # by arrival the stock has crossed to node 9's station: short approaches
    assert trace.requests[0].pickup == pytest.approx(1500.0 + 10.0, rel=1e-9)
    assert trace.requests[1].pickup == pytest.approx(1600.0, rel=1e-9)


def test_weights_and_targets_agree_with_the_apportionment(line10):
    layout = StationLayout((Station(0, 0, (0.0, 0.0), 2),
                            Station(1, 9, (900.0, 0.0), 0)))
    requests = [TravelRequest(0, 1500.0, 8, 5), TravelRequest(1, 1600.0, 9, 4)]
    weights = demand_weights(layout, requests, line10)
    assert weights == pytest.approx([0.0, 1.0])
    assert compute_targets(weights, 2) == [0, 2]


def test_balanced_fleet_never_rebalances(line10):
    layout = StationLayout((Station(0, 0, (0.0, 0.0), 1),
                            Station(1, 9, (900.0, 0.0), 1)))
    config = ScenarioConfig(mode="mod", end=1200.0, rebalancing_period=120.0)
    requests = [TravelRequest(0, 900.0, 0, 4), TravelRequest(1, 1000.0, 9, 5)]
    trace = run_scenario(config, line10, requests, layout,
                         estimator=_exact_estimator())
    assert trace.flows == []


def test_rebalancing_can_be_disabled(line10):
    layout = StationLayout((Station(0, 0, (0.0, 0.0), 2),
                            Station(1, 9, (900.0, 0.0), 0)))
    config = ScenarioConfig(mode="mod", end=2000.0, rebalancing_period=None)
    requests = [TravelRequest(0, 1500.0, 8, 5)]
    trace = run_scenario(config, line10, requests, layout,
                         estimator=_exact_estimator())
    assert trace.flows == []
    # without rebalancing the approach comes all the way from node 0
    assert trace.requests[0].pickup == pytest.approx(1500.0 + 80.0, rel=1e-9)
