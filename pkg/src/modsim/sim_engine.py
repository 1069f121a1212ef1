"""Deterministic discrete-event execution of the fleet scenarios.

Three scenario modes share one engine:

* ``present``: every request gets its own car at its origin, driving the
  fastest route; no stations, no empty legs.
* ``mod``: a station-based fleet serves each request with a dedicated
  dispatch from the nearest stocked station, returning to the nearest
  station afterwards; idle stock is rebalanced periodically.
* ``mod_rideshare``: like ``mod`` but requests are inserted into vehicle
  plans by the cheapest-insertion matcher, so trips can share a car within
  the scenario's travel-delay bound.

Vehicles move edge by edge; entry and exit events carry exact crossing
times, so traversal records need no time-stepping.  Simultaneous events
resolve by kind (edge exits, then dropoffs, pickups, parkings, request
arrivals, rebalancing ticks, edge entries) and then by entity id, which
makes runs bit-reproducible.
"""

from __future__ import annotations

import heapq
import itertools
from collections import deque
from dataclasses import dataclass, field

from .matching import (
    MatchContext,
    OrderKind,
    PlanOrder,
    VehicleState,
    dispatch_from_station,
    match_request,
)
from .rebalancing import (
    RebalancingFlow,
    apply_rebalancing,
    compute_targets,
    solve_transportation,
)
from .road_network import (
    NoPathError,
    RoadNetwork,
    TravelTimeEstimator,
    calibrate_estimator,
    fastest_path,
)
from .stations import StationLayout, demand_weights, nearest_station

__all__ = [
    "MODES",
    "ScenarioConfig",
    "Traversal",
    "RequestRecord",
    "FlowRecord",
    "SimTrace",
    "SimulationError",
    "run_scenario",
]

MODES = ("present", "mod", "mod_rideshare")

# event kinds, in tie-break priority order at equal timestamps
EDGE_EXITED = 0
DROPOFF = 1
PICKUP = 2
PARKED = 3
REQUEST_ARRIVAL = 4
REBALANCE_TICK = 5
EDGE_ENTERED = 6

_ORDER_EVENT = {OrderKind.PICKUP: PICKUP, OrderKind.DROPOFF: DROPOFF}


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    """Scenario parameters; times in seconds on one shared clock.

    Statistics are collected over [stat_start, end), leaving the span before
    stat_start as warm-up.  `q_max` (the travel-delay bound) is required in
    mod_rideshare mode and ignored elsewhere.  `rebalancing_period` of None
    disables rebalancing.  `vehicle_capacity` of None means unlimited seats.
    When no estimator is passed to :func:`run_scenario`, one is calibrated
    with `estimator_samples`/`estimator_seed`.
    """

    mode: str
    end: float
    sim_start: float = 0.0
    stat_start: float = 0.0
    q_max: float | None = None
    rebalancing_period: float | None = 600.0
    service_time: float = 0.0
    vehicle_capacity: int | None = None
    estimator_samples: int = 100
    estimator_seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise SimulationError(f"unknown mode {self.mode!r}")
        if not self.end > self.sim_start:
            raise SimulationError("end must be after sim_start")
        if not self.sim_start <= self.stat_start < self.end:
            raise SimulationError("need sim_start <= stat_start < end")
        if self.mode == "mod_rideshare" and not (self.q_max and self.q_max > 0):
            raise SimulationError("mod_rideshare needs q_max > 0")
        if self.rebalancing_period is not None and not self.rebalancing_period > 0:
            raise SimulationError("rebalancing_period must be positive or None")
        if self.service_time < 0:
            raise SimulationError("service_time must be >= 0")
        if self.vehicle_capacity is not None and self.vehicle_capacity < 1:
            raise SimulationError("vehicle_capacity must be >= 1 or None")


@dataclass(frozen=True)
class Traversal:
    vehicle: int
    segment: int
    enter: float
    exit: float
    occupancy: int  # passengers on board for the whole edge


@dataclass
class RequestRecord:
    """Lifecycle of one request; pickup/dropoff/vehicle stay None if unserved.

    `estimated_delay` is the last estimator-projected travel delay recorded
    when the serving plan was (re)accepted; the realized delay follows from
    (dropoff - announce) - baseline.
    """

    request: int
    announce: float
    origin: int
    destination: int
    baseline: float
    pickup: float | None = None
    dropoff: float | None = None
    vehicle: int | None = None
    estimated_delay: float | None = None

    @property
    def served(self) -> bool:
        return self.dropoff is not None


@dataclass(frozen=True)
class FlowRecord:
    tick: float
    from_station: int
    to_station: int
    count: int  # vehicles actually shipped


@dataclass
class SimTrace:
    mode: str
    q_max: float | None
    sim_start: float
    stat_start: float
    end: float
    fleet_size: int
    unserved: int
    final_time: float
    traversals: list[Traversal] = field(default_factory=list)
    requests: list[RequestRecord] = field(default_factory=list)
    flows: list[FlowRecord] = field(default_factory=list)

    @property
    def stats_window(self) -> tuple[float, float]:
        return (self.stat_start, self.end)

    @property
    def served(self) -> int:
        return sum(1 for r in self.requests if r.served)


def run_scenario(config: ScenarioConfig, network: RoadNetwork, requests,
                 layout: StationLayout | None = None,
                 estimator: TravelTimeEstimator | None = None) -> SimTrace:
    """Run one scenario to completion and return its trace.

    All requests must be announced within [sim_start, end) and be satisfiable
    on the network; station modes additionally need a layout with at least
    one station.  The engine drains every event, so vehicles finish trips and
    returns past `end` and the trace's `final_time` marks the last event.
    """
    return _Simulation(config, network, requests, layout, estimator).run()


class _Simulation:
    def __init__(self, config, network, requests, layout, estimator):
        self.config = config
        self.network = network
        self.mode = config.mode
        self.layout = layout

        seen: set[int] = set()
        for req in requests:
            if req.id in seen:
                raise SimulationError(f"duplicate request id {req.id}")
            seen.add(req.id)
            if not config.sim_start <= req.announcement_time < config.end:
                raise SimulationError(
                    f"request {req.id} announced at {req.announcement_time}, "
                    f"outside [{config.sim_start}, {config.end})"
                )
            if req.origin == req.destination:
                raise SimulationError(f"request {req.id}: origin == destination")
            if req.destination not in network.reachable_from(req.origin):
                raise SimulationError(
                    f"request {req.id}: node {req.destination} unreachable "
                    f"from node {req.origin}"
                )
        self.requests_by_id = {req.id: req for req in requests}

        if self.mode != "present":
            if layout is None or layout.n == 0:
                raise SimulationError("station modes need at least one station")
            if estimator is None:
                estimator = calibrate_estimator(
                    network, config.estimator_samples, config.estimator_seed
                )
        self.estimator = estimator
        self.station_by_id = {s.id: s for s in layout.stations} if layout else {}

        self.vehicles: dict[int, VehicleState] = {}
        self.fleet_list: list[VehicleState] = []
        if self.mode != "present":
            vid = 0
            for station in layout.stations:
                for _ in range(station.initial_stock):
                    vehicle = VehicleState(
                        vid, station.node,
                        home_station=station.id,
                        capacity=config.vehicle_capacity,
                        at_station=station.id,
                    )
                    self.vehicles[vid] = vehicle
                    self.fleet_list.append(vehicle)
                    vid += 1

        self.heap: list[tuple[float, int, int, int]] = []
        self._seq = itertools.count()
        self.records: dict[int, RequestRecord] = {}
        self.announced: dict[int, float] = {}
        self.baselines: dict[int, float] = {}
        self.traversals: list[Traversal] = []
        self.flow_records: list[FlowRecord] = []
        self.unserved = 0
        self.final_time = config.sim_start

        for req in requests:
            self._push(req.announcement_time, REQUEST_ARRIVAL, req.id)

        self.rebalancing_on = (
            self.mode != "present"
            and config.rebalancing_period is not None
            and self.fleet_list
            and requests
        )
        if self.rebalancing_on:
            weights = demand_weights(layout, requests, network)
            self.targets = compute_targets(weights, len(self.fleet_list))
            first = config.sim_start + config.rebalancing_period
            if first < config.end:
                self._push(first, REBALANCE_TICK, -1)

    def _push(self, time, kind, entity):
        heapq.heappush(self.heap, (time, kind, entity, next(self._seq)))

    def run(self) -> SimTrace:
        while self.heap:
            t, kind, entity, _ = heapq.heappop(self.heap)
            self.final_time = t
            if kind == EDGE_EXITED:
                self._handle_edge_exited(t, entity)
            elif kind in (DROPOFF, PICKUP):
                self._handle_order(t, entity, kind)
            elif kind == PARKED:
                self._handle_parked(t, entity)
            elif kind == REQUEST_ARRIVAL:
                self._handle_request(t, entity)
            elif kind == REBALANCE_TICK:
                self._handle_tick(t)
            else:
                self._handle_edge_entered(t, entity)
        ordered = [self.records[rid] for rid in sorted(self.records)]
        return SimTrace(
            mode=self.mode,
            q_max=self.config.q_max,
            sim_start=self.config.sim_start,
            stat_start=self.config.stat_start,
            end=self.config.end,
            fleet_size=len(self.fleet_list),
            unserved=self.unserved,
            final_time=self.final_time,
            traversals=self.traversals,
            requests=ordered,
            flows=self.flow_records,
        )

    # -- movement ----------------------------------------------------------

    def _drive(self, vehicle, target, t):
        try:
            path = fastest_path(self.network, vehicle.node, target)
        except NoPathError as exc:
            raise SimulationError(
                f"vehicle {vehicle.id} stranded: {exc}"
            ) from exc
        vehicle.route = deque(path.segments)
        vehicle.pending_enter = True
        self._push(t, EDGE_ENTERED, vehicle.id)

    def _depart(self, vehicle, t):
        """Decide the next leg for a vehicle standing at a node."""
        if vehicle.plan:
            first = vehicle.plan[0]
            if vehicle.node == first.location:
                vehicle.pending_order = True
                self._push(t, _ORDER_EVENT[first.kind], vehicle.id)
            else:
                self._drive(vehicle, first.location, t)
        elif vehicle.rebalance_to is not None:
            station = self.station_by_id[vehicle.rebalance_to]
            if vehicle.node == station.node:
                self._push(t, PARKED, vehicle.id)
            else:
                self._drive(vehicle, station.node, t)
        elif self.mode == "present":
            pass  # dedicated vehicle, journey over
        else:
            station = nearest_station(self.layout, vehicle.node, self.network,
                                      self.estimator)
            vehicle.return_to = station.id
            if vehicle.node == station.node:
                self._push(t, PARKED, vehicle.id)
            else:
                self._drive(vehicle, station.node, t)

    def _handle_edge_entered(self, t, vid):
        vehicle = self.vehicles[vid]
        vehicle.pending_enter = False
        if not vehicle.route:
            # the planned route was cancelled by a reassignment
            self._depart(vehicle, t)
            return
        segment = self.network.segments[vehicle.route.popleft()]
        vehicle.segment = segment
        vehicle.segment_entered = t
        self._push(t + segment.traversal_time, EDGE_EXITED, vid)

    def _handle_edge_exited(self, t, vid):
        vehicle = self.vehicles[vid]
        segment = vehicle.segment
        self.traversals.append(
            Traversal(vid, segment.id, vehicle.segment_entered, t,
                      len(vehicle.onboard))
        )
        vehicle.segment = None
        vehicle.node = segment.to_node
        if vehicle.route:
            vehicle.pending_enter = True
            self._push(t, EDGE_ENTERED, vid)
        else:
            self._depart(vehicle, t)

    # -- stops --------------------------------------------------------------

    def _handle_order(self, t, vid, kind):
        vehicle = self.vehicles[vid]
        vehicle.pending_order = False
        order = vehicle.plan[0] if vehicle.plan else None
        if (order is None or order.location != vehicle.node
                or _ORDER_EVENT[order.kind] != kind):
            # plan was rewritten while dwelling; chase the new first stop
            self._depart(vehicle, t)
            return
        vehicle.plan = vehicle.plan[1:]
        record = self.records[order.request]
        if order.kind is OrderKind.PICKUP:
            vehicle.onboard.add(order.request)
            record.pickup = t
        else:
            vehicle.onboard.discard(order.request)
            record.dropoff = t
        self._depart(vehicle, t + self.config.service_time)

    def _handle_parked(self, t, vid):
        vehicle = self.vehicles[vid]
        target = (vehicle.return_to if vehicle.return_to is not None
                  else vehicle.rebalance_to)
        if target is None or self.station_by_id[target].node != vehicle.node:
            raise SimulationError(f"vehicle {vid} parked nowhere at t={t}")
        vehicle.at_station = target
        vehicle.return_to = None
        vehicle.rebalance_to = None

    # -- demand -------------------------------------------------------------

    def _handle_request(self, t, rid):
        request = self.requests_by_id[rid]
        baseline = fastest_path(self.network, request.origin,
                                request.destination).duration
        self.announced[rid] = t
        self.baselines[rid] = baseline
        record = RequestRecord(rid, t, request.origin, request.destination,
                               baseline)
        self.records[rid] = record

        if self.mode == "present":
            vehicle = VehicleState(rid, request.origin)
            self.vehicles[rid] = vehicle
            vehicle.plan = (
                PlanOrder(OrderKind.PICKUP, rid, request.origin),
                PlanOrder(OrderKind.DROPOFF, rid, request.destination),
            )
            record.vehicle = rid
            record.estimated_delay = 0.0
            self._depart(vehicle, t)
            return

        ctx = MatchContext(self.network, self.estimator, t,
                           self.announced, self.baselines,
                           self.config.service_time)
        if self.mode == "mod":
            assignment = dispatch_from_station(request, self.layout,
                                               self.fleet_list, ctx)
        else:
            assignment = match_request(self.fleet_list, request,
                                       self.config.q_max, ctx,
                                       layout=self.layout)
        if assignment is None:
            self.unserved += 1
        else:
            self._apply_assignment(assignment, t)

    def _apply_assignment(self, assignment, t):
        vehicle = self.vehicles[assignment.vehicle]
        self.records[assignment.request].vehicle = vehicle.id
        for rid, delay in assignment.estimated_delays.items():
            self.records[rid].estimated_delay = delay
        vehicle.plan = assignment.plan
        vehicle.at_station = None
        vehicle.return_to = None
        vehicle.rebalance_to = None
        if vehicle.segment is not None or vehicle.pending_enter:
            vehicle.route.clear()  # reroute once the current edge ends
        elif vehicle.pending_order:
            pass  # mid-dwell; the order handler re-dispatches afterwards
        else:
            self._depart(vehicle, t)

    # -- rebalancing ---------------------------------------------------------

    def _handle_tick(self, t):
        self._audit(t)
        layout = self.layout
        index_of = {s.id: i for i, s in enumerate(layout.stations)}
        stocks = [0] * layout.n
        for vehicle in self.fleet_list:
            if vehicle.at_station is not None:
                stocks[index_of[vehicle.at_station]] += 1
        supplies = [max(0, stocks[i] - self.targets[i]) for i in range(layout.n)]
        demands = [max(0, self.targets[i] - stocks[i]) for i in range(layout.n)]
        if any(supplies) and any(demands):
            positions = [self.network.position(s.node) for s in layout.stations]
            costs = [
                [self.estimator.estimate(positions[i], positions[j])
                 for j in range(layout.n)]
                for i in range(layout.n)
            ]
            flows = solve_transportation(supplies, demands, costs)
            flows = [
                RebalancingFlow(layout.stations[f.from_station].id,
                                layout.stations[f.to_station].id,
                                f.count, f.unit_cost)
                for f in flows
            ]
            dispatches = apply_rebalancing(flows, self.fleet_list)
            shipped: dict[tuple[int, int], int] = {}
            for vehicle, flow in dispatches:
                shipped[(flow.from_station, flow.to_station)] = (
                    shipped.get((flow.from_station, flow.to_station), 0) + 1
                )
                self._depart(vehicle, t)
            for flow in flows:
                count = shipped.get((flow.from_station, flow.to_station), 0)
                if count:
                    self.flow_records.append(
                        FlowRecord(t, flow.from_station, flow.to_station, count)
                    )
        nxt = t + self.config.rebalancing_period
        if nxt < self.config.end:
            self._push(nxt, REBALANCE_TICK, -1)

    def _audit(self, t):
        """Every fleet vehicle must be parked or verifiably in motion."""
        for vehicle in self.fleet_list:
            parked = vehicle.at_station is not None
            active = (vehicle.segment is not None or bool(vehicle.route)
                      or vehicle.pending_enter or vehicle.pending_order
                      or bool(vehicle.plan)
                      or vehicle.return_to is not None
                      or vehicle.rebalance_to is not None)
            if parked == active:
                raise SimulationError(
                    f"conservation violated at t={t}: vehicle {vehicle.id} is "
                    f"{'both parked and active' if parked else 'unaccounted for'}"
                )
