"""Ridesharing assignment by cheapest feasible insertion.

Each vehicle keeps an ordered plan of pickup/dropoff stops.  A new request is
placed by trying every insertion of its pickup and dropoff into every
vehicle's plan, keeping the relative order of existing stops, and taking the
cheapest candidate whose projected travel delays stay within the scenario
bound for every request the plan serves.

Plan cost is the Euclidean length of the stop chain, and stop-to-stop times
come from the calibrated linear estimator, so one candidate evaluation does
no routing work at all.  Exact routes are only computed once a vehicle
actually drives.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from .road_network import RoadNetwork, TravelTimeEstimator

__all__ = [
    "OrderKind",
    "PlanOrder",
    "VehicleState",
    "MatchContext",
    "Assignment",
    "MatchingError",
    "plan_cost",
    "plan_is_valid",
    "request_delay",
    "enumerate_insertions",
    "match_request",
    "dispatch_from_station",
    "brute_force_oracle",
]

# brute_force_oracle refuses instances with more plan orders than this
_ORACLE_ORDER_LIMIT = 12


class MatchingError(ValueError):
    pass


class OrderKind(Enum):
    PICKUP = "pickup"
    DROPOFF = "dropoff"


@dataclass(frozen=True)
class PlanOrder:
    kind: OrderKind
    request: int  # request id
    location: int  # node id


class VehicleState:
    """Mutable per-vehicle state shared by the matcher and the simulator.

    `capacity` of None means unlimited seats.  `at_station` is the station id
    while the vehicle is parked, else None.  While driving, `segment` holds
    the current road segment and `route` the segment ids still ahead;
    `pending_enter`/`pending_order` flag scheduled events so a mid-drive
    reassignment does not double-dispatch the vehicle.
    """

    __slots__ = (
        "id", "home_station", "capacity", "at_station", "node",
        "segment", "segment_entered", "route", "plan", "onboard",
        "return_to", "rebalance_to", "pending_enter", "pending_order",
    )

    def __init__(self, id, node, home_station=None, capacity=None, at_station=None):
        self.id = id
        self.node = node
        self.home_station = home_station
        self.capacity = capacity
        self.at_station = at_station
        self.segment = None
        self.segment_entered = 0.0
        self.route: deque[int] = deque()
        self.plan: tuple[PlanOrder, ...] = ()
        self.onboard: set[int] = set()
        self.return_to = None
        self.rebalance_to = None
        self.pending_enter = False
        self.pending_order = False

    def position_at(self, t: float, network: RoadNetwork) -> tuple[float, float]:
        """Planar position at time t, interpolated along the current segment."""
        if self.segment is None:
            return network.position(self.node)
        seg = self.segment
        frac = (t - self.segment_entered) / seg.traversal_time
        frac = min(1.0, max(0.0, frac))
        ax, ay = network.position(seg.from_node)
        bx, by = network.position(seg.to_node)
        return (ax + frac * (bx - ax), ay + frac * (by - ay))

    def __repr__(self):
        return (f"VehicleState(id={self.id}, node={self.node}, "
                f"at_station={self.at_station}, plan={len(self.plan)} orders)")


@dataclass(frozen=True)
class MatchContext:
    """Shared inputs for one matching decision at time `now`.

    `announcements` and `baselines` must cover the incoming request and every
    request appearing in any candidate vehicle's plan; baselines are the
    road-network fastest-route durations cached at announcement.
    """

    network: RoadNetwork
    estimator: TravelTimeEstimator
    now: float
    announcements: Mapping[int, float]
    baselines: Mapping[int, float]
    service_time: float = 0.0


@dataclass(frozen=True)
class Assignment:
    request: int
    vehicle: int
    plan: tuple[PlanOrder, ...]
    cost_delta: float  # added Euclidean plan length, meters
    pickup_index: int
    dropoff_index: int
    estimated_delays: dict[int, float] = field(compare=False, default_factory=dict)


def plan_cost(start_xy: tuple[float, float], plan, network: RoadNetwork) -> float:
    """Euclidean length of the stop chain, in meters, from `start_xy`."""
    cost = 0.0
    cx, cy = start_xy
    for order in plan:
        ox, oy = network.position(order.location)
        cost += math.hypot(ox - cx, oy - cy)
        cx, cy = ox, oy
    return cost


def plan_is_valid(plan, onboard) -> bool:
    """Structural validity: pickups precede their dropoffs, onboard requests
    appear as dropoffs only, and nobody is left without a dropoff."""
    pending = set(onboard)
    seen = set(onboard)
    for order in plan:
        if order.kind is OrderKind.PICKUP:
            if order.request in seen:
                return False
            seen.add(order.request)
            pending.add(order.request)
        else:
            if order.request not in pending:
                return False
            pending.discard(order.request)
    return not pending


def request_delay(request_id: int, plan, start_xy, ctx: MatchContext) -> float:
    """Projected travel delay of one request under a plan, in seconds.

    Stop arrival times are rolled forward with the estimator from `start_xy`
    at `ctx.now`; the delay is (projected dropoff - announcement) minus the
    request's fastest-route baseline.  Negative values are returned as
    computed.  Raises :class:`MatchingError` if the plan never drops the
    request off.
    """
    estimator = ctx.estimator
    t = ctx.now
    cx, cy = start_xy
    for order in plan:
        ox, oy = ctx.network.position(order.location)
        t = t + max(0.0, estimator.intercept
                    + estimator.slope * math.hypot(ox - cx, oy - cy))
        if order.kind is OrderKind.DROPOFF and order.request == request_id:
            return (t - ctx.announcements[request_id]) - ctx.baselines[request_id]
        t = t + ctx.service_time
        cx, cy = ox, oy
    raise MatchingError(f"plan has no dropoff for request {request_id}")


def enumerate_insertions(plan, request):
    """All ways to insert a request's pickup/dropoff pair into a plan.

    Yields (pickup_index, dropoff_index, candidate_plan) triples; existing
    stops keep their relative order, the pickup goes at `pickup_index` of the
    base plan and the dropoff at `dropoff_index` of the pickup-extended plan.
    A plan of l orders yields (l+1)(l+2)/2 candidates.
    """
    pickup = PlanOrder(OrderKind.PICKUP, request.id, request.origin)
    dropoff = PlanOrder(OrderKind.DROPOFF, request.id, request.destination)
    l = len(plan)
    out = []
    for i in range(l + 1):
        with_pickup = plan[:i] + (pickup,) + plan[i:]
        for j in range(i + 1, l + 2):
            out.append((i, j, with_pickup[:j] + (dropoff,) + with_pickup[j:]))
    return out


def match_request(fleet, request, q_max, ctx: MatchContext, layout=None):
    """Assign a request to the fleet by cheapest feasible insertion.

    Every vehicle is a candidate, parked or driving.  A candidate insertion
    is feasible when seat capacity is respected along the whole plan and the
    projected delay of *every* request the plan serves stays <= q_max.  Among
    feasible candidates the smallest (cost_delta, vehicle id, pickup index,
    dropoff index) wins, which makes the choice deterministic.

    When no insertion is feasible and `layout` is given, falls back to
    :func:`dispatch_from_station`; returns None when that fails too (the
    request goes unserved).
    """
    network = ctx.network
    slope = ctx.estimator.slope
    icpt = ctx.estimator.intercept
    service = ctx.service_time
    now = ctx.now
    announce = ctx.announcements
    baselines = ctx.baselines

    pox, poy = network.position(request.origin)
    pdx, pdy = network.position(request.destination)

    best_key = None
    best_pick = None  # (vehicle, xy)
    # id order makes the early prune below safe: any later candidate that
    # ties on cost delta would lose the (vehicle id, i, j) tie-break anyway
    for vehicle in sorted(fleet, key=lambda v: v.id):
        xy = vehicle.position_at(now, network)
        orders = vehicle.plan
        l = len(orders)
        stops = []
        base_cost = 0.0
        cx, cy = xy
        for order in orders:
            ox, oy = network.position(order.location)
            base_cost += math.hypot(ox - cx, oy - cy)
            cx, cy = ox, oy
            stops.append((ox, oy, order.kind is OrderKind.DROPOFF, order.request))
        onboard0 = len(vehicle.onboard)
        capacity = vehicle.capacity

        for i in range(l + 1):
            for j in range(i + 1, l + 2):
                cost = 0.0
                t = now
                cx, cy = xy
                count = onboard0
                feasible = True
                for m in range(l + 2):
                    if m < i:
                        ox, oy, is_drop, rid = stops[m]
                    elif m == i:
                        ox, oy, is_drop, rid = pox, poy, False, request.id
                    elif m < j:
                        ox, oy, is_drop, rid = stops[m - 1]
                    elif m == j:
                        ox, oy, is_drop, rid = pdx, pdy, True, request.id
                    else:
                        ox, oy, is_drop, rid = stops[m - 2]
                    d = math.hypot(ox - cx, oy - cy)
                    cost += d
                    # cost only grows along the walk, so a candidate that
                    # already matches the incumbent can at best tie and would
                    # then lose on (vehicle, i, j) order
                    if best_key is not None and cost - base_cost >= best_key[0]:
                        feasible = False
                        break
                    t = t + max(0.0, icpt + slope * d)
                    if is_drop:
                        if (t - announce[rid]) - baselines[rid] > q_max:
                            feasible = False
                            break
                        count -= 1
                    else:
                        count += 1
                        if capacity is not None and count > capacity:
                            feasible = False
                            break
                    t = t + service
                    cx, cy = ox, oy
                if feasible:
                    key = (cost - base_cost, vehicle.id, i, j)
                    if best_key is None or key < best_key:
                        best_key = key
                        best_pick = (vehicle, xy)

    if best_key is None:
        if layout is not None:
            return dispatch_from_station(request, layout, fleet, ctx)
        return None

    delta, _, i, j = best_key
    vehicle, xy = best_pick
    pickup = PlanOrder(OrderKind.PICKUP, request.id, request.origin)
    dropoff = PlanOrder(OrderKind.DROPOFF, request.id, request.destination)
    with_pickup = vehicle.plan[:i] + (pickup,) + vehicle.plan[i:]
    plan = with_pickup[:j] + (dropoff,) + with_pickup[j:]
    delays = {
        order.request: request_delay(order.request, plan, xy, ctx)
        for order in plan
        if order.kind is OrderKind.DROPOFF
    }
    return Assignment(request.id, vehicle.id, plan, delta, i, j, delays)


def dispatch_from_station(request, layout, fleet, ctx: MatchContext):
    """Send an idle vehicle from the nearest stocked station (no sharing).

    Stations are tried in order of estimated travel time to the request's
    origin (ties by station id); within a station the lowest vehicle id
    leaves first.  Returns None when every station is empty.
    """
    network = ctx.network
    origin_xy = network.position(request.origin)
    ranked = sorted(
        layout.stations,
        key=lambda s: (ctx.estimator.estimate(network.position(s.node), origin_xy),
                       s.id),
    )
    idle: dict[int, VehicleState] = {}
    for vehicle in fleet:
        sid = vehicle.at_station
        if sid is not None and (sid not in idle or vehicle.id < idle[sid].id):
            idle[sid] = vehicle
    plan = (
        PlanOrder(OrderKind.PICKUP, request.id, request.origin),
        PlanOrder(OrderKind.DROPOFF, request.id, request.destination),
    )
    for station in ranked:
        vehicle = idle.get(station.id)
        if vehicle is None:
            continue
        xy = network.position(vehicle.node)
        delta = plan_cost(xy, plan, network)
        delays = {request.id: request_delay(request.id, plan, xy, ctx)}
        return Assignment(request.id, vehicle.id, plan, delta, 0, 1, delays)
    return None


def brute_force_oracle(fleet, request, q_max, ctx: MatchContext):
    """Reference matcher: exhaustive candidate enumeration, no shortcuts.

    Materializes every insertion of every vehicle, filters by structural
    validity, seat capacity, and per-request projected delay, and picks the
    minimum (cost_delta, vehicle id, pickup index, dropoff index).  Only for
    small instances; refuses fleets with more than a dozen plan orders.
    """
    total_orders = sum(len(v.plan) for v in fleet)
    if total_orders > _ORACLE_ORDER_LIMIT:
        raise MatchingError(
            f"oracle limited to {_ORACLE_ORDER_LIMIT} plan orders, got {total_orders}"
        )
    best = None
    best_key = None
    for vehicle in fleet:
        xy = vehicle.position_at(ctx.now, ctx.network)
        base_cost = plan_cost(xy, vehicle.plan, ctx.network)
        for i, j, candidate in enumerate_insertions(vehicle.plan, request):
            if not plan_is_valid(candidate, vehicle.onboard):
                continue
            if not _seats_ok(candidate, vehicle):
                continue
            delays = {}
            feasible = True
            for order in candidate:
                if order.kind is not OrderKind.DROPOFF:
                    continue
                delay = request_delay(order.request, candidate, xy, ctx)
                if delay > q_max:
                    feasible = False
                    break
                delays[order.request] = delay
            if not feasible:
                continue
            delta = plan_cost(xy, candidate, ctx.network) - base_cost
            key = (delta, vehicle.id, i, j)
            if best_key is None or key < best_key:
                best_key = key
                best = Assignment(request.id, vehicle.id, candidate, delta, i, j,
                                  delays)
    return best


def _seats_ok(plan, vehicle) -> bool:
    if vehicle.capacity is None:
        return True
    count = len(vehicle.onboard)
    for order in plan:
        count += 1 if order.kind is OrderKind.PICKUP else -1
        if count > vehicle.capacity:
            return False
    return True
