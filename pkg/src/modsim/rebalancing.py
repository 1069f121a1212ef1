"""Periodic stock rebalancing between stations.

Targets come from apportioning the total fleet by demand weights; the
surplus-to-shortage shipment plan is a classic transportation problem solved
exactly by successive shortest augmenting paths.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

__all__ = [
    "RebalancingFlow",
    "RebalancingError",
    "compute_targets",
    "solve_transportation",
    "apply_rebalancing",
]

log = logging.getLogger(__name__)


class RebalancingError(ValueError):
    pass


@dataclass(frozen=True)
class RebalancingFlow:
    from_station: int
    to_station: int
    count: int
    unit_cost: float


def compute_targets(weights, total_fleet: int) -> list[int]:
    """Apportion `total_fleet` vehicles by weight, largest remainder first.

    Fractional-part ties break toward the lower index.  The result sums to
    exactly `total_fleet`.
    """
    w = np.asarray(weights, dtype=float)
    if total_fleet < 0:
        raise RebalancingError("total_fleet must be >= 0")
    if w.size == 0 or (w < 0).any():
        raise RebalancingError("weights must be non-empty and non-negative")
    if abs(float(w.sum()) - 1.0) > 1e-9:
        raise RebalancingError(f"weights must sum to 1, got {float(w.sum())}")
    raw = w * total_fleet
    base = np.floor(raw).astype(int)
    leftover = total_fleet - int(base.sum())
    order = sorted(range(w.size), key=lambda i: (-(raw[i] - base[i]), i))
    for i in order[:leftover]:
        base[i] += 1
    return [int(v) for v in base]


def solve_transportation(supplies, demands, costs) -> list[RebalancingFlow]:
    """Minimum-cost shipment of min(sum supplies, sum demands) units.

    Successive shortest augmenting paths on the bipartite flow network:
    every augmentation follows a cheapest residual path (Bellman-Ford, which
    tolerates the negative reverse arcs), so each intermediate flow value is
    cost-optimal and so is the final one.  Costs must be non-negative;
    supplies and demands are non-negative integers and need not balance.

    Flows come back ordered by (from_station, to_station) with count >= 1.
    """
    supplies = [int(s) for s in supplies]
    demands = [int(d) for d in demands]
    if any(s < 0 for s in supplies) or any(d < 0 for d in demands):
        raise RebalancingError("supplies and demands must be >= 0")
    cost = np.asarray(costs, dtype=float)
    if cost.shape != (len(supplies), len(demands)):
        raise RebalancingError(
            f"cost matrix shape {cost.shape} does not match "
            f"{len(supplies)} supplies x {len(demands)} demands"
        )
    if cost.size and float(cost.min()) < 0:
        raise RebalancingError("negative cost entry")

    target = min(sum(supplies), sum(demands))
    if target == 0:
        return []

    ns, nd = len(supplies), len(demands)
    source, sink = 0, 1 + ns + nd
    node_count = sink + 1

    # Arc arrays in to/cap/cost form; arc k and k^1 are a forward/reverse pair.
    arc_to: list[int] = []
    arc_cap: list[int] = []
    arc_cost: list[float] = []
    adjacency: list[list[int]] = [[] for _ in range(node_count)]

    def add_arc(u, v, cap, unit_cost):
        adjacency[u].append(len(arc_to))
        arc_to.append(v)
        arc_cap.append(cap)
        arc_cost.append(unit_cost)
        adjacency[v].append(len(arc_to))
        arc_to.append(u)
        arc_cap.append(0)
        arc_cost.append(-unit_cost)

    for i, supply in enumerate(supplies):
        add_arc(source, 1 + i, supply, 0.0)
    ship_arcs: dict[tuple[int, int], int] = {}
    for i in range(ns):
        for j in range(nd):
            ship_arcs[(i, j)] = len(arc_to)
            add_arc(1 + i, 1 + ns + j, target, float(cost[i, j]))
    for j, demand in enumerate(demands):
        add_arc(1 + ns + j, sink, demand, 0.0)

    shipped = 0
    while shipped < target:
        dist = [float("inf")] * node_count
        parent_arc = [-1] * node_count
        dist[source] = 0.0
        for _ in range(node_count - 1):
            changed = False
            for u in range(node_count):
                du = dist[u]
                if du == float("inf"):
                    continue
                for k in adjacency[u]:
                    if arc_cap[k] > 0 and du + arc_cost[k] < dist[arc_to[k]]:
                        dist[arc_to[k]] = du + arc_cost[k]
                        parent_arc[arc_to[k]] = k
                        changed = True
            if not changed:
                break
        if dist[sink] == float("inf"):
            break

        push = target - shipped
        v = sink
        while v != source:
            k = parent_arc[v]
            push = min(push, arc_cap[k])
            v = arc_to[k ^ 1]
        v = sink
        while v != source:
            k = parent_arc[v]
            arc_cap[k] -= push
            arc_cap[k ^ 1] += push
            v = arc_to[k ^ 1]
        shipped += push

    flows = []
    for (i, j), k in ship_arcs.items():
        moved = arc_cap[k ^ 1]  # reverse capacity equals flow pushed
        if moved > 0:
            flows.append(RebalancingFlow(i, j, moved, float(cost[i, j])))
    flows.sort(key=lambda f: (f.from_station, f.to_station))
    return flows


def apply_rebalancing(flows, fleet) -> list[tuple[object, RebalancingFlow]]:
    """Pick idle vehicles for each flow and mark them as empty-driving.

    Vehicles parked at the flow's source station are taken lowest id first.
    If the station's stock raced below the planned count, fewer vehicles ship
    and the discrepancy is logged.  Returns (vehicle, flow) pairs; the caller
    routes the vehicles.
    """
    idle: dict[int, list] = {}
    for vehicle in fleet:
        if vehicle.at_station is not None:
            idle.setdefault(vehicle.at_station, []).append(vehicle)
    for stack in idle.values():
        stack.sort(key=lambda v: v.id)

    dispatches = []
    for flow in flows:
        available = idle.get(flow.from_station, [])
        take = min(flow.count, len(available))
        if take < flow.count:
            log.warning(
                "station %d stock short: planned %d, shipping %d",
                flow.from_station, flow.count, take,
            )
        for vehicle in available[:take]:
            vehicle.at_station = None
            vehicle.rebalance_to = flow.to_station
            dispatches.append((vehicle, flow))
        del available[:take]
    return dispatches
