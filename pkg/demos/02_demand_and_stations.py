"""Synthetic demand, station placement, and fleet allocation.

Draws clustered morning-commute trips (homes on the edges, jobs in the
middle), places stations by clustering all trip endpoints, and splits a
fleet across the stations in proportion to the demand each one attracts.
"""

from collections import Counter

from modsim import (
    DemandCluster,
    DemandConfig,
    build_stations,
    calibrate_estimator,
    compute_targets,
    demand_weights,
    generate_demand,
)
from modsim.stations import average_access_time

from _city import small_city


def main():
    network = small_city()
    config = DemandConfig(
        start=0.0, end=3600.0, request_count=300,
        origin_clusters=(
            DemandCluster(400, 400, 0.4, 300),
            DemandCluster(2600, 500, 0.35, 300),
            DemandCluster(500, 2600, 0.25, 300),
        ),
        destination_clusters=(DemandCluster(1500, 1500, 1.0, 350),),
        seed=7,
    )
    requests = generate_demand(config, network)
    print(f"generated {len(requests)} requests over one hour")
    origins = Counter(r.origin for r in requests)
    print(f"  {len(origins)} distinct origin nodes; busiest: "
          + ", ".join(f"node {n} x{c}" for n, c in origins.most_common(3)))

    points = [network.position(r.origin) for r in requests]
    points += [network.position(r.destination) for r in requests]
    layout = build_stations(points, n=4, seed=1, network=network)
    print("\nstations (k-means centers snapped to road nodes):")
    for st in layout.stations:
        print(f"  station {st.id}: node {st.node} near "
              f"({st.center[0]:.0f}, {st.center[1]:.0f})")

    estimator = calibrate_estimator(network, 200, seed=3)
    access = average_access_time(layout, requests, network, estimator)
    print(f"average station-to-origin approach: {access:.1f} s")

    weights = demand_weights(layout, requests, network)
    stocks = compute_targets(weights, 40)
    print("\nsplitting 40 vehicles by demand share:")
    for st, w, s in zip(layout.stations, weights, stocks):
        print(f"  station {st.id}: {w:5.1%} of demand -> {s} vehicles")
    assert sum(stocks) == 40


if __name__ == "__main__":
    main()
