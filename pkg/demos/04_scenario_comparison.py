"""Private cars vs. a station fleet vs. the same fleet with ridesharing.

Runs the identical hour of demand through all three scenario modes and
prints the headline table: total mileage, fleet mean occupancy while
moving, and service outcomes.  Ridesharing is the only mode that cuts
mileage below the private-car baseline; the plain station fleet adds
mileage because every trip gains an approach and a return leg.
"""

from modsim import (
    DemandCluster,
    DemandConfig,
    ScenarioConfig,
    build_stations,
    calibrate_estimator,
    compute_targets,
    demand_weights,
    generate_demand,
    run_scenario,
    summarize,
)

from _city import small_city


def main():
    network = small_city()
    estimator = calibrate_estimator(network, 250, seed=11)
    demand = DemandConfig(
        start=0.0, end=4500.0, request_count=400,
        origin_clusters=(
            DemandCluster(500, 500, 0.4, 350),
            DemandCluster(2500, 600, 0.3, 350),
            DemandCluster(600, 2500, 0.3, 350),
        ),
        destination_clusters=(
            DemandCluster(1500, 1600, 0.7, 300),
            DemandCluster(2200, 1200, 0.3, 300),
        ),
        seed=23,
    )
    requests = generate_demand(demand, network)

    points = [network.position(r.origin) for r in requests]
    points += [network.position(r.destination) for r in requests]
    layout = build_stations(points, 4, seed=2, network=network)
    weights = demand_weights(layout, requests, network)
    layout = layout.with_stocks(compute_targets(weights, 90))
    print(f"{len(requests)} requests, 4 stations, 90 vehicles; "
          "statistics over the final hour\n")

    rows = []
    for mode, q_max in (("present", None), ("mod", None),
                        ("mod_rideshare", 600.0)):
        config = ScenarioConfig(mode=mode, end=4500.0, stat_start=900.0,
                                q_max=q_max)
        trace = run_scenario(config, network, requests,
                             layout if mode != "present" else None,
                             estimator if mode != "present" else None)
        rows.append((mode, summarize(trace, network)))

    print(f"{'scenario':<15}{'distance':>10}{'occupancy':>11}"
          f"{'served':>8}{'unserved':>9}")
    for mode, s in rows:
        print(f"{mode:<15}{s.total_distance_km:>8.1f} km"
              f"{s.mean_occupancy:>11.2f}{s.served:>8}{s.unserved:>9}")

    present = rows[0][1].total_distance_km
    for mode, s in rows[1:]:
        print(f"\n{mode} drives {s.total_distance_km / present:.2f}x "
              "the private-car mileage")


if __name__ == "__main__":
    main()
