"""Why idle vehicles get shuttled between stations.

Morning demand flows one way: everyone leaves the west side.  Without
rebalancing the west station drains and late requests wait for cars to
trickle back.  With a rebalancing tick, surplus vehicles are shipped
toward where demand is measured to be, using a min-cost transportation
plan between surplus and deficit stations.
"""

from modsim import (
    ScenarioConfig,
    Station,
    StationLayout,
    TravelRequest,
    calibrate_estimator,
    run_scenario,
    solve_transportation,
)

from _city import small_city


def main():
    network = small_city()
    estimator = calibrate_estimator(network, 250, seed=11)

    west = Station(0, node=network.nearest_node(250.0, 1500.0),
                   center=(250.0, 1500.0), initial_stock=0)
    east = Station(1, node=network.nearest_node(2750.0, 1500.0),
                   center=(2750.0, 1500.0), initial_stock=8)
    layout = StationLayout((west, east))
    print("west station: empty   east station: 8 vehicles")
    print("every request starts on the west side\n")

    requests = [
        TravelRequest(i, 600.0 + 240.0 * i,
                      origin=network.nearest_node(300.0, 1000.0 + 120.0 * i),
                      destination=network.nearest_node(2400.0, 1400.0))
        for i in range(8)
    ]

    for period in (None, 300.0):
        config = ScenarioConfig(mode="mod", end=4000.0,
                                rebalancing_period=period)
        trace = run_scenario(config, network, requests, layout, estimator)
        label = "no rebalancing" if period is None else "tick every 300 s"
        waits = [r.pickup - r.announce for r in trace.requests if r.served]
        print(f"{label}: {trace.served}/{len(requests)} served, "
              f"mean wait {sum(waits) / len(waits):.0f} s, "
              f"{len(trace.flows)} rebalancing flows")
        for flow in trace.flows[:4]:
            print(f"    t={flow.tick:5.0f} s: moved {flow.count} vehicle(s) "
                  f"station {flow.from_station} -> {flow.to_station}")

    print("\nthe shipment plan is a min-cost transportation solve; "
          "a 3-station example:")
    flows = solve_transportation(
        supplies=[3, 1, 0], demands=[0, 0, 4],
        costs=[[0.0, 40.0, 95.0], [40.0, 0.0, 60.0], [95.0, 60.0, 0.0]])
    for f in flows:
        print(f"    ship {f.count} from station {f.from_station} "
              f"to station {f.to_station} at unit cost {f.unit_cost:.0f}")


if __name__ == "__main__":
    main()
