"""One ride-matching decision, step by step.

A vehicle is already carrying passenger A and has promised to pick up B.
A new request C arrives.  The matcher tries every way of splicing C's
pickup and dropoff into each vehicle's plan, prices each splice by the
extra distance it adds, and keeps the cheapest one that leaves every
passenger within the delay bound.
"""

from modsim import (
    MatchContext,
    OrderKind,
    PlanOrder,
    TravelRequest,
    TravelTimeEstimator,
    VehicleState,
    enumerate_insertions,
    match_request,
    plan_cost,
)

from _city import small_city


def describe(plan):
    return " -> ".join(
        f"{'pick' if o.kind is OrderKind.PICKUP else 'drop'} r{o.request}"
        f"@n{o.location}" for o in plan)


def main():
    network = small_city()
    now = 1000.0
    # vehicle 0 is mid-plan; vehicle 1 sits idle two blocks away
    busy = VehicleState(0, node=28, capacity=4)
    busy.onboard = {1}
    busy.plan = (PlanOrder(OrderKind.DROPOFF, 1, 93),
                 PlanOrder(OrderKind.PICKUP, 2, 54),
                 PlanOrder(OrderKind.DROPOFF, 2, 120))
    idle = VehicleState(1, node=30, capacity=4)
    fleet = [busy, idle]

    request = TravelRequest(3, now, origin=55, destination=119)
    ctx = MatchContext(
        network=network,
        estimator=TravelTimeEstimator(5.0, 0.08),
        now=now,
        announcements={1: now - 240.0, 2: now - 60.0, 3: now},
        baselines={1: 260.0, 2: 210.0, 3: 270.0},
    )

    print("current plan of vehicle 0:", describe(busy.plan))
    print(f"new request: r3 from node 55 to node 119\n")

    xy = busy.position_at(now, network)
    base = plan_cost(xy, busy.plan, network)
    candidates = [
        (plan_cost(xy, cand, network) - base, i, j, cand)
        for i, j, cand in enumerate_insertions(busy.plan, request)
    ]
    print(f"vehicle 0 admits {len(candidates)} candidate splices; "
          "cheapest five by added meters:")
    for cost, i, j, plan in sorted(candidates, key=lambda c: (c[0], c[1], c[2]))[:5]:
        print(f"  +{cost:7.1f} m  (pickup slot {i}, dropoff slot {j})  "
              + describe(plan))

    for q_max in (900.0, 300.0, 60.0):
        got = match_request(fleet, request, q_max, ctx)
        if got is None:
            print(f"\nq_max = {q_max:.0f} s: nobody can take r3 "
                  "without breaking a promise")
            continue
        print(f"\nq_max = {q_max:.0f} s: vehicle {got.vehicle} takes r3, "
              f"+{got.cost_delta:.1f} m")
        print("  new plan:", describe(got.plan))
        for rid, delay in sorted(got.estimated_delays.items()):
            print(f"  estimated delay r{rid}: {delay:6.1f} s")


if __name__ == "__main__":
    main()
