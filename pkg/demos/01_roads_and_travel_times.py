"""Roads, fastest paths, and the linear travel-time estimator.

Builds a 12x12 grid city where three east-west rows are fast arterials,
routes a few trips across it, then fits the distance-based travel-time
estimator the dispatcher uses when it cannot afford exact shortest paths.
"""

from modsim import (
    Node,
    RoadNetwork,
    RoadSegment,
    calibrate_estimator,
    fastest_path,
)

KMH = 1 / 3.6


def grid(nx=12, ny=12, spacing=250.0, fast_rows=(3, 6, 9)):
    nodes = [Node(r * nx + c, c * spacing, r * spacing)
             for r in range(ny) for c in range(nx)]
    segments, sid = [], 0
    for r in range(ny):
        for c in range(nx):
            nid = r * nx + c
            if c + 1 < nx:
                speed = (80.0 if r in fast_rows else 40.0) * KMH
                for a, b in ((nid, nid + 1), (nid + 1, nid)):
                    segments.append(RoadSegment(sid, a, b, spacing, speed))
                    sid += 1
            if r + 1 < ny:
                for a, b in ((nid, nid + nx), (nid + nx, nid)):
                    segments.append(RoadSegment(sid, a, b, spacing, 40.0 * KMH))
                    sid += 1
    return RoadNetwork(nodes, segments)


def main():
    network = grid()
    print(f"city: {len(network.nodes)} nodes, {len(network.segments)} "
          f"directed segments, 250 m blocks")

    print("\nfastest paths (note the detours onto the 80 km/h arterials):")
    for origin, destination in [(0, 143), (12, 23), (66, 77)]:
        path = fastest_path(network, origin, destination)
        print(f"  node {origin:>3} -> {destination:>3}: "
              f"{path.distance:7.0f} m in {path.duration:5.1f} s "
              f"({len(path.segments)} edges)")

    estimator = calibrate_estimator(network, sample_count=250, seed=42)
    print(f"\nestimator fitted on 250 sampled trips:")
    print(f"  time ~ {estimator.intercept:.2f} s + "
          f"{estimator.slope * 1000:.1f} s/km of straight-line distance")
    print(f"  rms calibration error {estimator.calibration_error:.1f} s")

    print("\nestimate vs. road time:")
    for origin, destination in [(0, 143), (5, 138), (60, 71)]:
        path = fastest_path(network, origin, destination)
        guess = estimator.estimate(network.position(origin),
                                   network.position(destination))
        print(f"  {origin:>3} -> {destination:>3}: road {path.duration:5.1f}"
              f" s, estimate {guess:5.1f} s")


if __name__ == "__main__":
    main()
