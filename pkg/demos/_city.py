"""Shared toy city for the demos: a 13x13 grid, 250 m blocks, 50 km/h."""

from modsim import Node, RoadNetwork, RoadSegment


def small_city(nx=13, ny=13, spacing=250.0, speed_kmh=50.0):
    nodes = [Node(r * nx + c, c * spacing, r * spacing)
             for r in range(ny) for c in range(nx)]
    segments, sid = [], 0
    speed = speed_kmh / 3.6
    for r in range(ny):
        for c in range(nx):
            nid = r * nx + c
            if c + 1 < nx:
                for a, b in ((nid, nid + 1), (nid + 1, nid)):
                    segments.append(RoadSegment(sid, a, b, spacing, speed))
                    sid += 1
            if r + 1 < ny:
                for a, b in ((nid, nid + nx), (nid + nx, nid)):
                    segments.append(RoadSegment(sid, a, b, spacing, speed))
                    sid += 1
    return RoadNetwork(nodes, segments)
