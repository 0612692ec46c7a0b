#!/usr/bin/env python3
"""Concentric-ring triangulation of the disk centred at (0.5, 0.5), radius 0.5.

Ring i (i = 1..m) carries 6i vertices on radius 0.5 * i / m, so the mesh has
1 + 3m(m+1) vertices and 6m^2 triangles. The outer ring lies on the circle and
the boundary is the inscribed polygon. Output uses the ihdg mesh format.

    python3 tools/disk_mesh.py 35 > meshes/disk.mesh
"""

import math
import sys


def ring(i, m, cx=0.5, cy=0.5, radius=0.5):
    n = 6 * i
    r = radius * i / m
    return [(cx + r * math.cos(2 * math.pi * j / n), cy + r * math.sin(2 * math.pi * j / n)) for j in range(n)]


def signed_area(p, a, b, c):
    (x0, y0), (x1, y1), (x2, y2) = p[a], p[b], p[c]
    return 0.5 * ((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0))


def disk(m):
    points = [(0.5, 0.5)]
    rings = [[0]]
    for i in range(1, m + 1):
        start = len(points)
        points.extend(ring(i, m))
        rings.append(list(range(start, len(points))))

    tris = []
    for i in range(1, m + 1):
        inner, outer = rings[i - 1], rings[i]
        ni, no = len(inner), len(outer)
        # the centre is a single vertex: fan around it
        p, q = (ni, 0) if ni == 1 else (0, 0)
        while p < ni or q < no:
            # angle of the next vertex on each ring, in units of a full turn
            ai = (p + 1) / ni
            ao = (q + 1) / no
            if q < no and (p == ni or ao <= ai):
                tri = (inner[p % ni], outer[q % no], outer[(q + 1) % no])
                q += 1
            else:
                tri = (inner[p % ni], outer[q % no], inner[(p + 1) % ni])
                p += 1
            if signed_area(points, *tri) < 0:
                tri = (tri[0], tri[2], tri[1])
            tris.append(tri)
    return points, tris


def main():
    m = int(sys.argv[1]) if len(sys.argv) > 1 else 35
    points, tris = disk(m)
    out = sys.stdout
    out.write(f"# disk (x-0.5)^2 + (y-0.5)^2 < 0.25, {m} rings, tools/disk_mesh.py {m}\n")
    out.write(f"{len(points)} {len(tris)}\n")
    for x, y in points:
        out.write(f"{x:.17g} {y:.17g}\n")
    for a, b, c in tris:
        out.write(f"{a} {b} {c}\n")


if __name__ == "__main__":
    main()
