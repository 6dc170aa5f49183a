#!/usr/bin/env python3
"""Generate the synthetic city meshes shipped under meshes/.

The domain is a convex octagon (a 10 x 10 km square with 2.5 km corner
cuts) with five rectangular obstacles: two parks, a golf club, a campus and
an industrial zone.  A structured grid is triangulated with cell diagonals
chosen per quadrant so the 45-degree corner cuts fall exactly on element
edges; triangles whose centroid leaves the domain are dropped.

Writes Gmsh MSH text files, format 2.2 or 4.1, with physical groups
"outer" and "wall1".."wall5".

Usage:  python3 tools/make_city_mesh.py [--check]
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

L = 10.0      # km, bounding square
CUT = 2.5     # km, corner cut

# (name, xmin, xmax, ymin, ymax) -- all multiples of 0.5 km
HOLES = [
    ("wall1", 2.0, 3.0, 6.0, 7.0),    # park A
    ("wall2", 3.0, 4.0, 2.5, 3.5),    # park B
    ("wall3", 6.5, 8.0, 6.0, 7.0),    # golf club
    ("wall4", 6.0, 7.0, 3.0, 4.0),    # university campus
    ("wall5", 7.5, 8.5, 4.5, 5.5),    # industrial zone
]

MESHES = {
    "city_coarse.msh": dict(h=0.25, fmt="2.2"),
    "city_mini.msh": dict(h=0.5, fmt="4.1"),
}


def inside_domain(x, y):
    if not (0.0 <= x <= L and 0.0 <= y <= L):
        return False
    if x + y < CUT or x + y > 2 * L - CUT:
        return False
    if x - y > L - CUT or y - x > L - CUT:
        return False
    for _, a, b, c, d in HOLES:
        if a < x < b and c < y < d:
            return False
    return True


def build(h):
    n = int(round(L / h))
    assert abs(n * h - L) < 1e-12 and abs(CUT / h - round(CUT / h)) < 1e-12

    def nid(i, j):
        return i * (n + 1) + j

    coords = np.array(
        [(i * h, j * h) for i in range(n + 1) for j in range(n + 1)]
    )
    tris = []
    for i in range(n):
        for j in range(n):
            x0, y0 = i * h, j * h
            x1, y1 = x0 + h, y0 + h
            cx, cy = x0 + h / 2, y0 + h / 2
            if (cx - L / 2) * (cy - L / 2) > 0:
                cand = [
                    (nid(i, j), nid(i + 1, j), nid(i, j + 1)),
                    (nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)),
                ]
            else:
                cand = [
                    (nid(i, j), nid(i + 1, j), nid(i + 1, j + 1)),
                    (nid(i, j), nid(i + 1, j + 1), nid(i, j + 1)),
                ]
            for t in cand:
                c = coords[list(t)].mean(axis=0)
                if inside_domain(c[0], c[1]):
                    tris.append(t)
    tris = np.array(tris)

    used = np.unique(tris)
    remap = -np.ones(coords.shape[0], dtype=int)
    remap[used] = np.arange(len(used))
    return coords[used], remap[tris]


def classify_edge(xm, ym, tol=1e-9):
    """Physical group of a boundary edge from its midpoint."""
    on_outer = (
        abs(xm) < tol or abs(xm - L) < tol or abs(ym) < tol or abs(ym - L) < tol
        or abs(xm + ym - CUT) < tol or abs(xm + ym - (2 * L - CUT)) < tol
        or abs(xm - ym - (L - CUT)) < tol or abs(ym - xm - (L - CUT)) < tol
    )
    if on_outer:
        return "outer"
    for name, a, b, c, d in HOLES:
        on_x = (abs(xm - a) < tol or abs(xm - b) < tol) and c - tol <= ym <= d + tol
        on_y = (abs(ym - c) < tol or abs(ym - d) < tol) and a - tol <= xm <= b + tol
        if on_x or on_y:
            return name
    raise RuntimeError(f"boundary edge at ({xm}, {ym}) lies on no known polygon")


def boundary_lines(coords, tris):
    count = {}
    for t in tris:
        for u, v in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            key = (u, v) if u < v else (v, u)
            count[key] = count.get(key, 0) + 1
    lines = []
    for (u, v), k in sorted(count.items()):
        if k != 1:
            continue
        xm, ym = coords[[u, v]].mean(axis=0)
        lines.append((classify_edge(xm, ym), u, v))
    return lines


GROUPS = ["outer"] + [h[0] for h in HOLES]  # physical tags 1..6; surface 7


def write_msh22(path, coords, tris, lines):
    out = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat", "$PhysicalNames",
           str(len(GROUPS) + 1)]
    for k, name in enumerate(GROUPS, start=1):
        out.append(f'1 {k} "{name}"')
    out.append(f'2 {len(GROUPS) + 1} "domain"')
    out.append("$EndPhysicalNames")
    out.append("$Nodes")
    out.append(str(len(coords)))
    for k, (x, y) in enumerate(coords, start=1):
        out.append(f"{k} {x:.17g} {y:.17g} 0")
    out.append("$EndNodes")
    out.append("$Elements")
    out.append(str(len(lines) + len(tris)))
    eid = 1
    for name, u, v in lines:
        phys = GROUPS.index(name) + 1
        out.append(f"{eid} 1 2 {phys} {phys} {u + 1} {v + 1}")
        eid += 1
    surf = len(GROUPS) + 1
    for a, b, c in tris:
        out.append(f"{eid} 2 2 {surf} {surf} {a + 1} {b + 1} {c + 1}")
        eid += 1
    out.append("$EndElements")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def write_msh41(path, coords, tris, lines):
    out = ["$MeshFormat", "4.1 0 8", "$EndMeshFormat", "$PhysicalNames",
           str(len(GROUPS) + 1)]
    for k, name in enumerate(GROUPS, start=1):
        out.append(f'1 {k} "{name}"')
    out.append(f'2 {len(GROUPS) + 1} "domain"')
    out.append("$EndPhysicalNames")

    # one curve entity per boundary group, one surface entity
    out.append("$Entities")
    out.append(f"0 {len(GROUPS)} 1 0")
    for k in range(1, len(GROUPS) + 1):
        out.append(f"{k} 0 0 0 {L} {L} 0 1 {k} 0")
    out.append(f"1 0 0 0 {L} {L} 0 1 {len(GROUPS) + 1} 0")
    out.append("$EndEntities")

    out.append("$Nodes")
    out.append(f"1 {len(coords)} 1 {len(coords)}")
    out.append(f"2 1 0 {len(coords)}")
    for k in range(1, len(coords) + 1):
        out.append(str(k))
    for x, y in coords:
        out.append(f"{x:.17g} {y:.17g} 0")
    out.append("$EndNodes")

    by_group = {name: [] for name in GROUPS}
    for name, u, v in lines:
        by_group[name].append((u, v))
    n_elem = len(lines) + len(tris)
    blocks = [g for g in GROUPS if by_group[g]]
    out.append("$Elements")
    out.append(f"{len(blocks) + 1} {n_elem} 1 {n_elem}")
    eid = 1
    for name in blocks:
        curve_tag = GROUPS.index(name) + 1
        out.append(f"1 {curve_tag} 1 {len(by_group[name])}")
        for u, v in by_group[name]:
            out.append(f"{eid} {u + 1} {v + 1}")
            eid += 1
    out.append(f"2 1 2 {len(tris)}")
    for a, b, c in tris:
        out.append(f"{eid} {a + 1} {b + 1} {c + 1}")
        eid += 1
    out.append("$EndElements")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--outdir", default="meshes")
    parser.add_argument("--check", action="store_true",
                        help="load and validate the written files")
    args = parser.parse_args()
    os.makedirs(args.outdir, exist_ok=True)

    for fname, spec in MESHES.items():
        coords, tris = build(spec["h"])
        lines = boundary_lines(coords, tris)
        path = os.path.join(args.outdir, fname)
        writer = write_msh22 if spec["fmt"] == "2.2" else write_msh41
        writer(path, coords, tris, lines)
        print(f"{path}: {len(coords)} nodes, {len(tris)} triangles, "
              f"{len(lines)} boundary edges (MSH {spec['fmt']})")

    if args.check:
        sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))
        from porouscity.mesh import load_msh, validate_mesh

        for fname in MESHES:
            mesh = load_msh(os.path.join(args.outdir, fname))
            rep = validate_mesh(mesh)
            print(f"--- {fname}\n{rep}")
            if not rep.passed:
                raise SystemExit(f"{fname} failed validation")


if __name__ == "__main__":
    main()
