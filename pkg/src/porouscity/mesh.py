"""Triangle meshes of a polygonal city domain with polygonal holes.

Loads Gmsh MSH text files (format 2.2 or 4.1), precomputes the P1 geometry
(areas, basis gradients, boundary-edge normals) and classifies the boundary
into the outer city limit and obstacle walls.  Meshes are immutable after
construction and safe to share read-only.
"""

from __future__ import annotations

import fnmatch
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateTriangle,
    MeshError,
    MissingNode,
    UnsupportedFormatVersion,
    UntaggedBoundaryEdge,
)

_LOGGER = logging.getLogger(__name__)

# Boundary edge tags
OUTER = 0
WALL = 1

# Areas below this (km^2) are below coordinate round-off at city scale.
DEGENERATE_AREA = 1e-14

DEFAULT_OUTER_PATTERNS = ("outer",)
DEFAULT_WALL_PATTERNS = ("wall*",)


@dataclass
class Mesh:
    """Conforming triangulation with precomputed P1 geometry.

    Attributes:
        nodes: (n_v, 2) coordinates in km.
        triangles: (n_t, 3) node indices, counter-clockwise.
        areas: (n_t,) signed areas (positive for CCW triangles), km^2.
        grads: (n_t, 3, 2) gradient of the P1 basis of each local vertex, 1/km.
        edges: (n_e, 2) node pairs of boundary edges.
        edge_tags: (n_e,) OUTER or WALL.
        edge_groups: physical-group name per boundary edge.
        edge_normals: (n_e, 2) outward unit normals (out of the fluid domain).
        edge_lengths: (n_e,) km.
        wall_nodes: indices of nodes on wall edges.
        wall_normals: (len(wall_nodes), 2) averaged unit normals at wall nodes.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    areas: np.ndarray
    grads: np.ndarray
    edges: np.ndarray
    edge_tags: np.ndarray
    edge_groups: list[str]
    edge_normals: np.ndarray
    edge_lengths: np.ndarray
    wall_nodes: np.ndarray
    wall_normals: np.ndarray
    # cross-module memoization (sparse patterns, unweighted operators)
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def outer_edge_idx(self) -> np.ndarray:
        return np.flatnonzero(self.edge_tags == OUTER)

    @property
    def wall_edge_idx(self) -> np.ndarray:
        return np.flatnonzero(self.edge_tags == WALL)

    def h_min(self) -> float:
        """Shortest edge over all triangles (km)."""
        p = self.nodes[self.triangles]  # (n_t, 3, 2)
        d = p - np.roll(p, -1, axis=1)
        return float(np.sqrt((d ** 2).sum(axis=2)).min())


def _triangle_geometry(nodes: np.ndarray, triangles: np.ndarray):
    """Signed areas and P1 basis gradients for every triangle.

    The gradient of the basis function of local vertex i is the inward
    perpendicular of the opposite edge divided by twice the signed area.
    """
    p = nodes[triangles]  # (n_t, 3, 2)
    e0 = p[:, 1] - p[:, 0]
    e1 = p[:, 2] - p[:, 0]
    areas = 0.5 * (e0[:, 0] * e1[:, 1] - e0[:, 1] * e1[:, 0])
    small = np.abs(areas) < DEGENERATE_AREA
    if small.any():
        t = int(np.flatnonzero(small)[0])
        raise DegenerateTriangle(
            f"triangle {t} has area {areas[t]:.3e} km^2 (< {DEGENERATE_AREA:g})"
        )
    # opposite edge of vertex i runs from vertex i+1 to vertex i+2
    opp = np.roll(p, -2, axis=1) - np.roll(p, -1, axis=1)  # (n_t, 3, 2)
    grads = np.empty_like(opp)
    grads[:, :, 0] = -opp[:, :, 1]
    grads[:, :, 1] = opp[:, :, 0]
    grads /= (2.0 * areas)[:, None, None]
    return areas, grads


def _boundary_edge_map(triangles: np.ndarray) -> dict[tuple[int, int], list[int]]:
    """Map each undirected edge to the triangles containing it."""
    edge_tris: dict[tuple[int, int], list[int]] = {}
    for t, (a, b, c) in enumerate(triangles):
        for u, v in ((a, b), (b, c), (c, a)):
            key = (u, v) if u < v else (v, u)
            edge_tris.setdefault(key, []).append(t)
    return edge_tris


def _edge_normal(nodes, a, b, tri, triangles):
    """Outward unit normal of boundary edge (a, b) adjacent to triangle tri."""
    xa, xb = nodes[a], nodes[b]
    e = xb - xa
    length = float(np.hypot(e[0], e[1]))
    n = np.array([e[1], -e[0]]) / length
    other = [v for v in triangles[tri] if v != a and v != b]
    mid = 0.5 * (xa + xb)
    if n @ (nodes[other[0]] - mid) > 0.0:
        n = -n
    return n, length


def classify_boundary(
    edge_groups: list[str],
    outer_patterns=DEFAULT_OUTER_PATTERNS,
    wall_patterns=DEFAULT_WALL_PATTERNS,
) -> np.ndarray:
    """Tag boundary edges OUTER / WALL from their physical-group names.

    Raises UntaggedBoundaryEdge when a group name matches neither pattern set.
    """
    tags = np.empty(len(edge_groups), dtype=np.int8)
    for i, name in enumerate(edge_groups):
        if any(fnmatch.fnmatchcase(name, p) for p in outer_patterns):
            tags[i] = OUTER
        elif any(fnmatch.fnmatchcase(name, p) for p in wall_patterns):
            tags[i] = WALL
        else:
            raise UntaggedBoundaryEdge(
                f"physical group '{name}' matches neither outer patterns "
                f"{outer_patterns} nor wall patterns {wall_patterns}"
            )
    return tags


def _wall_node_normals(mesh_edges, edge_tags, edge_normals, n_nodes):
    """Averaged, renormalized outward normals at wall nodes.

    Needed for the slip projection: the discrete velocity space of the model
    requires u.n = 0 at wall nodes, so a single unit normal per node must
    exist even at corners (average of the adjacent edge normals).
    """
    acc = np.zeros((n_nodes, 2))
    seen = np.zeros(n_nodes, dtype=bool)
    for e in np.flatnonzero(edge_tags == WALL):
        for v in mesh_edges[e]:
            acc[v] += edge_normals[e]
            seen[v] = True
    wall_nodes = np.flatnonzero(seen)
    normals = acc[wall_nodes]
    norms = np.linalg.norm(normals, axis=1)
    bad = norms < 1e-12
    if bad.any():
        _LOGGER.warning(
            "%d wall nodes have cancelling edge normals; keeping first edge normal",
            int(bad.sum()),
        )
        for k in np.flatnonzero(bad):
            v = wall_nodes[k]
            for e in np.flatnonzero(edge_tags == WALL):
                if v in mesh_edges[e]:
                    normals[k] = edge_normals[e]
                    norms[k] = 1.0
                    break
    normals /= norms[:, None]
    return wall_nodes, normals


def mesh_from_arrays(
    nodes,
    triangles,
    edge_group_of=None,
    outer_patterns=DEFAULT_OUTER_PATTERNS,
    wall_patterns=DEFAULT_WALL_PATTERNS,
) -> Mesh:
    """Build a Mesh directly from node / connectivity arrays.

    Boundary edges are detected as edges used by exactly one triangle.
    `edge_group_of(a, b)` maps a boundary edge to its physical-group name;
    by default every boundary edge is tagged "outer".
    """
    nodes = np.ascontiguousarray(nodes, dtype=float)
    triangles = np.ascontiguousarray(triangles, dtype=np.int64)
    if not np.isfinite(nodes).all():
        raise MeshError("non-finite node coordinates")
    areas, grads = _triangle_geometry(nodes, triangles)

    edge_tris = _boundary_edge_map(triangles)
    bedges, groups, normals, lengths = [], [], [], []
    for (a, b), tris in sorted(edge_tris.items()):
        if len(tris) != 1:
            continue
        n, length = _edge_normal(nodes, a, b, tris[0], triangles)
        bedges.append((a, b))
        normals.append(n)
        lengths.append(length)
        groups.append(edge_group_of(a, b) if edge_group_of else "outer")

    edges = np.asarray(bedges, dtype=np.int64).reshape(-1, 2)
    edge_normals = np.asarray(normals).reshape(-1, 2)
    edge_lengths = np.asarray(lengths)
    edge_tags = classify_boundary(groups, outer_patterns, wall_patterns)
    wall_nodes, wall_normals = _wall_node_normals(
        edges, edge_tags, edge_normals, len(nodes)
    )
    return Mesh(
        nodes=nodes,
        triangles=triangles,
        areas=areas,
        grads=grads,
        edges=edges,
        edge_tags=edge_tags,
        edge_groups=groups,
        edge_normals=edge_normals,
        edge_lengths=edge_lengths,
        wall_nodes=wall_nodes,
        wall_normals=wall_normals,
    )


# --------------------------------------------------------------------------
# MSH parsing
# --------------------------------------------------------------------------

def _read_sections(text: str) -> dict[str, list[str]]:
    sections: dict[str, list[str]] = {}
    current = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("$End"):
            current = None
        elif line.startswith("$"):
            current = line[1:]
            sections[current] = []
        elif current is not None:
            sections[current].append(line)
    return sections


def _parse_physical_names(lines: list[str]) -> dict[int, str]:
    names = {}
    for line in lines[1:]:
        parts = line.split(None, 2)
        names[int(parts[1])] = parts[2].strip().strip('"')
    return names


def _parse_v22(sections):
    node_lines = sections.get("Nodes", [])
    n_nodes = int(node_lines[0])
    ids, coords = [], []
    for line in node_lines[1 : 1 + n_nodes]:
        parts = line.split()
        ids.append(int(parts[0]))
        coords.append((float(parts[1]), float(parts[2])))
    id_map = {nid: k for k, nid in enumerate(ids)}

    elem_lines = sections.get("Elements", [])
    n_elem = int(elem_lines[0])
    triangles, lines_tagged = [], []
    for line in elem_lines[1 : 1 + n_elem]:
        parts = [int(p) for p in line.split()]
        etype, ntags = parts[1], parts[2]
        tags = parts[3 : 3 + ntags]
        conn = parts[3 + ntags :]
        phys = tags[0] if tags else 0
        if etype == 1:
            lines_tagged.append((phys, conn[0], conn[1]))
        elif etype == 2:
            triangles.append(conn[:3])
        elif etype == 15:
            continue
        else:
            _LOGGER.warning("ignoring unsupported element type %d", etype)
    return id_map, np.asarray(coords), triangles, lines_tagged, {}


def _parse_v41(sections):
    # Entities: map (dim, entity tag) -> first physical tag
    ent_phys: dict[tuple[int, int], int] = {}
    ent_lines = sections.get("Entities", [])
    counts = [int(x) for x in ent_lines[0].split()]
    n_pts, n_curves, n_surf, n_vol = counts
    row = 1
    for _ in range(n_pts):
        parts = ent_lines[row].split()
        tag = int(parts[0])
        n_phys = int(parts[4])
        if n_phys:
            ent_phys[(0, tag)] = int(parts[5])
        row += 1
    for dim, count in ((1, n_curves), (2, n_surf), (3, n_vol)):
        for _ in range(count):
            parts = ent_lines[row].split()
            tag = int(parts[0])
            n_phys = int(parts[7])
            if n_phys:
                ent_phys[(dim, tag)] = int(parts[8])
            row += 1

    node_lines = sections.get("Nodes", [])
    header = [int(x) for x in node_lines[0].split()]
    n_blocks = header[0]
    ids, coords = [], []
    row = 1
    for _ in range(n_blocks):
        _, _, _, n_in_block = (int(x) for x in node_lines[row].split())
        row += 1
        block_ids = [int(node_lines[row + k]) for k in range(n_in_block)]
        row += n_in_block
        for k in range(n_in_block):
            parts = node_lines[row + k].split()
            ids.append(block_ids[k])
            coords.append((float(parts[0]), float(parts[1])))
        row += n_in_block
    id_map = {nid: k for k, nid in enumerate(ids)}

    elem_lines = sections.get("Elements", [])
    n_blocks = int(elem_lines[0].split()[0])
    triangles, lines_tagged = [], []
    row = 1
    for _ in range(n_blocks):
        dim, etag, etype, n_in_block = (int(x) for x in elem_lines[row].split())
        row += 1
        phys = ent_phys.get((dim, etag), 0)
        for k in range(n_in_block):
            parts = [int(x) for x in elem_lines[row + k].split()]
            conn = parts[1:]
            if etype == 1:
                lines_tagged.append((phys, conn[0], conn[1]))
            elif etype == 2:
                triangles.append(conn[:3])
            elif etype != 15:
                _LOGGER.warning("ignoring unsupported element type %d", etype)
        row += n_in_block
    return id_map, np.asarray(coords), triangles, lines_tagged, ent_phys


def load_msh(
    path,
    outer_patterns=DEFAULT_OUTER_PATTERNS,
    wall_patterns=DEFAULT_WALL_PATTERNS,
) -> Mesh:
    """Load a Gmsh MSH text file (format 2.2 or 4.1) into a Mesh.

    Physical groups must name the outer boundary and each obstacle boundary;
    the defaults tag groups named "outer" and "wall*".
    """
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    sections = _read_sections(text)
    if "MeshFormat" not in sections:
        raise UnsupportedFormatVersion(f"{path}: no $MeshFormat section")
    fmt = sections["MeshFormat"][0].split()
    version, is_binary = fmt[0], int(fmt[1])
    if is_binary:
        raise UnsupportedFormatVersion(f"{path}: binary MSH not supported")
    if version.startswith("2.2"):
        id_map, coords, tri_ids, line_ids, _ = _parse_v22(sections)
    elif version.startswith("4.1"):
        id_map, coords, tri_ids, line_ids, _ = _parse_v41(sections)
    else:
        raise UnsupportedFormatVersion(f"{path}: MSH version {version}")

    phys_names = _parse_physical_names(sections.get("PhysicalNames", ["0"]))

    def remap(nid: int) -> int:
        try:
            return id_map[nid]
        except KeyError:
            raise MissingNode(f"{path}: element references unknown node {nid}") from None

    triangles = np.asarray(
        [[remap(a), remap(b), remap(c)] for a, b, c in tri_ids], dtype=np.int64
    )
    if triangles.size == 0:
        raise MeshError(f"{path}: no triangles found")

    tagged: dict[tuple[int, int], str] = {}
    for phys, a, b in line_ids:
        key = tuple(sorted((remap(a), remap(b))))
        name = phys_names.get(phys)
        if name is not None:
            tagged[key] = name

    def group_of(a: int, b: int) -> str:
        key = (a, b) if a < b else (b, a)
        if key not in tagged:
            raise UntaggedBoundaryEdge(
                f"{path}: boundary edge {key} belongs to no named physical group"
            )
        return tagged[key]

    mesh = mesh_from_arrays(
        coords, triangles, group_of, outer_patterns, wall_patterns
    )
    _LOGGER.info(
        "%s: %d nodes, %d triangles, %d boundary edges",
        path, mesh.n_nodes, mesh.n_triangles, len(mesh.edges),
    )
    return mesh


# --------------------------------------------------------------------------
# Validation
# --------------------------------------------------------------------------

@dataclass
class MeshReport:
    n_nodes: int
    n_triangles: int
    area_sum: float
    polygon_area: float
    min_area: float
    max_area: float
    min_angle_deg: float
    n_boundary_loops: int
    n_outer_edges: int
    n_wall_edges: int
    issues: list[str]

    @property
    def passed(self) -> bool:
        return not self.issues

    def __str__(self) -> str:
        lines = [
            f"nodes: {self.n_nodes}   triangles: {self.n_triangles}",
            f"area sum: {self.area_sum:.12g} km^2 "
            f"(boundary polygon: {self.polygon_area:.12g} km^2)",
            f"triangle area: min {self.min_area:.3e}, max {self.max_area:.3e} km^2",
            f"min angle: {self.min_angle_deg:.2f} deg",
            f"boundary loops: {self.n_boundary_loops} "
            f"(outer edges {self.n_outer_edges}, wall edges {self.n_wall_edges})",
            "status: " + ("PASS" if self.passed else "FAIL"),
        ]
        lines += [f"  issue: {msg}" for msg in self.issues]
        return "\n".join(lines)


def _boundary_loops(edges: np.ndarray) -> list[list[int]]:
    """Split boundary edges into closed loops (lists of node indices)."""
    adj: dict[int, list[int]] = {}
    for a, b in edges:
        adj.setdefault(int(a), []).append(int(b))
        adj.setdefault(int(b), []).append(int(a))
    unused = {tuple(sorted((int(a), int(b)))) for a, b in edges}
    loops = []
    while unused:
        a, b = next(iter(unused))
        unused.discard((a, b))
        loop = [a, b]
        while loop[-1] != loop[0]:
            cur, prev = loop[-1], loop[-2]
            nxt = None
            for cand in adj[cur]:
                key = tuple(sorted((cur, cand)))
                if cand != prev and key in unused:
                    nxt = cand
                    break
            if nxt is None:
                break  # open chain; reported as an issue by the caller
            unused.discard(tuple(sorted((cur, nxt))))
            loop.append(nxt)
        loops.append(loop)
    return loops


def _loop_area(nodes: np.ndarray, loop: list[int]) -> float:
    pts = nodes[loop]
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * abs(np.dot(x[:-1], y[1:]) - np.dot(y[:-1], x[1:]))


def validate_mesh(mesh: Mesh) -> MeshReport:
    """Geometry and topology report; collects defects instead of raising."""
    issues: list[str] = []
    areas = mesh.areas
    n_cw = int((areas <= 0).sum())
    if n_cw:
        issues.append(f"orientation: {n_cw} triangles are clockwise")

    # every triangle edge must be shared by <= 2 triangles, boundary by 1
    edge_tris = _boundary_edge_map(mesh.triangles)
    over = [e for e, ts in edge_tris.items() if len(ts) > 2]
    if over:
        issues.append(f"non-manifold: {len(over)} edges in more than 2 triangles")
    boundary = {e for e, ts in edge_tris.items() if len(ts) == 1}
    tagged = {tuple(sorted(map(int, e))) for e in mesh.edges}
    missing = boundary - tagged
    if missing:
        issues.append(f"tagging: {len(missing)} boundary edges untagged")

    # basis-gradient sanity: gradients of each triangle sum to zero
    gsum = np.abs(mesh.grads.sum(axis=1)).max() if mesh.n_triangles else 0.0
    if gsum > 1e-12:
        issues.append(f"geometry: basis gradients sum to {gsum:.2e} (> 1e-12)")

    p = mesh.nodes[mesh.triangles]
    angles = []
    for i in range(3):
        u = p[:, (i + 1) % 3] - p[:, i]
        v = p[:, (i + 2) % 3] - p[:, i]
        cosang = (u * v).sum(1) / (
            np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1)
        )
        angles.append(np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0))))
    min_angle = float(np.min(angles)) if mesh.n_triangles else 0.0

    loops = _boundary_loops(mesh.edges)
    open_loops = [lp for lp in loops if lp[0] != lp[-1]]
    if open_loops:
        issues.append(f"boundary: {len(open_loops)} open boundary chains")
    loop_areas = [_loop_area(mesh.nodes, lp) for lp in loops if lp[0] == lp[-1]]
    if loop_areas:
        outer_area = max(loop_areas)
        polygon_area = outer_area - (sum(loop_areas) - outer_area)
    else:
        polygon_area = 0.0

    area_sum = float(np.abs(areas).sum())
    if polygon_area > 0:
        rel = abs(area_sum - polygon_area) / polygon_area
        if rel > 1e-10:
            issues.append(
                f"area: triangle sum {area_sum:.12g} vs polygon {polygon_area:.12g} "
                f"(rel err {rel:.2e})"
            )

    return MeshReport(
        n_nodes=mesh.n_nodes,
        n_triangles=mesh.n_triangles,
        area_sum=area_sum,
        polygon_area=polygon_area,
        min_area=float(areas.min()) if mesh.n_triangles else 0.0,
        max_area=float(areas.max()) if mesh.n_triangles else 0.0,
        min_angle_deg=min_angle,
        n_boundary_loops=len(loops),
        n_outer_edges=int((mesh.edge_tags == OUTER).sum()),
        n_wall_edges=int((mesh.edge_tags == WALL).sum()),
        issues=issues,
    )
