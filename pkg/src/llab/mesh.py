"""Unstructured triangulations of a disk.

Nodes are laid out on concentric rings (alternate rings rotated by half a
step) and connected by a Delaunay triangulation.  Optional graded patches
refine the mesh geometrically around chosen points, which is how poles of
Green's functions and fundamental solutions are resolved.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from matplotlib.tri import Triangulation
from scipy.spatial import Delaunay

LOGGER = logging.getLogger(__name__)

#: Upper bound on the number of nodes a single mesh may hold.
MAX_NODES = 2_000_000


class MeshError(ValueError):
    """Raised for malformed meshes or invalid mesh parameters."""


class MeshResourceError(MeshError):
    """Raised when the requested resolution exceeds the memory budget."""


@dataclass(frozen=True)
class TriMesh:
    """P1 triangulation of a disk.

    Attributes
    ----------
    nodes : (n, 2) float array
        Node coordinates.
    triangles : (m, 3) int array
        Vertex indices, counterclockwise.
    boundary : (n,) bool array
        True for nodes on the outer circle.
    h : float
        Target mesh size.
    radius : float
        Radius of the disk.
    center : tuple of float
        Center of the disk.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    h: float
    radius: float
    center: tuple = (0.0, 0.0)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def interior(self) -> np.ndarray:
        """Indices of interior nodes."""
        return np.flatnonzero(~self.boundary)

    @property
    def boundary_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.boundary)

    @property
    def vertices(self) -> np.ndarray:
        """Triangle vertex coordinates, shape (m, 3, 2)."""
        return self.nodes[self.triangles]

    @property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def areas(self) -> np.ndarray:
        if "areas" not in self._cache:
            self._cache["areas"] = np.abs(self.signed_areas)
        return self._cache["areas"]

    @property
    def centroids(self) -> np.ndarray:
        return self.vertices.mean(axis=1)

    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted index pairs."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def edge_lengths(self) -> np.ndarray:
        e = self.edges()
        return np.linalg.norm(self.nodes[e[:, 0]] - self.nodes[e[:, 1]], axis=1)

    def basis_gradients(self) -> np.ndarray:
        """Constant gradients of the three hat functions on each triangle.

        Returns
        -------
        (m, 3, 2) array
            ``G[t, i]`` is the gradient of the hat function of local vertex
            ``i`` on triangle ``t``.
        """
        if "grads" not in self._cache:
            p = self.vertices
            x, y = p[..., 0], p[..., 1]
            two_area = self.signed_areas * 2.0
            gx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
            gy = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
            self._cache["grads"] = np.stack([gx, gy], axis=-1) / two_area[:, None, None]
        return self._cache["grads"]

    def triangulation(self) -> Triangulation:
        if "tri" not in self._cache:
            self._cache["tri"] = Triangulation(self.nodes[:, 0], self.nodes[:, 1], self.triangles)
        return self._cache["tri"]

    def locate(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Find the containing triangle and barycentric coordinates.

        Points outside the mesh get triangle index -1 and NaN coordinates.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        finder = self._cache.get("finder")
        if finder is None:
            finder = self.triangulation().get_trifinder()
            self._cache["finder"] = finder
        idx = np.asarray(finder(pts[:, 0], pts[:, 1]), dtype=int)
        bary = np.full((len(pts), 3), np.nan)
        ok = idx >= 0
        if ok.any():
            p = self.vertices[idx[ok]]
            a, b, c = p[:, 0], p[:, 1], p[:, 2]
            v0, v1, v2 = b - a, c - a, pts[ok] - a
            den = v0[:, 0] * v1[:, 1] - v1[:, 0] * v0[:, 1]
            l1 = (v2[:, 0] * v1[:, 1] - v1[:, 0] * v2[:, 1]) / den
            l2 = (v0[:, 0] * v2[:, 1] - v2[:, 0] * v0[:, 1]) / den
            bary[ok] = np.stack([1.0 - l1 - l2, l1, l2], axis=1)
        return idx, bary

    def interpolate(self, values: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Evaluate a P1 nodal field at arbitrary points (NaN outside)."""
        values = np.asarray(values)
        idx, bary = self.locate(points)
        out = np.full(len(idx), np.nan, dtype=values.dtype if np.iscomplexobj(values) else float)
        ok = idx >= 0
        out[ok] = np.einsum("pi,pi->p", values[self.triangles[idx[ok]]], bary[ok])
        return out


def _ring_points(radius: float, spacing: float, n_rings: int, offset: int = 0) -> list[np.ndarray]:
    rings = []
    for k in range(1, n_rings + 1):
        r = radius * k / n_rings
        n = max(6, int(np.ceil(2.0 * np.pi * r / spacing)))
        shift = np.pi / n if (k + offset) % 2 else 0.0
        th = shift + 2.0 * np.pi * np.arange(n) / n
        rings.append(np.column_stack([r * np.cos(th), r * np.sin(th)]))
    return rings


def _graded_patch(h: float, levels: int) -> tuple[np.ndarray, float]:
    """Points of a ring patch whose spacing halves toward its center."""
    outer = h * 2.0 ** (levels - 2) if levels >= 2 else h
    pts = [np.zeros((1, 2))]
    r = 0.0
    k = 0
    while True:
        lev = levels
        for j in range(levels):
            if r >= outer / 2.0 ** (j + 1):
                lev = j + 1
                break
        step = h / 2.0 ** lev
        r += step
        if r > outer:
            break
        n = max(6, int(np.ceil(2.0 * np.pi * r / step)))
        shift = np.pi / n if k % 2 else 0.0
        th = shift + 2.0 * np.pi * np.arange(n) / n
        pts.append(np.column_stack([r * np.cos(th), r * np.sin(th)]))
        k += 1
    return np.concatenate(pts), outer


def triangulate_disk(radius: float, target_h: float, center=(0.0, 0.0),
                     refine=(), levels: int = 3) -> TriMesh:
    """Triangulate the disk of given radius with mesh size about ``target_h``.

    Parameters
    ----------
    radius : float
        Disk radius.
    target_h : float
        Target edge length; the longest edge stays below ``2 * target_h``.
    center : (2,) sequence
        Disk center.
    refine : sequence of points
        Points around which the mesh is refined geometrically (``levels``
        rings of halving spacing, ratio 2).
    levels : int
        Number of halvings in each refinement patch.

    Returns
    -------
    TriMesh
    """
    if not radius > 0:
        raise MeshError(f"radius must be positive, got {radius}")
    if not 0 < target_h < radius:
        raise MeshError(f"need 0 < target_h < radius, got target_h={target_h}, radius={radius}")
    estimate = 1.2 * np.pi * radius**2 / (0.43 * target_h**2)
    if estimate > MAX_NODES:
        raise MeshResourceError(f"about {estimate:.0f} nodes requested, budget is {MAX_NODES}")

    n_rings = int(np.ceil(radius / target_h))
    rings = _ring_points(radius, target_h, n_rings)
    interior = np.concatenate([np.zeros((1, 2))] + rings[:-1])
    outer = rings[-1]

    patches = []
    for y in refine:
        y = np.asarray(y, dtype=float) - np.asarray(center, dtype=float)
        patch, extent = _graded_patch(target_h, levels)
        patch = patch + y
        keep = np.linalg.norm(interior - y, axis=1) > extent + 0.3 * target_h
        interior = interior[keep]
        inside = np.linalg.norm(patch, axis=1) < radius - 0.25 * target_h
        patches.append(patch[inside])
    pts = np.concatenate([interior, *patches, outer])
    pts = _dedupe(pts, 1e-9 * target_h)
    pts = pts + np.asarray(center, dtype=float)

    tri = Delaunay(pts)
    simplices = np.asarray(tri.simplices, dtype=np.int64)
    boundary = np.zeros(len(pts), dtype=bool)
    rel = pts - np.asarray(center, dtype=float)
    boundary[np.abs(np.linalg.norm(rel, axis=1) - radius) < 1e-12 * max(radius, 1.0)] = True
    mesh = _finalize(pts, simplices, boundary, target_h, radius, tuple(map(float, center)))
    LOGGER.debug("disk mesh: %d nodes, %d triangles", mesh.n_nodes, mesh.n_triangles)
    return mesh


def _dedupe(pts: np.ndarray, tol: float) -> np.ndarray:
    key = np.round(pts / max(tol, 1e-300)).astype(np.int64)
    _, first = np.unique(key, axis=0, return_index=True)
    return pts[np.sort(first)]


def _finalize(nodes, triangles, boundary, h, radius, center) -> TriMesh:
    p = nodes[triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    sa = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    flip = sa < 0
    triangles = triangles.copy()
    triangles[flip] = triangles[flip][:, [0, 2, 1]]
    keep = np.abs(sa) > 1e-12 * h * h
    triangles = triangles[keep]
    return TriMesh(nodes=np.ascontiguousarray(nodes, dtype=float),
                   triangles=np.ascontiguousarray(triangles, dtype=np.int64),
                   boundary=np.asarray(boundary, dtype=bool),
                   h=float(h), radius=float(radius), center=center)


def check_mesh(mesh: TriMesh) -> None:
    """Raise MeshError unless the structural invariants hold."""
    if np.any(mesh.signed_areas <= 0):
        bad = int(np.flatnonzero(mesh.signed_areas <= 0)[0])
        raise MeshError(f"triangle {bad} has nonpositive signed area")
    t = mesh.triangles
    e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    e.sort(axis=1)
    _, counts = np.unique(e, axis=0, return_counts=True)
    if counts.max() > 2:
        raise MeshError("an edge is shared by more than two triangles")
    r = np.linalg.norm(mesh.nodes[mesh.boundary] - np.asarray(mesh.center), axis=1)
    if np.any(np.abs(r - mesh.radius) > 1e-10 * mesh.h):
        raise MeshError("boundary node off the boundary circle")
    if not is_connected(mesh):
        raise MeshError("mesh is not connected")


def is_connected(mesh: TriMesh) -> bool:
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    e = mesh.edges()
    n = mesh.n_nodes
    g = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    ncomp, _ = connected_components(g, directed=False)
    return ncomp == 1


def write_mesh(mesh: TriMesh, path) -> None:
    """Write the plain-text mesh format (nodes / triangles blocks)."""
    lines = [f"nodes {mesh.n_nodes}"]
    lines += [f"{x!r} {y!r} {int(b)}" for (x, y), b in zip(mesh.nodes.tolist(), mesh.boundary)]
    lines.append(f"triangles {mesh.n_triangles}")
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path, h: float | None = None) -> TriMesh:
    """Read the plain-text mesh format; validates indices and areas."""
    text = Path(path).read_text().split("\n")
    it = iter(line for line in text if line.strip())
    try:
        head = next(it).split()
        if head[0] != "nodes":
            raise MeshError("expected 'nodes N' header")
        n = int(head[1])
        nodes = np.empty((n, 2))
        flags = np.empty(n, dtype=bool)
        for i in range(n):
            x, y, b = next(it).split()
            nodes[i] = float(x), float(y)
            flags[i] = bool(int(b))
        head = next(it).split()
        if head[0] != "triangles":
            raise MeshError("expected 'triangles M' header")
        m = int(head[1])
        tris = np.array([[int(v) for v in next(it).split()] for _ in range(m)], dtype=np.int64).reshape(m, 3)
    except StopIteration as exc:
        raise MeshError("mesh file truncated") from exc
    if m and (tris.min() < 0 or tris.max() >= n):
        raise MeshError("triangle index out of range")
    center = nodes[flags].mean(axis=0) if flags.any() else np.zeros(2)
    center = tuple(float(c) for c in np.where(np.abs(center) < 1e-12, 0.0, center))
    radius = float(np.linalg.norm(nodes[flags] - center, axis=1).max()) if flags.any() else 0.0
    if h is None:
        e = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
        h = float(np.linalg.norm(nodes[e[:, 0]] - nodes[e[:, 1]], axis=1).max()) / 2.0
    mesh = TriMesh(nodes=nodes, triangles=tris, boundary=flags, h=h, radius=radius, center=center)
    if np.any(mesh.signed_areas == 0):
        raise MeshError("degenerate triangle with zero area")
    if np.any(mesh.signed_areas < 0):
        raise MeshError("triangle with clockwise orientation")
    return mesh
