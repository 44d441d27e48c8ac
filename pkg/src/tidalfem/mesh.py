"""Triangulations of the unit square and of the unit sphere.

Meshes are immutable once built.  Every edge is stored once as
``(v_min, v_max)`` and every cell records, per local edge, the global edge id
and a sign telling whether the cell's outward normal agrees with the
canonical edge normal (the clockwise rotation of ``x[v_max] - x[v_min]``).

Local edge ``i`` of a cell ``(v0, v1, v2)`` is the edge opposite vertex
``i``, traversed counter-clockwise: ``v1->v2``, ``v2->v0``, ``v0->v1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ResourceError

MAX_ICOSPHERE_LEVEL = 7

# local edge i -> (start, end) local vertex ids in counter-clockwise order
LOCAL_EDGES = ((1, 2), (2, 0), (0, 1))


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray
    cells: np.ndarray
    edges: np.ndarray
    cell_edges: np.ndarray
    cell_edge_signs: np.ndarray
    geometry_degree: int
    geometry_nodes: np.ndarray
    boundary_edges: np.ndarray
    on_sphere: bool = False
    name: str = field(default="mesh")

    @property
    def dim(self) -> int:
        """Embedding dimension (2 for planar meshes, 3 on the sphere)."""
        return self.vertices.shape[1]

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_cells(self) -> int:
        return len(self.cells)

    def lift(self, x):
        """Map points on the discrete surface to the exact surface."""
        if not self.on_sphere:
            return x
        return x / np.linalg.norm(x, axis=-1, keepdims=True)


@dataclass(frozen=True)
class MeshStats:
    num_vertices: int
    num_edges: int
    num_cells: int
    h_max: float
    euler_characteristic: int


def _build_edges(cells):
    nc = len(cells)
    starts = cells[:, [e[0] for e in LOCAL_EDGES]]
    ends = cells[:, [e[1] for e in LOCAL_EDGES]]
    pairs = np.stack([np.minimum(starts, ends), np.maximum(starts, ends)], axis=-1)
    edges, inverse, counts = np.unique(
        pairs.reshape(-1, 2), axis=0, return_inverse=True, return_counts=True
    )
    cell_edges = inverse.reshape(nc, 3)
    signs = np.where(starts < ends, 1, -1).astype(np.int8)
    boundary = np.flatnonzero(counts == 1)
    return edges, cell_edges, signs, boundary


def _geometry_nodes(vertices, cells, edges, cell_edges, degree, project):
    corners = vertices[cells]
    if degree == 1:
        return corners
    mids = 0.5 * (vertices[edges[:, 0]] + vertices[edges[:, 1]])
    if project:
        mids /= np.linalg.norm(mids, axis=1, keepdims=True)
    return np.concatenate([corners, mids[cell_edges]], axis=1)


def _make_mesh(vertices, cells, degree, on_sphere, name):
    vertices = np.ascontiguousarray(vertices, dtype=float)
    cells = np.ascontiguousarray(cells, dtype=np.int64)
    edges, cell_edges, signs, boundary = _build_edges(cells)
    nodes = _geometry_nodes(vertices, cells, edges, cell_edges, degree, on_sphere)
    for arr in (vertices, cells, edges, cell_edges, signs, nodes, boundary):
        arr.setflags(write=False)
    return Mesh(
        vertices=vertices,
        cells=cells,
        edges=edges,
        cell_edges=cell_edges,
        cell_edge_signs=signs,
        geometry_degree=degree,
        geometry_nodes=nodes,
        boundary_edges=boundary,
        on_sphere=on_sphere,
        name=name,
    )


def build_rect_mesh(nx: int, ny: int) -> Mesh:
    """Unit square split into ``nx * ny`` squares, each cut along the
    lower-left to upper-right diagonal."""
    if nx < 1 or ny < 1:
        raise ValueError("nx and ny must be positive")
    xs, ys = np.meshgrid(np.linspace(0, 1, nx + 1), np.linspace(0, 1, ny + 1))
    vertices = np.column_stack([xs.ravel(), ys.ravel()])
    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    p00 = (j * (nx + 1) + i).ravel()
    p10 = p00 + 1
    p01 = p00 + nx + 1
    p11 = p01 + 1
    cells = np.empty((2 * nx * ny, 3), dtype=np.int64)
    cells[0::2] = np.column_stack([p00, p10, p11])
    cells[1::2] = np.column_stack([p00, p11, p01])
    return _make_mesh(vertices, cells, 1, False, f"rect({nx},{ny})")


def _icosahedron():
    t = (1.0 + np.sqrt(5.0)) / 2.0
    v = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=float,
    )
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    f = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    return v, f


def _subdivide(vertices, faces):
    pairs = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    pairs = np.sort(pairs, axis=1)
    uniq, inverse = np.unique(pairs, axis=0, return_inverse=True)
    mids = vertices[uniq[:, 0]] + vertices[uniq[:, 1]]
    mids /= np.linalg.norm(mids, axis=1, keepdims=True)
    ids = inverse.reshape(3, -1).T + len(vertices)
    m01, m12, m20 = ids[:, 0], ids[:, 1], ids[:, 2]
    a, b, c = faces.T
    new = np.concatenate(
        [
            np.column_stack([a, m01, m20]),
            np.column_stack([b, m12, m01]),
            np.column_stack([c, m20, m12]),
            np.column_stack([m01, m12, m20]),
        ]
    )
    return np.vstack([vertices, mids]), new


def build_icosphere(level: int, geometry_degree: int = 1) -> Mesh:
    """Icosahedron refined ``level`` times by edge bisection, with every new
    vertex pushed radially onto the unit sphere.

    With ``geometry_degree=2`` each cell carries a quadratic geometry map
    whose mid-edge nodes also lie on the sphere.
    """
    if level < 0:
        raise ValueError("level must be non-negative")
    if level > MAX_ICOSPHERE_LEVEL:
        raise ResourceError(
            f"icosphere level {level} exceeds the limit {MAX_ICOSPHERE_LEVEL}"
        )
    if geometry_degree not in (1, 2):
        raise ValueError("geometry_degree must be 1 or 2")
    v, f = _icosahedron()
    for _ in range(level):
        v, f = _subdivide(v, f)
    return _make_mesh(v, f, geometry_degree, True, f"icosphere({level},{geometry_degree})")


def mesh_statistics(mesh: Mesh) -> MeshStats:
    x = mesh.vertices
    lengths = np.linalg.norm(x[mesh.edges[:, 1]] - x[mesh.edges[:, 0]], axis=1)
    return MeshStats(
        num_vertices=mesh.num_vertices,
        num_edges=mesh.num_edges,
        num_cells=mesh.num_cells,
        h_max=float(lengths.max()),
        euler_characteristic=mesh.num_vertices - mesh.num_edges + mesh.num_cells,
    )


def build_mesh(kind: str, **kwargs) -> Mesh:
    """Dispatch on ``kind`` ("rect" or "icosphere")."""
    if kind == "rect":
        return build_rect_mesh(kwargs["nx"], kwargs["ny"])
    if kind == "icosphere":
        return build_icosphere(kwargs["level"], kwargs.get("geometry_degree", 1))
    raise ValueError(f"unknown mesh kind {kind!r}")
