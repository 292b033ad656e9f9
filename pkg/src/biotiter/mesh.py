"""Structured simplicial meshes of the unit square.

Triangles are stored with positive orientation. Edges are numbered
lexicographically on their sorted vertex pairs, which fixes the ordering of
the flux unknowns. Every edge carries a unit normal: outward on the boundary,
and pointing from the lower-indexed to the higher-indexed neighbour inside.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class BoundaryTag(enum.IntEnum):
    INTERIOR = 0
    TOP = 1
    BOTTOM = 2
    LATERAL = 3


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable 2D triangulation with edge connectivity.

    Attributes
    ----------
    vertices : (nv, 2) float array
    cells : (nc, 3) int array, counter-clockwise
    edges : (ne, 2) int array of sorted vertex pairs
    edge_cells : (ne, 2) int array, second entry -1 on the boundary
    cell_edges : (nc, 3) int array, local edge i is opposite local vertex i
    edge_tags : (ne,) array of :class:`BoundaryTag` values
    """

    vertices: np.ndarray
    cells: np.ndarray
    edges: np.ndarray
    edge_cells: np.ndarray
    cell_edges: np.ndarray
    edge_tags: np.ndarray
    dim: int = 2
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def from_cells(cls, vertices, cells, edge_tag_lookup=None) -> "Mesh":
        """Build the connectivity of a triangulation.

        ``edge_tag_lookup`` maps a sorted vertex pair to a tag for boundary
        edges. Without it, tags are assigned geometrically on the unit square.
        """
        vertices = np.ascontiguousarray(vertices, dtype=float)
        cells = np.ascontiguousarray(cells, dtype=np.int64)
        nc = len(cells)

        # local edge i joins vertices (i+1, i+2)
        local = np.stack([cells[:, [1, 2]], cells[:, [2, 0]], cells[:, [0, 1]]], axis=1)
        pairs = np.sort(local.reshape(-1, 2), axis=1)
        edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
        inverse = inverse.reshape(nc, 3)

        ne = len(edges)
        edge_cells = np.full((ne, 2), -1, dtype=np.int64)
        counts = np.zeros(ne, dtype=np.int64)
        # cells visited in increasing order, so edge_cells[:, 0] < edge_cells[:, 1]
        for c in range(nc):
            for e in inverse[c]:
                if counts[e] >= 2:
                    raise ValueError(f"edge {tuple(edges[e])} shared by more than two cells")
                edge_cells[e, counts[e]] = c
                counts[e] += 1

        tags = np.zeros(ne, dtype=np.int64)
        boundary = np.flatnonzero(edge_cells[:, 1] < 0)
        for e in boundary:
            key = (int(edges[e, 0]), int(edges[e, 1]))
            if edge_tag_lookup is not None:
                tags[e] = edge_tag_lookup[key]
            else:
                tags[e] = _geometric_tag(vertices[edges[e]])

        mesh = cls(vertices, cells, edges, edge_cells, inverse, tags)
        mesh.check()
        return mesh

    # -- geometry -----------------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def h(self) -> float:
        """Largest edge length."""
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return float(np.max(np.hypot(d[:, 0], d[:, 1])))

    @property
    def cell_coords(self) -> np.ndarray:
        """(nc, 3, 2) vertex coordinates per cell."""
        return self.vertices[self.cells]

    @property
    def areas(self) -> np.ndarray:
        if "areas" not in self._cache:
            x = self.cell_coords
            a = x[:, 1] - x[:, 0]
            b = x[:, 2] - x[:, 0]
            self._cache["areas"] = 0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])
        return self._cache["areas"]

    @property
    def centroids(self) -> np.ndarray:
        return self.cell_coords.mean(axis=1)

    @property
    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    @property
    def edge_normals(self) -> np.ndarray:
        """Unit normal of each edge, outward for the first owning cell."""
        if "normals" not in self._cache:
            d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
            n = np.stack([d[:, 1], -d[:, 0]], axis=1)
            n /= np.hypot(n[:, 0], n[:, 1])[:, None]
            mid = self.vertices[self.edges].mean(axis=1)
            owner = self.centroids[self.edge_cells[:, 0]]
            flip = np.einsum("ij,ij->i", n, mid - owner) < 0
            n[flip] *= -1
            self._cache["normals"] = n
        return self._cache["normals"]

    @property
    def cell_edge_signs(self) -> np.ndarray:
        """+1 where the global edge normal is outward for the cell, else -1."""
        if "signs" not in self._cache:
            owner = self.edge_cells[self.cell_edges, 0]
            cell_ids = np.arange(self.n_cells)[:, None]
            self._cache["signs"] = np.where(owner == cell_ids, 1.0, -1.0)
        return self._cache["signs"]

    def boundary_edges(self, tag: BoundaryTag | None = None) -> np.ndarray:
        if tag is None:
            return np.flatnonzero(self.edge_tags != BoundaryTag.INTERIOR)
        return np.flatnonzero(self.edge_tags == tag)

    def boundary_vertices(self, tag: BoundaryTag | None = None) -> np.ndarray:
        return np.unique(self.edges[self.boundary_edges(tag)])

    def check(self) -> None:
        """Raise ``ValueError`` if a structural invariant is violated."""
        if np.any(self.areas <= 0):
            bad = int(np.argmin(self.areas))
            raise ValueError(f"cell {bad} has non-positive signed area")
        boundary = self.edge_cells[:, 1] < 0
        if np.any(self.edge_tags[boundary] == BoundaryTag.INTERIOR):
            raise ValueError("untagged boundary edge")
        if np.any(self.edge_tags[~boundary] != BoundaryTag.INTERIOR):
            raise ValueError("interior edge carries a boundary tag")

    # -- output -------------------------------------------------------------

    def dump(self) -> str:
        """Plain-text dump: header, vertex coordinates, cell index triples."""
        lines = [f"vertices {self.n_vertices} cells {self.n_cells}"]
        lines += [f"{x:.16g} {y:.16g}" for x, y in self.vertices]
        lines += [f"{a} {b} {c}" for a, b, c in self.cells]
        return "\n".join(lines) + "\n"


def _geometric_tag(segment: np.ndarray, tol: float = 1e-12) -> int:
    y = segment[:, 1]
    x = segment[:, 0]
    if np.all(np.abs(y - 1.0) < tol):
        return BoundaryTag.TOP
    if np.all(np.abs(y) < tol):
        return BoundaryTag.BOTTOM
    if np.all(np.abs(x) < tol) or np.all(np.abs(x - 1.0) < tol):
        return BoundaryTag.LATERAL
    raise ValueError(f"boundary edge {segment.tolist()} is not on the unit square")


def unit_square_mesh(n: int) -> Mesh:
    """n-by-n squares, each cut along its lower-left to upper-right diagonal."""
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    s = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(s, s)
    vertices = np.stack([X.ravel(), Y.ravel()], axis=1)

    j, i = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    v00 = (j * (n + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + n + 1
    v11 = v01 + 1
    lower = np.stack([v00, v10, v11], axis=1)
    upper = np.stack([v00, v11, v01], axis=1)
    cells = np.stack([lower, upper], axis=1).reshape(-1, 3)
    return Mesh.from_cells(vertices, cells)


def refine(mesh: Mesh) -> Mesh:
    """Uniform red refinement; boundary tags are inherited from parent edges."""
    nv = mesh.n_vertices
    mid = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    vertices = np.vstack([mesh.vertices, mid])
    m = nv + mesh.cell_edges  # midpoint of local edge i sits opposite vertex i
    a, b, c = mesh.cells.T
    m_bc, m_ca, m_ab = m.T
    children = np.stack(
        [
            np.stack([a, m_ab, m_ca], axis=1),
            np.stack([m_ab, b, m_bc], axis=1),
            np.stack([m_ca, m_bc, c], axis=1),
            np.stack([m_ab, m_bc, m_ca], axis=1),
        ],
        axis=1,
    ).reshape(-1, 3)

    lookup = {}
    for e in mesh.boundary_edges():
        v0, v1 = (int(v) for v in mesh.edges[e])
        mv = nv + int(e)
        tag = int(mesh.edge_tags[e])
        lookup[tuple(sorted((v0, mv)))] = tag
        lookup[tuple(sorted((mv, v1)))] = tag
    return Mesh.from_cells(vertices, children, edge_tag_lookup=lookup)
