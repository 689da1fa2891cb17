"""Taylor-Hood function spaces on a triangulation.

The stable mixed pair: continuous piecewise-quadratic vectors for
velocity and magnetic field, continuous piecewise-linear scalars for
pressure and the magnetic multiplier. Quadratic nodes are the vertices
followed by edge midpoints, edges ordered lexicographically by sorted
vertex pair; vector dofs are node-major, (2*node, 2*node + 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..mesh import Mesh

# Local edge e of cell (v0, v1, v2) is opposite local vertex e.
_LOCAL_EDGES = ((1, 2), (2, 0), (0, 1))


def p1_basis(points):
    """P1 barycentric basis at reference points, shape (Q, 3)."""
    x, y = points[:, 0], points[:, 1]
    return np.column_stack([1.0 - x - y, x, y])


P1_GRADS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


def p2_basis(points):
    """Quadratic Lagrange basis at reference points, shape (Q, 6)."""
    lam = p1_basis(points)
    l0, l1, l2 = lam[:, 0], lam[:, 1], lam[:, 2]
    return np.column_stack([
        l0 * (2.0 * l0 - 1.0),
        l1 * (2.0 * l1 - 1.0),
        l2 * (2.0 * l2 - 1.0),
        4.0 * l1 * l2,
        4.0 * l2 * l0,
        4.0 * l0 * l1,
    ])


def p2_grads(points):
    """Reference gradients of the quadratic basis, shape (Q, 6, 2)."""
    lam = p1_basis(points)
    q = len(points)
    g = np.empty((q, 6, 2))
    for i in range(3):
        g[:, i, :] = (4.0 * lam[:, i] - 1.0)[:, None] * P1_GRADS[i]
    for e, (a, b) in enumerate(_LOCAL_EDGES):
        g[:, 3 + e, :] = 4.0 * (lam[:, a, None] * P1_GRADS[b] + lam[:, b, None] * P1_GRADS[a])
    return g


class TaylorHoodSpaces:
    """Dof maps, cell geometry and boundary bookkeeping for one mesh."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        cells = mesh.cells
        nv = mesh.n_vertices

        pairs = np.concatenate([cells[:, list(e)] for e in _LOCAL_EDGES])
        pairs = np.sort(pairs, axis=1)
        self.edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
        self.cell_edges = inverse.reshape(3, -1).T  # (C, 3) local edge -> global edge

        self.n_vertices = nv
        self.n_edges = len(self.edges)
        self.n_p2_nodes = nv + self.n_edges
        self.n_velocity = 2 * self.n_p2_nodes
        self.n_scalar = nv

        midpoints = 0.5 * (mesh.vertices[self.edges[:, 0]] + mesh.vertices[self.edges[:, 1]])
        self.p2_nodes = np.vstack([mesh.vertices, midpoints])

        self.p2_cell_nodes = np.hstack([cells, nv + self.cell_edges])  # (C, 6)
        dofs = np.empty((mesh.n_cells, 12), dtype=np.int64)
        dofs[:, 0::2] = 2 * self.p2_cell_nodes
        dofs[:, 1::2] = 2 * self.p2_cell_nodes + 1
        self.velocity_cell_dofs = dofs

        # Affine geometry: x = x0 + J xi, detJ = 2 * area > 0.
        p0 = mesh.vertices[cells[:, 0]]
        d1 = mesh.vertices[cells[:, 1]] - p0
        d2 = mesh.vertices[cells[:, 2]] - p0
        self.detj = d1[:, 0] * d2[:, 1] - d2[:, 0] * d1[:, 1]
        jinv_t = np.empty((mesh.n_cells, 2, 2))
        jinv_t[:, 0, 0] = d2[:, 1]
        jinv_t[:, 0, 1] = -d1[:, 1]
        jinv_t[:, 1, 0] = -d2[:, 0]
        jinv_t[:, 1, 1] = d1[:, 0]
        self.jinv_t = jinv_t / self.detj[:, None, None]
        self.cell_origin = p0
        self.cell_jac = np.stack([d1, d2], axis=2)  # (C, 2, 2), columns are edge vectors

        self._build_boundary()
        self._cache: dict = {}

    # -- boundary ------------------------------------------------------

    def _build_boundary(self):
        mesh = self.mesh
        edge_lookup = {(int(a), int(b)): k for k, (a, b) in enumerate(self.edges)}
        # Each boundary edge belongs to exactly one cell (mesh validation).
        owner = {}
        for c, loc in np.ndindex(mesh.n_cells, 3):
            a, b = _LOCAL_EDGES[loc]
            key = tuple(sorted((int(mesh.cells[c, a]), int(mesh.cells[c, b]))))
            owner.setdefault(key, (c, loc))

        nfac = len(mesh.facets)
        self.facet_cells = np.empty(nfac, dtype=np.int64)
        self.facet_local_edge = np.empty(nfac, dtype=np.int64)
        self.facet_edge = np.empty(nfac, dtype=np.int64)
        self.facet_normals = np.empty((nfac, 2))
        self.facet_lengths = np.empty(nfac)
        for k, (a, b) in enumerate(mesh.facets):
            key = tuple(sorted((int(a), int(b))))
            c, loc = owner[key]
            self.facet_cells[k] = c
            self.facet_local_edge[k] = loc
            self.facet_edge[k] = edge_lookup[key]
            pa, pb = mesh.vertices[a], mesh.vertices[b]
            t = pb - pa
            ln = np.hypot(t[0], t[1])
            n = np.array([t[1], -t[0]]) / ln
            opposite = mesh.vertices[mesh.cells[c, loc]]
            if n @ (opposite - 0.5 * (pa + pb)) > 0:
                n = -n
            self.facet_normals[k] = n
            self.facet_lengths[k] = ln

        # Assign each boundary P2 node to exactly one tag; at corners the
        # smallest tag wins, deterministically.
        node_tag = {}
        order = np.lexsort((np.arange(nfac), mesh.facet_tags))
        for k in order:
            tag = int(mesh.facet_tags[k])
            a, b = mesh.facets[k]
            mid = self.n_vertices + self.facet_edge[k]
            for node in (int(a), int(b), int(mid)):
                node_tag.setdefault(node, tag)
        by_tag: dict[int, list[int]] = {}
        for node, tag in node_tag.items():
            by_tag.setdefault(tag, []).append(node)
        self.boundary_nodes_by_tag = {t: np.array(sorted(ns), dtype=np.int64)
                                      for t, ns in sorted(by_tag.items())}
        self.boundary_nodes = np.array(sorted(node_tag), dtype=np.int64)

    def velocity_boundary_dofs(self, tags=None):
        """Constrained vector dofs for the given tags (all by default)."""
        if tags is None:
            nodes = self.boundary_nodes
        else:
            parts = [self.boundary_nodes_by_tag[t] for t in sorted(tags)
                     if t in self.boundary_nodes_by_tag]
            nodes = np.unique(np.concatenate(parts)) if parts else np.empty(0, dtype=np.int64)
        return np.sort(np.concatenate([2 * nodes, 2 * nodes + 1]))


@dataclass
class Field:
    """Coefficient vector over one of the two dof maps."""

    spaces: TaylorHoodSpaces
    role: str  # "velocity" (vector P2) or "scalar" (P1)
    coeffs: np.ndarray

    def __post_init__(self):
        expected = self.spaces.n_velocity if self.role == "velocity" else self.spaces.n_scalar
        if self.role not in ("velocity", "scalar"):
            raise ValueError(f"unknown field role {self.role!r}")
        if len(self.coeffs) != expected:
            raise ValueError(f"{self.role} field needs {expected} coefficients, "
                             f"got {len(self.coeffs)}")

    def copy(self):
        return Field(self.spaces, self.role, self.coeffs.copy())

    def _like(self, coeffs):
        return Field(self.spaces, self.role, coeffs)

    def __add__(self, other):
        return self._like(self.coeffs + other.coeffs)

    def __sub__(self, other):
        return self._like(self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return self._like(self.coeffs * float(scalar))

    __rmul__ = __mul__


def zero_field(spaces, role="velocity"):
    n = spaces.n_velocity if role == "velocity" else spaces.n_scalar
    return Field(spaces, role, np.zeros(n))
