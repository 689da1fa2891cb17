"""Triangulated 2D domains with tagged boundary facets.

Structured rectangle generators plus an ASCII import/export path for
unstructured meshes (the channel-with-cylinder fixture is shipped as a
data file in this format). Meshes are validated on construction and
frozen afterwards, so they can be shared read-only across ensemble
workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MeshFormatError, MeshInvalidError

# Default boundary tag used by generate_unit_square.
WALL = 1


def _signed_areas(vertices, cells):
    p0 = vertices[cells[:, 0]]
    p1 = vertices[cells[:, 1]]
    p2 = vertices[cells[:, 2]]
    return 0.5 * ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
                  - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1]))


def _cell_edges_sorted(cells):
    """All 3C cell edges as sorted vertex pairs, shape (3C, 2)."""
    e = np.concatenate([cells[:, [1, 2]], cells[:, [2, 0]], cells[:, [0, 1]]])
    return np.sort(e, axis=1)


@dataclass(frozen=True)
class Mesh:
    """Immutable triangulation with tagged boundary edges.

    vertices : (V, 2) float coordinates
    cells    : (C, 3) vertex indices, counterclockwise
    facets   : (K, 2) vertex indices of boundary edges
    facet_tags : (K,) integer tag per facet
    spacing  : reported grid spacing h for structured meshes (None when
               imported); distinct from ``mesh_size``, the geometric
               maximum edge length, which for a uniform n x n square
               grid is sqrt(2)/n while the reported h is 1/n.
    """

    vertices: np.ndarray
    cells: np.ndarray
    facets: np.ndarray
    facet_tags: np.ndarray
    spacing: float | None = None
    mesh_size: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.ascontiguousarray(self.vertices, dtype=float))
        object.__setattr__(self, "cells", np.ascontiguousarray(self.cells, dtype=np.int64))
        object.__setattr__(self, "facets", np.ascontiguousarray(self.facets, dtype=np.int64).reshape(-1, 2))
        object.__setattr__(self, "facet_tags", np.ascontiguousarray(self.facet_tags, dtype=np.int64))
        self._validate()
        edges = self.vertices[self.cells] - self.vertices[np.roll(self.cells, -1, axis=1)]
        lengths = np.linalg.norm(edges, axis=2)
        object.__setattr__(self, "mesh_size", float(lengths.max()))
        for a in (self.vertices, self.cells, self.facets, self.facet_tags):
            a.flags.writeable = False

    def _validate(self):
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshInvalidError("vertices must be (V, 2)")
        if self.cells.ndim != 2 or self.cells.shape[1] != 3 or len(self.cells) == 0:
            raise MeshInvalidError("cells must be (C, 3) with C >= 1")
        if self.cells.min() < 0 or self.cells.max() >= len(self.vertices):
            raise MeshInvalidError("cell vertex index out of range")
        if len(self.facets) != len(self.facet_tags):
            raise MeshInvalidError("facets and facet_tags lengths differ")

        areas = _signed_areas(self.vertices, self.cells)
        bad = np.nonzero(areas <= 0.0)[0]
        if bad.size:
            raise MeshInvalidError(
                f"cell {bad[0]} has nonpositive signed area {areas[bad[0]]:.3e}"
                " (vertices must be counterclockwise)")

        all_edges = _cell_edges_sorted(self.cells)
        uniq, counts = np.unique(all_edges, axis=0, return_counts=True)
        if counts.max() > 2:
            raise MeshInvalidError("an edge is shared by more than two cells")
        boundary = uniq[counts == 1]

        if len(self.facets) == 0:
            raise MeshInvalidError("mesh has no boundary facets")
        fac = np.sort(self.facets, axis=1)
        fac_view = {tuple(e) for e in fac.tolist()}
        bnd_view = {tuple(e) for e in boundary.tolist()}
        if len(fac_view) != len(fac):
            raise MeshInvalidError("duplicate boundary facet")
        missing = bnd_view - fac_view
        if missing:
            raise MeshInvalidError(f"untagged boundary edge {sorted(missing)[0]}")
        extra = fac_view - bnd_view
        if extra:
            raise MeshInvalidError(f"facet {sorted(extra)[0]} is not a boundary edge")

        deg = np.bincount(boundary.ravel(), minlength=len(self.vertices))
        odd = np.nonzero(deg % 2)[0]
        if odd.size:
            raise MeshInvalidError(f"boundary is not closed at vertex {odd[0]}")

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def area(self):
        return float(_signed_areas(self.vertices, self.cells).sum())

    def boundary_tags(self):
        return sorted(set(self.facet_tags.tolist()))


def generate_unit_square(n: int) -> Mesh:
    """Uniform n x n triangulation of [0,1]^2, all boundary tagged WALL.

    Each grid square is split along its bottom-left to top-right
    diagonal, which keeps meshes bit-for-bit reproducible across runs.
    """
    return generate_rectangle(1.0, 1.0, n, n,
                              {"left": WALL, "right": WALL, "top": WALL, "bottom": WALL})


def generate_rectangle(length: float, height: float, nx: int, ny: int,
                       tags: dict[str, int]) -> Mesh:
    """Structured triangulation of [0,length] x [0,height].

    ``tags`` maps each of left/right/top/bottom to an integer boundary tag.
    """
    if length <= 0 or height <= 0:
        raise ValueError("rectangle dimensions must be positive")
    if nx < 1 or ny < 1:
        raise ValueError("subdivision counts must be >= 1")
    missing = {"left", "right", "top", "bottom"} - set(tags)
    if missing:
        raise ValueError(f"missing boundary tags for sides: {sorted(missing)}")

    xs = np.linspace(0.0, length, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(i, j):
        return i * (ny + 1) + j

    cells = []
    for i in range(nx):
        for j in range(ny):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            cells.append((a, b, c))
            cells.append((a, c, d))

    facets, ftags = [], []
    for i in range(nx):
        facets.append((vid(i, 0), vid(i + 1, 0)))
        ftags.append(tags["bottom"])
        facets.append((vid(i, ny), vid(i + 1, ny)))
        ftags.append(tags["top"])
    for j in range(ny):
        facets.append((vid(0, j), vid(0, j + 1)))
        ftags.append(tags["left"])
        facets.append((vid(nx, j), vid(nx, j + 1)))
        ftags.append(tags["right"])

    return Mesh(vertices, np.asarray(cells), np.asarray(facets), np.asarray(ftags),
                spacing=max(length / nx, height / ny))


def read_mesh_ascii(path) -> Mesh:
    """Read a mesh in the line-oriented ASCII format.

    Format: header ``mhdmesh 1``; ``vertices N`` then N lines ``x y``;
    ``cells M`` then M lines ``i j k`` (0-based); ``facets K`` then K
    lines ``i j tag``. ``#`` starts a comment; blank lines are skipped.
    """
    with open(path) as f:
        raw = f.readlines()

    tokens = []  # (line_number, [fields])
    for lineno, line in enumerate(raw, start=1):
        body = line.split("#", 1)[0].strip()
        if body:
            tokens.append((lineno, body.split()))

    pos = 0

    def next_line(what):
        nonlocal pos
        if pos >= len(tokens):
            last = tokens[-1][0] if tokens else 0
            raise MeshFormatError(f"unexpected end of file, expected {what}", line=last)
        lineno, fields = tokens[pos]
        pos += 1
        return lineno, fields

    lineno, fields = next_line("header 'mhdmesh 1'")
    if fields != ["mhdmesh", "1"]:
        raise MeshFormatError(f"bad header {' '.join(fields)!r}", line=lineno)

    def read_section(name, width, conv):
        lineno, fields = next_line(f"'{name} N'")
        if len(fields) != 2 or fields[0] != name:
            raise MeshFormatError(f"expected '{name} N', got {' '.join(fields)!r}", line=lineno)
        try:
            count = int(fields[1])
        except ValueError:
            raise MeshFormatError(f"bad count {fields[1]!r}", line=lineno) from None
        rows = np.empty((count, width), dtype=float if conv is float else np.int64)
        for r in range(count):
            lineno, fields = next_line(f"{name} row")
            if len(fields) != width:
                raise MeshFormatError(
                    f"expected {width} fields in {name} row, got {len(fields)}", line=lineno)
            try:
                rows[r] = [conv(x) for x in fields]
            except ValueError:
                raise MeshFormatError(f"bad {name} entry {fields!r}", line=lineno) from None
        return rows

    vertices = read_section("vertices", 2, float)
    cells = read_section("cells", 3, int)
    fac = read_section("facets", 3, int)
    if pos != len(tokens):
        raise MeshFormatError("trailing content after facets section", line=tokens[pos][0])

    return Mesh(vertices, cells, fac[:, :2], fac[:, 2])


def write_mesh_ascii(mesh: Mesh, path) -> None:
    """Write a mesh in the ASCII format accepted by read_mesh_ascii."""
    with open(path, "w") as f:
        f.write("mhdmesh 1\n")
        f.write(f"vertices {mesh.n_vertices}\n")
        for x, y in mesh.vertices:
            f.write(f"{x:.17g} {y:.17g}\n")
        f.write(f"cells {mesh.n_cells}\n")
        for i, j, k in mesh.cells:
            f.write(f"{i} {j} {k}\n")
        f.write(f"facets {len(mesh.facets)}\n")
        for (i, j), t in zip(mesh.facets, mesh.facet_tags):
            f.write(f"{i} {j} {t}\n")
