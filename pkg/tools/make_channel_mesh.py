#!/usr/bin/env python3
"""Generate the channel-with-cylinder mesh fixtures.

Structured triangulation of [0, 2.2] x [0, 0.41] with a circular hole
of radius 0.05 at (0.2, 0.2): cells overlapping the disc are removed,
the ragged hole boundary is projected onto the circle, and the
neighbourhood is Laplace-smoothed. Deterministic; writes the ASCII
mesh format. Boundary tags: 1 inflow (left), 2 outflow (right),
3 wall (top/bottom), 4 cylinder.

Usage: python tools/make_channel_mesh.py <spacing> <out_path>
"""

import sys

import numpy as np

sys.path.insert(0, "src")

from mhdens.mesh import Mesh, write_mesh_ascii  # noqa: E402

LENGTH, HEIGHT = 2.2, 0.41
CENTER = np.array([0.2, 0.2])
RADIUS = 0.05


def build(h):
    nx, ny = round(LENGTH / h), round(HEIGHT / h)
    xs = np.linspace(0.0, LENGTH, nx + 1)
    ys = np.linspace(0.0, HEIGHT, ny + 1)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    verts = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(i, j):
        return i * (ny + 1) + j

    cells = []
    for i in range(nx):
        for j in range(ny):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            cells.append((a, b, c))
            cells.append((a, c, d))
    cells = np.asarray(cells)

    dist = np.linalg.norm(verts - CENTER, axis=1)
    vertex_inside = dist < RADIUS - 1e-12
    centroid = verts[cells].mean(axis=1)
    centroid_inside = np.linalg.norm(centroid - CENTER, axis=1) < RADIUS
    keep = ~(vertex_inside[cells].any(axis=1) | centroid_inside)
    cells = cells[keep]

    # Project the ragged hole boundary onto the circle.
    used = np.zeros(len(verts), dtype=bool)
    used[cells.ravel()] = True
    edge_pairs = np.sort(np.concatenate([cells[:, [1, 2]], cells[:, [2, 0]], cells[:, [0, 1]]]), axis=1)
    uniq, counts = np.unique(edge_pairs, axis=0, return_counts=True)
    boundary_v = np.zeros(len(verts), dtype=bool)
    boundary_v[uniq[counts == 1].ravel()] = True
    outer = ((np.abs(verts[:, 0]) < 1e-12) | (np.abs(verts[:, 0] - LENGTH) < 1e-12)
             | (np.abs(verts[:, 1]) < 1e-12) | (np.abs(verts[:, 1] - HEIGHT) < 1e-12))
    hole_v = boundary_v & ~outer & used
    direction = verts[hole_v] - CENTER
    verts[hole_v] = CENTER + RADIUS * direction / np.linalg.norm(direction, axis=1)[:, None]

    # Laplace-smooth the annulus around the hole (interior vertices only).
    ring = used & ~boundary_v & ~outer & (dist < RADIUS + 6 * h)
    neighbors = {}
    for a, b in uniq:
        neighbors.setdefault(a, set()).add(b)
        neighbors.setdefault(b, set()).add(a)
    ring_ids = np.nonzero(ring)[0]
    for _ in range(30):
        newpos = verts.copy()
        for v in ring_ids:
            nb = list(neighbors[v])
            newpos[v] = verts[nb].mean(axis=0)
        verts = newpos

    # Compact vertex numbering.
    remap = -np.ones(len(verts), dtype=np.int64)
    remap[np.nonzero(used)[0]] = np.arange(used.sum())
    verts = verts[used]
    cells = remap[cells]

    edge_pairs = np.sort(np.concatenate([cells[:, [1, 2]], cells[:, [2, 0]], cells[:, [0, 1]]]), axis=1)
    uniq, counts = np.unique(edge_pairs, axis=0, return_counts=True)
    bedges = uniq[counts == 1]
    facets, tags = [], []
    for a, b in bedges:
        pa, pb = verts[a], verts[b]
        mid = 0.5 * (pa + pb)
        if abs(pa[0]) < 1e-12 and abs(pb[0]) < 1e-12:
            tag = 1
        elif abs(pa[0] - LENGTH) < 1e-12 and abs(pb[0] - LENGTH) < 1e-12:
            tag = 2
        elif (abs(pa[1]) < 1e-12 and abs(pb[1]) < 1e-12) or \
             (abs(pa[1] - HEIGHT) < 1e-12 and abs(pb[1] - HEIGHT) < 1e-12):
            tag = 3
        elif np.linalg.norm(mid - CENTER) < RADIUS + 2 * h:
            tag = 4
        else:
            raise RuntimeError(f"untaggable boundary edge at {mid}")
        facets.append((a, b))
        tags.append(tag)

    return Mesh(verts, cells, np.asarray(facets), np.asarray(tags), spacing=h)


def main():
    h = float(sys.argv[1])
    out = sys.argv[2]
    mesh = build(h)
    areas_ok = mesh.n_cells
    print(f"h={h}: {mesh.n_vertices} vertices, {mesh.n_cells} cells, "
          f"{len(mesh.facets)} facets, area={mesh.area:.6f} "
          f"(target {LENGTH * HEIGHT - np.pi * RADIUS**2:.6f})")
    for tag in mesh.boundary_tags():
        print(f"  tag {tag}: {(mesh.facet_tags == tag).sum()} facets")
    write_mesh_ascii(mesh, out)


if __name__ == "__main__":
    main()
