"""Operator assembly, interpolation, norms and boundary terms.

All bilinear forms use the 7-point degree-5 triangle rule (exact for
quadratic-times-quadratic integrands); convection and forcing terms use
the 12-point degree-6 rule, since quadratic-times-gradient-times-
quadratic integrands reach degree 5 and forcing data is generally not
polynomial. Assembled matrices are cached on the spaces object.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..errors import ConfigurationError
from .quadrature import edge_rule, triangle_rule
from .spaces import P1_GRADS, Field, TaylorHoodSpaces, p1_basis, p2_basis, p2_grads
from . import kernels

_BILINEAR_ORDER = 5
_CONVECTION_ORDER = 6


def _tables(spaces, order):
    key = ("tables", order)
    if key not in spaces._cache:
        pts, w = triangle_rule(order)
        spaces._cache[key] = {
            "pts": pts,
            "w": w,
            "p1": p1_basis(pts),
            "p2": np.ascontiguousarray(p2_basis(pts)),
            "dp2": np.ascontiguousarray(p2_grads(pts)),
        }
    return spaces._cache[key]


def _quad_coords(spaces, order):
    """Physical coordinates of quadrature points, two (C, Q) arrays."""
    key = ("qcoords", order)
    if key not in spaces._cache:
        pts = _tables(spaces, order)["pts"]
        xy = np.einsum("cxk,qk->cqx", spaces.cell_jac, pts) + spaces.cell_origin[:, None, :]
        spaces._cache[key] = (np.ascontiguousarray(xy[:, :, 0]),
                              np.ascontiguousarray(xy[:, :, 1]))
    return spaces._cache[key]


def _scatter_matrix(data, rows_map, cols_map, shape):
    c, m, n = data.shape
    rows = np.repeat(rows_map, n, axis=1).ravel()
    cols = np.tile(cols_map, (1, m)).ravel()
    return sp.coo_matrix((data.ravel(), (rows, cols)), shape=shape).tocsr()


def _local_values(field):
    """Per-cell nodal values of a velocity field, (C, 6, 2) contiguous."""
    nodes = field.coeffs.reshape(-1, 2)
    return np.ascontiguousarray(nodes[field.spaces.p2_cell_nodes])


# -- matrices ----------------------------------------------------------


def _p2_scalar_mass(spaces):
    t = _tables(spaces, _BILINEAR_ORDER)
    ref = np.einsum("q,qm,qn->mn", t["w"], t["p2"], t["p2"])
    data = spaces.detj[:, None, None] * ref[None, :, :]
    nodes = spaces.p2_cell_nodes
    return _scatter_matrix(data, nodes, nodes, (spaces.n_p2_nodes, spaces.n_p2_nodes))


def _p2_scalar_stiffness(spaces):
    t = _tables(spaces, _BILINEAR_ORDER)
    gn = np.einsum("qnk,clk->cqnl", t["dp2"], spaces.jinv_t)
    data = np.einsum("q,c,cqml,cqnl->cmn", t["w"], spaces.detj, gn, gn)
    nodes = spaces.p2_cell_nodes
    return _scatter_matrix(data, nodes, nodes, (spaces.n_p2_nodes, spaces.n_p2_nodes))


def assemble_mass(spaces: TaylorHoodSpaces, role: str = "velocity"):
    """Gram matrix of the chosen basis under the L2 inner product."""
    key = ("mass", role)
    if key not in spaces._cache:
        if role == "velocity":
            m = sp.kron(_p2_scalar_mass(spaces), sp.eye(2), format="csr")
        elif role == "scalar":
            t = _tables(spaces, _BILINEAR_ORDER)
            ref = np.einsum("q,qm,qn->mn", t["w"], t["p1"], t["p1"])
            data = spaces.detj[:, None, None] * ref[None, :, :]
            cells = spaces.mesh.cells
            m = _scatter_matrix(data, cells, cells, (spaces.n_scalar, spaces.n_scalar))
        else:
            raise ValueError(f"unknown role {role!r}")
        spaces._cache[key] = m
    return spaces._cache[key]


def assemble_stiffness(spaces: TaylorHoodSpaces, role: str = "velocity"):
    """Matrix of the (grad ., grad .) form; kernel is the constants."""
    key = ("stiffness", role)
    if key not in spaces._cache:
        if role == "velocity":
            k = sp.kron(_p2_scalar_stiffness(spaces), sp.eye(2), format="csr")
        elif role == "scalar":
            g = np.einsum("clk,nk->cnl", spaces.jinv_t, P1_GRADS)
            data = 0.5 * spaces.detj[:, None, None] * np.einsum("cml,cnl->cmn", g, g)
            cells = spaces.mesh.cells
            k = _scatter_matrix(data, cells, cells, (spaces.n_scalar, spaces.n_scalar))
        else:
            raise ValueError(f"unknown role {role!r}")
        spaces._cache[key] = k
    return spaces._cache[key]


def assemble_divergence(spaces: TaylorHoodSpaces):
    """Matrix G with q^T G u = (q, div u) for P1 q and P2 vector u."""
    key = ("divergence",)
    if key not in spaces._cache:
        t = _tables(spaces, _BILINEAR_ORDER)
        gn = np.einsum("qnk,clk->cqnl", t["dp2"], spaces.jinv_t)
        data = np.einsum("q,c,qm,cqnd->cmnd", t["w"], spaces.detj, t["p1"], gn)
        data = data.reshape(spaces.mesh.n_cells, 3, 12)
        spaces._cache[key] = _scatter_matrix(
            data, spaces.mesh.cells, spaces.velocity_cell_dofs,
            (spaces.n_scalar, spaces.n_velocity))
    return spaces._cache[key]


# -- vectors -----------------------------------------------------------


def load_vector(spaces: TaylorHoodSpaces, func, t: float) -> np.ndarray:
    """Load vector (f(., t), phi_i) for a vector-valued f(x, y, t)."""
    tab = _tables(spaces, _CONVECTION_ORDER)
    xq, yq = _quad_coords(spaces, _CONVECTION_ORDER)
    vals = np.asarray(func(xq, yq, t), dtype=float)
    if vals.shape != (2,) + xq.shape:
        vals = np.broadcast_to(vals.reshape(2, *([1] * xq.ndim)), (2,) + xq.shape)
    r = np.einsum("c,q,dcq,qn->cnd", spaces.detj, tab["w"], vals, tab["p2"])
    return np.bincount(spaces.velocity_cell_dofs.ravel(),
                       weights=r.reshape(-1, 12).ravel(),
                       minlength=spaces.n_velocity)


def skew_convection_vector(a: Field, b: Field) -> np.ndarray:
    """Vector r with r_i = b*(a, b, phi_i), in the explicitly skew form."""
    spaces = a.spaces
    tab = _tables(spaces, _CONVECTION_ORDER)
    r = kernels.convection_vectors(_local_values(a), _local_values(b),
                                   tab["p2"], tab["dp2"], tab["w"],
                                   spaces.detj, spaces.jinv_t)
    return np.bincount(spaces.velocity_cell_dofs.ravel(), weights=r.ravel(),
                       minlength=spaces.n_velocity)


def trilinear_scalar(a: Field, b: Field, c: Field) -> float:
    """b*(a, b, c) = 0.5 (a . grad b, c) - 0.5 (a . grad c, b)."""
    spaces = a.spaces
    tab = _tables(spaces, _CONVECTION_ORDER)
    return kernels.trilinear_sum(_local_values(a), _local_values(b), _local_values(c),
                                 tab["p2"], tab["dp2"], tab["w"],
                                 spaces.detj, spaces.jinv_t)


def convection_operator(spaces: TaylorHoodSpaces, a: Field):
    """Sparse matrix N(a) with v^T N(a) w = b*(a, w, v).

    Used by the semi-implicit baseline scheme, which keeps the advected
    field implicit; rebuilt every step since it depends on a.
    """
    tab = _tables(spaces, _CONVECTION_ORDER)
    s = kernels.convection_matrices(_local_values(a), tab["p2"], tab["dp2"],
                                    tab["w"], spaces.detj, spaces.jinv_t)
    nodes = spaces.p2_cell_nodes
    blocks = []
    for d in range(2):
        blocks.append(_scatter_matrix(s, 2 * nodes + d, 2 * nodes + d,
                                      (spaces.n_velocity, spaces.n_velocity)))
    return (blocks[0] + blocks[1]).tocsr()


# -- interpolation and evaluation --------------------------------------


def interpolate(expr, t: float, spaces: TaylorHoodSpaces, role: str = "velocity") -> Field:
    """Nodal interpolant of expr(x, y, t) into the chosen space."""
    if role == "velocity":
        x, y = spaces.p2_nodes[:, 0], spaces.p2_nodes[:, 1]
        vals = np.asarray(expr(x, y, t), dtype=float)
        if vals.shape != (2, len(x)):
            vals = np.broadcast_to(vals.reshape(2, 1), (2, len(x)))
        coeffs = np.empty(spaces.n_velocity)
        coeffs[0::2] = vals[0]
        coeffs[1::2] = vals[1]
    elif role == "scalar":
        x, y = spaces.mesh.vertices[:, 0], spaces.mesh.vertices[:, 1]
        vals = np.asarray(expr(x, y, t), dtype=float)
        coeffs = np.broadcast_to(vals, (len(x),)).astype(float)
    else:
        raise ValueError(f"unknown role {role!r}")
    return Field(spaces, role, coeffs)


def locate_points(spaces: TaylorHoodSpaces, points, tol=1e-10):
    """Containing cell and reference coordinates for each point.

    Returns (cells (N,), ref (N, 2)); cell index -1 marks points outside
    the mesh (e.g. inside an obstacle hole).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    verts = spaces.mesh.vertices[spaces.mesh.cells]
    lo = verts.min(axis=1) - tol
    hi = verts.max(axis=1) + tol
    out_cells = np.full(len(points), -1, dtype=np.int64)
    out_ref = np.zeros((len(points), 2))
    for i, pt in enumerate(points):
        cand = np.nonzero((lo[:, 0] <= pt[0]) & (pt[0] <= hi[:, 0])
                          & (lo[:, 1] <= pt[1]) & (pt[1] <= hi[:, 1]))[0]
        for c in cand:
            rhs = pt - spaces.cell_origin[c]
            ref = spaces.jinv_t[c].T @ rhs
            if ref[0] >= -tol and ref[1] >= -tol and ref[0] + ref[1] <= 1.0 + tol:
                out_cells[i] = c
                out_ref[i] = ref
                break
    return out_cells, out_ref


def eval_field(field: Field, points):
    """Field values at physical points; NaN where outside the mesh."""
    spaces = field.spaces
    cells, ref = locate_points(spaces, points)
    inside = cells >= 0
    if field.role == "velocity":
        out = np.full((len(cells), 2), np.nan)
        n = p2_basis(ref[inside])
        loc = _local_values(field)[cells[inside]]
        out[inside] = np.einsum("pn,pnd->pd", n, loc)
    else:
        out = np.full(len(cells), np.nan)
        lam = p1_basis(ref[inside])
        loc = field.coeffs[spaces.mesh.cells[cells[inside]]]
        out[inside] = np.einsum("pn,pn->p", lam, loc)
    return out


# -- norms -------------------------------------------------------------


def _check_same(f, g):
    if f.spaces is not g.spaces or f.role != g.role:
        raise ValueError("fields live on different spaces or roles")


def l2_norm(f: Field) -> float:
    m = assemble_mass(f.spaces, f.role)
    return float(np.sqrt(max(f.coeffs @ (m @ f.coeffs), 0.0)))


def h1_seminorm(f: Field) -> float:
    k = assemble_stiffness(f.spaces, f.role)
    return float(np.sqrt(max(f.coeffs @ (k @ f.coeffs), 0.0)))


def l2_inner(f: Field, g: Field) -> float:
    _check_same(f, g)
    m = assemble_mass(f.spaces, f.role)
    return float(f.coeffs @ (m @ g.coeffs))


# -- Dirichlet handling -------------------------------------------------


def dirichlet_values(spaces: TaylorHoodSpaces, bcs: dict, t: float) -> np.ndarray:
    """Full-length velocity vector holding boundary values at time t.

    ``bcs`` maps facet tag to a callable g(x, y, t) -> (2, n) (or to
    None / 0 for homogeneous data). Entries outside constrained dofs
    are zero.
    """
    out = np.zeros(spaces.n_velocity)
    for tag, func in bcs.items():
        if tag not in spaces.boundary_nodes_by_tag:
            raise ConfigurationError(f"unknown boundary tag {tag!r}")
        if func is None or func == 0:
            continue
        nodes = spaces.boundary_nodes_by_tag[tag]
        x, y = spaces.p2_nodes[nodes, 0], spaces.p2_nodes[nodes, 1]
        vals = np.asarray(func(x, y, t), dtype=float)
        if vals.shape != (2, len(nodes)):
            vals = np.broadcast_to(vals.reshape(2, 1), (2, len(nodes)))
        out[2 * nodes] = vals[0]
        out[2 * nodes + 1] = vals[1]
    return out


def eliminate_dofs(matrix, rhs, dofs, values):
    """Symmetric elimination of constrained dofs.

    Zeroes constrained rows and columns (moving column contributions to
    the right-hand side), puts 1 on the diagonal and the prescribed
    values in the rhs. Returns (matrix, rhs) as new objects.
    """
    a = matrix.tocsc()
    rhs = rhs - a[:, dofs] @ values
    mask = np.ones(a.shape[0])
    mask[dofs] = 0.0
    keep = sp.diags(mask)
    ident = np.zeros(a.shape[0])
    ident[dofs] = 1.0
    a = keep @ a @ keep + sp.diags(ident)
    rhs[dofs] = values
    return a.tocsr(), rhs


def apply_dirichlet(matrix, rhs, spaces: TaylorHoodSpaces, bcs: dict, t: float):
    """Impose Dirichlet data on a velocity-sized system symmetrically."""
    tags = sorted(bcs)
    for tag in tags:
        if tag not in spaces.boundary_nodes_by_tag:
            raise ConfigurationError(f"unknown boundary tag {tag!r}")
    dofs = spaces.velocity_boundary_dofs(tags)
    values = dirichlet_values(spaces, bcs, t)[dofs]
    return eliminate_dofs(matrix, rhs, dofs, values)


# -- boundary energy-flux functional ------------------------------------


def boundary_functional(u: Field, B: Field, p: Field, lam: Field,
                        nu: float, gamma: float, s: float,
                        npoints: int = 4) -> float:
    """Boundary flux functional feeding the auxiliary-scalar source term.

    Integrates over all tagged boundary edges
    (-|u|^2 u / 2 - s |B|^2 u / 2 + nu (grad u) u - p u
     + s (B . u) B + s gamma (grad B) B - s lam B) . n
    where ((grad v) v)_k = sum_d v_d  d v_d / d x_k. A 4-point Gauss
    rule per edge integrates the degree-6 traces to rounding error.
    """
    spaces = u.spaces
    mesh = spaces.mesh
    nfac = len(mesh.facets)
    if nfac == 0:
        return 0.0
    sq, wq = edge_rule(npoints)

    ref_verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    # Reference coordinates of the edge quadrature points inside the
    # owning cell of each facet.
    la = np.empty(nfac, dtype=np.int64)
    lb = np.empty(nfac, dtype=np.int64)
    for k in range(nfac):
        cell_verts = mesh.cells[spaces.facet_cells[k]]
        la[k] = int(np.nonzero(cell_verts == mesh.facets[k, 0])[0][0])
        lb[k] = int(np.nonzero(cell_verts == mesh.facets[k, 1])[0][0])
    ra, rb = ref_verts[la], ref_verts[lb]  # (K, 2)
    ref = ra[:, None, :] + sq[None, :, None] * (rb - ra)[:, None, :]  # (K, Q, 2)

    flat = ref.reshape(-1, 2)
    n_tab = p2_basis(flat).reshape(nfac, npoints, 6)
    g_tab = p2_grads(flat).reshape(nfac, npoints, 6, 2)
    lam_tab = p1_basis(flat).reshape(nfac, npoints, 3)

    cells = spaces.facet_cells
    u_loc = _local_values(u)[cells]
    b_loc = _local_values(B)[cells]
    p_loc = p.coeffs[mesh.cells[cells]]
    l_loc = lam.coeffs[mesh.cells[cells]]
    jt = spaces.jinv_t[cells]  # (K, 2, 2)

    uq = np.einsum("kqn,knd->kqd", n_tab, u_loc)
    bq = np.einsum("kqn,knd->kqd", n_tab, b_loc)
    pq = np.einsum("kqn,kn->kq", lam_tab, p_loc)
    lq = np.einsum("kqn,kn->kq", lam_tab, l_loc)
    gphys = np.einsum("kqnm,klm->kqnl", g_tab, jt)
    gu = np.einsum("kqnl,knd->kqdl", gphys, u_loc)
    gb = np.einsum("kqnl,knd->kqdl", gphys, b_loc)

    nrm = spaces.facet_normals[:, None, :]  # (K, 1, 2)
    u_n = np.einsum("kqd,kqd->kq", uq, np.broadcast_to(nrm, uq.shape))
    b_n = np.einsum("kqd,kqd->kq", bq, np.broadcast_to(nrm, bq.shape))
    u2 = np.einsum("kqd,kqd->kq", uq, uq)
    b2 = np.einsum("kqd,kqd->kq", bq, bq)
    ub = np.einsum("kqd,kqd->kq", uq, bq)
    # ((grad v) v) . n = sum_d v_d grad(v_d) . n
    gun = np.einsum("kqd,kqdl,kql->kq", uq, gu, np.broadcast_to(nrm, uq.shape))
    gbn = np.einsum("kqd,kqdl,kql->kq", bq, gb, np.broadcast_to(nrm, bq.shape))

    integrand = (-0.5 * u2 * u_n - 0.5 * s * b2 * u_n + nu * gun - pq * u_n
                 + s * ub * b_n + s * gamma * gbn - s * lq * b_n)
    return float(np.einsum("kq,q,k->", integrand, wq, spaces.facet_lengths))
