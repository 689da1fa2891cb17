"""Pure-numpy element kernels for the per-timestep hot loops.

Same contracts as the compiled versions in ``_corekernels.pyx``; all
arrays are C-contiguous float64. ``a_loc``/``b_loc``/``c_loc`` hold
quadratic vector fields as (cells, 6 nodes, 2 components); ``nt`` and
``dnt`` are the reference basis tables (Q, 6) and (Q, 6, 2); ``w`` the
reference weights (sum 1/2); ``detj`` (C,) and ``jinv_t`` (C, 2, 2) the
affine geometry.
"""

import numpy as np


def _phys_grads(dnt, jinv_t):
    # (C, Q, 6, 2): grad_x N = J^{-T} grad_ref N per cell.
    return np.einsum("qnk,clk->cqnl", dnt, jinv_t)


def convection_vectors(a_loc, b_loc, nt, dnt, w, detj, jinv_t):
    """Element load vectors of the skew form b*(a, b, .), shape (C, 12).

    Entry (2n + d) tests against basis node n, component d:
    0.5 * integral[ (a . grad b_d) N_n - (a . grad N_n) b_d ].
    """
    gn = _phys_grads(dnt, jinv_t)
    a_q = np.einsum("qn,cnd->cqd", nt, a_loc)
    b_q = np.einsum("qn,cnd->cqd", nt, b_loc)
    grad_b = np.einsum("cqnl,cnd->cqdl", gn, b_loc)
    adb = np.einsum("cql,cqdl->cqd", a_q, grad_b)
    adn = np.einsum("cql,cqnl->cqn", a_q, gn)
    scale = 0.5 * w[None, :] * detj[:, None]  # (C, Q)
    r = np.einsum("cq,cqd,qn->cnd", scale, adb, nt)
    r -= np.einsum("cq,cqn,cqd->cnd", scale, adn, b_q)
    return r.reshape(len(detj), 12)


def trilinear_sum(a_loc, b_loc, c_loc, nt, dnt, w, detj, jinv_t):
    """Value of the skew trilinear form b*(a, b, c) over all cells."""
    gn = _phys_grads(dnt, jinv_t)
    a_q = np.einsum("qn,cnd->cqd", nt, a_loc)
    b_q = np.einsum("qn,cnd->cqd", nt, b_loc)
    c_q = np.einsum("qn,cnd->cqd", nt, c_loc)
    grad_b = np.einsum("cqnl,cnd->cqdl", gn, b_loc)
    grad_c = np.einsum("cqnl,cnd->cqdl", gn, c_loc)
    first = np.einsum("cql,cqdl,cqd->cq", a_q, grad_b, c_q)
    second = np.einsum("cql,cqdl,cqd->cq", a_q, grad_c, b_q)
    scale = 0.5 * w[None, :] * detj[:, None]
    return float((scale * (first - second)).sum())


def convection_matrices(a_loc, nt, dnt, w, detj, jinv_t):
    """Component-scalar element matrices of b*(a, ., .), shape (C, 6, 6).

    S[m, n] = 0.5 * integral[ (a . grad N_n) N_m - (a . grad N_m) N_n ];
    the full 12x12 vector block is S kron I_2, expanded by the caller.
    """
    gn = _phys_grads(dnt, jinv_t)
    a_q = np.einsum("qn,cnd->cqd", nt, a_loc)
    adn = np.einsum("cql,cqnl->cqn", a_q, gn)
    scale = 0.5 * w[None, :] * detj[:, None]
    s = np.einsum("cq,cqn,qm->cmn", scale, adn, nt)
    return s - s.transpose(0, 2, 1)
