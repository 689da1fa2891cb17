"""Stokes-type saddle-point systems: build, factorize once, solve many.

The efficiency of the ensemble schemes comes from every realization and
every timestep sharing one factorized operator, so the factorization
count is instrumented and asserted in tests. The pressure nullspace is
removed by one extra scalar unknown enforcing a zero mean, which keeps
the matrix nonsingular without perturbing it asymmetrically.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverError
from .fem import assemble_divergence, assemble_mass, assemble_stiffness
from .fem.spaces import Field, TaylorHoodSpaces

_RESIDUAL_GUARD = 1e-8

_factorizations = 0


def factorization_count() -> int:
    """Total sparse factorizations performed so far in this process."""
    return _factorizations


def _count_factorization():
    global _factorizations
    _factorizations += 1


class StokesOperator:
    """Factorized block system for one (c_m M + c_a A) saddle problem.

    Layout of unknowns: velocity dofs, pressure dofs, one multiplier
    enforcing the zero pressure mean. Dirichlet velocity dofs are
    eliminated symmetrically; their column block is kept so prescribed
    values can be folded into each right-hand side.
    """

    def __init__(self, spaces: TaylorHoodSpaces, c_m: float, c_a: float,
                 c_p: float, dirichlet_tags):
        if not np.isfinite([c_m, c_a, c_p]).all() or c_m <= 0 or c_p <= 0 or c_a < 0:
            raise ValueError("need finite coefficients with c_m > 0, c_a >= 0, c_p > 0")
        self.spaces = spaces
        self.c_p = float(c_p)
        self.n_u = spaces.n_velocity
        self.n_p = spaces.n_scalar
        n = self.n_u + self.n_p + 1

        a_uu = c_m * assemble_mass(spaces) + c_a * assemble_stiffness(spaces)
        g = assemble_divergence(spaces)
        # Integral of each pressure basis function: the zero-mean constraint.
        self.mean_row = np.asarray(assemble_mass(spaces, "scalar").sum(axis=1)).ravel()
        e = sp.coo_matrix((self.mean_row,
                           (np.arange(self.n_p), np.zeros(self.n_p, dtype=int))),
                          shape=(self.n_p, 1))
        system = sp.bmat([
            [a_uu, -self.c_p * g.T, None],
            [g, None, e],
            [None, e.T, None],
        ], format="csc")

        self.dirichlet_dofs = spaces.velocity_boundary_dofs(sorted(dirichlet_tags))
        d = self.dirichlet_dofs
        self._bc_columns = system.tocsc()[:, d].tocsr()
        mask = np.ones(n)
        mask[d] = 0.0
        keep = sp.diags(mask)
        ident = np.zeros(n)
        ident[d] = 1.0
        # Symmetric elimination: rows and columns of constrained dofs are
        # zeroed (column contributions fold into each rhs), diagonal 1.
        self.matrix = (keep @ system @ keep + sp.diags(ident)).tocsc()

        try:
            self._lu = spla.splu(self.matrix)
        except RuntimeError as exc:  # singular after augmentation
            raise SolverError(f"saddle factorization failed: {exc}") from exc
        _count_factorization()

    def _full_rhs(self, rhs_velocity, rhs_divergence, bc_values):
        rhs = np.zeros(self.n_u + self.n_p + 1)
        rhs[:self.n_u] = rhs_velocity
        if rhs_divergence is not None:
            rhs[self.n_u:self.n_u + self.n_p] = rhs_divergence
        d = self.dirichlet_dofs
        if bc_values is not None and len(d):
            g = np.asarray(bc_values, dtype=float)[d]
            rhs -= self._bc_columns @ g
            rhs[d] = g
        elif len(d):
            rhs[d] = 0.0
        return rhs

    def solve(self, rhs_velocity, rhs_divergence=None, bc_values=None):
        """Solve for (velocity, pressure) given load vectors.

        ``bc_values`` is a full-length velocity vector carrying the
        prescribed boundary values (zeros elsewhere); omit it for
        homogeneous data. The solved pressure has zero mean.
        """
        return self.solve_batch([(rhs_velocity, rhs_divergence, bc_values)])[0]

    def solve_batch(self, cases):
        """Solve several right-hand sides against the one factorization.

        ``cases`` is a list of (rhs_velocity, rhs_divergence, bc_values)
        triples; a single multi-column triangular solve amortizes the
        factorization traversal across them.
        """
        rhs = np.column_stack([self._full_rhs(*case) for case in cases])
        x = self._lu.solve(rhs)
        scale = max(np.linalg.norm(rhs), 1.0)
        self.last_residual = float(np.linalg.norm(self.matrix @ x - rhs) / scale)
        if self.last_residual > _RESIDUAL_GUARD:
            raise SolverError(f"saddle solve relative residual "
                              f"{self.last_residual:.3e} exceeds {_RESIDUAL_GUARD:.1e}")
        out = []
        for k in range(len(cases)):
            u = Field(self.spaces, "velocity", x[:self.n_u, k].copy())
            p = Field(self.spaces, "scalar", x[self.n_u:self.n_u + self.n_p, k].copy())
            out.append((u, p))
        return out


def build_stokes_operator(spaces, c_m, c_a, c_p, dirichlet_tags) -> StokesOperator:
    """Assemble and factorize one saddle operator."""
    return StokesOperator(spaces, c_m, c_a, c_p, dirichlet_tags)
