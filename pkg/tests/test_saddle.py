import numpy as np
import pytest

import mhdens.saddle as saddle
from mhdens.errors import SolverError
from mhdens.fem import TaylorHoodSpaces, assemble_divergence, assemble_mass
from mhdens.mesh import WALL, generate_unit_square
from mhdens.saddle import build_stokes_operator, factorization_count


@pytest.fixture(scope="module")
def spaces():
    return TaylorHoodSpaces(generate_unit_square(4))


def test_zero_rhs_zero_solution(spaces):
    op = build_stokes_operator(spaces, 4.0, 0.25, 0.5, [WALL])
    u, p = op.solve(np.zeros(spaces.n_velocity))
    assert np.all(u.coeffs == 0.0)
    assert np.all(p.coeffs == 0.0)


def test_residual_and_pressure_mean(spaces):
    op = build_stokes_operator(spaces, 4.0, 0.25, 0.5, [WALL])
    rng = np.random.default_rng(0)
    rhs = rng.standard_normal(spaces.n_velocity)
    u, p = op.solve(rhs)
    assert op.last_residual < 1e-10
    assert abs(op.mean_row @ p.coeffs) < 1e-10 * max(np.linalg.norm(p.coeffs), 1.0)


def test_discrete_divergence_residual(spaces):
    op = build_stokes_operator(spaces, 4.0, 0.25, 0.5, [WALL])
    g = assemble_divergence(spaces)
    rng = np.random.default_rng(1)
    u, _ = op.solve(rng.standard_normal(spaces.n_velocity))
    assert np.linalg.norm(g @ u.coeffs) < 1e-9 * max(np.linalg.norm(u.coeffs), 1.0)


def test_mass_projection_identity(spaces):
    # A discretely divergence-free w with homogeneous data is reproduced when
    # the rhs is c_m M w and the diffusion block vanishes.
    c_m = 3.0
    op = build_stokes_operator(spaces, c_m, 0.0, 0.7, [WALL])
    rng = np.random.default_rng(2)
    w, _ = op.solve(rng.standard_normal(spaces.n_velocity))  # on the constraint manifold
    rhs = c_m * (assemble_mass(spaces) @ w.coeffs)
    u, p = op.solve(rhs)
    assert np.abs(u.coeffs - w.coeffs).max() < 1e-10
    assert np.abs(p.coeffs).max() < 1e-10


def test_against_dense_lu_oracle():
    # n = 1 is degenerate for the mixed pair (pressure not controlled), so
    # the smallest well-posed structured mesh is used.
    spaces = TaylorHoodSpaces(generate_unit_square(2))
    op = build_stokes_operator(spaces, 2.0, 0.3, 0.5, [WALL])
    rng = np.random.default_rng(3)
    rhs_v = rng.standard_normal(spaces.n_velocity)
    u, p = op.solve(rhs_v)
    full = op._full_rhs(rhs_v, None, None)
    x = np.linalg.solve(op.matrix.toarray(), full)
    np.testing.assert_allclose(u.coeffs, x[:spaces.n_velocity], atol=1e-12)
    np.testing.assert_allclose(p.coeffs, x[spaces.n_velocity:spaces.n_velocity
                                           + spaces.n_scalar], atol=1e-12)


def test_factorization_determinism(spaces):
    rng = np.random.default_rng(4)
    rhs = rng.standard_normal(spaces.n_velocity)
    op1 = build_stokes_operator(spaces, 5.0, 0.1, 0.5, [WALL])
    op2 = build_stokes_operator(spaces, 5.0, 0.1, 0.5, [WALL])
    u1, p1 = op1.solve(rhs)
    u2, p2 = op2.solve(rhs)
    assert np.array_equal(u1.coeffs, u2.coeffs)
    assert np.array_equal(p1.coeffs, p2.coeffs)


def test_repeated_solves_bit_identical(spaces):
    op = build_stokes_operator(spaces, 5.0, 0.1, 0.5, [WALL])
    rng = np.random.default_rng(5)
    rhs = rng.standard_normal(spaces.n_velocity)
    u1, _ = op.solve(rhs)
    u2, _ = op.solve(rhs)
    assert np.array_equal(u1.coeffs, u2.coeffs)


def test_solve_batch_matches_single(spaces):
    op = build_stokes_operator(spaces, 5.0, 0.1, 0.5, [WALL])
    rng = np.random.default_rng(6)
    r1 = rng.standard_normal(spaces.n_velocity)
    r2 = rng.standard_normal(spaces.n_velocity)
    (u1, p1), (u2, p2) = op.solve_batch([(r1, None, None), (r2, None, None)])
    s1, q1 = op.solve(r1)
    s2, q2 = op.solve(r2)
    np.testing.assert_allclose(u1.coeffs, s1.coeffs, atol=1e-13)
    np.testing.assert_allclose(u2.coeffs, s2.coeffs, atol=1e-13)
    np.testing.assert_allclose(p1.coeffs, q1.coeffs, atol=1e-13)
    np.testing.assert_allclose(p2.coeffs, q2.coeffs, atol=1e-13)


def test_inhomogeneous_values_imposed_exactly(spaces):
    op = build_stokes_operator(spaces, 2.0, 0.4, 0.5, [WALL])
    bc = np.zeros(spaces.n_velocity)
    dofs = op.dirichlet_dofs
    rng = np.random.default_rng(7)
    bc[dofs] = 0.0
    # constant (1, 0) on the whole boundary: compatible (closed flux)
    nodes = spaces.boundary_nodes
    bc[2 * nodes] = 1.0
    u, _ = op.solve(np.zeros(spaces.n_velocity), None, bc)
    assert np.abs(u.coeffs[dofs] - bc[dofs]).max() == 0.0


def test_invalid_coefficients():
    spaces = TaylorHoodSpaces(generate_unit_square(1))
    with pytest.raises(ValueError):
        build_stokes_operator(spaces, 0.0, 0.1, 0.5, [WALL])
    with pytest.raises(ValueError):
        build_stokes_operator(spaces, 1.0, -0.1, 0.5, [WALL])
    with pytest.raises(ValueError):
        build_stokes_operator(spaces, 1.0, 0.1, np.inf, [WALL])


def test_singular_factorization_raises(monkeypatch):
    spaces = TaylorHoodSpaces(generate_unit_square(1))
    import scipy.sparse.linalg as spla

    def boom(*args, **kwargs):
        raise RuntimeError("Factor is exactly singular")

    monkeypatch.setattr(spla, "splu", boom)
    monkeypatch.setattr(saddle.spla, "splu", boom)
    with pytest.raises(SolverError):
        build_stokes_operator(spaces, 1.0, 0.1, 0.5, [WALL])


def test_factorization_counter(spaces):
    before = factorization_count()
    build_stokes_operator(spaces, 1.0, 0.1, 0.5, [WALL])
    build_stokes_operator(spaces, 2.0, 0.1, 0.5, [WALL])
    assert factorization_count() - before == 2
