import numpy as np
import pytest

from mhdens.bench import manufactured as mf
from mhdens.errors import ConfigurationError
from mhdens.fem import (
    TaylorHoodSpaces,
    assemble_divergence,
    assemble_mass,
    assemble_stiffness,
    dirichlet_values,
    interpolate,
    l2_norm,
    load_vector,
    skew_convection_vector,
)
from mhdens.gpav import FGPair
from mhdens.mesh import WALL, generate_unit_square
from mhdens.saddle import build_stokes_operator, factorization_count
from mhdens.stepper import (
    EnsembleConfig,
    MemberProblem,
    bootstrap,
    cn_step,
    compute_mean_fluctuation,
    prepare_shared_operators,
    run_ensemble,
)

FG = FGPair()


def zero_member(nu=0.5, gamma=0.5):
    return MemberProblem(nu=nu, gamma=gamma,
                         dirichlet_u={WALL: None}, dirichlet_B={WALL: None})


def test_mean_fluctuation_values():
    mean, fluct = compute_mean_fluctuation([0.55, 0.45])
    assert mean == pytest.approx(0.5)
    assert fluct == pytest.approx([0.05, -0.05])
    mean, fluct = compute_mean_fluctuation([0.7])
    assert mean == 0.7 and fluct == [0.0]
    with pytest.raises(ValueError):
        compute_mean_fluctuation([])


def test_mean_fluctuation_sums_to_zero():
    rng = np.random.default_rng(0)
    vals = rng.uniform(0.1, 10.0, 13).tolist()
    mean, fluct = compute_mean_fluctuation(vals)
    assert abs(sum(fluct)) < 1e-14 * len(vals) * abs(mean)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        EnsembleConfig(members=[], dt=0.1, t_end=1.0)
    with pytest.raises(ConfigurationError):
        EnsembleConfig(members=[zero_member()], dt=0.1, t_end=1.0, scheme="rk4")
    with pytest.raises(ConfigurationError):
        EnsembleConfig(members=[zero_member()], dt=0.3, t_end=1.0).n_steps
    mixed = [zero_member(), MemberProblem(nu=0.5, gamma=0.5, dirichlet_u={2: None},
                                          dirichlet_B={WALL: None})]
    with pytest.raises(ConfigurationError):
        EnsembleConfig(members=mixed, dt=0.1, t_end=1.0)


def test_shared_operator_momentum_block():
    # With alpha = 0 the velocity block is (1/dt) M + (nu_bar/2) A entrywise.
    mesh = generate_unit_square(3)
    spaces = TaylorHoodSpaces(mesh)
    dt = 0.2
    cfg = EnsembleConfig(members=[zero_member(0.4, 0.8), zero_member(0.6, 0.2)],
                         dt=dt, t_end=1.0, scheme="cn")
    shared = prepare_shared_operators(cfg, spaces)
    assert shared.nu_bar == pytest.approx(0.5)
    assert shared.gamma_bar == pytest.approx(0.5)
    expected = (1.0 / dt) * assemble_mass(spaces) + 0.25 * assemble_stiffness(spaces)
    block = shared.velocity_op.matrix[:spaces.n_velocity, :spaces.n_velocity]
    free = np.setdiff1d(np.arange(spaces.n_velocity),
                        shared.velocity_op.dirichlet_dofs)
    diff = (block - expected)[np.ix_(free, free)]
    assert np.abs(diff.toarray()).max() < 1e-12


def test_bdf2_operator_coefficients():
    mesh = generate_unit_square(2)
    spaces = TaylorHoodSpaces(mesh)
    dt, alpha, h = 0.1, 0.3, 0.5
    cfg = EnsembleConfig(members=[zero_member(0.5, 0.7)], dt=dt, t_end=1.0,
                         scheme="bdf2", alpha=alpha, alpha_m=0.0, h=h)
    shared = prepare_shared_operators(cfg, spaces)
    expected = (1.5 / dt) * assemble_mass(spaces) \
        + (0.5 + 3 * alpha * h) * assemble_stiffness(spaces)
    block = shared.velocity_op.matrix[:spaces.n_velocity, :spaces.n_velocity]
    free = np.setdiff1d(np.arange(spaces.n_velocity),
                        shared.velocity_op.dirichlet_dofs)
    diff = (block - expected)[np.ix_(free, free)]
    assert np.abs(diff.toarray()).max() < 1e-12


@pytest.mark.parametrize("scheme", ["cn", "bdf2", "primitive"])
def test_zero_fixed_point(scheme):
    mesh = generate_unit_square(3)
    cfg = EnsembleConfig(members=[zero_member()], dt=0.25, t_end=1.0, scheme=scheme)
    res = run_ensemble(cfg, mesh)
    st = res.states[0]
    assert np.all(st.u.coeffs == 0.0)
    assert np.all(st.B.coeffs == 0.0)
    assert st.scalars.xi == pytest.approx(1.0)
    if scheme == "cn":
        r0 = bootstrap(cfg, res.spaces, 0).scalars.R_int
        assert st.scalars.R_int == pytest.approx(r0, rel=1e-12)


def test_bootstrap_r0():
    mesh = generate_unit_square(2)
    cfg = EnsembleConfig(members=[zero_member()], dt=0.1, t_end=1.0, C0=0.04)
    st = bootstrap(cfg, TaylorHoodSpaces(mesh), 0)
    assert st.scalars.R_int == pytest.approx(0.2)  # sqrt(C0)
    assert st.scalars.R_half is None


def test_bdf2_half_step_r_positive():
    mesh = generate_unit_square(4)
    members = [mf.decay_member(0.1, nu=0.1, gamma=0.1)]
    cfg = EnsembleConfig(members=members, dt=0.5, t_end=2.0, scheme="bdf2")
    res = run_ensemble(cfg, mesh)
    assert res.states[0].scalars.R_half is not None
    assert res.states[0].scalars.R_half > 0


def test_factorization_economy_cn():
    mesh = generate_unit_square(3)
    members = [mf.decay_member(e, nu=0.1 * (1 + e), gamma=0.1) for e in
               (0.1, -0.1, 0.2, -0.2)]
    cfg = EnsembleConfig(members=members, dt=0.01, t_end=1.0, scheme="cn")
    res = run_ensemble(cfg, mesh)
    assert cfg.n_steps == 100
    assert res.factorizations == 2


def test_factorization_economy_bdf2_bootstrap():
    mesh = generate_unit_square(3)
    members = [mf.decay_member(0.1, nu=0.1, gamma=0.1)]
    cfg = EnsembleConfig(members=members, dt=0.1, t_end=1.0, scheme="bdf2")
    res = run_ensemble(cfg, mesh)
    # two for the midpoint bootstrap pair plus two for the main scheme
    assert res.factorizations == 4


def test_forcing_change_does_not_refactorize():
    mesh = generate_unit_square(3)
    spaces = TaylorHoodSpaces(mesh)
    cfg = EnsembleConfig(members=[mf.convergence_member(0.1)], dt=0.125, t_end=1.0)
    shared = prepare_shared_operators(cfg, spaces)
    st = bootstrap(cfg, spaces, 0)
    before = factorization_count()
    st, _ = cn_step(shared, st, cfg)
    cfg2 = EnsembleConfig(members=[mf.convergence_member(-0.1)], dt=0.125, t_end=1.0)
    st2 = bootstrap(cfg2, spaces, 0)
    cn_step(shared, st2, cfg2)
    assert factorization_count() == before


def test_divergence_residuals_small():
    mesh = generate_unit_square(4)
    members = [mf.convergence_member(e) for e in (0.1, -0.1)]
    cfg = EnsembleConfig(members=members, dt=0.25, t_end=1.0, scheme="cn")
    res = run_ensemble(cfg, mesh)
    worst = max(max(d.div_u, d.div_B) for dj in res.diagnostics for d in dj)
    assert worst < 1e-9


def test_degenerate_ensemble_members_identical():
    # eps = 0 twice: both members must produce bit-identical trajectories,
    # and they must match a single-member run (fluctuation terms vanish).
    mesh = generate_unit_square(3)
    members = [mf.convergence_member(0.0), mf.convergence_member(0.0)]
    cfg = EnsembleConfig(members=members, dt=0.25, t_end=0.5, scheme="cn")
    res = run_ensemble(cfg, mesh)
    assert np.array_equal(res.states[0].u.coeffs, res.states[1].u.coeffs)
    assert np.array_equal(res.states[0].B.coeffs, res.states[1].B.coeffs)
    solo = EnsembleConfig(members=[mf.convergence_member(0.0)], dt=0.25, t_end=0.5,
                          scheme="cn")
    res1 = run_ensemble(solo, mesh)
    np.testing.assert_allclose(res.states[0].u.coeffs, res1.states[0].u.coeffs,
                               atol=1e-13)


def test_superposition_matches_monolithic_frozen_xi():
    # Re-assemble the one-shot system with the computed xi frozen and solve
    # against a fresh factorization; must match u_hat + xi * u_sharp.
    mesh = generate_unit_square(8)
    spaces = TaylorHoodSpaces(mesh)
    cfg = EnsembleConfig(members=[mf.convergence_member(0.1)], dt=0.125, t_end=0.625)
    shared = prepare_shared_operators(cfg, spaces)
    prob = cfg.members[0]
    st = bootstrap(cfg, spaces, 0)
    dt = cfg.dt
    mass, stiff, div_t = shared.mass_v, shared.stiff_v, shared.div_t
    for _ in range(5):
        old = st
        st, diag = cn_step(shared, st, cfg)
        xi = diag.xi
        ut = old.u + 0.5 * old.u_prev - 0.5 * old.u_prev2
        bt = old.B + 0.5 * old.B_prev - 0.5 * old.B_prev2
        nu_p = prob.nu - shared.nu_bar
        op = build_stokes_operator(spaces, 1.0 / dt, 0.5 * shared.nu_bar, 0.5, [WALL])
        rhs = load_vector(spaces, prob.forcing, old.t + dt / 2)
        rhs += (1.0 / dt) * (mass @ old.u.coeffs)
        rhs -= 0.5 * shared.nu_bar * (stiff @ old.u.coeffs)
        rhs -= nu_p * (stiff @ ut.coeffs)
        rhs += 0.5 * (div_t @ old.p.coeffs)
        rhs += xi * (cfg.s * skew_convection_vector(bt, bt)
                     - skew_convection_vector(ut, ut))
        u_mono, _ = op.solve(rhs, None,
                             dirichlet_values(spaces, prob.dirichlet_u, old.t + dt))
        rel = np.linalg.norm(u_mono.coeffs - st.u.coeffs) / np.linalg.norm(st.u.coeffs)
        assert rel < 1e-9


def test_closed_form_modified_energy_identity():
    # Zero forcing and fully compatible homogeneous data: S0 = 0 and
    # F(R_new) = F(R_old) / (1 + dt * dissipation / E) at every step.
    mesh = generate_unit_square(6)
    member = MemberProblem(nu=0.1, gamma=0.1,
                           dirichlet_u={WALL: None}, dirichlet_B={WALL: None},
                           u0=mf.decay_velocity(0.0), B0=mf.decay_velocity(0.3))
    for scheme in ("cn", "bdf2"):
        cfg = EnsembleConfig(members=[member], dt=0.5, t_end=3.0, s=1.0, scheme=scheme)
        res = run_ensemble(cfg, mesh)
        for d in res.diagnostics[0]:
            assert abs(d.S0) < 1e-13
            predicted = d.F_before / (1.0 + cfg.dt * d.dissipation / d.E_bar)
            assert d.F_after == pytest.approx(predicted, rel=1e-12)


def test_primitive_energy_boundedness():
    # Semi-implicit baseline with f = g = 0: the physical energy never grows.
    mesh = generate_unit_square(5)
    member = MemberProblem(nu=0.05, gamma=0.05,
                           dirichlet_u={WALL: None}, dirichlet_B={WALL: None},
                           u0=mf.decay_velocity(0.0), B0=mf.decay_magnetic(0.0))
    cfg = EnsembleConfig(members=[member], dt=0.25, t_end=2.0, s=1.0,
                         scheme="primitive")
    res = run_ensemble(cfg, mesh)
    energies = [d.energy for d in res.diagnostics[0]]
    spaces = res.spaces
    u0 = interpolate(member.u0, 0.0, spaces)
    b0 = interpolate(member.B0, 0.0, spaces)
    e0 = 0.5 * l2_norm(u0) ** 2 + 0.5 * l2_norm(b0) ** 2
    previous = e0
    for e in energies:
        assert e <= previous * (1.0 + 1e-12)
        previous = e


def test_primitive_refactorizes_each_step():
    mesh = generate_unit_square(2)
    member = MemberProblem(nu=0.1, gamma=0.1,
                           dirichlet_u={WALL: None}, dirichlet_B={WALL: None},
                           u0=mf.decay_velocity(0.0), B0=None)
    cfg = EnsembleConfig(members=[member], dt=0.25, t_end=1.0, scheme="primitive")
    res = run_ensemble(cfg, mesh)
    assert res.factorizations == cfg.n_steps


def test_diagnostics_order_deterministic():
    mesh = generate_unit_square(3)
    members = [mf.decay_member(e, nu=0.1, gamma=0.1) for e in (0.1, -0.1)]
    cfg = EnsembleConfig(members=members, dt=0.5, t_end=1.0, scheme="cn")
    res = run_ensemble(cfg, mesh)
    for j, dj in enumerate(res.diagnostics):
        assert all(d.member == j for d in dj)
        assert [d.t for d in dj] == pytest.approx([0.5, 1.0])


def test_xi_positive_throughout():
    mesh = generate_unit_square(4)
    members = [mf.decay_member(e, nu=0.02, gamma=0.02) for e in (0.1, -0.1)]
    for scheme in ("cn", "bdf2"):
        cfg = EnsembleConfig(members=members, dt=1.0, t_end=5.0, s=1.0, scheme=scheme)
        res = run_ensemble(cfg, mesh)
        assert all(d.xi > 0 for dj in res.diagnostics for d in dj)
