"""Ensemble time stepping for the coupled velocity/magnetic system.

Each step splits into two Stokes-type sub-problem solves per field
against operators built from the ensemble-mean viscosity and
resistivity, so all realizations and all timesteps reuse the same two
factorizations. The explicit nonlinear terms enter through the second
sub-problem and are rescaled by the auxiliary ratio xi, which together
with the R updates gives unconditional decay of the modified energy.

Schemes: "cn" (midpoint, three history levels for the half-step
extrapolant), "bdf2" (two-step, launched with one midpoint step), and
"primitive" (first-order semi-implicit baseline that refactorizes every
step; the efficiency foil).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, InvariantError, SolverError
from .fem import (
    assemble_divergence,
    assemble_mass,
    assemble_stiffness,
    boundary_functional,
    convection_operator,
    dirichlet_values,
    eliminate_dofs,
    h1_seminorm,
    interpolate,
    load_vector,
    skew_convection_vector,
    zero_field,
)
from .fem.spaces import Field, TaylorHoodSpaces
from .gpav import (
    EnergyParams,
    FGPair,
    ScalarState,
    compute_S0,
    default_energy_shift,
    shifted_energy,
    update_R_bdf2,
    update_R_cn,
    update_xi_bdf2,
    update_xi_cn,
)
from .mesh import Mesh
from .saddle import (
    _count_factorization,
    build_stokes_operator,
    factorization_count,
)

_DIV_GUARD = 1e-6

SCHEMES = ("cn", "bdf2", "primitive")


@dataclass
class MemberProblem:
    """One realization: parameters, forcing, boundary and initial data.

    Field callables follow the f(x, y, t) -> (2, ...) convention; None
    means identically zero. ``curl_forcing`` is the already-curled
    magnetic source (the schemes only ever use its L2 pairing).
    """

    nu: float
    gamma: float
    forcing: Callable | None = None
    curl_forcing: Callable | None = None
    dirichlet_u: dict = dataclass_field(default_factory=dict)
    dirichlet_B: dict = dataclass_field(default_factory=dict)
    u0: Callable | None = None
    B0: Callable | None = None
    p0: Callable | None = None
    lam0: Callable | None = None

    def __post_init__(self):
        if self.nu <= 0 or self.gamma <= 0:
            raise ConfigurationError("viscosity and resistivity must be positive")


@dataclass
class EnsembleConfig:
    """Shared run parameters plus the per-realization problems."""

    members: list
    dt: float
    t_end: float
    s: float = 1.0
    C0: float | None = None  # default: tied to the domain area at run time
    alpha: float = 0.0
    alpha_m: float = 0.0
    scheme: str = "cn"
    h: float | None = None  # reported grid spacing for the stabilization
    extrapolation: str = "tilde"  # "tilde" (three-level) or "bdf" (two-level)
    fg: FGPair = dataclass_field(default_factory=FGPair)

    def __post_init__(self):
        if not self.members:
            raise ConfigurationError("need at least one ensemble member")
        if self.dt <= 0 or self.t_end <= 0:
            raise ConfigurationError("dt and t_end must be positive")
        if self.alpha < 0 or self.alpha_m < 0:
            raise ConfigurationError("stabilization coefficients must be >= 0")
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"unknown scheme {self.scheme!r}")
        if self.extrapolation not in ("tilde", "bdf"):
            raise ConfigurationError(f"unknown extrapolation {self.extrapolation!r}")
        utags = sorted(self.members[0].dirichlet_u)
        btags = sorted(self.members[0].dirichlet_B)
        for m in self.members[1:]:
            if sorted(m.dirichlet_u) != utags or sorted(m.dirichlet_B) != btags:
                raise ConfigurationError(
                    "all members must constrain the same boundary tags "
                    "(values may differ, the matrix may not)")

    @property
    def n_steps(self) -> int:
        n = round(self.t_end / self.dt)
        if n < 1 or abs(n * self.dt - self.t_end) > 1e-9 * max(1.0, self.t_end):
            raise ConfigurationError(
                f"t_end {self.t_end} is not an integral number of steps dt={self.dt}")
        return n


@dataclass
class MemberState:
    """Time-history window of one realization."""

    index: int
    u: Field
    u_prev: Field
    u_prev2: Field
    B: Field
    B_prev: Field
    B_prev2: Field
    p: Field
    lam: Field
    scalars: ScalarState
    t: float
    step: int


@dataclass
class StepDiagnostics:
    """Per-step scalars recorded for every member."""

    member: int
    t: float
    xi: float | None
    F_before: float | None
    F_after: float | None
    E_bar: float | None
    dissipation: float | None
    S0: float | None
    energy: float  # physical: ||u||^2/2 + s ||B||^2/2
    div_u: float
    div_B: float
    E_bar_half: float | None = None  # midpoint-mean shifted energy (cn only)


def compute_mean_fluctuation(values):
    """Ensemble mean and per-member fluctuations of a scalar parameter."""
    values = list(values)
    if not values:
        raise ValueError("need at least one value")
    mean = sum(values) / len(values)
    return mean, [v - mean for v in values]


class SharedOperators:
    """Factorized mean-coefficient operators plus cached matrices."""

    def __init__(self, config: EnsembleConfig, spaces: TaylorHoodSpaces, scheme=None):
        self.spaces = spaces
        self.scheme = scheme or config.scheme
        self.nu_bar, _ = compute_mean_fluctuation([m.nu for m in config.members])
        self.gamma_bar, _ = compute_mean_fluctuation([m.gamma for m in config.members])
        self.h = config.h if config.h is not None else (
            spaces.mesh.spacing if spaces.mesh.spacing is not None else spaces.mesh.mesh_size)

        self.mass_v = assemble_mass(spaces)
        self.stiff_v = assemble_stiffness(spaces)
        self.div = assemble_divergence(spaces).tocsr()
        self.div_t = self.div.T.tocsr()

        dt = config.dt
        utags = sorted(config.members[0].dirichlet_u)
        btags = sorted(config.members[0].dirichlet_B)
        if self.scheme == "cn":
            self.velocity_op = build_stokes_operator(
                spaces, 1.0 / dt, 0.5 * self.nu_bar + config.alpha * self.h, 0.5, utags)
            self.magnetic_op = build_stokes_operator(
                spaces, 1.0 / dt, 0.5 * self.gamma_bar + config.alpha_m * self.h, 0.5, btags)
        elif self.scheme == "bdf2":
            self.velocity_op = build_stokes_operator(
                spaces, 1.5 / dt, self.nu_bar + 3.0 * config.alpha * self.h, 1.0, utags)
            self.magnetic_op = build_stokes_operator(
                spaces, 1.5 / dt, self.gamma_bar + 3.0 * config.alpha_m * self.h, 1.0, btags)
        else:  # primitive: matrix depends on the state, rebuilt per step
            self.velocity_op = None
            self.magnetic_op = None
            self.u_dirichlet = spaces.velocity_boundary_dofs(utags)
            self.b_dirichlet = spaces.velocity_boundary_dofs(btags)
            self.mass_p = assemble_mass(spaces, "scalar")


def prepare_shared_operators(config, spaces, scheme=None) -> SharedOperators:
    return SharedOperators(config, spaces, scheme)


def _div_residual(shared, coeffs):
    return float(np.linalg.norm(shared.div @ coeffs)
                 / max(1.0, np.linalg.norm(coeffs)))


def _energy_params(config, spaces) -> EnergyParams:
    c0 = config.C0 if config.C0 is not None else default_energy_shift(spaces.mesh.area)
    return EnergyParams(config.s, c0)


def bootstrap(config: EnsembleConfig, spaces: TaylorHoodSpaces, index: int) -> MemberState:
    """Initial state: interpolated data, synthesized history, R = G(E)."""
    prob = config.members[index]

    def vec(expr):
        if expr is None:
            return zero_field(spaces)
        return interpolate(expr, 0.0, spaces)

    def scal(expr):
        if expr is None:
            return zero_field(spaces, "scalar")
        return interpolate(expr, 0.0, spaces, "scalar")

    u0, b0 = vec(prob.u0), vec(prob.B0)
    params = _energy_params(config, spaces)
    r0 = float(config.fg.G(shifted_energy(u0, b0, params)))
    return MemberState(
        index=index,
        u=u0, u_prev=u0.copy(), u_prev2=u0.copy(),
        B=b0, B_prev=b0.copy(), B_prev2=b0.copy(),
        p=scal(prob.p0), lam=scal(prob.lam0),
        scalars=ScalarState(R_int=r0, R_half=None, xi=1.0),
        t=0.0, step=0)


def _half_extrapolant(cur: Field, prev: Field, prev2: Field, mode: str) -> Field:
    # Three-level form: 2 v^{n-1/2} - v^{n-3/2} with midpoint averages,
    # which telescopes to v^n + v^{n-1}/2 - v^{n-2}/2.
    if mode == "tilde":
        return cur + 0.5 * prev - 0.5 * prev2
    return 1.5 * cur - 0.5 * prev


def _forcing_loads(spaces, prob, t):
    f = load_vector(spaces, prob.forcing, t) if prob.forcing is not None else None
    g = load_vector(spaces, prob.curl_forcing, t) if prob.curl_forcing is not None else None
    return f, g


def _cn_rhs(shared: SharedOperators, state: MemberState, config: EnsembleConfig):
    """Right-hand sides of both sub-problems for one midpoint step.

    Sub-problem 1 collects history, mean/fluctuation diffusion, the old
    pressure, forcing and stabilization, with inhomogeneous data at the
    new time level; sub-problem 2 carries the explicit skew convection
    terms with homogeneous data.
    """
    spaces = shared.spaces
    prob = config.members[state.index]
    dt, s = config.dt, config.s
    nu_p = prob.nu - shared.nu_bar
    gamma_p = prob.gamma - shared.gamma_bar
    t_new = state.t + dt
    ah = config.alpha * shared.h
    amh = config.alpha_m * shared.h

    ut = _half_extrapolant(state.u, state.u_prev, state.u_prev2, config.extrapolation)
    bt = _half_extrapolant(state.B, state.B_prev, state.B_prev2, config.extrapolation)
    f_load, g_load = _forcing_loads(spaces, prob, state.t + 0.5 * dt)

    rhs_u = (1.0 / dt) * (shared.mass_v @ state.u.coeffs)
    rhs_u -= (0.5 * shared.nu_bar - ah) * (shared.stiff_v @ state.u.coeffs)
    if nu_p != 0.0:
        rhs_u -= nu_p * (shared.stiff_v @ ut.coeffs)
    rhs_u += 0.5 * (shared.div_t @ state.p.coeffs)
    if f_load is not None:
        rhs_u += f_load

    rhs_b = (1.0 / dt) * (shared.mass_v @ state.B.coeffs)
    rhs_b -= (0.5 * shared.gamma_bar - amh) * (shared.stiff_v @ state.B.coeffs)
    if gamma_p != 0.0:
        rhs_b -= gamma_p * (shared.stiff_v @ bt.coeffs)
    rhs_b += 0.5 * (shared.div_t @ state.lam.coeffs)
    if g_load is not None:
        rhs_b += g_load

    rhs_u2 = s * skew_convection_vector(bt, bt) - skew_convection_vector(ut, ut)
    rhs_b2 = skew_convection_vector(bt, ut) - skew_convection_vector(ut, bt)
    cases_u = [(rhs_u, None, dirichlet_values(spaces, prob.dirichlet_u, t_new)),
               (rhs_u2, None, None)]
    cases_b = [(rhs_b, None, dirichlet_values(spaces, prob.dirichlet_B, t_new)),
               (rhs_b2, None, None)]
    return cases_u, cases_b, f_load, g_load


def _cn_finish(shared, state, config, sol_u, sol_b, f_load, g_load):
    """Scalar update on the xi = 1 predictor fields, then the new state."""
    (u_hat, p_hat), (u_sharp, p_sharp) = sol_u
    (b_hat, lam_hat), (b_sharp, lam_sharp) = sol_b
    spaces = shared.spaces
    prob = config.members[state.index]
    dt, s = config.dt, config.s
    t_new = state.t + dt
    params = _energy_params(config, spaces)
    u_bar = u_hat + u_sharp
    b_bar = b_hat + b_sharp
    u_bar_half = 0.5 * (u_bar + state.u)
    b_bar_half = 0.5 * (b_bar + state.B)
    e_bar = shifted_energy(u_bar, b_bar, params)
    e_bar_half = shifted_energy(u_bar_half, b_bar_half, params)
    dissipation = (prob.nu * h1_seminorm(u_bar_half) ** 2
                   + s * prob.gamma * h1_seminorm(b_bar_half) ** 2)
    f_work = float(f_load @ u_bar_half.coeffs) if f_load is not None else 0.0
    g_work = s * float(g_load @ b_bar_half.coeffs) if g_load is not None else 0.0
    # Half-level predictor pressure/multiplier: an older level here feeds a
    # first-order defect into the energy budget and stalls the rates.
    p_bar_half = 0.5 * (p_hat + p_sharp + state.p)
    lam_bar_half = 0.5 * (lam_hat + lam_sharp + state.lam)
    bs = boundary_functional(u_bar_half, b_bar_half, p_bar_half, lam_bar_half,
                             prob.nu, prob.gamma, s)
    s0 = compute_S0(f_work, g_work, bs)

    f_before = config.fg.F(state.scalars.R_int)
    xi = update_xi_cn(state.scalars.R_int, e_bar, dissipation, s0, dt, config.fg)
    r_new = update_R_cn(xi, e_bar, config.fg)

    u_new = u_hat + xi * u_sharp
    p_new = p_hat + xi * p_sharp
    b_new = b_hat + xi * b_sharp
    lam_new = lam_hat + xi * lam_sharp

    new_state = MemberState(
        index=state.index,
        u=u_new, u_prev=state.u, u_prev2=state.u_prev,
        B=b_new, B_prev=state.B, B_prev2=state.B_prev,
        p=p_new, lam=lam_new,
        scalars=ScalarState(R_int=r_new, R_half=state.scalars.R_half, xi=xi),
        t=t_new, step=state.step + 1)
    diag = StepDiagnostics(
        member=state.index, t=t_new, xi=xi,
        F_before=f_before, F_after=config.fg.F(r_new),
        E_bar=e_bar, dissipation=dissipation, S0=s0,
        energy=shifted_energy(u_new, b_new, params) - params.C0,
        div_u=_div_residual(shared, u_new.coeffs),
        div_B=_div_residual(shared, b_new.coeffs),
        E_bar_half=e_bar_half)
    return new_state, diag


def cn_step(shared: SharedOperators, state: MemberState, config: EnsembleConfig):
    """One midpoint step of one member against the shared operators."""
    cases_u, cases_b, f_load, g_load = _cn_rhs(shared, state, config)
    sol_u = shared.velocity_op.solve_batch(cases_u)
    sol_b = shared.magnetic_op.solve_batch(cases_b)
    return _cn_finish(shared, state, config, sol_u, sol_b, f_load, g_load)


def _bdf2_rhs(shared: SharedOperators, state: MemberState, config: EnsembleConfig):
    """Right-hand sides of both sub-problems for one two-step step."""
    spaces = shared.spaces
    prob = config.members[state.index]
    dt, s = config.dt, config.s
    nu_p = prob.nu - shared.nu_bar
    gamma_p = prob.gamma - shared.gamma_bar
    t_new = state.t + dt
    ah = config.alpha * shared.h
    amh = config.alpha_m * shared.h

    ut = 2.0 * state.u - state.u_prev
    bt = 2.0 * state.B - state.B_prev
    f_load, g_load = _forcing_loads(spaces, prob, t_new)

    rhs_u = shared.mass_v @ ((2.0 / dt) * state.u.coeffs - (0.5 / dt) * state.u_prev.coeffs)
    if nu_p != 0.0:
        rhs_u -= nu_p * (shared.stiff_v @ ut.coeffs)
    if ah != 0.0:
        rhs_u += ah * (shared.stiff_v @ (4.0 * state.u.coeffs - state.u_prev.coeffs))
    if f_load is not None:
        rhs_u += f_load

    rhs_b = shared.mass_v @ ((2.0 / dt) * state.B.coeffs - (0.5 / dt) * state.B_prev.coeffs)
    if gamma_p != 0.0:
        rhs_b -= gamma_p * (shared.stiff_v @ bt.coeffs)
    if amh != 0.0:
        rhs_b += amh * (shared.stiff_v @ (4.0 * state.B.coeffs - state.B_prev.coeffs))
    if g_load is not None:
        rhs_b += g_load

    rhs_u2 = s * skew_convection_vector(bt, bt) - skew_convection_vector(ut, ut)
    rhs_b2 = skew_convection_vector(bt, ut) - skew_convection_vector(ut, bt)
    cases_u = [(rhs_u, None, dirichlet_values(spaces, prob.dirichlet_u, t_new)),
               (rhs_u2, None, None)]
    cases_b = [(rhs_b, None, dirichlet_values(spaces, prob.dirichlet_B, t_new)),
               (rhs_b2, None, None)]
    return cases_u, cases_b, f_load, g_load


def _bdf2_finish(shared, state, config, sol_u, sol_b, f_load, g_load):
    (u_hat, p_hat), (u_sharp, p_sharp) = sol_u
    (b_hat, lam_hat), (b_sharp, lam_sharp) = sol_b
    spaces = shared.spaces
    prob = config.members[state.index]
    dt, s = config.dt, config.s
    t_new = state.t + dt
    params = _energy_params(config, spaces)
    u_bar = u_hat + u_sharp
    b_bar = b_hat + b_sharp
    u_bar_3half = 1.5 * u_bar - 0.5 * state.u
    b_bar_3half = 1.5 * b_bar - 0.5 * state.B
    e_3half = shifted_energy(u_bar_3half, b_bar_3half, params)
    dissipation = (prob.nu * h1_seminorm(u_bar) ** 2
                   + s * prob.gamma * h1_seminorm(b_bar) ** 2)
    f_work = float(f_load @ u_bar.coeffs) if f_load is not None else 0.0
    g_work = s * float(g_load @ b_bar.coeffs) if g_load is not None else 0.0
    bs = boundary_functional(u_bar, b_bar, p_hat + p_sharp, lam_hat + lam_sharp,
                             prob.nu, prob.gamma, s)
    s0 = compute_S0(f_work, g_work, bs)

    f_before = config.fg.F(state.scalars.R_half)
    xi = update_xi_bdf2(state.scalars.R_half, e_3half, dissipation, s0, dt, config.fg)
    r_3half, r_int = update_R_bdf2(xi, e_3half, state.scalars.R_int, config.fg)

    u_new = u_hat + xi * u_sharp
    p_new = p_hat + xi * p_sharp
    b_new = b_hat + xi * b_sharp
    lam_new = lam_hat + xi * lam_sharp

    new_state = MemberState(
        index=state.index,
        u=u_new, u_prev=state.u, u_prev2=state.u_prev,
        B=b_new, B_prev=state.B, B_prev2=state.B_prev,
        p=p_new, lam=lam_new,
        scalars=ScalarState(R_int=r_int, R_half=r_3half, xi=xi),
        t=t_new, step=state.step + 1)
    diag = StepDiagnostics(
        member=state.index, t=t_new, xi=xi,
        F_before=f_before, F_after=config.fg.F(r_3half),
        E_bar=e_3half, dissipation=dissipation, S0=s0,
        energy=shifted_energy(u_new, b_new, params) - params.C0,
        div_u=_div_residual(shared, u_new.coeffs),
        div_B=_div_residual(shared, b_new.coeffs))
    return new_state, diag


def bdf2_step(shared: SharedOperators, state: MemberState, config: EnsembleConfig):
    """One two-step (BDF2) step; needs genuine history and R_half."""
    if state.scalars.R_half is None:
        raise InvariantError("two-step scheme stepped without a half-step R; "
                             "bootstrap with one midpoint step first")
    cases_u, cases_b, f_load, g_load = _bdf2_rhs(shared, state, config)
    sol_u = shared.velocity_op.solve_batch(cases_u)
    sol_b = shared.magnetic_op.solve_batch(cases_b)
    return _bdf2_finish(shared, state, config, sol_u, sol_b, f_load, g_load)


def _step_members(shared, states, config, rhs_fn, finish_fn):
    """Advance several members at once: all right-hand sides first, one
    multi-column solve per operator, then the per-member scalar updates.
    Amortizes the triangular-solve traversal across the ensemble."""
    pre = [rhs_fn(shared, st, config) for st in states]
    sol_u = shared.velocity_op.solve_batch([c for p in pre for c in p[0]])
    sol_b = shared.magnetic_op.solve_batch([c for p in pre for c in p[1]])
    out = []
    for j, (st, (_, _, f_load, g_load)) in enumerate(zip(states, pre)):
        try:
            out.append(finish_fn(shared, st, config, sol_u[2 * j:2 * j + 2],
                                 sol_b[2 * j:2 * j + 2], f_load, g_load))
        except (SolverError, InvariantError) as exc:
            raise type(exc)(f"member {st.index}: {exc}") from exc
    return out


def primitive_step(shared: SharedOperators, state: MemberState, config: EnsembleConfig):
    """First-order semi-implicit baseline; coupled solve, refactorized.

    The advecting fields are lagged but the advected fields stay
    implicit, so the velocity and magnetic blocks couple and the matrix
    changes every step.
    """
    spaces = shared.spaces
    prob = config.members[state.index]
    dt, s = config.dt, config.s
    t_new = state.t + dt
    ah = config.alpha * shared.h
    amh = config.alpha_m * shared.h
    n_u, n_p = spaces.n_velocity, spaces.n_scalar

    conv_u = convection_operator(spaces, state.u)
    conv_b = convection_operator(spaces, state.B)
    a_u = (1.0 / dt) * shared.mass_v + (prob.nu + ah) * shared.stiff_v + conv_u
    a_b = (1.0 / dt) * shared.mass_v + (prob.gamma + amh) * shared.stiff_v + conv_u
    mean_row = np.asarray(shared.mass_p.sum(axis=1)).ravel()
    e = sp.coo_matrix((mean_row, (np.arange(n_p), np.zeros(n_p, dtype=int))),
                      shape=(n_p, 1))
    g = shared.div
    system = sp.bmat([
        [a_u, -g.T, -s * conv_b, None, None, None],
        [g, None, None, None, e, None],
        [-conv_b, None, a_b, -g.T, None, None],
        [None, None, g, None, None, e],
        [None, e.T, None, None, None, None],
        [None, None, None, e.T, None, None],
    ], format="csr")

    f_load, g_load = _forcing_loads(spaces, prob, t_new)
    rhs = np.zeros(system.shape[0])
    rhs_u = (1.0 / dt) * (shared.mass_v @ state.u.coeffs)
    if ah != 0.0:
        rhs_u += ah * (shared.stiff_v @ state.u.coeffs)
    if f_load is not None:
        rhs_u += f_load
    rhs_b = (1.0 / dt) * (shared.mass_v @ state.B.coeffs)
    if amh != 0.0:
        rhs_b += amh * (shared.stiff_v @ state.B.coeffs)
    if g_load is not None:
        rhs_b += g_load
    rhs[:n_u] = rhs_u
    rhs[n_u + n_p:2 * n_u + n_p] = rhs_b

    u_vals = dirichlet_values(spaces, prob.dirichlet_u, t_new)[shared.u_dirichlet]
    b_vals = dirichlet_values(spaces, prob.dirichlet_B, t_new)[shared.b_dirichlet]
    dofs = np.concatenate([shared.u_dirichlet, n_u + n_p + shared.b_dirichlet])
    values = np.concatenate([u_vals, b_vals])
    system, rhs = eliminate_dofs(system, rhs, dofs, values)

    try:
        lu = spla.splu(system.tocsc())
    except RuntimeError as exc:
        raise SolverError(f"baseline factorization failed: {exc}") from exc
    _count_factorization()
    x = lu.solve(rhs)

    u_new = Field(spaces, "velocity", x[:n_u])
    p_new = Field(spaces, "scalar", x[n_u:n_u + n_p])
    b_new = Field(spaces, "velocity", x[n_u + n_p:2 * n_u + n_p])
    lam_new = Field(spaces, "scalar", x[2 * n_u + n_p:2 * (n_u + n_p)])

    params = _energy_params(config, spaces)
    new_state = MemberState(
        index=state.index,
        u=u_new, u_prev=state.u, u_prev2=state.u_prev,
        B=b_new, B_prev=state.B, B_prev2=state.B_prev,
        p=p_new, lam=lam_new,
        scalars=state.scalars, t=t_new, step=state.step + 1)
    diag = StepDiagnostics(
        member=state.index, t=t_new, xi=None,
        F_before=None, F_after=None, E_bar=None, dissipation=None, S0=None,
        energy=shifted_energy(u_new, b_new, params) - params.C0,
        div_u=_div_residual(shared, u_new.coeffs),
        div_B=_div_residual(shared, b_new.coeffs))
    return new_state, diag


@dataclass
class RunResult:
    spaces: TaylorHoodSpaces
    states: list
    diagnostics: list  # diagnostics[j] is the per-step list of member j
    params: EnergyParams
    factorizations: int


def run_ensemble(config: EnsembleConfig, mesh: Mesh, *, spaces=None,
                 on_step=None) -> RunResult:
    """Step all members to t_end against shared factorized operators.

    ``on_step(state)`` is called after every accepted member step (and
    once per member at t = 0 with the bootstrap state), so trajectory
    norms can be accumulated without storing whole histories.
    """
    spaces = spaces if spaces is not None else TaylorHoodSpaces(mesh)
    before = factorization_count()

    shared = prepare_shared_operators(config, spaces)
    shared_boot = shared
    if config.scheme == "bdf2":
        shared_boot = prepare_shared_operators(config, spaces, scheme="cn")

    states = [bootstrap(config, spaces, j) for j in range(len(config.members))]
    diagnostics = [[] for _ in states]
    if on_step is not None:
        for st in states:
            on_step(st)

    for _ in range(config.n_steps):
        try:
            if config.scheme == "primitive":
                results = [primitive_step(shared, st, config) for st in states]
            elif config.scheme == "cn":
                results = _step_members(shared, states, config, _cn_rhs, _cn_finish)
            elif states[0].scalars.R_half is None:
                # Launch the two-step scheme with one midpoint step and
                # seed the half-step R from its midpoint-mean energy.
                results = _step_members(shared_boot, states, config,
                                        _cn_rhs, _cn_finish)
                for new_state, diag in results:
                    new_state.scalars.R_half = float(config.fg.G(diag.E_bar_half))
            else:
                results = _step_members(shared, states, config,
                                        _bdf2_rhs, _bdf2_finish)
        except (SolverError, InvariantError) as exc:
            raise type(exc)(f"at t = {states[0].t + config.dt}: {exc}") from exc
        for j, (new_state, diag) in enumerate(results):
            if max(diag.div_u, diag.div_B) > _DIV_GUARD:
                raise InvariantError(
                    f"member {j} at t = {new_state.t}: divergence residual "
                    f"{max(diag.div_u, diag.div_B):.3e} exceeds {_DIV_GUARD:.1e}")
            states[j] = new_state
            diagnostics[j].append(diag)
            if on_step is not None:
                on_step(new_state)

    return RunResult(spaces=spaces, states=states, diagnostics=diagnostics,
                     params=_energy_params(config, spaces),
                     factorizations=factorization_count() - before)
