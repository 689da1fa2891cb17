"""The four benchmark experiments behind the CLI.

convergence: manufactured-solution refinement chains and rate tables.
stability:   zero-forcing decay with large timesteps; asserts the
             modified energy is monotone at every step.
channel:     pulsating flow past a cylinder on the shipped fixture
             mesh; emits field snapshots and energy series.
compare:     accuracy of the plain ensemble schemes against their
             artificial-viscosity stabilized variants on a long-horizon
             manufactured problem.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError, InvariantError
from ..fem import TaylorHoodSpaces, eval_field
from ..mesh import Mesh, generate_unit_square, read_mesh_ascii
from ..stepper import EnsembleConfig, MemberProblem, run_ensemble
from . import manufactured as mf
from .reporting import (
    ErrorReport,
    ErrorRow,
    TrajectoryErrors,
    write_csv,
    write_series,
    write_snapshot,
)

CHANNEL_TAGS = {"inflow": 1, "outflow": 2, "wall": 3, "cylinder": 4}
_FIXTURES = {0.02: "channel_cylinder_h50.msh", 0.01: "channel_cylinder_h100.msh"}


def packaged_channel_mesh(spacing=0.01) -> Mesh:
    """Load a shipped channel-with-cylinder fixture (spacing 0.01 or 0.02)."""
    if spacing not in _FIXTURES:
        raise ConfigurationError(f"no packaged channel mesh with spacing {spacing}")
    ref = importlib.resources.files("mhdens.data") / _FIXTURES[spacing]
    with importlib.resources.as_file(ref) as path:
        return read_mesh_ascii(path)


@dataclass
class RunSpec:
    """Configuration of one benchmark experiment."""

    experiment: str  # convergence | stability | channel | compare
    scheme: str = "cn"
    n: int | None = None  # unit-square subdivisions (coarsest level)
    mesh_file: str | None = None
    dt: float | None = None  # coarsest timestep
    t_end: float | None = None
    eps: tuple = ()
    alpha: float = 0.0
    alpha_m: float = 0.0
    s: float = 1.0
    nu: float | None = None
    gamma: float | None = None
    levels: int = 3
    dts: tuple = ()  # timestep list for stability/compare
    out_dir: str | None = None
    extrapolation: str = "tilde"

    def outdir(self) -> Path | None:
        if self.out_dir is None:
            return None
        p = Path(self.out_dir)
        p.mkdir(parents=True, exist_ok=True)
        return p


def run_convergence(spec: RunSpec) -> ErrorReport:
    """Refinement chain (h, dt) -> (h/2, dt/2) -> ... with per-member
    trajectory norms against the closed-form solution."""
    n0 = spec.n or 10
    dt0 = spec.dt or 1.0 / 8.0
    t_end = spec.t_end or 1.0
    eps = spec.eps or (0.1, -0.1)
    nu0 = spec.nu if spec.nu is not None else 0.5
    gamma0 = spec.gamma if spec.gamma is not None else 0.5
    if spec.scheme not in ("cn", "bdf2"):
        raise ConfigurationError("convergence runs use the cn or bdf2 scheme")

    report = ErrorReport()
    for level in range(spec.levels):
        n = n0 * 2**level
        dt = dt0 / 2**level
        mesh = generate_unit_square(n)
        spaces = TaylorHoodSpaces(mesh)
        members = [mf.convergence_member(e, nu_base=nu0, gamma_base=gamma0, s=spec.s)
                   for e in eps]
        config = EnsembleConfig(members=members, dt=dt, t_end=t_end, s=spec.s,
                                alpha=spec.alpha, alpha_m=spec.alpha_m,
                                scheme=spec.scheme, extrapolation=spec.extrapolation)
        trackers = [TrajectoryErrors(spaces, mf.exact_velocity(e), mf.exact_magnetic(e),
                                     dt, member=j)
                    for j, e in enumerate(eps)]

        def on_step(state):
            trackers[state.index].observe(state)

        run_ensemble(config, mesh, spaces=spaces, on_step=on_step)
        for j, tr in enumerate(trackers):
            report.add(ErrorRow(h=1.0 / n, dt=dt, member=j,
                                err_u_inf0=tr.err_u_inf0, err_gradu_20=tr.err_gradu_20,
                                err_B_inf0=tr.err_B_inf0, err_gradB_20=tr.err_gradB_20))

    out = spec.outdir()
    if out is not None:
        write_csv(report, out / f"convergence_{spec.scheme}.csv")
    return report


def run_stability(spec: RunSpec) -> dict:
    """Zero-forcing decay runs over several timesteps.

    Returns {dt: (times, energy, modified_energy)} for the first member
    and raises InvariantError (with the step index) if the modified
    energy ever increases.
    """
    n = spec.n or 50
    t_end = spec.t_end or 5.0
    nu = spec.nu if spec.nu is not None else 0.1
    gamma = spec.gamma if spec.gamma is not None else 0.1
    eps = spec.eps or (0.1, -0.1)
    dts = spec.dts or (1.0, 0.5, 0.1, 0.02)

    mesh = generate_unit_square(n)
    spaces = TaylorHoodSpaces(mesh)
    out = spec.outdir()
    results = {}
    for dt in dts:
        members = [mf.decay_member(e, nu=nu, gamma=gamma) for e in eps]
        config = EnsembleConfig(members=members, dt=dt, t_end=t_end, s=spec.s,
                                alpha=spec.alpha, alpha_m=spec.alpha_m,
                                scheme=spec.scheme, extrapolation=spec.extrapolation)
        result = run_ensemble(config, mesh, spaces=spaces)
        for j, diags in enumerate(result.diagnostics):
            for k, d in enumerate(diags):
                if d.F_after > d.F_before * (1.0 + 1e-12):
                    raise InvariantError(
                        f"modified energy increased at step {k + 1} (member {j}, "
                        f"dt={dt}): {d.F_before} -> {d.F_after}")
        diags = result.diagnostics[0]
        times = [0.0] + [d.t for d in diags]
        energy = [_bootstrap_energy(config, result, 0)] + [d.energy for d in diags]
        modified = [diags[0].F_before] + [d.F_after for d in diags]
        results[dt] = (times, energy, modified)
        if out is not None:
            label = f"{spec.scheme}_dt{dt:g}"
            write_series(out / f"stability_{label}_energy.dat", zip(times, energy))
            write_series(out / f"stability_{label}_modified.dat", zip(times, modified))
    return results


def _bootstrap_energy(config, result, member):
    from ..fem import interpolate, l2_norm, zero_field

    prob = config.members[member]
    spaces = result.spaces

    def vec(expr):
        return interpolate(expr, 0.0, spaces) if expr is not None else zero_field(spaces)

    u0, b0 = vec(prob.u0), vec(prob.B0)
    return 0.5 * l2_norm(u0) ** 2 + 0.5 * config.s * l2_norm(b0) ** 2


def channel_members(eps, nu, gamma) -> list[MemberProblem]:
    """Two realizations with boundary/initial data scaled by (1 +/- eps)."""
    members = []
    for sign in (+1.0, -1.0):
        scale = 1.0 + sign * eps
        inflow = mf.channel_inflow(scale)
        bfield = mf.channel_magnetic(scale)
        zero = None
        members.append(MemberProblem(
            nu=nu, gamma=gamma,
            dirichlet_u={CHANNEL_TAGS["inflow"]: inflow, CHANNEL_TAGS["outflow"]: inflow,
                         CHANNEL_TAGS["wall"]: zero, CHANNEL_TAGS["cylinder"]: zero},
            dirichlet_B={t: bfield for t in CHANNEL_TAGS.values()},
            u0=None, B0=bfield))
    return members


def run_channel(spec: RunSpec) -> dict:
    """Flow past a cylinder; property assertions plus snapshot emission."""
    if spec.mesh_file:
        mesh = read_mesh_ascii(spec.mesh_file)
    else:
        mesh = packaged_channel_mesh(0.01)
    spaces = TaylorHoodSpaces(mesh)
    nu = spec.nu if spec.nu is not None else 1.0 / 50.0
    gamma = spec.gamma if spec.gamma is not None else 0.1
    s = spec.s if spec.s is not None else 0.01
    dt = spec.dt or 1e-3
    t_end = spec.t_end or 8.8
    eps = spec.eps[0] if spec.eps else 0.1

    if spec.scheme == "primitive":
        members = channel_members(0.0, nu, gamma)[:1]
    else:
        members = channel_members(eps, nu, gamma)
    config = EnsembleConfig(members=members, dt=dt, t_end=t_end, s=s,
                            alpha=spec.alpha, alpha_m=spec.alpha_m,
                            scheme=spec.scheme, h=mesh.spacing,
                            extrapolation=spec.extrapolation)
    result = run_ensemble(config, mesh, spaces=spaces)

    max_div = max(max(d.div_u, d.div_B) for dj in result.diagnostics for d in dj)
    max_energy = max(d.energy for dj in result.diagnostics for d in dj)
    xi_min = min((d.xi for dj in result.diagnostics for d in dj if d.xi is not None),
                 default=1.0)

    out = spec.outdir()
    if out is not None:
        xs = np.linspace(0.0, mf.CHANNEL_LENGTH, 221)
        ys = np.linspace(0.0, mf.CHANNEL_HEIGHT, 42)
        grid = np.array([(x, y) for x in xs for y in ys])
        for j, state in enumerate(result.states):
            uvals = eval_field(state.u, grid)
            bvals = eval_field(state.B, grid)
            inside = ~np.isnan(uvals[:, 0])
            write_snapshot(out / f"channel_{spec.scheme}_member{j + 1}.csv",
                           grid[inside], uvals[inside], bvals[inside])
        for j, diags in enumerate(result.diagnostics):
            write_series(out / f"channel_{spec.scheme}_member{j + 1}_energy.dat",
                         [(d.t, d.energy) for d in diags])
    return {"max_div_residual": max_div, "max_energy": max_energy, "xi_min": xi_min,
            "steps": config.n_steps, "members": len(members)}


def run_compare(spec: RunSpec) -> dict:
    """Plain vs stabilized accuracy table on the long-horizon problem.

    Returns {(h, dt): {column: error}} for the velocity and magnetic
    max-in-time L2 errors of the first member; columns are sav_cn,
    sav_bdf2, stab_cn, stab_bdf2.
    """
    eps = spec.eps or (0.1, 0.2)
    nu0 = spec.nu if spec.nu is not None else 1.0
    gamma0 = spec.gamma if spec.gamma is not None else 0.2
    t_end = spec.t_end or 2.5
    ns = (spec.n,) if spec.n else (25, 100)
    dts = spec.dts or (1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128)
    nu_bar = float(np.mean([nu0 * (1 + e) for e in eps]))
    gamma_bar = float(np.mean([gamma0 * (1 + e) for e in eps]))

    table = {}
    for n in ns:
        mesh = generate_unit_square(n)
        spaces = TaylorHoodSpaces(mesh)
        for dt in dts:
            entry = {}
            for scheme in ("cn", "bdf2"):
                for stab in (False, True):
                    members = [mf.convergence_member(e, nu_base=nu0, gamma_base=gamma0,
                                                     s=spec.s) for e in eps]
                    config = EnsembleConfig(
                        members=members, dt=dt, t_end=t_end, s=spec.s,
                        alpha=nu_bar if stab else 0.0,
                        alpha_m=gamma_bar if stab else 0.0,
                        scheme=scheme, extrapolation=spec.extrapolation)
                    tracker = TrajectoryErrors(spaces, mf.exact_velocity(eps[0]),
                                               mf.exact_magnetic(eps[0]), dt, member=0)
                    run_ensemble(config, mesh, spaces=spaces,
                                 on_step=tracker.observe)
                    name = ("stab_" if stab else "sav_") + scheme
                    entry[name] = {"u": tracker.err_u_inf0, "B": tracker.err_B_inf0}
            table[(1.0 / n, dt)] = entry

    out = spec.outdir()
    if out is not None:
        for comp in ("u", "B"):
            lines = ["h,dt,sav_cn,sav_bdf2,stab_cn,stab_bdf2"]
            for (h, dt), entry in table.items():
                cells = [f"{h:.6g}", f"{dt:.6g}"]
                for name in ("sav_cn", "sav_bdf2", "stab_cn", "stab_bdf2"):
                    cells.append(f"{entry[name][comp]:.6g}")
                lines.append(",".join(cells))
            (out / f"compare_{comp}.csv").write_text("\n".join(lines) + "\n")
    return table
