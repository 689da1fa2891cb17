"""Trajectory error norms, convergence tables, and file emission."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..fem import h1_seminorm, interpolate, l2_norm


class TrajectoryErrors:
    """Running error norms of one member against a closed-form solution.

    Feed every accepted state (including the t = 0 bootstrap state)
    through ``observe``; the max-in-time L2 norms and the discrete
    L2-in-time gradient norms accumulate without storing the history.
    """

    def __init__(self, spaces, exact_u, exact_B, dt, member=0):
        self.spaces = spaces
        self.exact_u = exact_u
        self.exact_B = exact_B
        self.dt = dt
        self.member = member
        self.err_u_inf0 = 0.0
        self.err_B_inf0 = 0.0
        self._gradu_sq = 0.0
        self._gradB_sq = 0.0

    def observe(self, state):
        if state.index != self.member:
            return
        du = interpolate(self.exact_u, state.t, self.spaces) - state.u
        db = interpolate(self.exact_B, state.t, self.spaces) - state.B
        self.err_u_inf0 = max(self.err_u_inf0, l2_norm(du))
        self.err_B_inf0 = max(self.err_B_inf0, l2_norm(db))
        if state.step > 0:  # right-endpoint rule over (0, T]
            self._gradu_sq += self.dt * h1_seminorm(du) ** 2
            self._gradB_sq += self.dt * h1_seminorm(db) ** 2

    @property
    def err_gradu_20(self):
        return float(np.sqrt(self._gradu_sq))

    @property
    def err_gradB_20(self):
        return float(np.sqrt(self._gradB_sq))


@dataclass
class ErrorRow:
    h: float
    dt: float
    member: int
    err_u_inf0: float
    err_gradu_20: float
    err_B_inf0: float
    err_gradB_20: float


_NORMS = ("err_u_inf0", "err_gradu_20", "err_B_inf0", "err_gradB_20")


@dataclass
class ErrorReport:
    """Refinement-chain rows plus observed rates between them.

    Rates compare consecutive rows of the same member, assuming both h
    and dt halve between rows: rate = log2(coarse / fine).
    """

    rows: list = field(default_factory=list)

    def add(self, row: ErrorRow):
        self.rows.append(row)

    def rates(self, member: int) -> list[dict]:
        """Per-row rate dicts for one member; first row has no rates."""
        chain = [r for r in self.rows if r.member == member]
        out = [dict.fromkeys(_NORMS)]
        for prev, cur in zip(chain, chain[1:]):
            out.append({n: float(np.log2(getattr(prev, n) / getattr(cur, n)))
                        for n in _NORMS})
        return out

    def members(self):
        return sorted({r.member for r in self.rows})


def _sig(x):
    return "" if x is None else f"{x:.6g}"


def write_csv(report: ErrorReport, path) -> None:
    """Emit the convergence table: one row per (level, member), rates
    blank on the first row of each member's refinement chain."""
    header = ("h,dt,member,err_u_inf0,rate,err_gradu_20,rate,"
              "err_B_inf0,rate,err_gradB_20,rate")
    lines = [header]
    rate_maps = {m: report.rates(m) for m in report.members()}
    position = dict.fromkeys(report.members(), 0)
    for row in report.rows:
        rates = rate_maps[row.member][position[row.member]]
        position[row.member] += 1
        cells = [_sig(row.h), _sig(row.dt), str(row.member + 1)]
        for name in _NORMS:
            cells.append(_sig(getattr(row, name)))
            cells.append(_sig(rates[name]))
        lines.append(",".join(cells))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def write_series(path, pairs) -> None:
    """Two-column whitespace-separated data file (e.g. time vs energy)."""
    with open(path, "w") as f:
        for t, v in pairs:
            f.write(f"{t:.10g} {v:.10g}\n")


def write_snapshot(path, points, velocity, magnetic) -> None:
    """Point-sampled field snapshot: x,y,u1,u2,B1,B2 rows (CSV)."""
    with open(path, "w") as f:
        f.write("x,y,u1,u2,B1,B2\n")
        for (x, y), u, b in zip(points, velocity, magnetic):
            f.write(f"{x:.6g},{y:.6g},{u[0]:.6g},{u[1]:.6g},{b[0]:.6g},{b[1]:.6g}\n")
