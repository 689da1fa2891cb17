"""Auxiliary-scalar machinery: shifted energy, the F/G pair, and the
xi and R update rules for both time discretizations.

The auxiliary scalar R tracks the shifted energy through an invertible
increasing pair F, G = F^{-1}; the computed ratio xi multiplies the
explicit nonlinear terms and is provably positive, so nonpositive
values raise rather than being clamped: they signal a bug, not data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvariantError
from .fem import l2_norm
from .fem.spaces import Field


@dataclass(frozen=True)
class EnergyParams:
    """Coupling number s and strictly positive energy shift C0."""

    s: float
    C0: float

    def __post_init__(self):
        if not self.C0 > 0:
            raise ValueError("energy shift C0 must be strictly positive")


def default_energy_shift(domain_area: float) -> float:
    """Default C0: tiny relative to the domain so it is unit-independent."""
    return 1e-8 * domain_area


@dataclass(frozen=True)
class FGPair:
    """Invertible increasing pair with F, G positive on (0, inf).

    Defaults to F(x) = x^2, G(x) = sqrt(x), the choice used in all the
    shipped experiments (it also removes the positivity precondition on
    the half-step start value of the BDF2 scheme).
    """

    F: Callable[[float], float] = lambda x: x * x
    G: Callable[[float], float] = np.sqrt

    def __post_init__(self):
        for x in (1e-6, 1e-2, 1.0, 1e3, 1e6):
            if not (self.F(x) > 0 and self.G(x) > 0):
                raise ValueError(f"F and G must be positive on (0, inf); failed at {x}")
            y = self.G(self.F(x))
            if abs(y - x) > 1e-12 * max(1.0, abs(x)):
                raise ValueError(f"G(F({x})) = {y}, not an inverse pair")
        if not self.F(2.0) > self.F(1.0):
            raise ValueError("F must be increasing")


@dataclass
class ScalarState:
    """Per-realization auxiliary scalars.

    R_int is the integer-step value; R_half the most recent half-step
    value (only the three-level scheme uses it); xi the latest ratio.
    """

    R_int: float
    R_half: float | None = None
    xi: float = 1.0


def shifted_energy(u: Field, B: Field, params: EnergyParams) -> float:
    """E = ||u||^2 / 2 + s ||B||^2 / 2 + C0, using mass-matrix norms."""
    return 0.5 * l2_norm(u) ** 2 + 0.5 * params.s * l2_norm(B) ** 2 + params.C0


def compute_S0(f_work: float, g_work: float, bs: float) -> float:
    """Source functional: body-force work, curl-force work, boundary flux."""
    return f_work + g_work + bs


def update_xi_cn(R_n: float, E_bar: float, dissipation: float, S0: float,
                 dt: float, fg: FGPair) -> float:
    """Ratio update for the midpoint scheme.

    xi = (F(R^n) + |S0| dt) / (E_bar + dt * dissipation + dt (|S0| - S0)).
    """
    if not E_bar > 0:
        raise InvariantError(f"shifted energy {E_bar} must be positive")
    if dissipation < 0 or dt <= 0:
        raise InvariantError("need dissipation >= 0 and dt > 0")
    xi = (fg.F(R_n) + abs(S0) * dt) / (E_bar + dt * dissipation + dt * (abs(S0) - S0))
    if not xi > 0:
        raise InvariantError(f"xi = {xi} is not positive")
    return xi


def update_R_cn(xi: float, E_bar: float, fg: FGPair) -> float:
    """R^{n+1} = G(xi * E_bar)."""
    if not (xi > 0 and E_bar > 0):
        raise InvariantError(f"need xi, E > 0; got xi={xi}, E={E_bar}")
    return float(fg.G(xi * E_bar))


def update_xi_bdf2(R_half: float, E_bar_3half: float, dissipation: float,
                   S0: float, dt: float, fg: FGPair) -> float:
    """Ratio update for the two-step scheme, on half-step R values."""
    return update_xi_cn(R_half, E_bar_3half, dissipation, S0, dt, fg)


def update_R_bdf2(xi: float, E_bar_3half: float, R_n: float, fg: FGPair):
    """Half-step and integer-step R updates for the two-step scheme.

    R^{n+3/2} = G(xi * E), R^{n+1} = (2/3) R^{n+3/2} + (1/3) R^n.
    """
    if not (xi > 0 and E_bar_3half > 0 and R_n > 0):
        raise InvariantError(f"need positive inputs; got xi={xi}, "
                             f"E={E_bar_3half}, R_n={R_n}")
    r_3half = float(fg.G(xi * E_bar_3half))
    r_next = (2.0 / 3.0) * r_3half + (1.0 / 3.0) * R_n
    return r_3half, r_next
