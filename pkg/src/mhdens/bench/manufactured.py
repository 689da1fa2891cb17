"""Closed-form test solutions, forcings, and a residual oracle.

The convergence problem uses the exact fields

    u = (y^5 + t^2, x^5 + t^2) * (1 + eps)
    p = 10 (2x - 1)(2y - 1)(1 + t^2) * (1 + eps)
    B = (sin(pi y) + t^2, sin(pi x) + t^2) * (1 + eps)

on the unit square, with per-member viscosity/resistivity scaled by the
same (1 + eps). Forcings were derived by substituting these fields into
the momentum and induction equations (with zero magnetic multiplier)
and are hard-coded below; ``momentum_residual``/``induction_residual``
re-check the derivation numerically with finite differences, which the
test suite asserts at random sample points.
"""

from __future__ import annotations

import numpy as np

from ..stepper import MemberProblem

PI = np.pi


def exact_velocity(eps):
    c = 1.0 + eps

    def u(x, y, t):
        return np.stack([c * (y**5 + t**2), c * (x**5 + t**2)])

    return u


def exact_pressure(eps):
    c = 1.0 + eps

    def p(x, y, t):
        return 10.0 * c * (2.0 * x - 1.0) * (2.0 * y - 1.0) * (1.0 + t**2)

    return p


def exact_magnetic(eps):
    c = 1.0 + eps

    def b(x, y, t):
        return np.stack([c * (np.sin(PI * y) + t**2), c * (np.sin(PI * x) + t**2)])

    return b


def momentum_forcing(eps, nu, s):
    """f = u_t + (u . grad) u - s (B . grad) B - nu lap u + grad p."""
    c = 1.0 + eps

    def f(x, y, t):
        t2 = t**2
        f1 = (2.0 * c * t
              + 5.0 * c * c * y**4 * (x**5 + t2)
              - s * c * c * PI * np.cos(PI * y) * (np.sin(PI * x) + t2)
              - 20.0 * nu * c * y**3
              + 20.0 * c * (2.0 * y - 1.0) * (1.0 + t2))
        f2 = (2.0 * c * t
              + 5.0 * c * c * x**4 * (y**5 + t2)
              - s * c * c * PI * np.cos(PI * x) * (np.sin(PI * y) + t2)
              - 20.0 * nu * c * x**3
              + 20.0 * c * (2.0 * x - 1.0) * (1.0 + t2))
        return np.stack([f1, f2])

    return f


def induction_forcing(eps, gamma):
    """curl g = B_t + (u . grad) B - (B . grad) u - gamma lap B."""
    c = 1.0 + eps

    def g(x, y, t):
        t2 = t**2
        g1 = (2.0 * c * t
              + c * c * PI * (x**5 + t2) * np.cos(PI * y)
              - 5.0 * c * c * y**4 * (np.sin(PI * x) + t2)
              + gamma * c * PI**2 * np.sin(PI * y))
        g2 = (2.0 * c * t
              + c * c * PI * (y**5 + t2) * np.cos(PI * x)
              - 5.0 * c * c * x**4 * (np.sin(PI * y) + t2)
              + gamma * c * PI**2 * np.sin(PI * x))
        return np.stack([g1, g2])

    return g


def convergence_member(eps, nu_base=0.5, gamma_base=0.5, s=1.0, wall_tag=1) -> MemberProblem:
    """One ensemble realization of the convergence problem.

    nu and gamma are nu_base * (1 + eps) and gamma_base * (1 + eps);
    boundary data is the exact solution (inhomogeneous Dirichlet).
    """
    nu = nu_base * (1.0 + eps)
    gamma = gamma_base * (1.0 + eps)
    u, b = exact_velocity(eps), exact_magnetic(eps)
    return MemberProblem(
        nu=nu, gamma=gamma,
        forcing=momentum_forcing(eps, nu, s),
        curl_forcing=induction_forcing(eps, gamma),
        dirichlet_u={wall_tag: u},
        dirichlet_B={wall_tag: b},
        u0=u, B0=b,
        p0=exact_pressure(eps))


# -- decay test data -----------------------------------------------------


def decay_velocity(eps):
    """Divergence-free initial velocity vanishing on the boundary."""
    c = 1.0 + eps

    def u0(x, y, t):
        u1 = c * x**2 * (x - 1.0)**2 * y * (y - 1.0) * (2.0 * y - 1.0)
        u2 = -c * y**2 * (y - 1.0)**2 * x * (x - 1.0) * (2.0 * x - 1.0)
        return np.stack([u1, u2])

    return u0


def decay_magnetic(eps):
    """Initial magnetic field; the perturbation scales the first component."""
    c = 1.0 + eps

    def b0(x, y, t):
        return np.stack([c * np.sin(PI * x) * np.cos(PI * y),
                         -np.sin(PI * y) * np.cos(PI * x)])

    return b0


def decay_member(eps, nu, gamma, wall_tag=1) -> MemberProblem:
    """Zero forcing, homogeneous walls: energy must decay monotonically."""
    return MemberProblem(
        nu=nu, gamma=gamma,
        dirichlet_u={wall_tag: None},
        dirichlet_B={wall_tag: None},
        u0=decay_velocity(eps), B0=decay_magnetic(eps))


# -- channel data --------------------------------------------------------

CHANNEL_HEIGHT = 0.41
CHANNEL_LENGTH = 2.2


def channel_inflow(scale=1.0):
    """Pulsating parabolic profile on inflow and outflow."""

    def u(x, y, t):
        prof = scale * 6.0 * y * (CHANNEL_HEIGHT - y) / CHANNEL_HEIGHT**2 \
            * np.sin(PI * t / 16.0)
        return np.stack([prof, np.zeros_like(prof)])

    return u


def channel_magnetic(scale=1.0):
    def b(x, y, t):
        z = np.zeros_like(np.asarray(x, dtype=float))
        return np.stack([z, z + 0.1 * scale])

    return b


# -- finite-difference residual oracle ------------------------------------


def _fd(func, x, y, t, axis, step=1e-3):
    """Fourth-order central difference along x (axis 0) or y (axis 1)."""
    def at(d):
        if axis == 0:
            return np.asarray(func(x + d, y, t), dtype=float)
        return np.asarray(func(x, y + d, t), dtype=float)

    return (-at(2 * step) + 8 * at(step) - 8 * at(-step) + at(-2 * step)) / (12 * step)


def _fd_t(func, x, y, t, step=1e-3):
    def at(d):
        return np.asarray(func(x, y, t + d), dtype=float)

    return (-at(2 * step) + 8 * at(step) - 8 * at(-step) + at(-2 * step)) / (12 * step)


def _laplacian(func, x, y, t, step=1e-3):
    def at(dx, dy):
        return np.asarray(func(x + dx, y + dy, t), dtype=float)

    def second(axis):
        if axis == 0:
            return (-at(2 * step, 0) + 16 * at(step, 0) - 30 * at(0, 0)
                    + 16 * at(-step, 0) - at(-2 * step, 0)) / (12 * step**2)
        return (-at(0, 2 * step) + 16 * at(0, step) - 30 * at(0, 0)
                + 16 * at(0, -step) - at(0, -2 * step)) / (12 * step**2)

    return second(0) + second(1)


def momentum_residual(u, p, b, f, nu, s, x, y, t):
    """u_t + (u.grad)u - s (B.grad)B - nu lap u + grad p - f, via FD."""
    uv = np.asarray(u(x, y, t), dtype=float)
    bv = np.asarray(b(x, y, t), dtype=float)
    ux, uy = _fd(u, x, y, t, 0), _fd(u, x, y, t, 1)
    bx, by = _fd(b, x, y, t, 0), _fd(b, x, y, t, 1)
    conv = uv[0] * ux + uv[1] * uy
    mag = bv[0] * bx + bv[1] * by
    grad_p = np.stack([_fd(p, x, y, t, 0), _fd(p, x, y, t, 1)])
    return (_fd_t(u, x, y, t) + conv - s * mag - nu * _laplacian(u, x, y, t)
            + grad_p - np.asarray(f(x, y, t), dtype=float))


def induction_residual(u, b, g, gamma, x, y, t):
    """B_t + (u.grad)B - (B.grad)u - gamma lap B - curl g, via FD."""
    uv = np.asarray(u(x, y, t), dtype=float)
    bv = np.asarray(b(x, y, t), dtype=float)
    ux, uy = _fd(u, x, y, t, 0), _fd(u, x, y, t, 1)
    bx, by = _fd(b, x, y, t, 0), _fd(b, x, y, t, 1)
    conv = uv[0] * bx + uv[1] * by
    stretch = bv[0] * ux + bv[1] * uy
    return (_fd_t(b, x, y, t) + conv - stretch - gamma * _laplacian(b, x, y, t)
            - np.asarray(g(x, y, t), dtype=float))
