"""Quadrature rules on the reference triangle and on edges.

Reference triangle is {(x, y): x, y >= 0, x + y <= 1}. Triangle weights
sum to the reference area 1/2, so a physical-cell integral is
``detJ * sum(w_q * f(x_q))``.
"""

import numpy as np

_SQRT15 = np.sqrt(15.0)

# 7-point rule, exact for polynomials of total degree 5.
_A1 = (6.0 + _SQRT15) / 21.0
_A2 = (6.0 - _SQRT15) / 21.0
_W1 = (155.0 + _SQRT15) / 1200.0
_W2 = (155.0 - _SQRT15) / 1200.0
_TRI_5_POINTS = np.array([
    [1.0 / 3.0, 1.0 / 3.0],
    [_A1, _A1], [_A1, 1.0 - 2.0 * _A1], [1.0 - 2.0 * _A1, _A1],
    [_A2, _A2], [_A2, 1.0 - 2.0 * _A2], [1.0 - 2.0 * _A2, _A2],
])
_TRI_5_WEIGHTS = np.array([9.0 / 40.0, _W1, _W1, _W1, _W2, _W2, _W2])

# 12-point rule, exact for polynomials of total degree 6.
_B1 = 0.063089014491502
_B2 = 0.249286745170910
_C1 = 0.053145049844816
_C2 = 0.310352451033785
_WB1 = 0.050844906370207
_WB2 = 0.116786275726379
_WC = 0.082851075618374
_TRI_6_POINTS = np.array([
    [_B1, _B1], [1.0 - 2.0 * _B1, _B1], [_B1, 1.0 - 2.0 * _B1],
    [_B2, _B2], [1.0 - 2.0 * _B2, _B2], [_B2, 1.0 - 2.0 * _B2],
    [_C1, _C2], [_C2, _C1],
    [1.0 - _C1 - _C2, _C1], [_C1, 1.0 - _C1 - _C2],
    [1.0 - _C1 - _C2, _C2], [_C2, 1.0 - _C1 - _C2],
])
_TRI_6_WEIGHTS = np.array([_WB1] * 3 + [_WB2] * 3 + [_WC] * 6)


def triangle_rule(order: int):
    """Return (points (Q,2), weights (Q,)) exact for the given degree.

    Weights sum to 1/2 (reference-triangle area).
    """
    if order <= 5:
        return _TRI_5_POINTS.copy(), 0.5 * _TRI_5_WEIGHTS
    if order == 6:
        return _TRI_6_POINTS.copy(), 0.5 * _TRI_6_WEIGHTS
    raise ValueError(f"no triangle rule of order {order}")


def edge_rule(npoints: int):
    """Gauss-Legendre rule on [0, 1]: (points (n,), weights (n,))."""
    x, w = np.polynomial.legendre.leggauss(npoints)
    return 0.5 * (x + 1.0), 0.5 * w
