"""Taylor-Hood finite element machinery."""

from .assemble import (
    apply_dirichlet,
    assemble_divergence,
    assemble_mass,
    assemble_stiffness,
    boundary_functional,
    convection_operator,
    dirichlet_values,
    eliminate_dofs,
    eval_field,
    h1_seminorm,
    interpolate,
    l2_inner,
    l2_norm,
    load_vector,
    locate_points,
    skew_convection_vector,
    trilinear_scalar,
)
from .spaces import Field, TaylorHoodSpaces, zero_field

__all__ = [
    "Field",
    "TaylorHoodSpaces",
    "zero_field",
    "apply_dirichlet",
    "assemble_divergence",
    "assemble_mass",
    "assemble_stiffness",
    "boundary_functional",
    "convection_operator",
    "dirichlet_values",
    "eliminate_dofs",
    "eval_field",
    "h1_seminorm",
    "interpolate",
    "l2_inner",
    "l2_norm",
    "load_vector",
    "locate_points",
    "skew_convection_vector",
    "trilinear_scalar",
]
