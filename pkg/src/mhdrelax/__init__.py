"""Pseudo-spectral magnetic relaxation on the 2D torus.

A Stokes-slaved induction solver (velocity recovered from the magnetic field
by an exact spectral Stokes solve, field advanced by integrating-factor RK4)
together with a verification suite for the functional-analysis estimates the
scheme relies on: weak-L^p quasinorms, interpolation and Bernstein-type
inequalities, Green's-tensor bounds, and discrete energy ledgers.
"""

from .fields import (
    FlowState,
    SobolevIndex,
    SpectralField,
    TorusGrid,
    VectorField,
    advective_term,
    dealiased_product,
    divergence,
    from_physical,
    gradient,
    init_field,
    l2_inner,
    laplacian,
    leray_project,
    lp_norm,
    perp_gradient,
    sobolev_norm,
    to_physical,
)

__version__ = "0.1.0"

__all__ = [
    "TorusGrid",
    "SpectralField",
    "VectorField",
    "SobolevIndex",
    "FlowState",
    "to_physical",
    "from_physical",
    "gradient",
    "divergence",
    "laplacian",
    "perp_gradient",
    "leray_project",
    "sobolev_norm",
    "l2_inner",
    "lp_norm",
    "dealiased_product",
    "advective_term",
    "init_field",
    "__version__",
]
