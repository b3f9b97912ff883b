"""Finite volume solver for the collision-induced breakage equation."""

from .diagnostics import NormParams, bound_P, bound_Pstar, log_bound_Pstar, moment, weighted_norm
from .kernels import (
    BreakageKernel,
    CollisionKernel,
    cell_avg_K,
    eval_K,
    mass_weighted_integral,
    partial_breakage_integral,
    verify_H2,
)
from .mesh import Mesh, build_custom, build_geometric, build_uniform
from .scheme import (
    SchemeTables,
    State,
    Trajectory,
    birth,
    build_tables,
    death,
    rates,
    simulate,
    stable_dt,
    step,
)

__version__ = "0.1.0"
