"""Iterative solvers for nonlinear Biot poroelasticity.

Newton and L-scheme linearisations, each monolithic or split, for the
three-field (displacement, flux, pressure) formulation on triangles with
P1 / RT0 / P0 elements, in both small- and large-deformation regimes.
"""
from .assembly import BiotProblem, DirichletData, DiscreteState, LinearizationParams, Regime
from .femspace import SpaceTriple
from .kinematics import ElementInversion
from .mesh import BoundaryTag, Mesh, refine, unit_square_mesh
from .model import MaterialParams, NonlinearityModel, linear_model, table1_case
from .schemes import (
    ConvergenceHistory,
    SchemeConfig,
    SchemeKind,
    Status,
    fit_convergence_order,
    recommended_Ls,
    run_transient,
    solve_time_step,
)

__version__ = "0.1.0"

__all__ = [
    "BiotProblem", "BoundaryTag", "ConvergenceHistory", "DirichletData", "DiscreteState",
    "ElementInversion", "LinearizationParams", "MaterialParams", "Mesh", "NonlinearityModel",
    "Regime", "SchemeConfig", "SchemeKind", "SpaceTriple", "Status", "fit_convergence_order",
    "linear_model", "recommended_Ls", "refine", "run_transient", "solve_time_step",
    "table1_case", "unit_square_mesh",
]
