"""Solver for reaction-diffusion fields coupled on interior cell surfaces to
per-cell receptor dynamics, with monolithic (coupled) and partitioned
(decoupled) Newton variants, a geometric multigrid preconditioner, and a
sensitivity-based coupling-strength analysis.
"""

from .assembly import Discretization, SystemState
from .driver import (RunConfig, StationaryResult, Trajectory, build_problem,
                     flux_balance, run_comparison, run_stationary,
                     run_transient)
from .mesh import MeshConfig, MeshHierarchy, build_hierarchy
from .model import ALPHA, ModelParams, select_secreting
from .multigrid import MGContext
from .newton import (NewtonConfig, SolveStats, newton_coupled,
                     newton_decoupled, pseudo_timestep_globalize,
                     solve_newton)
from .sensitivity import (CouplingReport, coupling_strength,
                          dense_fixed_point_product, ode_sensitivities,
                          pde_sensitivities)

__all__ = [
    "ALPHA", "CouplingReport", "Discretization", "MGContext", "MeshConfig",
    "MeshHierarchy", "ModelParams", "NewtonConfig", "RunConfig", "SolveStats",
    "StationaryResult", "SystemState", "Trajectory", "build_hierarchy",
    "build_problem", "coupling_strength", "dense_fixed_point_product",
    "flux_balance", "newton_coupled", "newton_decoupled", "ode_sensitivities",
    "pde_sensitivities", "pseudo_timestep_globalize", "run_comparison",
    "run_stationary", "run_transient", "select_secreting", "solve_newton",
]
