"""Newton-type drivers: fully coupled Newton-Krylov and the decoupling
inexact Newton with an inner block Gauss-Seidel fixed point.

Both solvers work on the finest level of a Discretization and share the
convention that the nonlinear residual norm is the plain Euclidean norm of
the concatenated (PDE, ODE) residual, without rescaling between the parts.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .assembly import Discretization, SystemState
from .linalg import gmres
from .model import ModelParams
from .multigrid import MGContext


class NewtonError(RuntimeError):
    pass


@dataclass
class NewtonConfig:
    tol_newton: float = 1e-6
    tol_iter: float = 1e-11
    max_iter_fixedpoint: int | None = None   # None = iterate to tol_iter
    max_newton: int = 50
    max_sweeps: int = 1000                   # hard cap for the inner fixed point
    gmres_max: int = 500
    smoother: str = "coupled_s1"             # coupled_s1 | coupled_s2
    smoothing_steps: int = 3

    def __post_init__(self):
        if self.tol_newton <= 0 or self.tol_iter <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_newton < 1:
            raise ValueError("max_newton must be >= 1")


@dataclass
class SolveStats:
    newton_steps: int = 0
    krylov_total: int = 0
    residual_norms: list = field(default_factory=list)
    krylov_per_step: list = field(default_factory=list)
    reduction_rates: list = field(default_factory=list)   # log10 per GMRES iter
    sweeps_per_step: list = field(default_factory=list)
    stagnated: bool = False
    wall_time: float = 0.0

    @property
    def krylov_avg(self) -> float:
        return self.krylov_total / self.newton_steps if self.newton_steps else 0.0

    def check(self):
        assert self.krylov_total == sum(self.krylov_per_step)

    def merge(self, other: "SolveStats") -> None:
        self.newton_steps += other.newton_steps
        self.krylov_total += other.krylov_total
        self.residual_norms.extend(other.residual_norms)
        self.krylov_per_step.extend(other.krylov_per_step)
        self.reduction_rates.extend(other.reduction_rates)
        self.sweeps_per_step.extend(other.sweeps_per_step)
        self.stagnated = self.stagnated or other.stagnated
        self.wall_time += other.wall_time


def _log10_rate(history: list, iters: int) -> float:
    if iters == 0 or history[-1] == 0 or history[0] == 0:
        return float("nan")
    return math.log10(history[0] / history[-1]) / iters


def newton_coupled(disc: Discretization, state: SystemState,
                   params: ModelParams, config: NewtonConfig,
                   k: float | None = None,
                   prev: SystemState | None = None
                   ) -> tuple[SystemState, SolveStats]:
    """Full Newton; each linear system is solved monolithically by GMRES
    preconditioned with the coupled V-cycle."""
    t0 = time.perf_counter()
    stats = SolveStats()
    state = state.copy()
    n_pde = state.u.shape[0]
    for _ in range(config.max_newton + 1):
        res = disc.residual(state, params, k=k, prev=prev).data
        norm = float(np.linalg.norm(res))
        if not np.isfinite(norm):
            raise NewtonError("non-finite Newton residual")
        stats.residual_norms.append(norm)
        if norm <= config.tol_newton:
            stats.wall_time = time.perf_counter() - t0
            return state, stats
        if stats.newton_steps >= config.max_newton:
            break
        mg = MGContext(disc, state, params, config.smoother, k=k,
                       smoothing_steps=config.smoothing_steps)
        K = mg.flat[disc.finest]
        delta, iters, history = gmres(
            lambda x: K @ x, -res, preconditioner=mg.apply,
            rel_tol=config.tol_iter, max_iter=config.gmres_max)
        state.u += delta[:n_pde]
        state.v += delta[n_pde:]
        stats.newton_steps += 1
        stats.krylov_total += iters
        stats.krylov_per_step.append(iters)
        stats.reduction_rates.append(_log10_rate(history, iters))
        stats.sweeps_per_step.append(1)
    raise NewtonError(
        f"coupled Newton did not reach {config.tol_newton} within "
        f"{config.max_newton} steps (residual {stats.residual_norms[-1]:.3e})")


def newton_decoupled(disc: Discretization, state: SystemState,
                     params: ModelParams, config: NewtonConfig,
                     k: float | None = None,
                     prev: SystemState | None = None
                     ) -> tuple[SystemState, SolveStats]:
    """Inexact Newton: the linear system of each Newton step is approximated
    by a fixed point alternating exact per-cell ODE solves with multigrid
    preconditioned GMRES solves of the PDE block.

    The inner loop stops when the residual of the *full* linear system drops
    below tol_iter (relative), or after max_iter_fixedpoint sweeps.
    """
    t0 = time.perf_counter()
    stats = SolveStats()
    state = state.copy()
    n_pde = state.u.shape[0]
    for _ in range(config.max_newton + 1):
        res = disc.residual(state, params, k=k, prev=prev).data
        norm = float(np.linalg.norm(res))
        if not np.isfinite(norm):
            raise NewtonError("non-finite Newton residual")
        stats.residual_norms.append(norm)
        if norm <= config.tol_newton:
            stats.wall_time = time.perf_counter() - t0
            return state, stats
        if stats.newton_steps >= config.max_newton:
            break
        ctx = disc.levels[disc.finest]
        K = disc.jacobian_blocks(disc.finest, state.u,
                                 ctx.surface_average(state.u), state.v_cells,
                                 params, k=k)
        mg = MGContext(disc, state, params, "pde_only", k=k,
                       smoothing_steps=config.smoothing_steps)
        f, g = -res[:n_pde], -res[n_pde:]
        rhs_norm = float(np.linalg.norm(res))
        du = np.zeros(n_pde)
        dv = np.zeros(g.shape[0])
        sweeps = 0
        gmres_iters = 0
        res_hist = []
        max_sweeps = config.max_iter_fixedpoint or config.max_sweeps
        while True:
            dv = K.solve_bvv(g - K.B_vu @ du)
            du, iters, _ = gmres(
                lambda x: K.A_uu @ x, f - K.A_uv @ dv,
                preconditioner=mg.apply, rel_tol=config.tol_iter,
                max_iter=config.gmres_max)
            gmres_iters += iters
            sweeps += 1
            lin_res = np.linalg.norm(np.concatenate([
                K.A_uu @ du + K.A_uv @ dv - f,
                K.B_vu @ du + (K.B_vv @ dv.reshape(-1, 3)[:, :, None])
                [:, :, 0].ravel() - g]))
            res_hist.append(lin_res)
            if lin_res <= config.tol_iter * rhs_norm or sweeps >= max_sweeps:
                break
            # diagnostic only: slow contraction is expected for strong coupling
            if len(res_hist) > 10 and res_hist[-11] > 0 and \
                    res_hist[-1] > 1e-3 * res_hist[-11]:
                stats.stagnated = True
        state.u += du
        state.v += dv
        stats.newton_steps += 1
        stats.krylov_total += gmres_iters
        stats.krylov_per_step.append(gmres_iters)
        stats.sweeps_per_step.append(sweeps)
        stats.reduction_rates.append(float("nan"))
    raise NewtonError(
        f"decoupled Newton did not reach {config.tol_newton} within "
        f"{config.max_newton} steps (residual {stats.residual_norms[-1]:.3e})")


def solve_newton(disc, state, params, config, approach: str,
                 k=None, prev=None):
    if approach == "coupled":
        return newton_coupled(disc, state, params, config, k=k, prev=prev)
    if approach == "decoupled":
        return newton_decoupled(disc, state, params, config, k=k, prev=prev)
    raise ValueError(f"unknown approach {approach!r}")


def pseudo_timestep_globalize(disc: Discretization, initial: SystemState,
                              params: ModelParams, config: NewtonConfig,
                              dt_sequence, approach: str = "coupled"
                              ) -> SystemState:
    """Implicit-Euler pre-steps producing a Newton-convergent start state
    for the stationary solve; an empty sequence returns the input."""
    state = initial.copy()
    for dt in dt_sequence:
        prev = state.copy()
        state, _ = solve_newton(disc, state, params, config, approach,
                                k=float(dt), prev=prev)
    return state
