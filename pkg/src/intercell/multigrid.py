"""Geometric multigrid V-cycle used as preconditioner.

Three modes:

* ``coupled_s1`` -- level matrices are the full coupled blocks; smoother is
  Richardson with an ILU(0) of the whole flattened matrix.
* ``coupled_s2`` -- block Gauss-Seidel sweeps: approximate PDE solve via
  ILU(0) of the PDE block with the ODE values frozen, then exact 3x3 dense
  solves of the ODE block with the updated PDE values.
* ``pde_only`` -- the cycle acts on the PDE block alone (decoupling solver).

Transfers act on the PDE part through the Q1 embedding (prolongation) and
its transpose (restriction); the ODE part is copied unchanged.  The coarsest
level is solved directly (dense LU).  Coarse-level coupling blocks are built
with the surface averages and ODE values taken from the finest level, so the
ODE block is identical on all levels.
"""

from __future__ import annotations

import numpy as np

from .assembly import Discretization, SystemState
from .linalg import ILU0, CoupledMatrix, DenseLU, ilu0
from .model import ModelParams

MODES = ("coupled_s1", "coupled_s2", "pde_only")


class MGContext:
    """Per-level matrices, smoother factorizations and transfer maps."""

    def __init__(self, disc: Discretization, state: SystemState,
                 params: ModelParams, mode: str, k: float | None = None,
                 smoothing_steps: int = 3):
        if mode not in MODES:
            raise ValueError(f"unknown multigrid mode {mode!r}")
        if state.level != disc.finest:
            raise ValueError("multigrid context must be built at the finest level")
        self.disc = disc
        self.mode = mode
        self.smoothing_steps = smoothing_steps
        self.n_levels = disc.finest + 1
        self.n_ode = 3 * disc.hierarchy.n_cells
        self.prolongations = disc.hierarchy.prolongations

        ctx_fine = disc.levels[disc.finest]
        u_tilde = ctx_fine.surface_average(state.u)
        v_cells = state.v_cells

        self.matrices: list[CoupledMatrix] = []
        self.flat = []            # flattened CSR per level (coupled modes)
        self.smoothers: list[ILU0 | None] = []
        u = state.u
        per_level_u = [None] * self.n_levels
        per_level_u[disc.finest] = u
        for l in range(disc.finest - 1, -1, -1):
            per_level_u[l] = disc.hierarchy.fine_to_coarse_injection(
                per_level_u[l + 1], l + 1, l)
        for l in range(self.n_levels):
            K = disc.jacobian_blocks(l, per_level_u[l], u_tilde, v_cells,
                                     params, k=k)
            self.matrices.append(K)
            self.flat.append(K.flatten() if mode != "pde_only" else None)

        for l in range(self.n_levels):
            if l == 0:
                self.smoothers.append(None)
                continue
            if mode == "coupled_s1":
                self.smoothers.append(ilu0(self.flat[l]))
            else:
                self.smoothers.append(ilu0(self.matrices[l].A_uu))

        if mode == "pde_only":
            self.coarse = DenseLU(self.matrices[0].A_uu.toarray())
        else:
            self.coarse = DenseLU(self.flat[0].toarray())

    # -- vector splitting ---------------------------------------------------

    def _npde(self, level: int) -> int:
        return self.matrices[level].n_pde

    def _restrict(self, r: np.ndarray, level: int) -> np.ndarray:
        P = self.prolongations[level - 1]
        if self.mode == "pde_only":
            return P.T @ r
        n = self._npde(level)
        return np.concatenate([P.T @ r[:n], r[n:]])

    def _prolong(self, e: np.ndarray, level: int) -> np.ndarray:
        P = self.prolongations[level - 1]
        if self.mode == "pde_only":
            return P @ e
        n = self._npde(level - 1)
        return np.concatenate([P @ e[:n], e[n:]])

    def _matvec(self, level: int, x: np.ndarray) -> np.ndarray:
        if self.mode == "pde_only":
            return self.matrices[level].A_uu @ x
        return self.flat[level] @ x

    # -- smoothing ----------------------------------------------------------

    def _smooth(self, level: int, x: np.ndarray, b: np.ndarray,
                steps: int) -> np.ndarray:
        K = self.matrices[level]
        ilu = self.smoothers[level]
        if self.mode in ("coupled_s1", "pde_only"):
            for _ in range(steps):
                x = x + ilu.solve(b - self._matvec(level, x))
        else:   # coupled_s2 block Gauss-Seidel
            n = K.n_pde
            bu, bv = b[:n], b[n:]
            xu, xv = x[:n].copy(), x[n:].copy()
            for _ in range(steps):
                xu += ilu.solve(bu - K.A_uu @ xu - K.A_uv @ xv)
                xv = K.solve_bvv(bv - K.B_vu @ xu)
            x = np.concatenate([xu, xv])
        if not np.all(np.isfinite(x)):
            raise FloatingPointError("non-finite iterate in smoother")
        return x

    # -- V-cycle ------------------------------------------------------------

    def _vcycle(self, level: int, b: np.ndarray) -> np.ndarray:
        if level == 0:
            return self.coarse.solve(b)
        x = self._smooth(level, np.zeros_like(b), b, self.smoothing_steps)
        r = b - self._matvec(level, x)
        e = self._vcycle(level - 1, self._restrict(r, level))
        x = x + self._prolong(e, level)
        return self._smooth(level, x, b, self.smoothing_steps)

    def vcycle(self, b: np.ndarray) -> np.ndarray:
        """One V-cycle on the finest level; linear in b."""
        return self._vcycle(self.n_levels - 1, b)

    def apply(self, r: np.ndarray) -> np.ndarray:
        """Preconditioner application; in pde_only mode a full-length vector
        has its ODE tail passed through unchanged."""
        if self.mode == "pde_only" and r.shape[0] == \
                self._npde(self.n_levels - 1) + self.n_ode:
            n = self._npde(self.n_levels - 1)
            return np.concatenate([self.vcycle(r[:n]), r[n:]])
        return self.vcycle(r)


def build_level_matrices(disc: Discretization, state: SystemState,
                         params: ModelParams, mode: str,
                         k: float | None = None,
                         smoothing_steps: int = 3) -> MGContext:
    return MGContext(disc, state, params, mode, k=k,
                     smoothing_steps=smoothing_steps)
