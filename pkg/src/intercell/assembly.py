"""Q1 finite element assembly of the coupled residual and Jacobian.

The fully discrete system per implicit-Euler step with step size k:

    M (u - u_prev) + k (mu K u + k_d M u) - k * sum_i surf_i(u, v_i) = 0
    v - v_prev - k * rhs(u_tilde, v) = 0

where surf_i is the weak boundary-flux term of cell i and rhs the receptor
dynamics (model.ode_rhs_many).  The stationary form drops the mass/previous
terms and the factor k.  Quadrature: 2x2x2 Gauss per hexahedron, 2x2 per
boundary face; exact for all Q1 x Q1 products on the cubic elements used
here.  The mass matrix is consistent, and the nonlinear boundary term is
assembled with u evaluated pointwise at the face quadrature points.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .linalg import CoupledMatrix, PartitionedVector
from .mesh import FACE_VERTICES, HexMesh, MeshHierarchy
from .model import ModelParams, ode_jacobian_many, ode_rhs_many


@dataclass
class SystemState:
    """Unknowns on one level: nodal PDE values plus per-cell ODE triplets."""

    u: np.ndarray        # (n_pde,), nM
    v: np.ndarray        # (3 * n_cells,), molecules/cell, (R, C, E) per cell
    level: int = 0

    def copy(self) -> "SystemState":
        return SystemState(self.u.copy(), self.v.copy(), self.level)

    @property
    def v_cells(self) -> np.ndarray:
        return self.v.reshape(-1, 3)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.u, self.v])

    def is_nonnegative(self) -> bool:
        """Diagnostic only; never enforced by the solvers."""
        return bool(np.all(self.u >= 0) and np.all(self.v >= 0))


@dataclass
class AssembledSystem:
    residual: PartitionedVector
    matrix: CoupledMatrix


@lru_cache(maxsize=1)
def _unit_element_matrices():
    """Mass/stiffness of the trilinear element on the unit cube (2^3 Gauss)."""
    gp = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
    M = np.zeros((8, 8))
    K = np.zeros((8, 8))
    corners = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
                        [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]])
    for x in gp:
        for y in gp:
            for z in gp:
                pt = np.array([x, y, z])
                N = np.ones(8)
                dN = np.zeros((8, 3))
                for a in range(8):
                    f = np.where(corners[a] == 1, pt, 1.0 - pt)
                    df = np.where(corners[a] == 1, 1.0, -1.0)
                    N[a] = f.prod()
                    for ax in range(3):
                        others = [i for i in range(3) if i != ax]
                        dN[a, ax] = df[ax] * f[others[0]] * f[others[1]]
                w = 0.125
                M += w * np.outer(N, N)
                K += w * dN @ dN.T
    return M, K


@lru_cache(maxsize=1)
def _unit_face_mass():
    """Bilinear face mass matrix on the unit square (2x2 Gauss)."""
    gp = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
    corners = np.array([[0, 0], [1, 0], [1, 1], [0, 1]])
    Mf = np.zeros((4, 4))
    for x in gp:
        for y in gp:
            pt = np.array([x, y])
            N = np.array([np.prod(np.where(c == 1, pt, 1.0 - pt))
                          for c in corners])
            Mf += 0.25 * np.outer(N, N)
    return Mf


def _assemble_global(mesh: HexMesh, elem_matrix: np.ndarray) -> sp.csr_matrix:
    """Scatter one (identical) element matrix over all elements."""
    ne = mesh.n_elements
    rows = np.repeat(mesh.elements, 8, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, 8)).ravel()
    data = np.tile(elem_matrix.ravel(), ne)
    A = sp.coo_matrix((data, (rows, cols)),
                      shape=(mesh.n_vertices, mesh.n_vertices)).tocsr()
    A.sort_indices()
    return A


class LevelContext:
    """State-independent assembly data for one mesh level."""

    def __init__(self, mesh: HexMesh, n_cells: int):
        self.mesh = mesh
        self.n_pde = mesh.n_vertices
        self.n_cells = n_cells
        h = mesh.h
        Mu, Ku = _unit_element_matrices()
        self.M = _assemble_global(mesh, Mu * h**3)
        self.K = _assemble_global(mesh, Ku * h)

        Mf = _unit_face_mass() * h * h
        area = h * h
        self.cell_dofs: list[np.ndarray] = []
        self.cell_area = np.zeros(n_cells)
        self.Ms: list[sp.csr_matrix] = []       # per-cell surface mass
        w_rows, w_cols, w_vals = [], [], []
        for cell in range(n_cells):
            tag = cell + 1
            faces = mesh.boundary_faces[mesh.boundary_faces[:, 2] == tag]
            fverts = mesh.elements[faces[:, 0][:, None], FACE_VERTICES[faces[:, 1]]]
            self.cell_dofs.append(np.unique(fverts))
            self.cell_area[cell] = faces.shape[0] * area
            rows = np.repeat(fverts, 4, axis=1).ravel()
            cols = np.tile(fverts, (1, 4)).ravel()
            data = np.tile(Mf.ravel(), faces.shape[0])
            Ms = sp.coo_matrix((data, (rows, cols)),
                               shape=(self.n_pde, self.n_pde)).tocsr()
            Ms.sort_indices()
            self.Ms.append(Ms)
            w_rows.append(np.full(fverts.size, cell))
            w_cols.append(fverts.ravel())
            w_vals.append(np.full(fverts.size, area / 4.0))
        # W rows are the surface load vectors integral(N_a ds) on Gamma_i
        self.W = sp.coo_matrix(
            (np.concatenate(w_vals),
             (np.concatenate(w_rows), np.concatenate(w_cols))),
            shape=(n_cells, self.n_pde)).tocsr()
        # per-cell load weights aligned with cell_dofs
        self.w_cell = [np.asarray(self.W[i, self.cell_dofs[i]].todense()).ravel()
                       for i in range(n_cells)]

    def surface_average(self, u: np.ndarray) -> np.ndarray:
        """u_tilde for every cell: surface integral / surface area."""
        return (self.W @ u) / self.cell_area

    def surface_mass_combination(self, coeff: np.ndarray) -> sp.csr_matrix:
        S = coeff[0] * self.Ms[0]
        for i in range(1, self.n_cells):
            S = S + coeff[i] * self.Ms[i]
        return S


class Discretization:
    """Assembly over all levels of one mesh hierarchy."""

    def __init__(self, hierarchy: MeshHierarchy):
        self.hierarchy = hierarchy
        self.levels = [LevelContext(m, hierarchy.n_cells)
                       for m in hierarchy.meshes]

    @property
    def finest(self) -> int:
        return self.hierarchy.levels

    def zero_state(self, level: int | None = None) -> SystemState:
        l = self.finest if level is None else level
        return SystemState(np.zeros(self.levels[l].n_pde),
                           np.zeros(3 * self.hierarchy.n_cells), l)

    def rest_state(self, params: ModelParams,
                   level: int | None = None) -> SystemState:
        s = self.zero_state(level)
        s.v_cells[:, 0] = params.rest_receptors
        return s

    def surface_average(self, u: np.ndarray, cell: int, level: int) -> float:
        return float(self.levels[level].surface_average(u)[cell])

    def interpolate_to_level(self, u: np.ndarray, from_level: int,
                             to_level: int) -> np.ndarray:
        return self.hierarchy.fine_to_coarse_injection(u, from_level, to_level)

    # -- residual -----------------------------------------------------------

    def residual(self, state: SystemState, params: ModelParams,
                 k: float | None = None,
                 prev: SystemState | None = None) -> PartitionedVector:
        """Stationary residual if k is None, else implicit-Euler residual."""
        ctx = self.levels[state.level]
        if len(params.q) != ctx.n_cells:
            raise ValueError("params.q must hold one secretion rate per cell")
        u, v = state.u, state.v_cells
        if u.shape[0] != ctx.n_pde:
            raise ValueError("state dimension does not match level")
        u_tilde = ctx.surface_average(u)
        s = 1.0 / (params.alpha * ctx.cell_area)
        # surface term: integral of flux density against test functions
        lin = ctx.W.T @ ((params.q + params.k_off * v[:, 1]) * s)
        absorb_coeff = params.k_on * v[:, 0] * s
        absorb = ctx.surface_mass_combination(absorb_coeff) @ u
        rhs_v = ode_rhs_many(u_tilde, v, params)

        if k is None:
            res_u = params.mu * (ctx.K @ u) + params.k_d * (ctx.M @ u) \
                - lin + absorb
            res_v = -rhs_v
        else:
            if prev is None or prev.level != state.level:
                raise ValueError("transient residual needs prev on same level")
            res_u = ctx.M @ (u - prev.u) \
                + k * (params.mu * (ctx.K @ u) + params.k_d * (ctx.M @ u)) \
                - k * lin + k * absorb
            res_v = (v - prev.v_cells) - k * rhs_v
        return PartitionedVector.concat(res_u, res_v.ravel())

    # -- Jacobian -----------------------------------------------------------

    def jacobian_blocks(self, level: int, u_level: np.ndarray,
                        u_tilde: np.ndarray, v_cells: np.ndarray,
                        params: ModelParams,
                        k: float | None = None) -> CoupledMatrix:
        """Jacobian on a given level.

        u_level is the PDE iterate on that level (injected from the finest
        level when level < finest); u_tilde and v_cells always come from the
        finest level, which makes the ODE blocks level-independent.
        """
        ctx = self.levels[level]
        nc = ctx.n_cells
        fac = 1.0 if k is None else k
        s = 1.0 / (params.alpha * ctx.cell_area)

        absorb_coeff = params.k_on * v_cells[:, 0] * s
        A_uu = params.mu * ctx.K + params.k_d * ctx.M \
            + ctx.surface_mass_combination(absorb_coeff)
        if k is not None:
            A_uu = ctx.M + k * A_uu
        else:
            A_uu = A_uu.copy()
        A_uu.sort_indices()

        # A_uv: dR column from the pointwise binding term, dC from unbinding
        rows, cols, vals = [], [], []
        for i in range(nc):
            dofs = ctx.cell_dofs[i]
            col_R = fac * params.k_on * s[i] * (ctx.Ms[i] @ u_level)[dofs]
            col_C = -fac * params.k_off * s[i] * ctx.w_cell[i]
            rows.extend([dofs, dofs])
            cols.extend([np.full(dofs.shape[0], 3 * i),
                         np.full(dofs.shape[0], 3 * i + 1)])
            vals.extend([col_R, col_C])
        A_uv = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(ctx.n_pde, 3 * nc)).tocsr()
        A_uv.sort_indices()

        # B_vu: rows are -fac * d rhs/d u_tilde x (w_i / |Gamma_i|)
        _, drhs_du = ode_jacobian_many(u_tilde, v_cells, params)
        rows, cols, vals = [], [], []
        for i in range(nc):
            dofs = ctx.cell_dofs[i]
            w_i = ctx.w_cell[i] / ctx.cell_area[i]
            for comp in range(2):      # E row is identically zero
                rows.append(np.full(dofs.shape[0], 3 * i + comp))
                cols.append(dofs)
                vals.append(-fac * drhs_du[i, comp] * w_i)
        B_vu = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(3 * nc, ctx.n_pde)).tocsr()
        B_vu.sort_indices()

        J_rhs, _ = ode_jacobian_many(u_tilde, v_cells, params)
        if k is None:
            B_vv = -J_rhs
        else:
            B_vv = np.tile(np.eye(3), (nc, 1, 1)) - k * J_rhs
        return CoupledMatrix(A_uu, A_uv, B_vu, B_vv, level=level)

    def assemble(self, state: SystemState, params: ModelParams,
                 k: float | None = None,
                 prev: SystemState | None = None) -> AssembledSystem:
        """Residual and exact Jacobian at the current (finest-level) state."""
        ctx = self.levels[state.level]
        res = self.residual(state, params, k=k, prev=prev)
        u_tilde = ctx.surface_average(state.u)
        mat = self.jacobian_blocks(state.level, state.u, u_tilde,
                                   state.v_cells, params, k=k)
        return AssembledSystem(residual=res, matrix=mat)

    def assemble_transient(self, state: SystemState, prev: SystemState,
                           k: float, params: ModelParams) -> AssembledSystem:
        if k <= 0:
            raise ValueError("time step must be positive")
        return self.assemble(state, params, k=k, prev=prev)

    def assemble_stationary(self, state: SystemState,
                            params: ModelParams) -> AssembledSystem:
        return self.assemble(state, params)
