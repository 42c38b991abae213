"""Coupling-strength analysis at a stationary solution.

The fixed-point map alternating the PDE solve (for frozen receptor values)
with the per-cell receptor solves (for frozen field) has a Jacobian whose
nonzero eigenvalues are carried by small per-cell 2x2 blocks over the (R, C)
components: the internalized component E does not enter the boundary
condition, so its column of the product vanishes, and the eigenvalues of the
product in either order coincide on the nonzero spectrum.  The spectral
radius of the largest block classifies the coupling as weak (< 0.1) or
strong (> 1).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .assembly import Discretization, SystemState
from .linalg import gmres, spectral_radius_2x2
from .model import ModelParams
from .multigrid import MGContext

WEAK_THRESHOLD = 0.1
STRONG_THRESHOLD = 1.0


class SensitivityError(RuntimeError):
    pass


@dataclass
class CouplingReport:
    point_description: str
    blocks: np.ndarray           # (n_cells, 2, 2) products over (R_i, C_i)
    radii: np.ndarray            # (n_cells,)
    lambda_max: float            # max per-cell spectral radius
    classification: str
    lambda_max_full: float = 0.0  # spectral radius of the full dense product
    params: ModelParams = field(repr=False, default=None)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cell", "m_rr", "m_rc", "m_cr", "m_cc", "radius"])
            for i, (B, r) in enumerate(zip(self.blocks, self.radii)):
                w.writerow([i, repr(B[0, 0]), repr(B[0, 1]),
                            repr(B[1, 0]), repr(B[1, 1]), repr(r)])
            w.writerow(["lambda_max", repr(self.lambda_max),
                        self.classification, "", "", ""])
            w.writerow(["lambda_max_full", repr(self.lambda_max_full),
                        "", "", "", ""])

    def __str__(self) -> str:
        lines = [f"coupling strength at {self.point_description}",
                 f"lambda_max = {self.lambda_max:.4g} ({self.classification})",
                 f"full fixed-point Jacobian spectral radius = "
                 f"{self.lambda_max_full:.4g}"]
        for i, r in enumerate(self.radii):
            lines.append(f"  cell {i}: spectral radius {r:.4g}")
        return "\n".join(lines)


def _stationary_jacobian(disc: Discretization, point: SystemState,
                         params: ModelParams):
    ctx = disc.levels[point.level]
    u_tilde = ctx.surface_average(point.u)
    return disc.jacobian_blocks(point.level, point.u, u_tilde,
                                point.v_cells, params)


def pde_sensitivities(disc: Discretization, point: SystemState,
                      params: ModelParams, rel_tol: float = 1e-11
                      ) -> np.ndarray:
    """Columns du/dv_j of the stationary PDE solve, for the coupled (R_i, C_i)
    components of every cell; shape (n_pde, n_cells, 2).

    E columns are identically zero (E does not enter the flux) and skipped.
    """
    K = _stationary_jacobian(disc, point, params)
    mg = MGContext(disc, point, params, "pde_only")
    nc = disc.hierarchy.n_cells
    out = np.zeros((K.n_pde, nc, 2))
    A_uv = K.A_uv.tocsc()
    for i in range(nc):
        for comp in range(2):
            rhs = -np.asarray(A_uv[:, 3 * i + comp].todense()).ravel()
            if not np.any(rhs):
                continue
            col, iters, hist = gmres(lambda x: K.A_uu @ x, rhs,
                                     preconditioner=mg.apply,
                                     rel_tol=rel_tol, max_iter=500)
            if hist[-1] > rel_tol * hist[0]:
                raise SensitivityError(
                    f"sensitivity solve for cell {i} comp {comp} stalled")
            out[:, i, comp] = col
    return out


def ode_sensitivities(disc: Discretization, point: SystemState,
                      params: ModelParams) -> list[np.ndarray]:
    """Rows dv_i/du_k = -B_vv_i^{-1} B_vu_i, restricted to the boundary dofs
    of cell i; one (3, n_boundary_dofs_i) block per cell."""
    K = _stationary_jacobian(disc, point, params)
    ctx = disc.levels[point.level]
    out = []
    for i in range(disc.hierarchy.n_cells):
        dofs = ctx.cell_dofs[i]
        Bvu_i = K.B_vu[3 * i:3 * i + 3, :][:, dofs].toarray()
        try:
            block = -np.linalg.solve(K.B_vv[i], Bvu_i)
        except np.linalg.LinAlgError as exc:
            raise SensitivityError(f"singular ODE block for cell {i}") from exc
        out.append(block)
    return out


def coupling_strength(disc: Discretization, point: SystemState,
                      params: ModelParams,
                      description: str = "stationary solution"
                      ) -> CouplingReport:
    """Per-cell 2x2 products of the two sensitivity maps and their largest
    spectral radius; also records the spectral radius of the full product as
    a diagnostic (the two coincide only for a single cell, where the product
    is exactly block diagonal)."""
    u_sens = pde_sensitivities(disc, point, params)
    v_sens = ode_sensitivities(disc, point, params)
    ctx = disc.levels[point.level]
    nc = disc.hierarchy.n_cells
    blocks = np.zeros((nc, 2, 2))
    for i in range(nc):
        dofs = ctx.cell_dofs[i]
        # rows: dv_a/du_k for a in (R_i, C_i); columns: du_k/dv_b
        blocks[i] = v_sens[i][:2, :] @ u_sens[dofs, i, :]
    radii = np.array([spectral_radius_2x2(B) for B in blocks])
    lam = float(radii.max()) if nc else 0.0
    full = _dense_product(ctx, nc, u_sens, v_sens)
    lam_full = float(np.abs(np.linalg.eigvals(full)).max()) if nc else 0.0
    if lam > STRONG_THRESHOLD:
        cls = "strong"
    elif lam < WEAK_THRESHOLD:
        cls = "weak"
    else:
        cls = "intermediate"
    return CouplingReport(point_description=description, blocks=blocks,
                          radii=radii, lambda_max=lam, classification=cls,
                          lambda_max_full=lam_full, params=params)


def _dense_product(ctx, nc: int, u_sens: np.ndarray,
                   v_sens: list[np.ndarray]) -> np.ndarray:
    n_ode = 3 * nc
    dT_du = np.zeros((n_ode, ctx.n_pde))
    for i in range(nc):
        dT_du[3 * i:3 * i + 3, ctx.cell_dofs[i]] = v_sens[i]
    dS_dv = np.zeros((ctx.n_pde, n_ode))
    for i in range(nc):
        dS_dv[:, 3 * i] = u_sens[:, i, 0]
        dS_dv[:, 3 * i + 1] = u_sens[:, i, 1]
    return dT_du @ dS_dv


def dense_fixed_point_product(disc: Discretization, point: SystemState,
                              params: ModelParams) -> np.ndarray:
    """Full (n_ode x n_ode) product (dT/du)(dS/dv) built densely; test and
    diagnostics helper for small problems."""
    u_sens = pde_sensitivities(disc, point, params)   # (n_pde, nc, 2)
    v_sens = ode_sensitivities(disc, point, params)
    ctx = disc.levels[point.level]
    return _dense_product(ctx, disc.hierarchy.n_cells, u_sens, v_sens)
