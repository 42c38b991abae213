"""IL-2 receptor dynamics: parameters, ODE right-hand sides, boundary flux.

Unit conventions (recorded in every run's metadata):
lengths in um, time in hours, extracellular IL-2 concentration u in nM,
per-cell receptor counts R, C, E in molecules/cell.  ALPHA converts nM to
molecules per um^3 (1 nM = 0.6022 molecules/um^3), so that the surface flux
density of u matches the molecular exchange terms of the per-cell ODEs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

#: molecules per um^3 per nM
ALPHA = 0.6022


@dataclass(frozen=True)
class ModelParams:
    """Physical constants; defaults are the published reference values."""

    mu: float = 36000.0       # diffusion coefficient, um^2/h
    k_d: float = 0.1          # extracellular degradation, 1/h
    w0: float = 150.0         # basal receptor expression, molecules/cell/h
    w1: float = 3000.0        # feedback receptor expression, molecules/cell/h
    K_half: float = 1000.0    # half saturation of the feedback, molecules/cell
    k_on: float = 111.6       # association rate, 1/(nM h)
    k_off: float = 0.83       # dissociation rate, 1/h
    k_iR: float = 0.64        # receptor internalization, 1/h
    k_iC: float = 1.7         # complex internalization, 1/h
    k_rec: float = 9.0        # recycling, 1/h
    k_deg: float = 5.0        # endosomal degradation, 1/h
    alpha: float = ALPHA
    q: np.ndarray = field(default_factory=lambda: np.zeros(0))  # per-cell secretion

    def __post_init__(self):
        rates = (self.k_d, self.w0, self.w1, self.k_on, self.k_off,
                 self.k_iR, self.k_iC, self.k_rec, self.k_deg)
        if self.mu <= 0 or self.K_half <= 0 or any(r < 0 for r in rates):
            raise ValueError("rates must be nonnegative, mu and K_half positive")
        object.__setattr__(self, "q", np.asarray(self.q, dtype=np.float64))

    def with_secretion(self, q: np.ndarray) -> "ModelParams":
        return replace(self, q=np.asarray(q, dtype=np.float64))

    @property
    def rest_receptors(self) -> float:
        """Free receptor count at the unstimulated fixed point (u = 0)."""
        return self.w0 / self.k_iR


@dataclass(frozen=True)
class CellSpec:
    index: int
    secreting: bool
    q: float

    def __post_init__(self):
        if self.secreting != (self.q > 0):
            raise ValueError("secreting flag must match q > 0")


def select_secreting(n_cells: int, n_secreting: int, seed: int) -> np.ndarray:
    """Uniform random draw without replacement; sorted for determinism."""
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n_cells, size=n_secreting, replace=False))


def ode_rhs(u_tilde: float, v: np.ndarray, params: ModelParams) -> np.ndarray:
    """Time derivatives (dR, dC, dE) of one cell, molecules/cell/h.

    The solver assembles dv/dt + B = 0 with B = -ode_rhs.
    """
    R, C, E = v
    p = params
    hill = p.w1 * C**3 / (p.K_half**3 + C**3)
    bind = p.k_on * R * u_tilde
    dR = p.w0 + hill - bind - p.k_iR * R + p.k_off * C + p.k_rec * E
    dC = bind - (p.k_off + p.k_iC) * C
    dE = p.k_iC * C - (p.k_rec + p.k_deg) * E
    return np.array([dR, dC, dE])


def ode_jacobian(u_tilde: float, v: np.ndarray,
                 params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Analytic derivatives of ode_rhs: (d rhs/dv as 3x3, d rhs/du_tilde as 3,)."""
    R, C, E = v
    p = params
    denom = p.K_half**3 + C**3
    hill_dC = p.w1 * 3.0 * p.K_half**3 * C**2 / denom**2
    J = np.array([
        [-p.k_on * u_tilde - p.k_iR, hill_dC + p.k_off, p.k_rec],
        [p.k_on * u_tilde, -(p.k_off + p.k_iC), 0.0],
        [0.0, p.k_iC, -(p.k_rec + p.k_deg)],
    ])
    du = np.array([-p.k_on * R, p.k_on * R, 0.0])
    return J, du


def ode_rhs_many(u_tilde: np.ndarray, v: np.ndarray,
                 params: ModelParams) -> np.ndarray:
    """ode_rhs vectorized over cells; u_tilde (n,), v (n, 3) -> (n, 3)."""
    R, C, E = v[:, 0], v[:, 1], v[:, 2]
    p = params
    hill = p.w1 * C**3 / (p.K_half**3 + C**3)
    bind = p.k_on * R * u_tilde
    out = np.empty_like(v)
    out[:, 0] = p.w0 + hill - bind - p.k_iR * R + p.k_off * C + p.k_rec * E
    out[:, 1] = bind - (p.k_off + p.k_iC) * C
    out[:, 2] = p.k_iC * C - (p.k_rec + p.k_deg) * E
    return out


def ode_jacobian_many(u_tilde: np.ndarray, v: np.ndarray,
                      params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell (n, 3, 3) Jacobians of ode_rhs and (n, 3) u_tilde columns."""
    R, C = v[:, 0], v[:, 1]
    p = params
    n = v.shape[0]
    denom = p.K_half**3 + C**3
    hill_dC = p.w1 * 3.0 * p.K_half**3 * C**2 / denom**2
    J = np.zeros((n, 3, 3))
    J[:, 0, 0] = -p.k_on * u_tilde - p.k_iR
    J[:, 0, 1] = hill_dC + p.k_off
    J[:, 0, 2] = p.k_rec
    J[:, 1, 0] = p.k_on * u_tilde
    J[:, 1, 1] = -(p.k_off + p.k_iC)
    J[:, 2, 1] = p.k_iC
    J[:, 2, 2] = -(p.k_rec + p.k_deg)
    du = np.zeros((n, 3))
    du[:, 0] = -p.k_on * R
    du[:, 1] = p.k_on * R
    return J, du


def boundary_flux(u_point: float, v: np.ndarray, q_i: float,
                  params: ModelParams, gamma_area: float):
    """Flux density of u on a cell surface and its partial derivatives.

    Returns (phi, dphi_du, dphi_dR, dphi_dC) in nM um / h.  phi scales the
    molecular exchange rate q - k_on R u + k_off C by 1/(alpha * |Gamma_i|)
    so the cell-total flux matches the ODE source terms.
    """
    if gamma_area <= 0:
        raise ValueError("gamma_area must be positive")
    R, C, _ = v
    scale = 1.0 / (params.alpha * gamma_area)
    phi = (q_i - params.k_on * R * u_point + params.k_off * C) * scale
    return (phi,
            -params.k_on * R * scale,
            -params.k_on * u_point * scale,
            params.k_off * scale)
