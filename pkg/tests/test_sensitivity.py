"""Coupling-strength analysis: FD re-solve oracles and structure checks."""

import numpy as np
import pytest
import scipy.optimize
import scipy.sparse.linalg as spla

from intercell import (NewtonConfig, ModelParams, coupling_strength,
                       dense_fixed_point_product, newton_coupled,
                       ode_sensitivities, pde_sensitivities,
                       pseudo_timestep_globalize)
from intercell.model import ode_rhs


def stationary_solution(disc, params, steps=20, dt=0.5):
    cfg = NewtonConfig()
    warm = pseudo_timestep_globalize(disc, disc.rest_state(params), params,
                                     cfg, [dt] * steps)
    sol, _ = newton_coupled(disc, warm, params, cfg)
    return sol


@pytest.fixture(scope="module")
def point8(disc8, params8):
    return stationary_solution(disc8, params8)


@pytest.fixture(scope="module")
def point1(disc1, params1):
    # fine pseudo-time schedule: the single-cell scene activates sharply and
    # coarse warm starts can steer Newton to an unphysical root
    point = stationary_solution(disc1, params1, steps=60, dt=0.25)
    assert point.is_nonnegative()
    return point


def frozen_receptor_pde_solve(disc, point, params):
    """Linear stationary PDE solve for the field at frozen receptor values."""
    ctx = disc.levels[point.level]
    K = disc.jacobian_blocks(point.level, point.u,
                             ctx.surface_average(point.u), point.v_cells,
                             params)
    res_u = disc.residual(point, params).u
    return spla.spsolve(K.A_uu.tocsc(), K.A_uu @ point.u - res_u)


def test_decoupled_parameters_give_zero_sensitivities(disc8):
    p = ModelParams(k_on=0.0, k_off=0.0, q=np.r_[2500.0, np.zeros(7)])
    point = stationary_solution(disc8, p, steps=5, dt=1.0)
    u_sens = pde_sensitivities(disc8, point, p)
    assert np.all(u_sens == 0.0)
    v_sens = ode_sensitivities(disc8, point, p)
    assert all(np.all(b == 0.0) for b in v_sens)
    report = coupling_strength(disc8, point, p)
    assert report.lambda_max == 0.0
    assert np.all(report.blocks == 0.0)


def test_pde_sensitivity_matches_fd_resolve(disc8, params8, point8):
    """Column du/dC_i against re-solving the frozen-receptor PDE."""
    u_sens = pde_sensitivities(disc8, point8, params8)
    i = 0                                    # the secreting cell
    C = point8.v_cells[i, 1]
    delta = 1e-3 * C
    us = []
    for sgn in (+1, -1):
        pert = point8.copy()
        pert.v_cells[i, 1] += sgn * delta
        us.append(frozen_receptor_pde_solve(disc8, pert, params8))
    fd = (us[0] - us[1]) / (2 * delta)
    col = u_sens[:, i, 1]
    assert np.linalg.norm(col - fd) < 1e-4 * np.linalg.norm(fd)


def test_pde_sensitivity_R_column_matches_fd_resolve(disc8, params8, point8):
    u_sens = pde_sensitivities(disc8, point8, params8)
    i = 0
    R = point8.v_cells[i, 0]
    delta = 1e-4 * R
    us = []
    for sgn in (+1, -1):
        pert = point8.copy()
        pert.v_cells[i, 0] += sgn * delta
        us.append(frozen_receptor_pde_solve(disc8, pert, params8))
    fd = (us[0] - us[1]) / (2 * delta)
    col = u_sens[:, i, 0]
    assert np.linalg.norm(col - fd) < 1e-4 * np.linalg.norm(fd)


def solve_cell_ode(u_tilde, params, guess):
    sol = scipy.optimize.fsolve(
        lambda v: ode_rhs(u_tilde, v, params), guess, full_output=False,
        xtol=1e-13)
    return np.asarray(sol)


def test_ode_sensitivity_matches_fd_resolve(disc8, params8, point8):
    """Rows dv_i/du_k against a per-cell nonlinear re-solve."""
    ctx = disc8.levels[disc8.finest]
    v_sens = ode_sensitivities(disc8, point8, params8)
    i = 3
    dofs = ctx.cell_dofs[i]
    k_local = 7                              # arbitrary boundary dof of cell i
    w = ctx.w_cell[i] / ctx.cell_area[i]
    delta = 1e-5
    vs = []
    for sgn in (+1, -1):
        u_tilde = ctx.surface_average(point8.u)[i] + sgn * delta * w[k_local]
        vs.append(solve_cell_ode(u_tilde, params8, point8.v_cells[i]))
    fd = (vs[0] - vs[1]) / (2 * delta)
    assert np.linalg.norm(v_sens[i][:, k_local] - fd) \
        < 1e-5 * max(np.linalg.norm(fd), 1.0)


def test_ode_sensitivity_rows_have_local_support(disc8, params8, point8):
    ctx = disc8.levels[disc8.finest]
    v_sens = ode_sensitivities(disc8, point8, params8)
    for i in range(8):
        assert v_sens[i].shape == (3, len(ctx.cell_dofs[i]))


def test_pde_sensitivity_decays_away_from_its_cell(disc8, params8, point8):
    """Diffusion decay: a column is largest near its own cell surface."""
    ctx = disc8.levels[disc8.finest]
    mesh = ctx.mesh
    u_sens = pde_sensitivities(disc8, point8, params8)
    for i in (0, 7):
        col = np.abs(u_sens[:, i, 0])
        on_surface = col[ctx.cell_dofs[i]].max()
        center = mesh.vertices[ctx.cell_dofs[i]].mean(axis=0)
        far = np.argmax(np.linalg.norm(mesh.vertices - center, axis=1))
        assert on_surface > col[far]


def test_single_cell_product_is_exactly_block_diagonal(disc1, params1, point1):
    """With one cell the dense fixed-point product has a zero E column and
    its (R, C) block equals the 2x2 reduction."""
    dense = dense_fixed_point_product(disc1, point1, params1)
    report = coupling_strength(disc1, point1, params1)
    scale = np.abs(dense).max()
    assert np.abs(dense[:, 2]).max() <= 1e-10 * scale      # E column
    assert np.allclose(dense[:2, :2], report.blocks[0], atol=1e-10 * scale)
    assert report.lambda_max == pytest.approx(report.lambda_max_full,
                                              rel=1e-8)


def test_multicell_diagonal_blocks_match_dense_product(disc8, params8, point8):
    dense = dense_fixed_point_product(disc8, point8, params8)
    report = coupling_strength(disc8, point8, params8)
    scale = np.abs(dense).max()
    for i in range(8):
        sub = dense[3 * i:3 * i + 2, 3 * i:3 * i + 2]
        assert np.allclose(sub, report.blocks[i], atol=1e-10 * scale)
        # E columns vanish for every cell
        assert np.abs(dense[:, 3 * i + 2]).max() <= 1e-10 * scale


@pytest.mark.xfail(reason="cross-cell diffusion makes the fixed-point product "
                          "dense across cells; the block-diagonal reduction "
                          "is exact only for a single cell", strict=True)
def test_multicell_product_has_no_cross_cell_coupling(disc8, params8, point8):
    dense = dense_fixed_point_product(disc8, point8, params8)
    scale = np.abs(dense).max()
    mask = np.ones_like(dense, dtype=bool)
    for i in range(8):
        mask[3 * i:3 * i + 3, 3 * i:3 * i + 3] = False
    assert np.abs(dense[mask]).max() <= 1e-10 * scale


def test_report_invariants_and_csv(disc8, params8, point8, tmp_path):
    report = coupling_strength(disc8, point8, params8)
    assert np.all(report.radii >= 0.0)
    assert report.lambda_max == pytest.approx(report.radii.max())
    assert report.classification in ("weak", "strong", "intermediate")
    path = tmp_path / "coupling.csv"
    report.write_csv(path)
    text = path.read_text()
    assert repr(report.lambda_max) in text
    assert "lambda_max_full" in text
    assert str(report)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_empirical_contraction_matches_full_product_radius(
        disc8, params8, point8):
    """Iterating the nonlinear alternating map around the solution contracts
    at the rate given by the full product's spectral radius."""
    ctx = disc8.levels[disc8.finest]
    report = coupling_strength(disc8, point8, params8)
    state = point8.copy()
    state.u = state.u * (1.0 + 1e-6)         # small perturbation
    errs = []
    for _ in range(12):
        u_tilde = ctx.surface_average(state.u)
        for i in range(8):
            state.v_cells[i] = solve_cell_ode(u_tilde[i], params8,
                                              state.v_cells[i])
        state.u = frozen_receptor_pde_solve(disc8, state, params8)
        errs.append(np.linalg.norm(state.u - point8.u))
    rates = [b / a for a, b in zip(errs, errs[1:]) if a > 1e-14]
    assert rates[-1] == pytest.approx(report.lambda_max_full, rel=0.05)
