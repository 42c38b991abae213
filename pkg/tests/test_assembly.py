"""Finite element assembly: quadrature identities, residuals, Jacobians."""

import numpy as np
import pytest

from intercell import Discretization, MeshConfig, ModelParams, build_hierarchy
from intercell.assembly import _unit_element_matrices, _unit_face_mass

from conftest import random_positive_state


@pytest.fixture(scope="module")
def small():
    """Single cell, root level only: small enough for dense FD Jacobians."""
    disc = Discretization(build_hierarchy(MeshConfig(1, 10.0, 5.0, 0)))
    return disc, ModelParams(q=np.array([2500.0]))


def test_unit_element_matrices_closed_form():
    M, K = _unit_element_matrices()
    # trilinear mass matrix entries are products of 1D values {1/3, 1/6}
    assert M.sum() == pytest.approx(1.0, abs=1e-14)          # volume
    assert M[0, 0] == pytest.approx((1 / 3) ** 3, abs=1e-15)
    assert M[0, 6] == pytest.approx((1 / 6) ** 3, abs=1e-15)  # opposite corner
    assert np.allclose(K.sum(axis=1), 0.0, atol=1e-14)       # constants
    assert np.allclose(K, K.T, atol=1e-15)
    Mf = _unit_face_mass()
    assert Mf.sum() == pytest.approx(1.0, abs=1e-14)
    assert Mf[0, 0] == pytest.approx((1 / 3) ** 2, abs=1e-15)


def test_mass_matrix_integrates_volume(disc8):
    ctx = disc8.levels[disc8.finest]
    ones = np.ones(ctx.n_pde)
    volume = 35.0 ** 3 - 8 * 10.0 ** 3
    assert ones @ (ctx.M @ ones) == pytest.approx(volume, rel=1e-12)


def test_stiffness_annihilates_constants(disc8):
    ctx = disc8.levels[disc8.finest]
    assert np.allclose(ctx.K @ np.ones(ctx.n_pde), 0.0, atol=1e-9)


def test_surface_average_of_constant_field(disc8):
    ctx = disc8.levels[disc8.finest]
    assert np.allclose(ctx.surface_average(np.full(ctx.n_pde, 3.7)), 3.7,
                       atol=1e-12)
    assert np.allclose(np.asarray(ctx.W.sum(axis=1)).ravel(), ctx.cell_area,
                       atol=1e-10)


def test_rest_state_residual_is_zero_without_secretion(disc8):
    p = ModelParams(q=np.zeros(8))
    rest = disc8.rest_state(p)
    assert np.linalg.norm(disc8.residual(rest, p).data) == 0.0
    assert np.linalg.norm(
        disc8.residual(rest, p, k=0.1, prev=rest.copy()).data) == 0.0


def _dense_fd_jacobian(disc, state, params, k, prev, eps=1e-6):
    base = state.flat()
    n = base.shape[0]
    n_pde = state.u.shape[0]
    J = np.zeros((n, n))
    scale = np.where(np.arange(n) < n_pde, 1e-3, 1.0)
    for j in range(n):
        for sgn in (+1, -1):
            x = base.copy()
            x[j] += sgn * eps * scale[j]
            s = state.copy()
            s.u[:] = x[:n_pde]
            s.v[:] = x[n_pde:]
            r = disc.residual(s, params, k=k, prev=prev).data
            J[:, j] += sgn * r / (2 * eps * scale[j])
    return J


@pytest.mark.parametrize("k", [None, 0.25])
def test_jacobian_matches_finite_differences(small, k):
    disc, p = small
    rng = np.random.default_rng(7)
    state = random_positive_state(disc, rng)
    prev = random_positive_state(disc, rng) if k else None
    sysm = disc.assemble(state, p, k=k, prev=prev)
    J = sysm.matrix.flatten().toarray()
    J_fd = _dense_fd_jacobian(disc, state, p, k, prev)
    err = np.linalg.norm(J - J_fd) / np.linalg.norm(J_fd)
    assert err < 1e-7


def test_jacobian_is_exact_linearization_of_residual(disc8, params8):
    """Directional derivative check on the 8-cell level-1 problem."""
    rng = np.random.default_rng(1)
    state = random_positive_state(disc8, rng)
    d_u = rng.standard_normal(state.u.shape[0])
    d_v = rng.standard_normal(state.v.shape[0])
    sysm = disc8.assemble(state, params8)
    direction = np.concatenate([d_u, d_v])
    analytic = sysm.matrix.matvec(direction)
    eps = 1e-6
    plus, minus = state.copy(), state.copy()
    plus.u += eps * d_u
    plus.v += eps * d_v
    minus.u -= eps * d_u
    minus.v -= eps * d_v
    fd = (disc8.residual(plus, params8).data
          - disc8.residual(minus, params8).data) / (2 * eps)
    assert np.linalg.norm(analytic - fd) < 1e-4 * np.linalg.norm(analytic)


def test_coarse_jacobian_uses_finest_ode_blocks(disc8, params8):
    rng = np.random.default_rng(2)
    state = random_positive_state(disc8, rng)
    ctx = disc8.levels[disc8.finest]
    u_tilde = ctx.surface_average(state.u)
    fine = disc8.jacobian_blocks(1, state.u, u_tilde, state.v_cells, params8)
    coarse_u = disc8.interpolate_to_level(state.u, 1, 0)
    coarse = disc8.jacobian_blocks(0, coarse_u, u_tilde, state.v_cells, params8)
    assert np.allclose(coarse.B_vv, fine.B_vv, atol=1e-14)
    assert coarse.A_uu.shape[0] == disc8.levels[0].n_pde


def test_residual_dimension_checks(disc8, params8):
    bad = disc8.zero_state(level=0)
    bad.level = 1
    with pytest.raises(ValueError):
        disc8.residual(bad, params8)
    with pytest.raises(ValueError):
        disc8.residual(disc8.zero_state(), ModelParams(q=np.zeros(3)))
    with pytest.raises(ValueError):
        disc8.assemble_transient(disc8.zero_state(), disc8.zero_state(),
                                 -0.1, params8)
