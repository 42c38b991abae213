"""V-cycle preconditioner: transfer algebra, linearity, smoother behavior."""

import numpy as np
import pytest

from intercell import Discretization, MeshConfig, ModelParams, build_hierarchy
from intercell.linalg import gmres
from intercell.multigrid import MODES, MGContext

from conftest import random_positive_state


@pytest.fixture(scope="module")
def problem(disc8, params8):
    rng = np.random.default_rng(11)
    return disc8, params8, random_positive_state(disc8, rng)


def test_rejects_unknown_mode(problem):
    disc, p, state = problem
    with pytest.raises(ValueError):
        MGContext(disc, state, p, "jacobi")


def test_transfer_adjointness(problem):
    """<prolong(x), y> = <x, restrict(y)> for the PDE transfer pair."""
    disc, p, state = problem
    mg = MGContext(disc, state, p, "coupled_s1")
    rng = np.random.default_rng(0)
    n_c = mg.matrices[0].n_pde + mg.n_ode
    n_f = mg.matrices[1].n_pde + mg.n_ode
    for _ in range(5):
        x = rng.standard_normal(n_c)
        y = rng.standard_normal(n_f)
        lhs = mg._prolong(x, 1) @ y
        rhs = x @ mg._restrict(y, 1)
        assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), 1.0)


@pytest.mark.parametrize("mode", MODES)
def test_vcycle_is_linear(problem, mode):
    disc, p, state = problem
    mg = MGContext(disc, state, p, mode)
    rng = np.random.default_rng(1)
    n = mg.matrices[1].n_pde + (0 if mode == "pde_only" else mg.n_ode)
    x, y = rng.standard_normal(n), rng.standard_normal(n)
    a = 0.37
    lhs = mg.vcycle(x + a * y)
    rhs = mg.vcycle(x) + a * mg.vcycle(y)
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(rhs)


@pytest.mark.parametrize("mode", MODES)
def test_single_level_vcycle_is_a_direct_solve(params1, mode):
    disc = Discretization(build_hierarchy(MeshConfig(1, 10.0, 5.0, 0)))
    rng = np.random.default_rng(2)
    state = random_positive_state(disc, rng)
    mg = MGContext(disc, state, params1, mode)
    if mode == "pde_only":
        A = mg.matrices[0].A_uu
        n = A.shape[0]
    else:
        A = mg.flat[0]
        n = A.shape[0]
    b = rng.standard_normal(n)
    x = mg.vcycle(b)
    assert np.linalg.norm(A @ x - b) <= 1e-9 * np.linalg.norm(b)
    _, iters, _ = gmres(lambda z: A @ z, b, preconditioner=mg.apply,
                        rel_tol=1e-11, max_iter=5)
    assert iters == 1


@pytest.mark.parametrize("mode", MODES)
def test_vcycle_preconditions_gmres(problem, mode):
    """Preconditioned iteration counts are far below unpreconditioned ones."""
    disc, p, state = problem
    mg = MGContext(disc, state, p, mode)
    rng = np.random.default_rng(3)
    if mode == "pde_only":
        A = mg.matrices[1].A_uu
    else:
        A = mg.flat[1]
    b = rng.standard_normal(A.shape[0])
    x, iters, hist = gmres(lambda z: A @ z, b, preconditioner=mg.apply,
                           rel_tol=1e-11, max_iter=200)
    assert hist[-1] <= 1e-11 * hist[0]
    assert iters < 60
    assert np.linalg.norm(A @ x - b) <= 1e-8 * np.linalg.norm(b)


def test_pde_only_passes_ode_tail_through(problem):
    disc, p, state = problem
    mg = MGContext(disc, state, p, "pde_only")
    rng = np.random.default_rng(4)
    n_pde = mg.matrices[1].n_pde
    r = rng.standard_normal(n_pde + mg.n_ode)
    out = mg.apply(r)
    assert np.array_equal(out[n_pde:], r[n_pde:])
    assert np.allclose(out[:n_pde], mg.vcycle(r[:n_pde]), atol=1e-14)


def test_smoother_reduces_residual(problem):
    disc, p, state = problem
    rng = np.random.default_rng(5)
    for mode in MODES:
        mg = MGContext(disc, state, p, mode)
        if mode == "pde_only":
            A = mg.matrices[1].A_uu
        else:
            A = mg.flat[1]
        b = rng.standard_normal(A.shape[0])
        x = mg._smooth(1, np.zeros_like(b), b, steps=3)
        assert np.linalg.norm(b - A @ x) < 0.7 * np.linalg.norm(b)


def test_context_requires_finest_level_state(disc8, params8):
    coarse = disc8.rest_state(params8, level=0)
    with pytest.raises(ValueError):
        MGContext(disc8, coarse, params8, "coupled_s1")
