"""Mesh hierarchy: lattice enumeration oracles, refinement, transfers."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intercell.mesh import (MeshConfig, MeshError, build_hierarchy,
                            build_root_mesh, refine, tagged_area)


def expected_root_elements(n: int, side: float, gap: float) -> int:
    """Independent enumeration of the root lattice minus the hole elements."""
    m = int(round(side / gap))              # elements across one hole
    lattice = n * m + (n + 1)               # elements per axis
    occupied = set()
    for cz in range(n):
        for cy in range(n):
            for cx in range(n):
                for dz in range(m):
                    for dy in range(m):
                        for dx in range(m):
                            occupied.add((1 + cx * (m + 1) + dx,
                                          1 + cy * (m + 1) + dy,
                                          1 + cz * (m + 1) + dz))
    return lattice ** 3 - len(occupied)


def test_root_mesh_element_count_single_cell():
    mesh = build_root_mesh(MeshConfig(1, 10.0, 5.0, 0))
    assert mesh.n_elements == expected_root_elements(1, 10.0, 5.0) == 56


def test_root_mesh_element_count_eight_cells():
    mesh = build_root_mesh(MeshConfig(2, 10.0, 5.0, 0))
    assert mesh.n_elements == expected_root_elements(2, 10.0, 5.0) == 279


def test_refinement_multiplies_elements_by_eight():
    root = build_root_mesh(MeshConfig(2, 10.0, 5.0, 0))
    fine = refine(root)
    assert fine.n_elements == 8 * root.n_elements
    assert fine.h == pytest.approx(root.h / 2)


def test_vertex_coordinates_fill_the_box():
    for level, mesh in enumerate(build_hierarchy(MeshConfig(2, 10., 5., 1)).meshes):
        box = MeshConfig(2, 10.0, 5.0, 1).box_side
        assert mesh.vertices.min() == 0.0
        assert mesh.vertices.max() == pytest.approx(box)
        # all coordinates are lattice multiples of h
        assert np.allclose(mesh.vertices / mesh.h,
                           np.round(mesh.vertices / mesh.h))


def test_tagged_face_count_root():
    # each cubic hole of m^3 elements exposes 6 m^2 faces; m = 2
    mesh = build_root_mesh(MeshConfig(2, 10.0, 5.0, 0))
    for tag in range(1, 9):
        faces = mesh.boundary_faces[mesh.boundary_faces[:, 2] == tag]
        assert faces.shape[0] == 24


def test_hole_surface_area_is_exact_on_every_level():
    h = build_hierarchy(MeshConfig(2, 10.0, 5.0, 2))
    for mesh in h.meshes:
        for tag in range(1, 9):
            assert tagged_area(mesh, tag) == pytest.approx(600.0, abs=1e-10)


def test_hole_surface_vertex_count_matches_shell_formula():
    # a hole of m^3 elements has (m+1)^3 - (m-1)^3 surface vertices
    from intercell.assembly import LevelContext
    h = build_hierarchy(MeshConfig(1, 10.0, 5.0, 1))
    for mesh, m in zip(h.meshes, (2, 4)):
        ctx = LevelContext(mesh, 1)
        assert len(ctx.cell_dofs[0]) == (m + 1) ** 3 - (m - 1) ** 3


def test_prolongation_preserves_constants_and_partitions_unity():
    h = build_hierarchy(MeshConfig(2, 10.0, 5.0, 2))
    for P in h.prolongations:
        rows = np.asarray(P.sum(axis=1)).ravel()
        assert np.allclose(rows, 1.0, atol=1e-14)
        assert P.min() >= 0.0


def test_injection_is_left_inverse_of_prolongation():
    h = build_hierarchy(MeshConfig(2, 10.0, 5.0, 2))
    rng = np.random.default_rng(3)
    for l in range(h.levels):
        coarse = rng.random(h.meshes[l].n_vertices)
        fine = h.prolongations[l] @ coarse
        back = h.fine_to_coarse_injection(fine, l + 1, l)
        assert np.allclose(back, coarse, atol=1e-13)


def test_config_validation():
    with pytest.raises(MeshError):
        MeshConfig(1, 10.0, 3.0, 0)        # side not a multiple of gap
    with pytest.raises(MeshError):
        MeshConfig(0, 10.0, 5.0, 0)
    with pytest.raises(MeshError):
        MeshConfig(1, 10.0, 5.0, -1)


@settings(max_examples=10, deadline=None)
@given(n=st.integers(1, 2), ratio=st.integers(1, 3),
       gap=st.sampled_from([2.5, 5.0]))
def test_geometry_invariants_random_configs(n, ratio, gap):
    side = ratio * gap
    cfg = MeshConfig(n, side, gap, 0)
    mesh = build_root_mesh(cfg)
    assert mesh.n_elements == expected_root_elements(n, side, gap)
    for tag in range(1, cfg.n_cells + 1):
        assert tagged_area(mesh, tag) == pytest.approx(6 * side * side)
