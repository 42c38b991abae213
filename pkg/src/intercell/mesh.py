"""Nested hexahedral grids over a box domain with cubic cell-shaped holes.

Geometry convention
-------------------
The domain is an axis-aligned box of side ``n*cell_side + (n+1)*gap`` with
``n**3`` cubic holes (the biological cells) arranged on a regular lattice.
The root grid is a uniform lattice of cubic elements with edge length
``h0 = gap``, so every hole face is a union of element faces on every level.

Local vertex ordering of a hexahedron follows the VTK_HEXAHEDRON convention,
corner offsets in (x, y, z):

    0:(0,0,0) 1:(1,0,0) 2:(1,1,0) 3:(0,1,0)
    4:(0,0,1) 5:(1,0,1) 6:(1,1,1) 7:(0,1,1)

Local faces are numbered -x,+x,-y,+y,-z,+z (0..5); FACE_VERTICES lists the
four corners of each face in cyclic order.

Boundary face tags: 0 is the outer box boundary, tags 1..N_c are the hole
surfaces, where hole (ix, iy, iz) on the n**3 lattice gets tag
``1 + ix + n*iy + n*n*iz``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

TAG_OUTER = 0

# VTK hexahedron corner offsets.
VERTEX_OFFSETS = np.array(
    [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
     [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]], dtype=np.int64)

# local face -> 4 local vertices, cyclic order; faces are -x,+x,-y,+y,-z,+z
FACE_VERTICES = np.array(
    [[0, 3, 7, 4], [1, 2, 6, 5],
     [0, 1, 5, 4], [3, 2, 6, 7],
     [0, 1, 2, 3], [4, 5, 6, 7]], dtype=np.int64)

# face -> (axis, direction); direction 0 = low side, 1 = high side
FACE_AXIS_DIR = [(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1)]


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class MeshConfig:
    """Geometry of the cell lattice and the refinement depth."""

    cells_per_axis: int
    cell_side: float = 10.0
    gap: float = 5.0
    levels: int = 0

    def __post_init__(self):
        if self.cells_per_axis < 1:
            raise MeshError("cells_per_axis must be >= 1")
        if self.cell_side <= 0 or self.gap <= 0:
            raise MeshError("cell_side and gap must be positive")
        if self.levels < 0:
            raise MeshError("levels must be >= 0")
        ratio = self.cell_side / self.gap
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise MeshError(
                f"cell_side ({self.cell_side}) must be a positive integer "
                f"multiple of gap ({self.gap})")

    @property
    def elements_per_cell_side(self) -> int:
        return int(round(self.cell_side / self.gap))

    @property
    def n_cells(self) -> int:
        return self.cells_per_axis ** 3

    @property
    def box_side(self) -> float:
        n = self.cells_per_axis
        return n * self.cell_side + (n + 1) * self.gap


@dataclass
class HexMesh:
    """One level of the hierarchy; plain arrays, immutable by convention."""

    level: int
    h: float                      # element edge length
    lattice_dims: int             # elements per axis of the bounding lattice
    vertices: np.ndarray          # (nv, 3) float
    vertex_lattice: np.ndarray    # (nv, 3) int, coords in vertex lattice units
    elements: np.ndarray          # (ne, 8) int, VTK ordering
    elem_ijk: np.ndarray          # (ne, 3) int, lattice coords of low corner
    boundary_faces: np.ndarray    # (nf, 3) int: element, local face, tag
    parent_map: np.ndarray | None = None   # (ne, 2): parent element, child 0..7
    _vertex_codes: np.ndarray = field(default=None, repr=False)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    def encode(self, ijk: np.ndarray) -> np.ndarray:
        m = self.lattice_dims + 1
        return ijk[..., 0] + m * (ijk[..., 1] + m * ijk[..., 2])

    def vertex_index(self, ijk: np.ndarray) -> np.ndarray:
        """Map vertex lattice coords to vertex ids; raises if absent."""
        codes = self.encode(np.asarray(ijk, dtype=np.int64))
        pos = np.searchsorted(self._vertex_codes, codes)
        ok = (pos < len(self._vertex_codes)) & (
            self._vertex_codes[np.minimum(pos, len(self._vertex_codes) - 1)] == codes)
        if not np.all(ok):
            raise MeshError("vertex lattice coordinates not present in mesh")
        return pos

    def face_area(self) -> float:
        return self.h * self.h


def _mesh_from_elements(level, h, lattice_dims, elem_ijk, boundary_faces,
                        parent_map=None):
    """Build vertex arrays and connectivity from element lattice coords."""
    corner_ijk = elem_ijk[:, None, :] + VERTEX_OFFSETS[None, :, :]   # (ne,8,3)
    m = lattice_dims + 1
    codes = corner_ijk[..., 0] + m * (corner_ijk[..., 1] + m * corner_ijk[..., 2])
    unique_codes, inverse = np.unique(codes, return_inverse=True)
    elements = inverse.reshape(codes.shape).astype(np.int64)
    k, rem = np.divmod(unique_codes, m * m)
    j, i = np.divmod(rem, m)
    vertex_lattice = np.stack([i, j, k], axis=1).astype(np.int64)
    vertices = vertex_lattice.astype(np.float64) * h
    return HexMesh(level=level, h=h, lattice_dims=lattice_dims,
                   vertices=vertices, vertex_lattice=vertex_lattice,
                   elements=elements, elem_ijk=elem_ijk,
                   boundary_faces=boundary_faces, parent_map=parent_map,
                   _vertex_codes=unique_codes)


def build_root_mesh(config: MeshConfig) -> HexMesh:
    """Root grid: the box lattice with the hole elements removed.

    Every removed-element face shared with a kept element is tagged with the
    owning hole's id; exterior box faces get TAG_OUTER.
    """
    n = config.cells_per_axis
    c = config.elements_per_cell_side
    m = n * c + (n + 1)            # elements per axis
    hole_id = np.zeros((m, m, m), dtype=np.int64)   # indexed [ix, iy, iz]
    for iz in range(n):
        for iy in range(n):
            for ix in range(n):
                tag = 1 + ix + n * iy + n * n * iz
                sx, sy, sz = (1 + ix * (c + 1), 1 + iy * (c + 1), 1 + iz * (c + 1))
                hole_id[sx:sx + c, sy:sy + c, sz:sz + c] = tag

    kept = np.argwhere(hole_id == 0)               # (ne, 3) in ix,iy,iz order
    # deterministic ordering: x fastest
    order = np.lexsort((kept[:, 0], kept[:, 1], kept[:, 2]))
    elem_ijk = kept[order].astype(np.int64)

    faces = []
    for e, (ix, iy, iz) in enumerate(elem_ijk):
        for f, (axis, direction) in enumerate(FACE_AXIS_DIR):
            nb = [ix, iy, iz]
            nb[axis] += 1 if direction else -1
            if nb[axis] < 0 or nb[axis] >= m:
                faces.append((e, f, TAG_OUTER))
            else:
                t = hole_id[nb[0], nb[1], nb[2]]
                if t > 0:
                    faces.append((e, f, int(t)))
    boundary_faces = np.array(faces, dtype=np.int64).reshape(-1, 3)
    return _mesh_from_elements(0, config.gap, m, elem_ijk, boundary_faces)


# child ordering within a parent: x fastest, matching VERTEX_OFFSETS order of
# the 2x2x2 sub-lattice low corners
CHILD_OFFSETS = np.array(
    [[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0],
     [0, 0, 1], [1, 0, 1], [0, 1, 1], [1, 1, 1]], dtype=np.int64)


def refine(mesh: HexMesh) -> HexMesh:
    """Split every hexahedron into 8 congruent children; tags are inherited."""
    ne = mesh.n_elements
    child_ijk = (2 * mesh.elem_ijk[:, None, :] + CHILD_OFFSETS[None, :, :])
    elem_ijk = child_ijk.reshape(-1, 3)
    parent = np.repeat(np.arange(ne, dtype=np.int64), 8)
    child_idx = np.tile(np.arange(8, dtype=np.int64), ne)
    parent_map = np.stack([parent, child_idx], axis=1)

    faces = []
    for e, f, tag in mesh.boundary_faces:
        axis, direction = FACE_AXIS_DIR[f]
        # the 4 children adjacent to that parent face keep the face and tag
        sel = CHILD_OFFSETS[:, axis] == direction
        for ci in np.nonzero(sel)[0]:
            faces.append((8 * e + ci, f, tag))
    boundary_faces = np.array(faces, dtype=np.int64).reshape(-1, 3)
    return _mesh_from_elements(mesh.level + 1, mesh.h / 2.0,
                               2 * mesh.lattice_dims, elem_ijk,
                               boundary_faces, parent_map)


@dataclass
class DofMap:
    """Q1 nodal indexing per level: PDE dof = vertex id."""

    n_pde: int
    n_ode: int
    boundary_dofs: dict[int, np.ndarray]   # hole tag -> sorted vertex ids

    @classmethod
    def build(cls, mesh: HexMesh, n_cells: int) -> "DofMap":
        bdofs = {}
        for tag in range(1, n_cells + 1):
            rows = mesh.boundary_faces[mesh.boundary_faces[:, 2] == tag]
            verts = mesh.elements[rows[:, 0][:, None],
                                  FACE_VERTICES[rows[:, 1]]]
            bdofs[tag] = np.unique(verts)
        return cls(n_pde=mesh.n_vertices, n_ode=3 * n_cells,
                   boundary_dofs=bdofs)


@dataclass
class MeshHierarchy:
    """Root + L refinements with dof maps and intergrid transfer matrices."""

    config: MeshConfig
    meshes: list[HexMesh]
    dofmaps: list[DofMap]
    prolongations: list[sp.csr_matrix]   # prolongations[l]: level l -> l+1

    @property
    def levels(self) -> int:
        return len(self.meshes) - 1

    @property
    def n_cells(self) -> int:
        return self.config.n_cells

    def fine_to_coarse_injection(self, u: np.ndarray, from_level: int,
                                 to_level: int) -> np.ndarray:
        """Nodal injection: coarse vertices are a subset of fine vertices."""
        if to_level > from_level:
            raise MeshError("injection goes to a coarser (lower) level")
        for l in range(from_level, to_level, -1):
            fine, coarse = self.meshes[l], self.meshes[l - 1]
            u = u[fine.vertex_index(2 * coarse.vertex_lattice)]
        return u


def _build_prolongation(coarse: HexMesh, fine: HexMesh) -> sp.csr_matrix:
    """Q1 interpolation matrix from the nested-lattice embedding."""
    vl = fine.vertex_lattice
    base = vl // 2
    parity = vl - 2 * base                       # 0 or 1 per axis
    rows, cols, vals = [], [], []
    # corners of the minimal coarse face/edge/cell containing each fine vertex
    for dx in (0, 1):
        for dy in (0, 1):
            for dz in (0, 1):
                d = np.array([dx, dy, dz])
                # weight 1/2 on odd axes, 1 on even axes with offset 0
                w = np.where(parity == 1, 0.5, np.where(d == 0, 1.0, 0.0))
                weight = w.prod(axis=1)
                mask = weight > 0
                if not np.any(mask):
                    continue
                target = base[mask] + d
                cols.append(coarse.vertex_index(target))
                rows.append(np.nonzero(mask)[0])
                vals.append(weight[mask])
    P = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(fine.n_vertices, coarse.n_vertices))
    return P.tocsr()


def build_hierarchy(config: MeshConfig) -> MeshHierarchy:
    meshes = [build_root_mesh(config)]
    for _ in range(config.levels):
        meshes.append(refine(meshes[-1]))
    dofmaps = [DofMap.build(m, config.n_cells) for m in meshes]
    prolongations = [_build_prolongation(meshes[l], meshes[l + 1])
                     for l in range(config.levels)]
    return MeshHierarchy(config=config, meshes=meshes, dofmaps=dofmaps,
                         prolongations=prolongations)


def tagged_area(mesh: HexMesh, tag: int) -> float:
    """Total area of the boundary faces carrying a tag."""
    count = int(np.sum(mesh.boundary_faces[:, 2] == tag))
    return count * mesh.face_area()
