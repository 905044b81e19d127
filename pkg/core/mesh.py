import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

import config
from core.errors import MeshError

# local face i of a cell is opposite local vertex i
LOCAL_FACES = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])

# Kuhn split of a sub-cube along its main diagonal v0 -> v7
_KUHN_TETS = np.array([
    [0, 1, 3, 7],
    [0, 1, 7, 5],
    [0, 5, 7, 4],
    [0, 3, 2, 7],
    [0, 6, 4, 7],
    [0, 2, 6, 7],
])


@dataclass(frozen=True)
class Mesh:
    """Tetrahedral mesh with globally oriented faces.

    ``faces`` hold sorted vertex ids; the global unit normal of a face is
    ``(x1 - x0) x (x2 - x0)`` normalised. ``cell_face_signs[c, i]`` is +1
    when that normal points out of cell ``c`` through its local face ``i``.
    All arrays are read-only.
    """

    vertices: np.ndarray
    cells: np.ndarray
    faces: np.ndarray
    cell_to_face: np.ndarray
    cell_face_signs: np.ndarray
    boundary_faces: np.ndarray
    volumes: np.ndarray
    face_areas: np.ndarray
    face_normals: np.ndarray
    h: float
    n: int = 0

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def n_faces(self) -> int:
        return self.faces.shape[0]

    @property
    def boundary_vertex_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.faces[self.boundary_faces].ravel()] = True
        return mask

    @property
    def cell_centroids(self) -> np.ndarray:
        return self.vertices[self.cells].mean(axis=1)

    @property
    def face_centroids(self) -> np.ndarray:
        return self.vertices[self.faces].mean(axis=1)

    def jacobians(self) -> np.ndarray:
        """Affine maps of the reference tetrahedron, columns x_k - x_0."""
        x = self.vertices[self.cells]
        return np.transpose(x[:, 1:, :] - x[:, :1, :], (0, 2, 1))

    def barycentric_gradients(self) -> np.ndarray:
        """(n_cells, 4, 3) constant gradients of the P1 hat functions."""
        inv = np.linalg.inv(self.jacobians())
        grads = np.empty((self.n_cells, 4, 3))
        grads[:, 1:, :] = inv
        grads[:, 0, :] = -inv.sum(axis=1)
        return grads

    def cells_points(self, bary: np.ndarray, cells=slice(None)) -> np.ndarray:
        """Physical points (n_cells, q, 3) for barycentric coordinates (q, 4)."""
        return np.einsum("qa,cad->cqd", bary, self.vertices[self.cells[cells]])

    def faces_points(self, bary: np.ndarray, faces=None) -> np.ndarray:
        faces = self.faces if faces is None else self.faces[faces]
        return np.einsum("qa,fad->fqd", bary, self.vertices[faces])


class CellGeometry(NamedTuple):
    volume: float
    jacobian: np.ndarray
    normals: np.ndarray  # outward unit normals, local face order
    areas: np.ndarray


def _signed_volumes(vertices, cells):
    x = vertices[cells]
    d = x[:, 1:, :] - x[:, :1, :]
    return np.einsum("ci,ci->c", d[:, 0], np.cross(d[:, 1], d[:, 2])) / 6.0


def _frozen(*arrays):
    for a in arrays:
        a.setflags(write=False)


def mesh_from_cells(vertices, cells, h: float, n: int = 0) -> Mesh:
    """Build connectivity and face orientation for an arbitrary tet list."""
    vertices = np.array(vertices, dtype=float)
    cells = np.array(cells, dtype=np.int64)
    if cells.ndim != 2 or cells.shape[1] != 4:
        raise MeshError(f"cells must have shape (n, 4), got {cells.shape}")

    vol = _signed_volumes(vertices, cells)
    flip = vol < 0
    cells[flip, 2], cells[flip, 3] = cells[flip, 3].copy(), cells[flip, 2].copy()
    vol = np.abs(vol)
    if np.any(vol <= 0):
        raise MeshError("degenerate cell with zero volume")

    local = np.sort(cells[:, LOCAL_FACES], axis=2).reshape(-1, 3)
    faces, inverse, counts = np.unique(local, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(cells.shape[0], 4)
    if np.any(counts > 2):
        raise MeshError("non-manifold face shared by more than two cells")

    x = vertices[faces]
    cross = np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0])
    areas = 0.5 * np.linalg.norm(cross, axis=1)
    normals = cross / (2.0 * areas)[:, None]

    # outward when the opposite vertex is behind the face plane
    opposite = vertices[cells]
    face_x0 = vertices[faces[inverse, 0]]
    side = np.einsum("cid,cid->ci", normals[inverse], face_x0 - opposite)
    signs = np.where(side > 0, 1, -1).astype(np.int8)

    boundary = np.flatnonzero(counts == 1)
    _frozen(vertices, cells, faces, inverse, signs, boundary, vol, areas, normals)
    return Mesh(
        vertices=vertices,
        cells=cells,
        faces=faces,
        cell_to_face=inverse,
        cell_face_signs=signs,
        boundary_faces=boundary,
        volumes=vol,
        face_areas=areas,
        face_normals=normals,
        h=float(h),
        n=n,
    )


def build_structured_tet_mesh(n: int) -> Mesh:
    """Unit cube split into n^3 sub-cubes of 6 Kuhn tetrahedra each."""
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
        raise MeshError(f"mesh divisions must be an integer, got {n!r}")
    if n < 1:
        raise MeshError(f"mesh divisions must be >= 1, got {n}")
    if n > config.MAX_MESH_DIVISIONS:
        raise MeshError(f"mesh divisions {n} exceed the limit of {config.MAX_MESH_DIVISIONS}")
    n = int(n)

    ticks = np.linspace(0.0, 1.0, n + 1)
    zz, yy, xx = np.meshgrid(ticks, ticks, ticks, indexing="ij")
    vertices = np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])

    s = n + 1
    k, j, i = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    v0 = (i + s * j + s * s * k).ravel()
    corners = np.column_stack([
        v0, v0 + 1, v0 + s, v0 + s + 1,
        v0 + s * s, v0 + s * s + 1, v0 + s * s + s, v0 + s * s + s + 1,
    ])
    cells = corners[:, _KUHN_TETS].reshape(-1, 4)

    mesh = mesh_from_cells(vertices, cells, h=1.0 / n, n=n)
    logging.info(
        f"Built structured mesh n={n}: {mesh.n_vertices} vertices, "
        f"{mesh.n_cells} cells, {mesh.n_faces} faces"
    )
    return mesh


def cell_geometry(mesh: Mesh, cell_id: int) -> CellGeometry:
    if not 0 <= cell_id < mesh.n_cells:
        raise MeshError(f"invalid cell id {cell_id} for mesh with {mesh.n_cells} cells")
    x = mesh.vertices[mesh.cells[cell_id]]
    jac = (x[1:] - x[0]).T
    fids = mesh.cell_to_face[cell_id]
    signs = mesh.cell_face_signs[cell_id].astype(float)
    normals = mesh.face_normals[fids] * signs[:, None]
    return CellGeometry(
        volume=float(mesh.volumes[cell_id]),
        jacobian=jac,
        normals=normals,
        areas=mesh.face_areas[fids].copy(),
    )
