"""Assembly for P1-vector displacement, P0 pressure and RT0 flux spaces.

Degrees of freedom:
  * displacement: 3 per vertex, index ``3 * vertex + component``; boundary
    vertices are fixed (u = 0) and eliminated symmetrically.
  * pressure: 1 per cell.
  * flux: 1 per face, the flux integral through the face w.r.t. its global
    normal. On cell K the basis of local face i (opposite vertex x_i) is
    ``sign * (x - x_i) / (3 |K|)``.

Callbacks take points ``(..., 3)`` and a time.
"""
import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

import config
from core.errors import OnSegmentError
from core.greens import LineSourceNetwork, eval_ps, eval_ws
from core.mesh import Mesh
from core.params import MaterialParams
from core.quadrature import line_rule, tet_rule, triangle_rule

SparseMatrix = sp.csr_matrix

SPACES = ("p0", "p1v", "p1v_div", "rt0")
CHUNK = 32768

_NUDGE_DIR = np.array([1.0, np.sqrt(2.0), np.sqrt(3.0)]) / np.sqrt(6.0)


@dataclass(frozen=True)
class DofMaps:
    mesh: Mesh
    u_index: np.ndarray       # (n_cells, 12) local (vertex, component) -> global
    u_fixed: np.ndarray       # (3 n_vertices,) essential boundary mask
    boundary_cell: np.ndarray  # owning cell of each boundary face
    boundary_sign: np.ndarray  # +1 when the global normal points out of the domain

    @property
    def n_u(self) -> int:
        return self.u_fixed.shape[0]

    @property
    def dim_V(self) -> int:
        return int(np.count_nonzero(~self.u_fixed))

    @property
    def n_p(self) -> int:
        return self.mesh.n_cells

    @property
    def n_w(self) -> int:
        return self.mesh.n_faces


def build_dof_maps(mesh: Mesh) -> DofMaps:
    u_index = (3 * mesh.cells[:, :, None] + np.arange(3)).reshape(mesh.n_cells, 12)
    u_fixed = np.repeat(mesh.boundary_vertex_mask, 3)

    flat = mesh.cell_to_face.ravel()
    _, first = np.unique(flat, return_index=True)
    owner = first[mesh.boundary_faces]
    return DofMaps(
        mesh=mesh,
        u_index=u_index,
        u_fixed=u_fixed,
        boundary_cell=owner // 4,
        boundary_sign=mesh.cell_face_signs.ravel()[owner].astype(float),
    )


# -----------------------------
# Helpers
# -----------------------------
def _chunks(n, size=CHUNK):
    for start in range(0, n, size):
        yield slice(start, min(start + size, n))


def _evaluate(mesh: Mesh, callback: Callable, pts: np.ndarray, t: float):
    """Evaluate a callback, nudging the rule if a node hits a line segment."""
    try:
        return np.asarray(callback(pts, t), dtype=float)
    except OnSegmentError as e:
        shift = config.COLLISION_NUDGE * mesh.h * _NUDGE_DIR
        logging.warning(
            f"{len(e.points)} quadrature node(s) on a line segment, "
            f"perturbing the rule by {np.linalg.norm(shift):.1e} mm"
        )
        return np.asarray(callback(pts + shift, t), dtype=float)


def _coo(rows, cols, vals, shape) -> SparseMatrix:
    return sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=shape).tocsr()


# -----------------------------
# Bilinear forms
# -----------------------------
def assemble_elasticity(mesh: Mesh, dofs: DofMaps, params: MaterialParams) -> SparseMatrix:
    """<2 mu eps(u), eps(v)> + <lambda div u, div v>, before boundary conditions."""
    mu, lam = params.mu, params.lam
    eye = np.eye(3)
    grads = mesh.barycentric_gradients()
    blocks = []
    for cs in _chunks(mesh.n_cells):
        g = grads[cs]
        gg = np.einsum("cak,cbk->cab", g, g)
        local = (
            mu * gg[:, :, None, :, None] * eye[None, None, :, None, :]
            + mu * np.einsum("caj,cbi->caibj", g, g)
            + lam * np.einsum("cai,cbj->caibj", g, g)
        )
        blocks.append(mesh.volumes[cs, None, None] * local.reshape(-1, 12, 12))
    local = np.concatenate(blocks)
    rows = np.broadcast_to(dofs.u_index[:, :, None], local.shape)
    cols = np.broadcast_to(dofs.u_index[:, None, :], local.shape)
    A = _coo(rows, cols, local, (dofs.n_u, dofs.n_u))
    logging.info(f"Assembled elasticity matrix: {A.shape[0]} dofs, {A.nnz} nonzeros")
    return A


def apply_dirichlet(A, b, fixed: np.ndarray, values=None):
    """Symmetric elimination: fixed rows/cols zeroed, unit diagonal."""
    values = np.zeros(A.shape[0]) if values is None else np.asarray(values, dtype=float)
    lifted = np.where(fixed, values, 0.0)
    b_bc = np.asarray(b, dtype=float) - A @ lifted
    b_bc[fixed] = values[fixed]
    keep = sp.diags((~fixed).astype(float))
    A_bc = (keep @ A @ keep + sp.diags(fixed.astype(float))).tocsr()
    return A_bc, b_bc


def assemble_p_mass(mesh: Mesh, dofs: DofMaps, coefficient: float) -> SparseMatrix:
    return sp.diags(coefficient * mesh.volumes).tocsr()


def assemble_rt0_mass(mesh: Mesh, dofs: DofMaps, inv_kappa: float) -> SparseMatrix:
    """<kappa^-1 w, z> in closed form (barycentric moment formula)."""
    x = mesh.vertices[mesh.cells]
    y = x - x.mean(axis=1, keepdims=True)
    sq = np.einsum("ckd,ckd->c", y, y) / 20.0
    yy = np.einsum("cid,cjd->cij", y, y)
    s = mesh.cell_face_signs.astype(float)
    local = (inv_kappa / (9.0 * mesh.volumes))[:, None, None] * s[:, :, None] * s[:, None, :] * (
        sq[:, None, None] + yy
    )
    rows = np.broadcast_to(mesh.cell_to_face[:, :, None], local.shape)
    cols = np.broadcast_to(mesh.cell_to_face[:, None, :], local.shape)
    return _coo(rows, cols, local, (mesh.n_faces, mesh.n_faces))


def assemble_div(mesh: Mesh, dofs: DofMaps) -> SparseMatrix:
    """<div w, q> for P0 q: each cell row holds the signs of its faces."""
    rows = np.repeat(np.arange(mesh.n_cells), 4)
    return _coo(rows, mesh.cell_to_face, mesh.cell_face_signs.astype(float), (mesh.n_cells, mesh.n_faces))


def assemble_coupling_div_u(mesh: Mesh, dofs: DofMaps, alpha: float) -> SparseMatrix:
    """<alpha div u, q>: P1-vector -> P0."""
    local = alpha * mesh.volumes[:, None] * mesh.barycentric_gradients().reshape(-1, 12)
    rows = np.broadcast_to(np.arange(mesh.n_cells)[:, None], local.shape)
    return _coo(rows, dofs.u_index, local, (mesh.n_cells, dofs.n_u))


def assemble_coupling_p_div_v(mesh: Mesh, dofs: DofMaps, alpha: float) -> SparseMatrix:
    """<alpha p, div v>: P0 -> P1-vector."""
    local = alpha * mesh.volumes[:, None] * mesh.barycentric_gradients().reshape(-1, 12)
    cols = np.broadcast_to(np.arange(mesh.n_cells)[:, None], local.shape)
    return _coo(dofs.u_index, cols, local, (dofs.n_u, mesh.n_cells))


# -----------------------------
# Load vectors
# -----------------------------
def assemble_load(mesh: Mesh, dofs: DofMaps, space: str, callback, t: float, degree: int) -> np.ndarray:
    """Quadrature of <f, basis> for the given space tag.

    ``p1v_div`` pairs a scalar callback with div v.
    """
    if space not in SPACES:
        raise ValueError(f"unknown space tag {space!r}, expected one of {SPACES}")
    bary, w = tet_rule(degree)
    if space == "p0":
        out = np.zeros(mesh.n_cells)
    elif space == "rt0":
        out = np.zeros(mesh.n_faces)
    else:
        out = np.zeros(dofs.n_u)
    grads = mesh.barycentric_gradients() if space == "p1v_div" else None

    for cs in _chunks(mesh.n_cells):
        x = mesh.vertices[mesh.cells[cs]]
        pts = mesh.cells_points(bary, cs)
        vals = _evaluate(mesh, callback, pts, t)
        vol = mesh.volumes[cs]
        if space == "p0":
            out[cs] = vol * (vals @ w)
        elif space == "p1v":
            local = vol[:, None, None] * np.einsum("q,cqi,qa->cai", w, vals, bary)
            out += np.bincount(dofs.u_index[cs].ravel(), local.ravel(), minlength=dofs.n_u)
        elif space == "p1v_div":
            local = (vol * (vals @ w))[:, None, None] * grads[cs]
            out += np.bincount(dofs.u_index[cs].ravel(), local.ravel(), minlength=dofs.n_u)
        else:
            rel = pts[:, :, None, :] - x[:, None, :, :]
            local = np.einsum("q,cqd,cqid->ci", w, vals, rel) / 3.0
            local *= mesh.cell_face_signs[cs]
            out += np.bincount(mesh.cell_to_face[cs].ravel(), local.ravel(), minlength=mesh.n_faces)
    return out


def assemble_boundary_pressure(mesh: Mesh, dofs: DofMaps, callback, t: float, degree: int) -> np.ndarray:
    """RT0 vector of int_{dOmega} p z.n for a boundary pressure datum p."""
    out = np.zeros(mesh.n_faces)
    if mesh.boundary_faces.size == 0:
        return out
    bary, w = triangle_rule(degree)
    pts = mesh.faces_points(bary, mesh.boundary_faces)
    vals = _evaluate(mesh, callback, pts, t)
    # z.n_out = sign / |F| on the face and int_F p = |F| * mean
    out[mesh.boundary_faces] = dofs.boundary_sign * (vals @ w)
    return out


def assemble_line_source(mesh: Mesh, network: LineSourceNetwork, t: float, n_points: int = None) -> np.ndarray:
    """P0 vector of int_Lambda f q dS (direct Dirac assembly)."""
    n_points = n_points or config.LINE_SOURCE_POINTS
    s, w = line_rule(2 * n_points - 1)
    out = np.zeros(mesh.n_cells)
    x0 = mesh.vertices[mesh.cells[:, 0]]
    inv = np.linalg.inv(mesh.jacobians())
    for seg in network.segments:
        pts = seg.a + s[:, None] * (seg.b - seg.a)
        f = np.asarray(network.intensity(pts, t), dtype=float)
        for p, weight in zip(pts, seg.L * w * f):
            lam = np.einsum("cij,cj->ci", inv, p - x0)
            lam = np.column_stack([1.0 - lam.sum(axis=1), lam])
            inside = np.flatnonzero(lam.min(axis=1) >= -1e-12)
            if inside.size == 0:
                logging.warning(f"Line-source point {p} lies outside the mesh; dropped")
                continue
            out[inside] += weight / inside.size
    return out


# -----------------------------
# Interpolation
# -----------------------------
def interpolate_p0(mesh: Mesh, callback, t: float, degree: int = config.LOAD_QUAD_DEGREE) -> np.ndarray:
    """Cell averages by quadrature."""
    bary, w = tet_rule(degree)
    out = np.empty(mesh.n_cells)
    for cs in _chunks(mesh.n_cells):
        pts = mesh.cells_points(bary, cs)
        out[cs] = _evaluate(mesh, callback, pts, t) @ w
    return out


def interpolate_rt0(mesh: Mesh, callback, t: float, degree: int = config.LOAD_QUAD_DEGREE) -> np.ndarray:
    """Face flux integrals w.r.t. the global face normals."""
    bary, w = triangle_rule(degree)
    out = np.empty(mesh.n_faces)
    for fs in _chunks(mesh.n_faces):
        pts = mesh.faces_points(bary, fs)
        vals = _evaluate(mesh, callback, pts, t)
        normal_flux = np.einsum("fqd,fd->fq", vals, mesh.face_normals[fs])
        out[fs] = mesh.face_areas[fs] * (normal_flux @ w)
    return out


def interpolate_p1v(mesh: Mesh, callback, t: float) -> np.ndarray:
    """Nodal interpolation of a vector field."""
    return np.asarray(callback(mesh.vertices, t), dtype=float).reshape(-1)


def interpolate_ps_P0(mesh: Mesh, network: LineSourceNetwork, t: float, kappa: float,
                      degree: int = config.LOAD_QUAD_DEGREE) -> np.ndarray:
    return interpolate_p0(mesh, lambda x, tt: eval_ps(network, x, tt, kappa), t, degree)


def interpolate_ws_RT0(mesh: Mesh, network: LineSourceNetwork, t: float, kappa: float,
                       degree: int = config.LOAD_QUAD_DEGREE) -> np.ndarray:
    return interpolate_rt0(mesh, lambda x, tt: eval_ws(network, x, tt, kappa), t, degree)


# -----------------------------
# Field evaluation and errors
# -----------------------------
def rt0_values(mesh: Mesh, coeffs: np.ndarray, bary: np.ndarray, cells=slice(None)) -> np.ndarray:
    """RT0 field at barycentric points, shape (n_cells, q, 3)."""
    x = mesh.vertices[mesh.cells[cells]]
    pts = mesh.cells_points(bary, cells)
    scale = mesh.cell_face_signs[cells] * coeffs[mesh.cell_to_face[cells]] / (3.0 * mesh.volumes[cells, None])
    rel = pts[:, :, None, :] - x[:, None, :, :]
    return np.einsum("cqid,ci->cqd", rel, scale)


def rt0_cell_averages(mesh: Mesh, coeffs: np.ndarray) -> np.ndarray:
    return rt0_values(mesh, coeffs, np.full((1, 4), 0.25))[:, 0, :]


def p1v_values(mesh: Mesh, coeffs: np.ndarray, bary: np.ndarray, cells=slice(None)) -> np.ndarray:
    nodal = coeffs.reshape(-1, 3)
    return np.einsum("qa,cai->cqi", bary, nodal[mesh.cells[cells]])


def l2_error(mesh: Mesh, space: str, coeffs: np.ndarray, analytic, t: float = 0.0,
             degree: int = config.LOAD_QUAD_DEGREE) -> float:
    """||analytic - discrete||_{L2(Omega)} by cell-wise quadrature."""
    if space not in ("p0", "p1v", "rt0"):
        raise ValueError(f"unknown space tag {space!r}")
    coeffs = np.asarray(coeffs, dtype=float)
    bary, w = tet_rule(degree)
    total = 0.0
    for cs in _chunks(mesh.n_cells):
        pts = mesh.cells_points(bary, cs)
        exact = _evaluate(mesh, analytic, pts, t)
        if space == "p0":
            sq = (exact - coeffs[cs, None]) ** 2
        elif space == "rt0":
            sq = np.sum((exact - rt0_values(mesh, coeffs, bary, cs)) ** 2, axis=-1)
        else:
            sq = np.sum((exact - p1v_values(mesh, coeffs, bary, cs)) ** 2, axis=-1)
        total += float(mesh.volumes[cs] @ (sq @ w))
    return float(np.sqrt(total))
