"""Closed-form vs independent-oracle checks behind the ``verify`` command."""
import logging
from typing import List

import numpy as np
from pydantic import BaseModel

import config
from core.fem import (
    assemble_coupling_div_u,
    assemble_coupling_p_div_v,
    assemble_div,
    assemble_elasticity,
    assemble_rt0_mass,
    build_dof_maps,
    interpolate_rt0,
)
from core.greens import (
    LineSegment,
    LineSourceNetwork,
    distance_to_network,
    eval_G,
    grad_G,
    single_layer_quadrature,
    verify_weak_laplacian,
)
from core.mesh import build_structured_tet_mesh
from core.params import MaterialParams

FD_STEP = 1e-6
LAPLACE_STEPS = (2e-3, 1e-3)


class CheckResult(BaseModel):
    name: str
    value: float
    threshold: float
    passed: bool


def _check(name, value, threshold) -> CheckResult:
    result = CheckResult(name=name, value=float(value), threshold=threshold, passed=bool(value < threshold))
    level = logging.INFO if result.passed else logging.ERROR
    logging.log(level, f"{'PASS' if result.passed else 'FAIL'} {name}: {value:.3e} (< {threshold:.1e})")
    return result


def default_network() -> LineSourceNetwork:
    seg = LineSegment(np.array(config.SEGMENT_A), np.array(config.SEGMENT_B))
    return LineSourceNetwork.with_time_profile([seg], lambda t: 1.0, lambda t: 0.0)


def sample_points(network, count, min_distance, seed=0) -> np.ndarray:
    """Uniform points in the unit cube at least ``min_distance`` from the segments."""
    rng = np.random.default_rng(seed)
    out = []
    while sum(len(c) for c in out) < count:
        pts = rng.random((4 * count, 3))
        out.append(pts[distance_to_network(network, pts) >= min_distance])
    return np.concatenate(out)[:count]


def fd_gradient(network, pts, step=FD_STEP) -> np.ndarray:
    grads = np.empty_like(pts)
    for k in range(3):
        e = np.zeros(3)
        e[k] = step
        grads[:, k] = (eval_G(network, pts + e) - eval_G(network, pts - e)) / (2 * step)
    return grads


def fd_laplacian(network, pts, steps=LAPLACE_STEPS) -> np.ndarray:
    """Seven-point Laplacian, Richardson-extrapolated over two spacings."""
    center = eval_G(network, pts)

    def stencil(h):
        total = -6.0 * center
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            total = total + eval_G(network, pts + e) + eval_G(network, pts - e)
        return total / h ** 2

    coarse, fine = steps
    ratio = (coarse / fine) ** 2
    return (ratio * stencil(fine) - stencil(coarse)) / (ratio - 1.0)


def bubble(x):
    return np.prod(x * (1.0 - x), axis=-1)


def bubble_grad(x):
    q = x * (1.0 - x)
    dq = 1.0 - 2.0 * x
    return np.stack([
        dq[..., 0] * q[..., 1] * q[..., 2],
        q[..., 0] * dq[..., 1] * q[..., 2],
        q[..., 0] * q[..., 1] * dq[..., 2],
    ], axis=-1)


def rigid_body_modes(vertices) -> List[np.ndarray]:
    x, y, z = vertices.T
    zero, one = np.zeros_like(x), np.ones_like(x)
    fields = [
        (one, zero, zero), (zero, one, zero), (zero, zero, one),
        (-y, x, zero), (zero, -z, y), (z, zero, -x),
    ]
    return [np.column_stack(f).ravel() for f in fields]


def _greens_checks(quick: bool) -> List[CheckResult]:
    network = default_network()
    count = 20 if quick else 100

    pts = sample_points(network, count, 0.05)
    quad = np.array([single_layer_quadrature(network, p) for p in pts])
    G = eval_G(network, pts)

    grads = grad_G(network, pts)
    fd = fd_gradient(network, pts)
    grad_err = np.linalg.norm(fd - grads, axis=1) / np.linalg.norm(grads, axis=1)

    far = sample_points(network, count, 0.1, seed=1)
    lap = np.abs(fd_laplacian(network, far)) / np.abs(eval_G(network, far))

    residuals = [verify_weak_laplacian(network, bubble, bubble_grad, n=n) for n in (4, 8, 16)]
    monotone = all(b < a for a, b in zip(residuals, residuals[1:]))

    return [
        _check("G vs adaptive quadrature", np.max(np.abs(G - quad)), 1e-10),
        _check("grad G vs central differences (relative)", np.max(grad_err), 1e-6),
        _check("harmonicity |lap G| / |G|", np.max(lap), 1e-4),
        _check("weak Laplacian residual", residuals[-1] if monotone else np.inf, 1e-4),
    ]


def _assembly_checks() -> List[CheckResult]:
    mesh = build_structured_tet_mesh(2)
    dofs = build_dof_maps(mesh)
    params = MaterialParams()
    A = assemble_elasticity(mesh, dofs, params)
    scale = abs(A).max()

    kernel = max(np.linalg.norm(A @ mode) for mode in rigid_body_modes(mesh.vertices)) / scale
    symmetry = abs(A - A.T).max() / scale

    Mw = assemble_rt0_mass(mesh, dofs, 1.0 / params.kappa)
    c = np.array([1.0, -2.0, 0.5])
    wc = interpolate_rt0(mesh, lambda x, t: np.broadcast_to(c, x.shape), 0.0)
    expected = c @ c / params.kappa
    mass_err = abs(wc @ Mw @ wc - expected) / expected

    B = assemble_div(mesh, dofs)
    div_const = np.max(np.abs(B @ wc))
    wx = interpolate_rt0(mesh, lambda x, t: x, 0.0)
    div_lin = np.max(np.abs(B @ wx - 3.0 * mesh.volumes))

    C = assemble_coupling_div_u(mesh, dofs, params.alpha)
    Ct = assemble_coupling_p_div_v(mesh, dofs, params.alpha)
    adjoint = abs(C.T - Ct).max()

    return [
        _check("elasticity rigid-body kernel", kernel, 1e-10),
        _check("elasticity symmetry", symmetry, 1e-12),
        _check("RT0 mass on constants", mass_err, 1e-10),
        _check("div of constant flux", div_const, 1e-12),
        _check("div of x", div_lin, 1e-12),
        _check("coupling adjointness", adjoint, 1e-15),
    ]


def run_oracle_suite(quick: bool = False) -> List[CheckResult]:
    logging.info(f"Running oracle suite ({'quick' if quick else 'full'})")
    results = _greens_checks(quick) + _assembly_checks()
    failed = [r.name for r in results if not r.passed]
    if failed:
        logging.error(f"{len(failed)} oracle check(s) failed: {failed}")
    else:
        logging.info(f"All {len(results)} oracle checks passed")
    return results
