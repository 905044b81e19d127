"""Line-source Green's function and the singular pressure/flux fields.

For a straight segment with endpoints a, b, length L and unit tangent
gamma, ``G`` is the single-layer potential of the segment; it solves
``-Laplace G = delta_Lambda`` weakly and diverges logarithmically on the
segment. The singular fields are ``p_s = f G / kappa`` and
``w_s = -kappa grad p_s``.

All functions accept points of shape ``(..., 3)`` and are vectorised
over the leading axes.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad

import config
from core.errors import OnSegmentError
from core.mesh import build_structured_tet_mesh
from core.quadrature import line_rule, tet_rule

FOUR_PI = 4.0 * np.pi

ScalarField = Callable[[np.ndarray, float], np.ndarray]
VectorField = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class LineSegment:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).reshape(3)
        b = np.asarray(self.b, dtype=float).reshape(3)
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("segment endpoints must be finite")
        if np.linalg.norm(b - a) <= 0.0:
            raise ValueError(f"degenerate segment with a == b == {a}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def L(self) -> float:
        return float(np.linalg.norm(self.b - self.a))

    @property
    def gamma(self) -> np.ndarray:
        return (self.b - self.a) / self.L

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.a + self.b)


def _zero_scalar(x, t):
    return np.zeros(np.shape(x)[:-1])


def _zero_vector(x, t):
    return np.zeros(np.shape(x))


@dataclass(frozen=True)
class LineSourceNetwork:
    """Straight segments with an intensity f(x, t) extended to the domain.

    The callbacks take points ``(..., 3)`` and a time and return arrays of
    shape ``(...)`` (``intensity_grad`` returns ``(..., 3)``).
    """

    segments: tuple
    intensity: ScalarField
    intensity_dt: ScalarField = _zero_scalar
    intensity_grad: VectorField = _zero_vector
    intensity_laplacian: ScalarField = _zero_scalar
    spatially_constant: bool = field(default=False)

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))

    @classmethod
    def with_time_profile(cls, segments: Sequence[LineSegment], f, df):
        """Network whose intensity depends on time only (constant extension)."""
        def intensity(x, t):
            return np.full(np.shape(x)[:-1], float(f(t)))

        def intensity_dt(x, t):
            return np.full(np.shape(x)[:-1], float(df(t)))

        return cls(
            segments=tuple(segments),
            intensity=intensity,
            intensity_dt=intensity_dt,
            spatially_constant=True,
        )

    def scaled(self, factor: float) -> "LineSourceNetwork":
        return LineSourceNetwork(
            segments=self.segments,
            intensity=lambda x, t: factor * self.intensity(x, t),
            intensity_dt=lambda x, t: factor * self.intensity_dt(x, t),
            intensity_grad=lambda x, t: factor * self.intensity_grad(x, t),
            intensity_laplacian=lambda x, t: factor * self.intensity_laplacian(x, t),
            spatially_constant=self.spatially_constant,
        )


def _segment_terms(seg: LineSegment, x: np.ndarray):
    gamma = seg.gamma
    da = x - seg.a
    db = x - seg.b
    r_a = np.linalg.norm(da, axis=-1)
    r_b = np.linalg.norm(db, axis=-1)
    s_a = -da @ gamma  # gamma . (a - x)
    s_b = -db @ gamma
    perp = da - (da @ gamma)[..., None] * gamma
    rho2 = np.einsum("...i,...i->...", perp, perp)
    return r_a, r_b, s_a, s_b, da, db, perp, rho2


def _distance(seg: LineSegment, r_a, r_b, s_a, s_b, rho2):
    return np.where(s_a >= 0, r_a, np.where(s_b <= 0, r_b, np.sqrt(rho2)))


def _check_off_segment(network, x, dists):
    bad = dists <= config.ON_SEGMENT_TOL
    if np.any(bad):
        pts = np.asarray(x)[bad]
        raise OnSegmentError(
            f"{pts.shape[0]} evaluation point(s) lie on a line segment, e.g. {pts[0]}",
            points=pts,
        )


def distance_to_network(network: LineSourceNetwork, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape[:-1], np.inf)
    for seg in network.segments:
        r_a, r_b, s_a, s_b, _, _, _, rho2 = _segment_terms(seg, x)
        out = np.minimum(out, _distance(seg, r_a, r_b, s_a, s_b, rho2))
    return out


def _log_pieces(r, s):
    # ln(r + s) for s >= 0, and -ln(r - s) (the conjugate form without ln rho^2) otherwise
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(s >= 0, np.log(np.maximum(r + s, 0.0)), -np.log(np.maximum(r - s, 0.0)))


def eval_G(network: LineSourceNetwork, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    total = np.zeros(x.shape[:-1])
    for seg in network.segments:
        r_a, r_b, s_a, s_b, _, _, _, rho2 = _segment_terms(seg, x)
        _check_off_segment(network, x, _distance(seg, r_a, r_b, s_a, s_b, rho2))
        within = (s_a < 0) & (s_b >= 0)
        with np.errstate(divide="ignore"):
            log_rho2 = np.log(np.where(within, rho2, 1.0))
        total += (_log_pieces(r_b, s_b) - _log_pieces(r_a, s_a) - log_rho2) / FOUR_PI
    return total


def _grad_log_piece(r, s, d, gamma):
    e = d / r[..., None]
    plus = (e - gamma) / np.where(s >= 0, r + s, 1.0)[..., None]
    minus = -(e + gamma) / np.where(s < 0, r - s, 1.0)[..., None]
    return np.where((s >= 0)[..., None], plus, minus)


def grad_G(network: LineSourceNetwork, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    total = np.zeros(x.shape)
    for seg in network.segments:
        gamma = seg.gamma
        r_a, r_b, s_a, s_b, da, db, perp, rho2 = _segment_terms(seg, x)
        _check_off_segment(network, x, _distance(seg, r_a, r_b, s_a, s_b, rho2))
        within = (s_a < 0) & (s_b >= 0)
        grad_log_rho2 = 2.0 * perp / np.where(within, rho2, 1.0)[..., None]
        g = _grad_log_piece(r_b, s_b, db, gamma) - _grad_log_piece(r_a, s_a, da, gamma)
        g -= np.where(within[..., None], grad_log_rho2, 0.0)
        total += g / FOUR_PI
    return total


def eval_ps(network: LineSourceNetwork, x, t: float, kappa: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return network.intensity(x, t) * eval_G(network, x) / kappa


def eval_ws(network: LineSourceNetwork, x, t: float, kappa: float) -> np.ndarray:
    # -kappa grad(f G / kappa) with constant kappa
    x = np.asarray(x, dtype=float)
    f = network.intensity(x, t)
    out = -f[..., None] * grad_G(network, x)
    if not network.spatially_constant:
        out -= eval_G(network, x)[..., None] * network.intensity_grad(x, t)
    return out


def eval_psi_r(network: LineSourceNetwork, x, t: float, kappa: float, M: float, psi=None) -> np.ndarray:
    """Regularised source psi - dt(p_s)/M + G lap(f) + 2 grad(G).grad(f)."""
    x = np.asarray(x, dtype=float)
    G = eval_G(network, x)
    out = -network.intensity_dt(x, t) * G / (kappa * M)
    if psi is not None:
        out = psi(x, t) + out
    if not network.spatially_constant:
        out = out + G * network.intensity_laplacian(x, t)
        out = out + 2.0 * np.einsum("...i,...i->...", grad_G(network, x), network.intensity_grad(x, t))
    return out


def single_layer_quadrature(network: LineSourceNetwork, x, epsabs=1e-14, epsrel=1e-13) -> float:
    """Adaptive quadrature of sum_i int_{Lambda_i} 1 / (4 pi |x - y|) ds."""
    x = np.asarray(x, dtype=float).reshape(3)
    total = 0.0
    for seg in network.segments:
        L, gamma = seg.L, seg.gamma
        foot = float(np.clip((x - seg.a) @ gamma, 0.0, L))
        breaks = [foot] if 0.0 < foot < L else None
        val, _ = quad(
            lambda s: 1.0 / (FOUR_PI * np.linalg.norm(x - seg.a - s * gamma)),
            0.0, L, points=breaks, epsabs=epsabs, epsrel=epsrel, limit=200,
        )
        total += val
    return total


def segment_integral(network: LineSourceNetwork, v, degree: int = 20) -> float:
    """Gauss-Legendre approximation of int_Lambda v dS for a smooth v(x)."""
    s, w = line_rule(degree)
    total = 0.0
    for seg in network.segments:
        pts = seg.a + s[:, None] * (seg.b - seg.a)
        total += seg.L * float(np.dot(w, v(pts)))
    return total


def verify_weak_laplacian(network: LineSourceNetwork, v, grad_v, n: int = 8, degree: int = 5) -> float:
    """|int_Omega grad G . grad v - int_Lambda v dS| on the unit cube.

    The volume integral uses a composite tetrahedral rule of the given
    degree on the structured n-division mesh; refine with n or degree.
    ``v`` must vanish on the boundary of the cube.
    """
    mesh = build_structured_tet_mesh(n)
    bary, w = tet_rule(degree)
    volume_term = 0.0
    # chunk over cells to bound memory
    for start in range(0, mesh.n_cells, 20000):
        cells = slice(start, start + 20000)
        pts = mesh.cells_points(bary, cells)
        integrand = np.einsum("cqi,cqi->cq", grad_G(network, pts), grad_v(pts))
        volume_term += float(np.einsum("c,q,cq->", mesh.volumes[cells], w, integrand))
    line_term = segment_integral(network, v)
    residual = abs(volume_term - line_term)
    logging.info(
        f"Weak Laplacian check n={n} degree={degree}: volume={volume_term:.10e} "
        f"line={line_term:.10e} residual={residual:.3e}"
    )
    return residual
