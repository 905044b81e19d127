import numpy as np
import pytest

from core.errors import OnSegmentError
from core.greens import (
    FOUR_PI,
    LineSegment,
    LineSourceNetwork,
    distance_to_network,
    eval_G,
    eval_ps,
    eval_psi_r,
    eval_ws,
    grad_G,
    segment_integral,
    single_layer_quadrature,
    verify_weak_laplacian,
)
from studies.verify import bubble, bubble_grad, default_network, fd_gradient, fd_laplacian, sample_points

A = np.array([0.5, 0.8, 0.5])
B = np.array([0.5, 0.2, 0.5])


def unit_network(*segments):
    return LineSourceNetwork.with_time_profile(list(segments), lambda t: 1.0, lambda t: 0.0)


def box_bump(lo, hi):
    lo, hi = np.asarray(lo), np.asarray(hi)

    def v(x):
        inside = np.all((x > lo) & (x < hi), axis=-1)
        return np.where(inside, np.prod((x - lo) * (hi - x), axis=-1), 0.0)

    def grad_v(x):
        inside = np.all((x > lo) & (x < hi), axis=-1)
        q = (x - lo) * (hi - x)
        dq = (hi - x) - (x - lo)
        g = np.stack([
            dq[..., 0] * q[..., 1] * q[..., 2],
            q[..., 0] * dq[..., 1] * q[..., 2],
            q[..., 0] * q[..., 1] * dq[..., 2],
        ], axis=-1)
        return np.where(inside[..., None], g, 0.0)

    return v, grad_v


@pytest.mark.greens
class TestLineSegment:

    def test_geometry(self):
        seg = LineSegment(A, B)
        assert seg.L == pytest.approx(0.6)
        assert np.allclose(seg.gamma, [0.0, -1.0, 0.0])
        assert np.allclose(seg.midpoint, [0.5, 0.5, 0.5])

    def test_degenerate_segment_rejected(self):
        with pytest.raises(ValueError):
            LineSegment(A, A.copy())

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            LineSegment(A, np.array([np.nan, 0.0, 0.0]))


@pytest.mark.greens
class TestClosedForm:

    @pytest.fixture(autouse=True)
    def _setup(self):
        self.network = unit_network(LineSegment(A, B))

    def test_midpoint_perpendicular_value(self):
        # G = asinh(L / (2 rho)) / (2 pi) on the perpendicular bisector
        x = np.array([0.6, 0.5, 0.5])
        expected = np.arcsinh(0.3 / 0.1) / (2 * np.pi)
        assert float(eval_G(self.network, x)) == pytest.approx(expected, rel=1e-13)

    def test_on_axis_beyond_endpoint(self):
        x = np.array([0.5, 0.9, 0.5])
        expected = np.log(0.7 / 0.1) / FOUR_PI
        assert float(eval_G(self.network, x)) == pytest.approx(expected, rel=1e-13)

    def test_symmetric_in_endpoints(self, rng):
        reversed_net = unit_network(LineSegment(B, A))
        x = rng.random((50, 3))
        assert np.allclose(eval_G(self.network, x), eval_G(reversed_net, x), rtol=1e-12)

    def test_far_field_is_point_source(self):
        x = np.array([0.5, 0.5, 1000.5])
        assert float(eval_G(self.network, x)) == pytest.approx(0.6 / (FOUR_PI * 1000.0), rel=1e-6)

    def test_points_near_axis_stay_finite(self):
        x = np.array([[0.5 + 1e-9, 0.5, 0.5], [0.5, 0.95, 0.5 + 1e-12], [0.5, 0.05, 0.5]])
        assert np.all(np.isfinite(eval_G(self.network, x)))
        assert np.all(np.isfinite(grad_G(self.network, x)))

    def test_on_segment_signalled(self):
        with pytest.raises(OnSegmentError) as err:
            eval_G(self.network, np.array([[0.1, 0.1, 0.1], [0.5, 0.5, 0.5]]))
        assert np.allclose(err.value.points, [[0.5, 0.5, 0.5]])
        with pytest.raises(OnSegmentError):
            grad_G(self.network, A)

    def test_vectorised_shapes(self, rng):
        x = rng.random((4, 5, 3))
        assert eval_G(self.network, x).shape == (4, 5)
        assert grad_G(self.network, x).shape == (4, 5, 3)

    def test_superposition(self, rng):
        upper = LineSegment(A, np.array([0.5, 0.5, 0.5]))
        lower = LineSegment(np.array([0.5, 0.5, 0.5]), B)
        split = unit_network(upper, lower)
        x = sample_points(self.network, 40, 0.05)
        assert np.allclose(eval_G(split, x), eval_G(self.network, x), rtol=1e-12)
        assert np.allclose(grad_G(split, x), grad_G(self.network, x), rtol=1e-10, atol=1e-12)

    def test_distance(self):
        pts = np.array([[0.6, 0.5, 0.5], [0.5, 1.0, 0.5], [0.5, 0.0, 0.5]])
        assert np.allclose(distance_to_network(self.network, pts), [0.1, 0.2, 0.2])


@pytest.mark.greens
@pytest.mark.oracle
class TestOracles:

    @pytest.fixture(autouse=True)
    def _setup(self):
        self.network = default_network()

    def test_matches_adaptive_quadrature(self):
        pts = sample_points(self.network, 100, 0.05)
        quad = np.array([single_layer_quadrature(self.network, p) for p in pts])
        assert np.max(np.abs(eval_G(self.network, pts) - quad)) < 1e-10

    def test_gradient_matches_central_differences(self):
        pts = sample_points(self.network, 100, 0.05, seed=3)
        grads = grad_G(self.network, pts)
        fd = fd_gradient(self.network, pts)
        rel = np.linalg.norm(fd - grads, axis=1) / np.linalg.norm(grads, axis=1)
        assert np.max(rel) < 1e-6

    def test_harmonic_away_from_segment(self):
        pts = sample_points(self.network, 50, 0.1, seed=5)
        lap = fd_laplacian(self.network, pts)
        assert np.all(np.abs(lap) < 1e-4 * np.abs(eval_G(self.network, pts)))

    def test_weak_laplacian_converges(self):
        residuals = [verify_weak_laplacian(self.network, bubble, bubble_grad, n=n) for n in (4, 8, 16)]
        assert residuals[0] > residuals[1] > residuals[2]
        assert residuals[-1] < 1e-4

    def test_segment_integral_of_bubble(self):
        # v = (1/4)(1/4) y(1-y) on the segment
        expected = 0.0625 * ((0.8 ** 2 / 2 - 0.8 ** 3 / 3) - (0.2 ** 2 / 2 - 0.2 ** 3 / 3))
        assert segment_integral(self.network, bubble) == pytest.approx(expected, rel=1e-12)

    def test_weak_laplacian_with_disjoint_support(self):
        v, grad_v = box_bump([0.125, 0.375, 0.125], [0.375, 0.625, 0.375])
        assert segment_integral(self.network, v) == 0.0
        assert verify_weak_laplacian(self.network, v, grad_v, n=16) < 1e-6


@pytest.mark.greens
class TestSingularFields:

    @pytest.fixture(autouse=True)
    def _setup(self):
        self.network = LineSourceNetwork.with_time_profile([LineSegment(A, B)], np.sin, np.cos)
        self.kappa = 1.57e-2
        self.x = np.array([[0.2, 0.3, 0.7], [0.9, 0.1, 0.4]])

    def test_ps_scales_with_intensity_and_kappa(self):
        t = 0.7
        G = eval_G(self.network, self.x)
        assert np.allclose(eval_ps(self.network, self.x, t, self.kappa), np.sin(t) * G / self.kappa)

    def test_ws_is_minus_kappa_grad_ps(self):
        t = 0.7
        ws = eval_ws(self.network, self.x, t, self.kappa)
        assert np.allclose(ws, -np.sin(t) * grad_G(self.network, self.x))

    def test_zero_intensity_gives_zero_fields(self):
        assert np.all(eval_ps(self.network, self.x, 0.0, self.kappa) == 0.0)
        assert np.all(eval_ws(self.network, self.x, 0.0, self.kappa) == 0.0)

    def test_psi_r_subtracts_time_derivative(self):
        M, t = 3.9e7, 0.3
        psi = lambda x, tt: np.ones(x.shape[:-1])
        G = eval_G(self.network, self.x)
        expected = 1.0 - np.cos(t) * G / (self.kappa * M)
        assert np.allclose(eval_psi_r(self.network, self.x, t, self.kappa, M, psi), expected, rtol=1e-14)

    def test_spatially_varying_intensity(self):
        # f(x) = x_0: psi_r picks up 2 grad G . grad f, lap f = 0
        network = LineSourceNetwork(
            segments=[LineSegment(A, B)],
            intensity=lambda x, t: x[..., 0],
            intensity_grad=lambda x, t: np.broadcast_to([1.0, 0.0, 0.0], x.shape),
        )
        grads = grad_G(network, self.x)
        expected = 2.0 * grads[:, 0]
        assert np.allclose(eval_psi_r(network, self.x, 0.0, self.kappa, 1.0), expected)
        ws = eval_ws(network, self.x, 0.0, self.kappa)
        assert np.allclose(ws, -(self.x[:, :1] * grads + eval_G(network, self.x)[:, None] * [1.0, 0.0, 0.0]))

    def test_scaled_network_doubles_fields(self):
        doubled = self.network.scaled(2.0)
        t = 1.1
        assert np.allclose(eval_ps(doubled, self.x, t, self.kappa), 2 * eval_ps(self.network, self.x, t, self.kappa))
