import numpy as np
import pytest

import config
from core.fem import (
    assemble_boundary_pressure,
    assemble_div,
    assemble_rt0_mass,
    build_dof_maps,
    interpolate_p0,
    interpolate_rt0,
)
from core.greens import FOUR_PI, eval_G
from core.linsolve import Factorization, SystemKind
from core.mesh import build_structured_tet_mesh
from core.params import MaterialParams
from studies.manufactured import ManufacturedCase, manufactured_sources
from studies.verify import sample_points

H = 1e-5


def central(f, x, t, k, h=H):
    e = np.zeros(3)
    e[k] = h
    return (f(x + e, t) - f(x - e, t)) / (2 * h)


@pytest.mark.harness
class TestManufacturedFields:

    @pytest.fixture(autouse=True)
    def _setup(self, case):
        self.case = case
        self.x = sample_points(case.network, 30, 0.05, seed=11)
        self.t = 0.6

    def test_flux_is_darcy_of_remainder(self):
        kappa = self.case.params.kappa
        grad = np.stack([central(self.case.p_r, self.x, self.t, k) for k in range(3)], axis=-1)
        w = self.case.w_r(self.x, self.t)
        assert np.allclose(w, -kappa * grad, rtol=1e-6, atol=1e-8 * np.abs(w).max())

    def test_distance_laplacian(self):
        # lap |x - a| = 2 / |x - a| in three dimensions
        a = self.case.segment.a
        r = lambda x, t: np.linalg.norm(x - a, axis=-1)
        h = 1e-3
        lap = sum(
            (r(self.x + e, 0) - 2 * r(self.x, 0) + r(self.x - e, 0)) / h ** 2
            for e in np.eye(3) * h
        )
        assert np.allclose(lap, 2.0 / r(self.x, 0), rtol=1e-4)

    def test_values_vanish_at_start(self):
        assert np.all(self.case.p_r(self.x, 0.0) == 0.0)
        assert np.all(self.case.u(self.x, 0.0) == 0.0)
        assert np.allclose(self.case.p(self.x, 0.0), 0.0)

    def test_displacement_vanishes_on_boundary(self, rng):
        pts = rng.random((20, 3))
        pts[:, 1] = 1.0
        assert np.all(self.case.u(pts, 0.7) == 0.0)

    def test_remainder_source_matches_balance(self):
        params = self.case.params
        M, alpha, t = params.M, params.alpha, self.t
        dt = 1e-5
        dt_p = (self.case.p_r(self.x, t + dt) - self.case.p_r(self.x, t - dt)) / (2 * dt)
        dt_div_u = (self.case.div_u(self.x, t + dt) - self.case.div_u(self.x, t - dt)) / (2 * dt)
        div_w = sum(
            central(lambda y, tt: self.case.w_r(y, tt)[..., k], self.x, t, k, h=1e-4) for k in range(3)
        )
        expected = dt_p / M + alpha * dt_div_u + div_w
        assert np.allclose(self.case.psi_r(self.x, t), expected, rtol=1e-5, atol=1e-6 * np.abs(expected).max())

    def test_full_source_adds_singular_time_derivative(self):
        params = self.case.params
        G = eval_G(self.case.network, self.x)
        diff = self.case.psi(self.x, self.t) - self.case.psi_r(self.x, self.t)
        assert np.allclose(diff, np.cos(self.t) * G / (params.kappa * params.M))

    def test_divergence_of_displacement(self):
        div = sum(central(lambda y, tt: self.case.u(y, tt)[..., k], self.x, self.t, k) for k in range(3))
        assert np.allclose(self.case.div_u(self.x, self.t), div, rtol=1e-7, atol=1e-10)

    def test_stress_divergence(self):
        mu, lam = self.case.params.mu, self.case.params.lam

        def sigma(y, tt):
            grad = np.stack([
                np.stack([central(lambda z, s: self.case.u(z, s)[..., i], y, tt, j) for j in range(3)], axis=-1)
                for i in range(3)
            ], axis=-2)
            eps = 0.5 * (grad + np.swapaxes(grad, -1, -2))
            return 2 * mu * eps + lam * np.trace(eps, axis1=-2, axis2=-1)[..., None, None] * np.eye(3)

        h = 1e-3
        div = np.zeros_like(self.x)
        for j in range(3):
            e = np.zeros(3)
            e[j] = h
            div += (sigma(self.x + e, self.t)[..., :, j] - sigma(self.x - e, self.t)[..., :, j]) / (2 * h)
        expected = self.case.minus_div_sigma(self.x, self.t)
        assert np.allclose(-div, expected, rtol=1e-4, atol=1e-6 * np.abs(expected).max())

    def test_remainder_pressure_formula(self):
        a, b = self.case.segment.a, self.case.segment.b
        r_a = np.linalg.norm(self.x - a, axis=-1)
        r_b = np.linalg.norm(self.x - b, axis=-1)
        expected = np.sin(self.t) * (r_a - r_b) / (FOUR_PI * self.case.params.kappa)
        assert np.allclose(self.case.p_r(self.x, self.t), expected, rtol=1e-14)


@pytest.mark.harness
class TestManufacturedSources:

    def test_body_div_load_is_minus_alpha_p(self, case, rng):
        x = rng.random((10, 3)) * 0.2
        psi_r, mech = manufactured_sources(case)
        assert np.allclose(mech.body_div_load(x, 0.5), -case.params.alpha * case.p(x, 0.5))
        assert np.allclose(mech.body_force(x, 0.5), case.minus_div_sigma(x, 0.5))
        assert np.allclose(psi_r(x, 0.5), case.psi_r(x, 0.5))

    def test_params_override(self, case):
        other = MaterialParams(alpha=0.5)
        _, mech = manufactured_sources(case, other)
        x = np.array([[0.1, 0.1, 0.1]])
        assert mech.body_div_load(x, 1.0) == pytest.approx(-0.5 * case.p(x, 1.0))

    def test_loads_bundle(self, case):
        loads = case.loads()
        assert loads.psi == case.psi
        assert loads.boundary_pressure == case.p
        assert loads.u0 is None and loads.p0 is None

    def test_custom_segment(self, params):
        case = ManufacturedCase(params=params, a=(0.2, 0.2, 0.2), b=(0.8, 0.8, 0.8))
        assert case.segment.L == pytest.approx(np.sqrt(3 * 0.36))


@pytest.mark.harness
class TestDiscreteConsistency:
    """Darcy rows evaluated at the interpolated remainder fields.

    For z in RT0 the residual is <kappa^-1 (Pi w_r - w_r), z>, so its
    Mw^-1 norm is an L2 distance and shrinks at least like h.
    """

    T = 0.5

    def darcy_residual(self, case, mesh):
        kappa = case.params.kappa
        dofs = build_dof_maps(mesh)
        Mw = assemble_rt0_mass(mesh, dofs, 1.0 / kappa)
        B = assemble_div(mesh, dofs)
        w_h = interpolate_rt0(mesh, case.w_r, self.T)
        p_h = interpolate_p0(mesh, case.p_r, self.T)
        bc = assemble_boundary_pressure(mesh, dofs, case.p_r, self.T, config.LOAD_QUAD_DEGREE)
        r = Mw @ w_h - B.T @ p_h + bc
        return float(np.sqrt(r @ Factorization(Mw, SystemKind.SPD).solve(r)))

    def test_residual_decreases_with_h(self, case, mesh4):
        coarse = self.darcy_residual(case, mesh4)
        fine = self.darcy_residual(case, build_structured_tet_mesh(8))
        assert coarse > 0.0
        assert coarse / fine >= 2.0 * 0.7, f"{coarse:.3e} -> {fine:.3e}"
