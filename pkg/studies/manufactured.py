"""Manufactured solution with a pulsating line source.

    f(t) = sin t on the segment a -> b
    p_r  = f(t) (r_a - r_b) / (4 pi kappa)
    w_r  = -kappa grad p_r
    u    = t x(1-x) y(1-y) z(1-z) (1, 1, 1)

with r_a = |x - a|, r_b = |x - b|. Everything the solver needs is derived
here in closed form.
"""
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

import config
from core.biot import Loads
from core.greens import FOUR_PI, LineSegment, LineSourceNetwork, eval_G, eval_ps, eval_ws
from core.params import MaterialParams


def _bubble(x):
    """x(1-x) per coordinate and its first derivative."""
    return x * (1.0 - x), 1.0 - 2.0 * x


class MechanicsLoad(NamedTuple):
    body_force: Callable     # -div sigma(u), paired with v
    body_div_load: Callable  # -alpha p, paired with div v


@dataclass(frozen=True)
class ManufacturedCase:
    params: MaterialParams
    a: tuple = config.SEGMENT_A
    b: tuple = config.SEGMENT_B

    @property
    def segment(self) -> LineSegment:
        return LineSegment(np.asarray(self.a, dtype=float), np.asarray(self.b, dtype=float))

    @property
    def network(self) -> LineSourceNetwork:
        return LineSourceNetwork.with_time_profile([self.segment], np.sin, np.cos)

    def _radii(self, x):
        x = np.asarray(x, dtype=float)
        da = x - self.segment.a
        db = x - self.segment.b
        return da, db, np.linalg.norm(da, axis=-1), np.linalg.norm(db, axis=-1)

    # remainder flow variables
    def p_r(self, x, t):
        _, _, r_a, r_b = self._radii(x)
        return np.sin(t) * (r_a - r_b) / (FOUR_PI * self.params.kappa)

    def w_r(self, x, t):
        da, db, r_a, r_b = self._radii(x)
        return -np.sin(t) / FOUR_PI * (da / r_a[..., None] - db / r_b[..., None])

    # full flow variables
    def p_s(self, x, t):
        return eval_ps(self.network, x, t, self.params.kappa)

    def w_s(self, x, t):
        return eval_ws(self.network, x, t, self.params.kappa)

    def p(self, x, t):
        return self.p_s(x, t) + self.p_r(x, t)

    # displacement
    def u(self, x, t):
        x = np.asarray(x, dtype=float)
        X, _ = _bubble(x[..., 0])
        Y, _ = _bubble(x[..., 1])
        Z, _ = _bubble(x[..., 2])
        return np.repeat((t * X * Y * Z)[..., None], 3, axis=-1)

    def div_u(self, x, t):
        x = np.asarray(x, dtype=float)
        X, dX = _bubble(x[..., 0])
        Y, dY = _bubble(x[..., 1])
        Z, dZ = _bubble(x[..., 2])
        return t * (dX * Y * Z + X * dY * Z + X * Y * dZ)

    def minus_div_sigma(self, x, t):
        """-div(2 mu eps(u) + lambda div(u) I) = -mu lap u - (mu + lambda) grad div u."""
        x = np.asarray(x, dtype=float)
        mu, lam = self.params.mu, self.params.lam
        X, dX = _bubble(x[..., 0])
        Y, dY = _bubble(x[..., 1])
        Z, dZ = _bubble(x[..., 2])
        lap = -2.0 * t * (Y * Z + X * Z + X * Y)
        grad_div = t * np.stack([
            -2.0 * Y * Z + dX * dY * Z + dX * Y * dZ,
            dX * dY * Z - 2.0 * X * Z + X * dY * dZ,
            dX * Y * dZ + X * dY * dZ - 2.0 * X * Y,
        ], axis=-1)
        return -mu * lap[..., None] - (mu + lam) * grad_div

    def psi_r(self, x, t):
        """dt(p_r / M + alpha div u) + div w_r."""
        x = np.asarray(x, dtype=float)
        kappa, M, alpha = self.params.kappa, self.params.M, self.params.alpha
        _, _, r_a, r_b = self._radii(x)
        dt_p = np.cos(t) * (r_a - r_b) / (FOUR_PI * kappa)
        div_w = -np.sin(t) / FOUR_PI * (2.0 / r_a - 2.0 / r_b)
        return dt_p / M + alpha * self.div_u(x, 1.0) + div_w

    def psi(self, x, t):
        # background source whose regularised part is psi_r
        G = eval_G(self.network, x)
        return self.psi_r(x, t) + np.cos(t) * G / (self.params.kappa * self.params.M)

    def loads(self) -> Loads:
        mech = manufactured_sources(self)[1]
        return Loads(
            psi=self.psi,
            body_force=mech.body_force,
            body_div_load=mech.body_div_load,
            boundary_pressure=self.p,
        )


def manufactured_sources(case: ManufacturedCase, params: MaterialParams = None):
    """(psi_r callback, mechanics load rule) of the manufactured case."""
    if params is not None and params != case.params:
        case = ManufacturedCase(params=params, a=case.a, b=case.b)
    alpha = case.params.alpha

    def body_div_load(x, t):
        return -alpha * case.p(x, t)

    return case.psi_r, MechanicsLoad(body_force=case.minus_div_sigma, body_div_load=body_div_load)
