"""Backward-Euler time stepping of the Biot system with fixed-stress splitting.

Unknowns per time step are the displacement ``u`` (P1 vector), the remainder
pressure ``p_r`` (P0) and the remainder flux ``w_r`` (RT0). The singular
parts ``p_s = f G / kappa`` and ``w_s = -kappa grad p_s`` are interpolated
and added back when the full fields are needed.

One fixed-stress iteration:
  1. flow:      (1/M + beta) Mp p + tau B w = tau psi_r + Mp p_prev / M + C u_prev
                                               + beta Mp p_iter - C u_iter
                -B^T p + Mw w                = rho_f g - boundary pressure term
  2. full pressure p = p_s,h + p_r
  3. mechanics: A u = C^T p + body load
"""
import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, List, Optional

import numpy as np
import scipy.sparse as sp
from tqdm import tqdm

from core.errors import FixedStressDivergence
from core.fem import (
    DofMaps,
    apply_dirichlet,
    assemble_boundary_pressure,
    assemble_coupling_div_u,
    assemble_div,
    assemble_elasticity,
    assemble_line_source,
    assemble_load,
    assemble_p_mass,
    assemble_rt0_mass,
    build_dof_maps,
    interpolate_p0,
    interpolate_p1v,
    interpolate_ps_P0,
    interpolate_ws_RT0,
)
from core.greens import LineSourceNetwork, eval_ps, eval_psi_r
from core.linsolve import Factorization, MixedDarcySolver, SystemKind
from core.mesh import Mesh
from core.params import MaterialParams, SolverConfig

Field = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class DiscreteState:
    u: np.ndarray
    p_r: np.ndarray
    w_r: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        for name in ("u", "p_r", "w_r"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"state field {name} has non-finite entries at t={self.t}")
            object.__setattr__(self, name, arr)

    @classmethod
    def zeros(cls, dofs: DofMaps, t: float = 0.0) -> "DiscreteState":
        return cls(u=np.zeros(dofs.n_u), p_r=np.zeros(dofs.n_p), w_r=np.zeros(dofs.n_w), t=t)

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.p_r, self.w_r, self.u])

    def check_sizes(self, dofs: DofMaps):
        sizes = (self.u.size, self.p_r.size, self.w_r.size)
        if sizes != (dofs.n_u, dofs.n_p, dofs.n_w):
            raise ValueError(f"state sizes {sizes} do not match dofs {(dofs.n_u, dofs.n_p, dofs.n_w)}")


@dataclass(frozen=True)
class Loads:
    """Data of one problem. Every callback takes points (..., 3) and a time.

    ``body_div_load`` is a scalar paired with div v (an integrated-by-parts
    body force). ``boundary_pressure`` is the full pressure on the boundary;
    None means p = 0 there.
    """

    psi: Optional[Field] = None
    body_force: Optional[Field] = None
    body_div_load: Optional[Field] = None
    boundary_pressure: Optional[Field] = None
    u0: Optional[Field] = None
    p0: Optional[Field] = None


@dataclass(frozen=True)
class StepData:
    """Vectors of one time level; they do not change across iterations."""

    t: float
    source: np.ndarray      # <psi_r, q>
    flux_load: np.ndarray   # <rho_f g, z> - int p_bc z.n
    body_load: np.ndarray   # <f, v>, fixed rows zeroed
    ps_h: np.ndarray
    ws_h: np.ndarray


@dataclass(frozen=True)
class TimestepResult:
    state: DiscreteState
    iterations: int
    increments: List[float] = field(default_factory=list)


@dataclass(frozen=True)
class Trajectory:
    states: List[DiscreteState]
    iterations: List[int]

    @property
    def final(self) -> DiscreteState:
        return self.states[-1]


class BiotOperators:
    """Matrices of one mesh/parameter set, assembled and factorized once."""

    def __init__(self, mesh: Mesh, params: MaterialParams, solver: SolverConfig):
        self.mesh = mesh
        self.params = params
        self.solver = solver
        self.dofs = build_dof_maps(mesh)
        fixed = self.dofs.u_fixed

        A = assemble_elasticity(mesh, self.dofs, params)
        self.A, _ = apply_dirichlet(A, np.zeros(self.dofs.n_u), fixed)
        self.C = assemble_coupling_div_u(mesh, self.dofs, params.alpha)
        keep = sp.diags((~fixed).astype(float))
        self.Ct = (keep @ self.C.T).tocsr()
        self.Mp = assemble_p_mass(mesh, self.dofs, 1.0)
        self.Mw = assemble_rt0_mass(mesh, self.dofs, 1.0 / params.kappa)
        self.B = assemble_div(mesh, self.dofs)

        tau, beta = solver.tau, params.beta_FS
        self.flow_solver = MixedDarcySolver(
            (1.0 / params.M + beta) * self.Mp, self.B, self.Mw, tau, solver.linear_tol
        )
        self.flow_matrix = self.flow_solver.matrix
        self.mechanics_solver = Factorization(self.A, SystemKind.SPD, solver.linear_method, solver.linear_tol)

        if np.any(np.asarray(params.g) != 0.0):
            g = params.rho_f * np.asarray(params.g, dtype=float)
            self.gravity = assemble_load(
                mesh, self.dofs, "rt0", lambda x, t: np.broadcast_to(g, x.shape), 0.0, solver.matrix_quad_degree
            )
        else:
            self.gravity = np.zeros(self.dofs.n_w)

        logging.info(
            f"Assembled Biot operators on n={mesh.n}: {self.dofs.dim_V} free u dofs, "
            f"{self.dofs.n_p} p dofs, {self.dofs.n_w} w dofs, beta_FS={beta:.3e}"
        )

    @cached_property
    def monolithic_matrix(self):
        tau = self.solver.tau
        fixed = self.dofs.u_fixed
        C = (self.C @ sp.diags((~fixed).astype(float))).tocsr()
        return sp.bmat([
            [self.A, -self.Ct, None],
            [C, (1.0 / self.params.M) * self.Mp, tau * self.B],
            [None, -self.B.T, self.Mw],
        ], format="csc")

    @cached_property
    def monolithic_solver(self) -> Factorization:
        return Factorization(
            self.monolithic_matrix, SystemKind.SADDLE_POINT, self.solver.linear_method, self.solver.linear_tol
        )


def assemble_operators(mesh: Mesh, params: MaterialParams, solver: SolverConfig) -> BiotOperators:
    return BiotOperators(mesh, params, solver)


def _singular_removed(ops: BiotOperators, network) -> bool:
    return network is not None and ops.solver.singularity_removal


def assemble_step_data(ops: BiotOperators, network: Optional[LineSourceNetwork], loads: Loads, t: float) -> StepData:
    mesh, dofs, params, solver = ops.mesh, ops.dofs, ops.params, ops.solver
    degree = solver.load_quad_degree
    kappa = params.kappa

    if _singular_removed(ops, network):
        source = assemble_load(
            mesh, dofs, "p0", lambda x, tt: eval_psi_r(network, x, tt, kappa, params.M, loads.psi), t, degree
        )
        ps_h = interpolate_ps_P0(mesh, network, t, kappa, degree)
        ws_h = interpolate_ws_RT0(mesh, network, t, kappa, degree)

        def boundary_datum(x, tt):
            full = 0.0 if loads.boundary_pressure is None else loads.boundary_pressure(x, tt)
            return full - eval_ps(network, x, tt, kappa)
    else:
        source = np.zeros(dofs.n_p)
        if loads.psi is not None:
            source += assemble_load(mesh, dofs, "p0", loads.psi, t, degree)
        if network is not None:
            source += assemble_line_source(mesh, network, t)
        ps_h = np.zeros(dofs.n_p)
        ws_h = np.zeros(dofs.n_w)
        boundary_datum = loads.boundary_pressure

    flux_load = ops.gravity.copy()
    if boundary_datum is not None:
        flux_load -= assemble_boundary_pressure(mesh, dofs, boundary_datum, t, degree)

    body_load = np.zeros(dofs.n_u)
    if loads.body_force is not None:
        body_load += assemble_load(mesh, dofs, "p1v", loads.body_force, t, degree)
    if loads.body_div_load is not None:
        body_load += assemble_load(mesh, dofs, "p1v_div", loads.body_div_load, t, degree)
    body_load[dofs.u_fixed] = 0.0

    return StepData(t=t, source=source, flux_load=flux_load, body_load=body_load, ps_h=ps_h, ws_h=ws_h)


def flow_step(ops: BiotOperators, prev: DiscreteState, iterate: DiscreteState, step: StepData):
    """Step 1: remainder pressure and flux with the fixed-stress term."""
    tau, beta, M = ops.solver.tau, ops.params.beta_FS, ops.params.M
    rhs_p = (
        tau * step.source
        + ops.Mp @ prev.p_r / M
        + ops.C @ prev.u
        + beta * (ops.Mp @ iterate.p_r)
        - ops.C @ iterate.u
    )
    x = ops.flow_solver.solve(np.concatenate([rhs_p, step.flux_load]))
    return x[: ops.dofs.n_p], x[ops.dofs.n_p:]


def reconstruct_full(ops: BiotOperators, state: DiscreteState, network: Optional[LineSourceNetwork],
                     degree: Optional[int] = None):
    """Step 2: p = p_s,h + p_r and w = w_s,h + w_r."""
    if not _singular_removed(ops, network):
        return state.p_r.copy(), state.w_r.copy()
    degree = degree or ops.solver.load_quad_degree
    kappa = ops.params.kappa
    p_full = interpolate_ps_P0(ops.mesh, network, state.t, kappa, degree) + state.p_r
    w_full = interpolate_ws_RT0(ops.mesh, network, state.t, kappa, degree) + state.w_r
    return p_full, w_full


def mechanics_step(ops: BiotOperators, p_full: np.ndarray, step: StepData) -> np.ndarray:
    """Step 3: displacement driven by the full pressure."""
    return ops.mechanics_solver.solve(ops.Ct @ p_full + step.body_load)


def fixed_stress_solve_timestep(ops: BiotOperators, prev: DiscreteState, step: StepData) -> TimestepResult:
    solver = ops.solver
    iterate = replace(prev, t=step.t)
    increments = []
    for i in range(1, solver.max_iters + 1):
        p_r, w_r = flow_step(ops, prev, iterate, step)
        u = mechanics_step(ops, step.ps_h + p_r, step)
        new = DiscreteState(u=u, p_r=p_r, w_r=w_r, t=step.t)

        new_stacked = new.stacked()
        increment = float(np.linalg.norm(new_stacked - iterate.stacked()))
        increments.append(increment)
        iterate = new
        if increment <= solver.eps_a + solver.eps_r * np.linalg.norm(new_stacked):
            logging.info(f"t={step.t:.4f}: fixed-stress converged in {i} iteration(s), increment {increment:.3e}")
            return TimestepResult(state=new, iterations=i, increments=increments)

    logging.error(f"t={step.t:.4f}: fixed-stress stopped after {solver.max_iters} iterations")
    raise FixedStressDivergence(solver.max_iters, increments[-1])


def monolithic_solve_timestep(ops: BiotOperators, prev: DiscreteState, step: StepData) -> DiscreteState:
    """Coupled three-field solve of one time step."""
    tau, M = ops.solver.tau, ops.params.M
    n_u, n_p = ops.dofs.n_u, ops.dofs.n_p
    rhs_u = ops.Ct @ step.ps_h + step.body_load
    rhs_p = tau * step.source + ops.Mp @ prev.p_r / M + ops.C @ prev.u
    x = ops.monolithic_solver.solve(np.concatenate([rhs_u, rhs_p, step.flux_load]))
    return DiscreteState(u=x[:n_u], p_r=x[n_u:n_u + n_p], w_r=x[n_u + n_p:], t=step.t)


def initial_state(ops: BiotOperators, network: Optional[LineSourceNetwork], loads: Loads) -> DiscreteState:
    """u_0 nodally and p_r,0 = cell averages of p_0 - p_s(., 0); w_r starts at zero."""
    mesh, dofs = ops.mesh, ops.dofs
    u = np.zeros(dofs.n_u) if loads.u0 is None else interpolate_p1v(mesh, loads.u0, 0.0)
    u[dofs.u_fixed] = 0.0

    removed = _singular_removed(ops, network)
    if loads.p0 is None and not removed:
        p_r = np.zeros(dofs.n_p)
    else:
        kappa = ops.params.kappa

        def remainder(x, t):
            p0 = 0.0 if loads.p0 is None else loads.p0(x, t)
            return p0 - eval_ps(network, x, t, kappa) if removed else p0

        p_r = interpolate_p0(mesh, remainder, 0.0, ops.solver.load_quad_degree)
    return DiscreteState(u=u, p_r=p_r, w_r=np.zeros(dofs.n_w), t=0.0)


def run(ops: BiotOperators, initial: DiscreteState, network: Optional[LineSourceNetwork], loads: Loads,
        progress: bool = False, monolithic: bool = False) -> Trajectory:
    """March from ``initial`` to T; returns the N states after the initial one."""
    initial.check_sizes(ops.dofs)
    solver = ops.solver
    states, iterations = [], []
    prev = initial
    for n in tqdm(range(1, solver.n_steps + 1), desc=f"n={ops.mesh.n}", disable=not progress):
        step = assemble_step_data(ops, network, loads, initial.t + n * solver.tau)
        if monolithic:
            prev = monolithic_solve_timestep(ops, prev, step)
            iterations.append(1)
        else:
            result = fixed_stress_solve_timestep(ops, prev, step)
            prev = result.state
            iterations.append(result.iterations)
        states.append(prev)
    logging.info(
        f"Run finished on n={ops.mesh.n}: {len(states)} steps, "
        f"{sum(iterations)} fixed-stress iterations in total"
    )
    return Trajectory(states=states, iterations=iterations)
