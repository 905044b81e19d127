import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

import config
from core.errors import ConfigError
from core.biot import DiscreteState, Trajectory, assemble_operators, reconstruct_full, run
from core.fem import l2_error
from core.mesh import build_structured_tet_mesh
from core.params import MaterialParams, SolverConfig
from studies.manufactured import ManufacturedCase

ERROR_KEYS = ("err_p", "err_w", "err_u")


class LevelResult(BaseModel):
    n: int
    h: float
    err_p: float = Field(ge=0)
    err_w: float = Field(ge=0)
    err_u: float = Field(ge=0)
    err_p_pointwise: float = Field(ge=0)
    iterations: List[int]
    wall_time: float


class ConvergenceReport(BaseModel):
    tau: float
    T: float
    levels: List[LevelResult]

    def rates(self) -> List[Dict[str, float]]:
        """log(e_coarse / e_fine) / log(h_coarse / h_fine) between successive levels."""
        out = []
        for coarse, fine in zip(self.levels, self.levels[1:]):
            ratio = math.log(coarse.h / fine.h)
            out.append({k: math.log(getattr(coarse, k) / getattr(fine, k)) / ratio for k in ERROR_KEYS})
        return out

    def fitted_rates(self) -> Optional[Dict[str, float]]:
        """Least-squares slope of log e against log h."""
        if len(self.levels) < 2:
            return None
        log_h = np.log([lv.h for lv in self.levels])
        return {
            k: float(np.polyfit(log_h, np.log([getattr(lv, k) for lv in self.levels]), 1)[0])
            for k in ERROR_KEYS
        }

    def table(self) -> str:
        header = (
            f"{'h':>8} | {'||p_a - p_h||':>14} | {'||w_a - w_h||':>14} | {'||u_a - u_h||':>14} | "
            f"{'||p - p_h||':>14} | {'iters':>6}"
        )
        lines = [header, "-" * len(header)]
        for lv in self.levels:
            lines.append(
                f"{'1/' + str(lv.n):>8} | {lv.err_p:>14.3e} | {lv.err_w:>14.3e} | "
                f"{lv.err_u:>14.3e} | {lv.err_p_pointwise:>14.3e} | {max(lv.iterations):>6}"
            )
        for (coarse, fine), r in zip(zip(self.levels, self.levels[1:]), self.rates()):
            lines.append(
                f"{f'{coarse.n}->{fine.n}':>8} | {r['err_p']:>14.2f} | {r['err_w']:>14.2f} | {r['err_u']:>14.2f} |"
            )
        fit = self.fitted_rates()
        if fit is not None:
            lines.append("-" * len(header))
            lines.append(f"{'Rate':>8} | {fit['err_p']:>14.2f} | {fit['err_w']:>14.2f} | {fit['err_u']:>14.2f} |")
        return "\n".join(lines)

    def save(self, path):
        path = Path(path)
        payload = self.model_dump()
        payload["rates"] = self.rates()
        payload["fitted_rates"] = self.fitted_rates()
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2)
        logging.info(f"Convergence report saved to {path}")


def level_errors(case: ManufacturedCase, ops, state: DiscreteState, network) -> Dict[str, float]:
    """Errors of the final state against the manufactured fields.

    The singular parts enter both sides through the same interpolant, so the
    flow errors are measured on the remainder. ``err_p_pointwise`` compares
    the full discrete pressure with p_s evaluated at quadrature points.
    """
    mesh, t = ops.mesh, state.t
    degree = ops.solver.load_quad_degree
    p_full, _ = reconstruct_full(ops, state, network, degree)
    return {
        "err_p": l2_error(mesh, "p0", state.p_r, case.p_r, t, degree),
        "err_w": l2_error(mesh, "rt0", state.w_r, case.w_r, t, degree),
        "err_u": l2_error(mesh, "p1v", state.u, case.u, t, degree),
        "err_p_pointwise": l2_error(mesh, "p0", p_full, case.p, t, degree),
    }


def run_level(n: int, params: MaterialParams, solver: SolverConfig, case: ManufacturedCase = None,
              progress: bool = False) -> LevelResult:
    case = case or ManufacturedCase(params=params)
    start = time.time()
    mesh = build_structured_tet_mesh(n)
    ops = assemble_operators(mesh, params, solver)
    network = case.network
    initial = DiscreteState.zeros(ops.dofs)
    trajectory: Trajectory = run(ops, initial, network, case.loads(), progress=progress)
    errors = level_errors(case, ops, trajectory.final, network)
    elapsed = time.time() - start
    logging.info(
        f"Level n={n}: err_p={errors['err_p']:.3e} err_w={errors['err_w']:.3e} "
        f"err_u={errors['err_u']:.3e} ({elapsed:.1f}s)"
    )
    return LevelResult(n=n, h=mesh.h, iterations=trajectory.iterations, wall_time=elapsed, **errors)


def run_convergence_study(levels: Sequence[int] = config.CONVERGENCE_LEVELS, params: MaterialParams = None,
                          solver: SolverConfig = None, jobs: int = 1, progress: bool = False) -> ConvergenceReport:
    """Manufactured-solution errors for each mesh level, finest last."""
    params = params or MaterialParams()
    solver = solver or SolverConfig()
    levels = sorted(set(int(n) for n in levels))
    if not levels:
        raise ConfigError("at least one mesh level is required")
    if not solver.singularity_removal:
        # the full flux is not square integrable
        raise ConfigError("the convergence study needs singularity removal enabled")
    case = ManufacturedCase(params=params)
    jobs = max(1, min(jobs, config.MAX_PARALLEL_LEVELS, len(levels)))
    logging.info(f"Convergence study over n={levels} with {jobs} worker(s)")

    results = {}
    if jobs == 1:
        for n in levels:
            results[n] = run_level(n, params, solver, case, progress)
    else:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            futures = {executor.submit(run_level, n, params, solver, case): n for n in levels}
            for future in as_completed(futures):
                n = futures[future]
                results[n] = future.result()
                logging.info(f"Level n={n} done")

    return ConvergenceReport(tau=solver.tau, T=solver.T, levels=[results[n] for n in levels])
