import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

import config
from core.errors import LinearSolveError

MAX_REFINEMENT_STEPS = 3
MAX_KRYLOV_ITERS = 2_000


class SystemKind(str, Enum):
    SPD = "spd"
    SADDLE_POINT = "saddle_point"


@dataclass(frozen=True)
class LinearSystem:
    matrix: sp.spmatrix
    rhs: np.ndarray
    kind: SystemKind = SystemKind.SADDLE_POINT

    def __post_init__(self):
        rows, cols = self.matrix.shape
        if rows != cols:
            raise ValueError(f"matrix must be square, got {self.matrix.shape}")
        rhs = np.asarray(self.rhs, dtype=float)
        if rhs.shape != (rows,):
            raise ValueError(f"rhs has shape {rhs.shape}, expected ({rows},)")
        if not np.all(np.isfinite(rhs)) or not np.all(np.isfinite(sp.csr_matrix(self.matrix).data)):
            raise ValueError("linear system has non-finite entries")
        object.__setattr__(self, "rhs", rhs)
        object.__setattr__(self, "kind", SystemKind(self.kind))


def _spd_lu(matrix):
    return spla.splu(
        sp.csc_matrix(matrix),
        permc_spec="MMD_AT_PLUS_A",
        diag_pivot_thresh=0.0,
        options={"SymmetricMode": True},
    )


class LinearSolver:
    """Reusable solver with iterative refinement against ``matrix``.

    Subclasses provide ``_apply(rhs)``, an approximate inverse.
    """

    matrix: sp.csc_matrix
    kind: SystemKind
    tol: float

    def _apply(self, rhs):
        raise NotImplementedError

    def solve(self, rhs, tol=None) -> np.ndarray:
        tol = self.tol if tol is None else tol
        rhs = np.asarray(rhs, dtype=float)
        norm_b = np.linalg.norm(rhs)
        if norm_b == 0.0:
            return np.zeros_like(rhs)

        x = self._apply(rhs)
        residual = np.linalg.norm(rhs - self.matrix @ x) / norm_b
        steps = 0
        while residual > tol and steps < MAX_REFINEMENT_STEPS:
            x = x + self._apply(rhs - self.matrix @ x)
            residual = np.linalg.norm(rhs - self.matrix @ x) / norm_b
            steps += 1

        if not np.isfinite(residual) or residual > tol:
            raise LinearSolveError(f"{self.kind.value} solve missed tolerance {tol:.1e}", residual)
        logging.debug(f"Solved {self.kind.value} system: residual {residual:.3e} after {steps} refinement step(s)")
        return x


class Factorization(LinearSolver):
    """A matrix factorized once and reused for many right-hand sides.

    ``direct`` uses SuperLU: plain LU for saddle-point systems, and a
    symmetric-mode factorization (diagonal pivots, A + A^T ordering) for
    SPD systems. ``iterative`` uses preconditioned CG / GMRES.
    """

    def __init__(self, matrix, kind=SystemKind.SADDLE_POINT, method="direct", tol=config.LINEAR_TOL):
        self.matrix = sp.csc_matrix(matrix)
        self.kind = SystemKind(kind)
        self.method = method
        self.tol = tol
        self._lu = None
        self._precond = None

        try:
            if method == "direct":
                if self.kind is SystemKind.SPD:
                    self._lu = _spd_lu(self.matrix)
                else:
                    self._lu = spla.splu(self.matrix)
            elif method == "iterative":
                if self.kind is SystemKind.SPD:
                    diag = self.matrix.diagonal()
                    self._precond = spla.LinearOperator(self.matrix.shape, matvec=lambda r: r / diag)
                else:
                    ilu = spla.spilu(self.matrix, drop_tol=1e-5, fill_factor=20)
                    self._precond = spla.LinearOperator(self.matrix.shape, matvec=ilu.solve)
            else:
                raise ValueError(f"unknown linear method {method!r}")
        except RuntimeError as e:
            raise LinearSolveError(f"Factorization of {self.kind.value} system failed: {e}") from e

        logging.debug(f"Factorized {self.kind.value} matrix of size {self.matrix.shape[0]} ({method})")

    def _apply(self, rhs):
        if self._lu is not None:
            return self._lu.solve(rhs)
        if self.kind is SystemKind.SPD:
            x, info = spla.cg(self.matrix, rhs, rtol=0.1 * self.tol, maxiter=10_000, M=self._precond)
        else:
            x, info = spla.gmres(self.matrix, rhs, rtol=0.1 * self.tol, restart=200, maxiter=200,
                                 M=self._precond)
        if info < 0:
            raise LinearSolveError(f"Krylov solver breakdown (info={info})")
        return x


class MixedDarcySolver(LinearSolver):
    """[[P, tau B], [-B^T, W]] with P diagonal SPD and W SPD.

    The second block row is scaled by -tau to make the system symmetric
    and MINRES runs with the block-diagonal preconditioner

        diag(P + tau B diag(W)^-1 B^T,  tau diag(W)).

    Only the cell-sized pressure block is factorized, so memory stays
    close to that of a P0 Laplacian.
    """

    kind = SystemKind.SADDLE_POINT

    def __init__(self, P, B, W, tau: float, tol=config.LINEAR_TOL):
        P, B, W = sp.csr_matrix(P), sp.csr_matrix(B), sp.csr_matrix(W)
        self.tol = tol
        self.tau = tau
        self.n_p = P.shape[0]
        self.iterations = 0
        self.matrix = sp.bmat([[P, tau * B], [-B.T, W]], format="csc")
        self._symmetric = sp.bmat([[P, tau * B], [tau * B.T, -tau * W]], format="csr")

        w_diag = W.diagonal()
        if np.any(w_diag <= 0.0) or np.any(P.diagonal() <= 0.0):
            raise LinearSolveError("mixed Darcy blocks must have positive diagonals")
        schur = P + tau * (B @ sp.diags(1.0 / w_diag) @ B.T)
        try:
            self._schur_lu = _spd_lu(schur)
        except RuntimeError as e:
            raise LinearSolveError(f"Factorization of the pressure Schur block failed: {e}") from e
        self._flux_diag = tau * w_diag
        n = self.matrix.shape[0]
        self._precond = spla.LinearOperator((n, n), matvec=self._apply_precond)
        logging.debug(f"Mixed Darcy solver: {self.n_p} cells, {W.shape[0]} faces, Schur nnz {schur.nnz}")

    def _apply_precond(self, r):
        r = np.ravel(r)
        out = np.empty_like(r)
        out[:self.n_p] = self._schur_lu.solve(r[:self.n_p])
        out[self.n_p:] = r[self.n_p:] / self._flux_diag
        return out

    def solve(self, rhs, tol=None) -> np.ndarray:
        # iterations counts MINRES steps of the latest solve, refinement included
        self.iterations = 0
        return super().solve(rhs, tol)

    def _apply(self, rhs):
        b = np.array(rhs, dtype=float)
        b[self.n_p:] *= -self.tau

        def count(_):
            self.iterations += 1

        x, info = spla.minres(self._symmetric, b, M=self._precond, rtol=0.01 * self.tol,
                              maxiter=MAX_KRYLOV_ITERS, callback=count)
        if info < 0:
            raise LinearSolveError(f"MINRES breakdown (info={info})")
        return x


def solve(system: LinearSystem, tol: float = config.LINEAR_TOL, method: str = "direct") -> np.ndarray:
    return Factorization(system.matrix, system.kind, method=method, tol=tol).solve(system.rhs)
