"""Discrete periodic cell problem ``F(A + D^2 v) - beta = f - <f>``, ``<v> = 0``.

The solver follows a continuation path: the right side is scaled by ``t``
and ``t`` runs from 0 (where ``v = 0``, ``beta = F(A)`` is exact) to 1. Each
continuation step is corrected by damped semismooth Newton; every Newton step
solves the bordered system

    [ L   -1 ] [ dv    ]     [ R   ]
    [ 1^T/N 0 ] [ dbeta ] = - [ <v> ]

where ``L`` is assembled from the operator's linearization.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    ConeViolation,
    LinearSolveFailure,
    NewtonDivergence,
    RightSideNotAdmissible,
    SolverError,
    ValidationError,
)
from .grid import GridFunction, TorusGrid, hessian_matrices, mean
from .operators import HessianSigmaK, LinearNondivergence, Operator, cone_check, sigma_k

log = logging.getLogger(__name__)

DIRECT_SOLVE_LIMIT = 2**16


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-10
    max_iter: int = 50
    initial_step: float = 1.0
    min_step: float = 2.0**-10
    armijo: float = 1e-4
    max_halvings: int = 30

    @classmethod
    def from_dict(cls, d: dict | None) -> "SolverOptions":
        d = dict(d or {})
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValidationError(f"unknown solver options: {sorted(extra)}")
        return cls(**d)


@dataclass
class CellProblem:
    grid: TorusGrid
    op: Operator
    A: np.ndarray
    f: GridFunction
    options: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        n = self.grid.n
        if A.shape != (n, n):
            raise ValidationError(f"A must be {n}x{n}, got shape {A.shape}")
        if not np.allclose(A, A.T, rtol=0, atol=1e-14 * (1 + np.abs(A).max())):
            raise ValidationError("A must be symmetric")
        self.A = 0.5 * (A + A.T)
        if self.f.grid != self.grid:
            raise ValidationError("f lives on a different grid")

    @property
    def f_mean(self) -> float:
        return mean(self.f)

    @property
    def rhs(self) -> np.ndarray:
        """Mean-zero right side ``f - <f>``."""
        return self.f.values - self.f_mean


@dataclass
class CellSolution:
    v: GridFunction
    beta: float
    residual: float
    iterations: int
    t_path: list

    def summary(self) -> dict:
        return {
            "beta": self.beta,
            "residual": self.residual,
            "iterations": self.iterations,
            "t_path": list(self.t_path),
        }


class _Discretization:
    """Grid-level evaluation of ``F(A + D^2 v)`` and the Newton matrix."""

    def __init__(self, problem: CellProblem):
        self.p = problem
        self.grid = problem.grid
        self.D = hessian_matrices(self.grid)
        self.points = self.grid.points()
        self.N = self.grid.size
        # the border row and column; fixed summation order keeps results bit-reproducible
        ones = np.ones(self.N)
        self.col = sp.csr_matrix(-ones[:, None])
        self.row = sp.csr_matrix(ones[None, :] / self.N)

    def matrices(self, v):
        n = self.grid.n
        M = np.broadcast_to(self.p.A, (self.N, n, n)).copy()
        for (i, j), mat in self.D.items():
            col = mat @ v
            M[:, i, j] += col
            if i != j:
                M[:, j, i] += col
        return M

    def F(self, M):
        return np.asarray(self.p.op.evaluate(M, self.points), dtype=float)

    def residual(self, v, beta, t, M=None):
        if M is None:
            M = self.matrices(v)
        return self.F(M) - beta - t * self.p.rhs

    def jacobian(self, M):
        C = self.p.op.linearize(M, self.points)
        L = None
        for (i, j), mat in self.D.items():
            coeff = C[:, i, j] if i == j else C[:, i, j] + C[:, j, i]
            term = sp.diags(coeff) @ mat
            L = term if L is None else L + term
        K = sp.bmat([[L, self.col], [self.row, None]], format="csc")
        return K


def _solve_bordered(K, rhs):
    if K.shape[0] - 1 <= DIRECT_SOLVE_LIMIT:
        x = spla.spsolve(K, rhs)
    else:
        d = K.diagonal()
        d = np.where(np.abs(d) > 0, d, 1.0)
        pre = spla.LinearOperator(K.shape, matvec=lambda y: y / d)
        x, info = spla.gmres(K, rhs, M=pre, rtol=1e-13, atol=0.0, restart=100, maxiter=2000)
        if info != 0:
            raise LinearSolveFailure(f"Krylov solve did not converge (info={info})")
    resid = np.max(np.abs(K @ x - rhs))
    scale = np.max(np.abs(rhs)) + abs(K).max() * np.max(np.abs(x))
    if not np.all(np.isfinite(x)) or resid > 1e-12 * (1 + scale):
        raise LinearSolveFailure(f"bordered system residual {resid:.3e} too large")
    return x


def check_admissible(problem: CellProblem) -> None:
    op = problem.op
    if isinstance(op, HessianSigmaK):
        if not cone_check(problem.A, op.k):
            raise ConeViolation(f"A is not in the Gamma_{op.k} cone")
        margin = float(np.min(problem.rhs + sigma_k(problem.A, op.k)))
        if margin <= 0:
            raise RightSideNotAdmissible(
                f"f - <f> + sigma_{op.k}(A) must be positive (min {margin:.3g})"
            )


def residual_norm(problem: CellProblem, v: GridFunction, beta: float) -> float:
    """Max-norm of ``F(A + D^2 v) - beta - (f - <f>)`` over the nodes."""
    disc = _Discretization(problem)
    return float(np.max(np.abs(disc.residual(v.values, beta, 1.0))))


def _newton(disc, v, beta, t, opts, state):
    """Damped semismooth Newton at fixed ``t``; returns (v, beta, residual) or None."""
    op = disc.p.op
    guard = isinstance(op, HessianSigmaK)
    M = disc.matrices(v)
    R = disc.residual(v, beta, t, M)
    rnorm = np.max(np.abs(R))
    for _ in range(opts.max_iter):
        if rnorm <= opts.tol:
            return v, beta, rnorm
        try:
            K = disc.jacobian(M)
        except SolverError as exc:
            log.debug("linearization failed: %s", exc)
            return None
        rhs = -np.concatenate([R, [np.mean(v)]])
        step = _solve_bordered(K, rhs)
        state["iterations"] += 1
        dv, dbeta = step[:-1], step[-1]
        alpha = 1.0
        for _ in range(opts.max_halvings + 1):
            v_new = v + alpha * dv
            beta_new = beta + alpha * dbeta
            M_new = disc.matrices(v_new)
            if not guard or np.all(cone_check(M_new, op.k)):
                R_new = disc.residual(v_new, beta_new, t, M_new)
                rnew = np.max(np.abs(R_new))
                if rnew <= (1 - opts.armijo * alpha) * rnorm or rnew <= opts.tol:
                    break
            alpha *= 0.5
        else:
            log.debug("line search failed at t=%g (residual %.3e)", t, rnorm)
            if guard and not np.all(cone_check(M_new, op.k)):
                state["cone_failure"] = True
            return None
        v, beta, M, R, rnorm = v_new, beta_new, M_new, R_new, rnew
    return (v, beta, rnorm) if rnorm <= opts.tol else None


def _initial_beta(problem, disc):
    if isinstance(problem.op, LinearNondivergence):
        return float(disc.F(disc.matrices(np.zeros(disc.N))).mean())
    # exact at t = 0, where v = 0 solves the problem
    return float(problem.op.evaluate(problem.A))


def solve_cell(problem: CellProblem, v0: GridFunction | None = None) -> CellSolution:
    """Solve the discrete cell problem by continuation in ``t`` with Newton correction.

    ``v0`` replaces the default start ``v = 0``; the solver then first tries to
    reach ``t = 1`` directly from it and falls back to the continuation path.
    """
    check_admissible(problem)
    opts = problem.options
    disc = _Discretization(problem)
    state = {"iterations": 0, "cone_failure": False}
    v = np.zeros(disc.N)
    beta = _initial_beta(problem, disc)
    t_cur = 0.0
    t_path = [0.0]

    if v0 is not None:
        start = v0.values - mean(v0)
        beta0 = float(disc.F(disc.matrices(start)).mean())
        out = _newton(disc, start, beta0, 1.0, opts, state)
        if out is not None:
            v, beta, _ = out
            t_cur = 1.0
            t_path.append(1.0)

    step = opts.initial_step
    while t_cur < 1.0:
        t_next = min(1.0, t_cur + step)
        out = _newton(disc, v, beta, t_next, opts, state)
        if out is None:
            step *= 0.5
            if step < opts.min_step:
                if state["cone_failure"]:
                    raise ConeViolation(f"iterates left the admissible cone near t={t_cur:.6g}")
                raise NewtonDivergence(f"continuation stalled at t={t_cur:.6g}")
            continue
        v, beta, _ = out
        t_cur = t_next
        t_path.append(t_cur)

    v = v - np.mean(v)
    resid = float(np.max(np.abs(disc.residual(v, beta, 1.0))))
    return CellSolution(
        v=GridFunction(problem.grid, v, mean_zero=True),
        beta=float(beta),
        residual=resid,
        iterations=state["iterations"],
        t_path=t_path,
    )
