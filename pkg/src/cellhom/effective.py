"""The effective operator ``A -> Fbar(A) = beta`` and probes of its structure."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from .cell import CellProblem, SolverOptions, solve_cell
from .errors import ConeViolation, ProbeNotApplicable, ValidationError
from .grid import GridFunction, TorusGrid, hessian_field, mean
from .operators import Operator, cone_check, sigma_k


def _key(A) -> tuple:
    return tuple(np.round(np.asarray(A, dtype=float), 12).ravel().tolist())


@dataclass
class EffectiveOperator:
    """``Fbar`` for a fixed operator, data ``f`` and grid.

    ``f`` is taken raw; the cell problems use ``f - <f>``. Solves are cached by
    ``A`` rounded to 12 decimals. The cache is never shared between different
    ``(op, f, grid)`` triples, since ``Fbar`` may depend on ``f``.
    """

    op: Operator
    f: GridFunction
    grid: TorusGrid
    options: SolverOptions = field(default_factory=SolverOptions)
    cache: dict = field(default_factory=dict)

    def __post_init__(self):
        self._lock = threading.Lock()

    @property
    def f_mean(self) -> float:
        return mean(self.f)

    def solve(self, A):
        return solve_cell(CellProblem(self.grid, self.op, A, self.f, self.options))

    def __call__(self, A) -> float:
        return effective(self, A)

    def tolerance(self, *scales) -> float:
        return 10 * self.grid.h**2 * (1 + sum(scales))


def effective(eo: EffectiveOperator, A) -> float:
    key = _key(A)
    with eo._lock:
        if key in eo.cache:
            return eo.cache[key]
    beta = eo.solve(np.asarray(key).reshape(eo.grid.n, eo.grid.n)).beta
    with eo._lock:
        # first writer wins, so concurrent solves of one key still agree
        return eo.cache.setdefault(key, beta)


def _norm(M) -> float:
    return float(np.linalg.norm(np.asarray(M, dtype=float), 2))


def ellipticity_probe(eo: EffectiveOperator, M, e, t: float) -> dict:
    """Check ``lam t <= Fbar(M + t e e^T) - Fbar(M) <= Lam t`` for a unit vector ``e``."""
    M = np.asarray(M, dtype=float)
    e = np.asarray(e, dtype=float)
    if t < 0:
        raise ValidationError("increment t must be nonnegative")
    if not np.isclose(np.linalg.norm(e), 1.0, atol=1e-12):
        raise ValidationError("direction e must have unit length")
    tol = eo.tolerance(_norm(M), t)
    if t == 0:
        delta = 0.0
    else:
        delta = effective(eo, M + t * np.outer(e, e)) - effective(eo, M)
    lower, upper = eo.op.lam * t, eo.op.Lam * t
    return {
        "delta": delta,
        "lower": lower,
        "upper": upper,
        "tol": tol,
        "pass": bool(lower - tol <= delta <= upper + tol),
    }


def _midpoint_probe(eo, M, N, sign):
    M = np.asarray(M, dtype=float)
    N = np.asarray(N, dtype=float)
    mid = effective(eo, 0.5 * (M + N))
    margin = sign * (mid - 0.5 * effective(eo, M) - 0.5 * effective(eo, N))
    tol = eo.tolerance(_norm(M), _norm(N))
    return {"margin": margin, "tol": tol, "pass": bool(margin >= -tol)}


def concavity_probe(eo: EffectiveOperator, M, N) -> dict:
    """Midpoint concavity margin ``Fbar((M+N)/2) - Fbar(M)/2 - Fbar(N)/2``."""
    if not eo.op.concave:
        raise ProbeNotApplicable(f"{eo.op.name} is not concave; use convexity_probe")
    return _midpoint_probe(eo, M, N, 1.0)


def convexity_probe(eo: EffectiveOperator, M, N) -> dict:
    """Mirror of :func:`concavity_probe` for convex operators (margin sign flipped)."""
    if not eo.op.convex:
        raise ProbeNotApplicable(f"{eo.op.name} is not convex; use concavity_probe")
    return _midpoint_probe(eo, M, N, -1.0)


def reilly_check(grid: TorusGrid, A, v: GridFunction, k: int) -> float:
    """``|<sigma_k(A + D^2 v)> - sigma_k(A)|`` for the discrete Hessian."""
    A = np.asarray(A, dtype=float)
    M = A[None] + hessian_field(v)
    if not (cone_check(A, k) and np.all(cone_check(M, k))):
        raise ConeViolation(f"A + D^2 v leaves the Gamma_{k} cone")
    return float(abs(np.mean(sigma_k(M, k)) - sigma_k(A, k)))


def solvability_check(eo: EffectiveOperator, A) -> bool:
    """Whether ``Fbar(A)`` matches the mean of the raw data within ``10 h^2``."""
    return bool(abs(effective(eo, A) - eo.f_mean) <= 10 * eo.grid.h**2)


def random_symmetric(rng, n: int, scale: float = 1.0) -> np.ndarray:
    X = rng.uniform(-scale, scale, size=(n, n))
    return 0.5 * (X + X.T)


def random_unit(rng, n: int) -> np.ndarray:
    e = rng.standard_normal(n)
    return e / np.linalg.norm(e)
