"""Periodic invariant measure of a linear non-divergence operator.

For ``L = a_ij(x) D_ij`` discretized with the torus stencils, the measure is
the null vector of ``L^T`` normalized to mean one. Multiplying the linear
cell problem by ``m`` and averaging gives its effective value in closed form:

    Fbar(A) = A_ij <a_ij m> - <f m> + <f>
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NonPositiveMeasure, SingularAdjoint
from .grid import GridFunction, TorusGrid, hessian_matrices, mean
from .operators import LinearNondivergence


@dataclass
class MeasureSolution:
    m: GridFunction
    margin: float
    adjoint_residual: float

    def moments(self, op: LinearNondivergence) -> np.ndarray:
        """The tensor ``<a_ij m>``."""
        a = op.coefficient_field(self.m.grid.points())
        return np.einsum("kij,k->ij", a, self.m.values) / self.m.grid.size


def assemble_operator(grid: TorusGrid, op: LinearNondivergence):
    """Sparse matrix of ``v -> a_ij D_ij v`` on the grid."""
    a = op.coefficient_field(grid.points())
    L = None
    for (i, j), mat in hessian_matrices(grid).items():
        coeff = a[:, i, j] if i == j else a[:, i, j] + a[:, j, i]
        term = sp.diags(coeff) @ mat
        L = term if L is None else L + term
    return L.tocsr()


def solve_invariant_measure(grid: TorusGrid, op: LinearNondivergence) -> MeasureSolution:
    """Solve ``L^T m = 0`` with ``<m> = 1`` through the bordered system.

    The border column is the constant vector, which is never in the range of
    ``L^T`` (that range is orthogonal to ``ker L``, the constants), so the
    bordered matrix is nonsingular exactly when the kernel is one-dimensional.
    """
    N = grid.size
    L = assemble_operator(grid, op)
    ones = np.ones(N)
    K = sp.bmat(
        [[L.T, sp.csr_matrix(ones[:, None])], [sp.csr_matrix(ones[None, :] / N), None]],
        format="csc",
    )
    rhs = np.zeros(N + 1)
    rhs[-1] = 1.0
    try:
        sol = spla.spsolve(K, rhs)
    except RuntimeError as exc:  # SuperLU reports exact singularity this way
        raise SingularAdjoint(str(exc)) from exc
    if not np.all(np.isfinite(sol)):
        raise SingularAdjoint("adjoint system is singular")
    m, mult = sol[:-1], sol[-1]
    resid = float(np.max(np.abs(L.T @ m)))
    a_norm = float(np.max(np.abs(op.coefficient_field(grid.points()))))
    # entries of L scale like 1/h^2; the tolerance is relative to that scale
    if resid > 1e-10 * a_norm / grid.h**2 or abs(mult) > 1e-10:
        raise SingularAdjoint(f"adjoint kernel not one-dimensional (residual {resid:.3e})")
    margin = float(m.min())
    if margin <= 0:
        raise NonPositiveMeasure(
            f"discrete invariant measure has min {margin:.3g} <= 0; refine the grid (m={grid.m})"
        )
    return MeasureSolution(GridFunction(grid, m), margin, resid)


def linear_effective(A, op: LinearNondivergence, f: GridFunction, ms: MeasureSolution) -> float:
    """``A_ij <a_ij m> - <f m> + <f>`` from discrete means."""
    A = np.asarray(A, dtype=float)
    fm = float(np.dot(f.values, ms.m.values) / f.grid.size)
    return float(np.sum(A * ms.moments(op)) - fm + mean(f))
