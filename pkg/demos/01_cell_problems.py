"""
Cell problems on the torus
==========================

Solve F(A + D^2 v) - beta = f - <f> for a few operators and look at what
comes back: the effective value beta and the corrector v.
"""

import numpy as np

from cellhom import CellProblem, GridFunction, PucciPlus, Trace, make_grid, solve_cell
from cellhom.operators import BellmanMin

grid = make_grid(2, 64)
f = GridFunction.from_callable(grid, lambda x1, x2: np.sin(2 * np.pi * x1))
A = np.diag([1.0, 2.0])

# For the trace operator the average of the discrete Laplacian vanishes,
# so beta is just tr A whatever f is.
sol = solve_cell(CellProblem(grid, Trace(), A, f))
print("trace:      beta =", sol.beta, " Newton steps:", sol.iterations)

# Pucci's maximal operator is linear as long as A + D^2 v keeps its signature.
# With an indefinite A the corrector crosses the kink and beta moves off Lam*tr A.
sol = solve_cell(CellProblem(grid, PucciPlus(1, 2), A, f))
print("pucci+:     beta =", sol.beta, " (Lam tr A =", 2 * np.trace(A), ")")
B = np.diag([0.02, -0.01])
sol = solve_cell(CellProblem(grid, PucciPlus(1, 2), B, f))
print("pucci+:     beta =", sol.beta, " (Lam tr B =", 2 * np.trace(B), ")  residual:", sol.residual)

# Equal weights collapse Pucci onto a scaled trace, bit for bit.
p = solve_cell(CellProblem(grid, PucciPlus(1.5, 1.5), A, f))
t = solve_cell(CellProblem(grid, Trace(1.5), A, f))
print("pucci(1.5,1.5) == 1.5*trace:", p.beta == t.beta and np.array_equal(p.v.values, t.v.values))

bellman = BellmanMin((((1.0, 0.0), (0.0, 1.0)), ((2.0, 0.0), (0.0, 0.5))))
sol = solve_cell(CellProblem(grid, bellman, A, f))
print("bellman:    beta =", sol.beta, " continuation path:", sol.t_path)

# the corrector depends on x1 only
v = sol.v.as_array()
print("corrector spread along x2:", np.ptp(v, axis=1).max())
