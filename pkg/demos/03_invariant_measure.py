"""
Invariant measure of a linear operator
======================================

For a linear non-divergence operator a_ij(x) D_ij the periodic adjoint
solution m turns the cell problem into a closed formula for beta.
"""

import numpy as np

from cellhom import CellProblem, GridFunction, LinearNondivergence, make_grid, solve_cell
from cellhom.measure import linear_effective, solve_invariant_measure

grid = make_grid(2, 128)
op = LinearNondivergence.from_strings([["1 + 0.5*sin(2*pi*x1)", "0"], ["0", "1"]], 2)
ms = solve_invariant_measure(grid, op)

# with a11 depending on x1 only, a11 * m is constant
a11 = 1 + 0.5 * np.sin(2 * np.pi * grid.points()[:, 0])
print("spread of a11*m:", np.ptp(a11 * ms.m.values))
print("<a_ij m> =\n", ms.moments(op))
print("harmonic mean of a11:", np.sqrt(0.75))

f = GridFunction.from_callable(grid, lambda x1, x2: np.sin(2 * np.pi * x1))
closed = linear_effective(np.eye(2), op, f, ms)
beta = solve_cell(CellProblem(grid, op, np.eye(2), f)).beta
print("closed form:", closed, " cell solve:", beta, " exact:", 3 - np.sqrt(3) / 2)
