"""
Recovering a quadratic plus a periodic part
===========================================

Integer-lattice second differences see the quadratic part exactly, whatever
the periodic part is. The remainder is then checked for periodicity and the
quadratic part against the effective operator.
"""

import numpy as np

from cellhom import EffectiveOperator, GridFunction, HessianSigmaK, SampledSolution, make_grid
from cellhom.errors import InconsistentCurvature
from cellhom.liouville import decompose, fit_quadratic, hessian_growth_ratio, verify_decomposition

grid = make_grid(2, 32)
f = GridFunction.from_callable(grid, lambda x1, x2: 2 + 0.2 * np.sin(2 * np.pi * x1) * np.sin(2 * np.pi * x2))
eo = EffectiveOperator(HessianSigmaK(2), f, grid)

A = np.diag([2.0, 1.0])
v = eo.solve(A).v
u = SampledSolution.from_parts(A, b=[0.5, -1.0], c=3.0, periodic=v)
rep = decompose(u, grid)
print("A =", rep.A.tolist(), " b =", rep.b.round(12).tolist(), " c =", rep.c)
print("periodicity deviation:", rep.periodicity_deviation)
print("sigma_2(A) = <f>?", verify_decomposition(rep, eo))

wrong = decompose(SampledSolution.from_parts(np.eye(2), periodic=v), grid)
print("with A = I instead:", verify_decomposition(wrong, eo))

cubic = SampledSolution(lambda p: 0.5 * np.sum(p**2, -1) + 1e-4 * p[..., 0] ** 3, 2)
try:
    fit_quadratic(cubic)
except InconsistentCurvature as exc:
    print("cubic input:", exc)

print("growth ratios:", hessian_growth_ratio(u, 2.0))
