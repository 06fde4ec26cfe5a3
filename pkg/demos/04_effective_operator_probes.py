"""
Probing the effective operator
==============================

Fbar inherits ellipticity and concavity from F. Each probe costs a few cell
solves; results are cached by A.
"""

import numpy as np

from cellhom import EffectiveOperator, GridFunction, PucciPlus, make_grid
from cellhom.effective import concavity_probe, ellipticity_probe, random_symmetric, random_unit
from cellhom.operators import BellmanMin

grid = make_grid(2, 32)
f = GridFunction.from_callable(grid, lambda x1, x2: np.sin(2 * np.pi * x1))
rng = np.random.default_rng(7)

eo = EffectiveOperator(PucciPlus(1, 2), f, grid)
print("ellipticity: lam*t <= delta <= Lam*t")
for _ in range(5):
    t = rng.uniform(0.05, 1)
    rec = ellipticity_probe(eo, random_symmetric(rng, 2), random_unit(rng, 2), t)
    print(f"  t={t:.3f}  {rec['lower']:.4f} <= {rec['delta']:.4f} <= {rec['upper']:.4f}  pass={rec['pass']}")

eo = EffectiveOperator(BellmanMin((((1.0, 0.0), (0.0, 1.0)), ((2.0, 0.0), (0.0, 0.5)))), f, grid)
print("concavity margins:")
for _ in range(5):
    rec = concavity_probe(eo, random_symmetric(rng, 2), random_symmetric(rng, 2))
    print(f"  margin={rec['margin']:+.4e}  tol={rec['tol']:.1e}  pass={rec['pass']}")
print("cached cell solves:", len(eo.cache))
