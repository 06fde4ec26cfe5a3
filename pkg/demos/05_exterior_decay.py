"""
Exterior problems and their decay
=================================

Outside the unit ball, solutions approach their asymptote like
|x|^(1 - (n-1) lam/Lam) when Lam/lam < n - 1.
"""

import numpy as np

from cellhom import ExteriorProblem, PucciPlus, Trace, decay_fit, parse_field, solve_exterior
from cellhom.errors import NoDecay

for op in (Trace(), PucciPlus(1, 1.5), PucciPlus(1, 1.9)):
    p = ExteriorProblem(op, 3, rho_in=1.0, R=64.0, phi=1.0)
    sol = solve_exterior(p)
    rep = decay_fit(sol, r0=2.0)
    print(f"{op.name:10s} Lam/lam={op.Lam / op.lam:.2f}  predicted {p.decay_exponent:+.4f}"
          f"  fitted {rep.exponent:+.4f}  c*={rep.c_star:+.4f}")

# past the threshold the hypothesis fails and the fit has nothing to report
p = ExteriorProblem(PucciPlus(1, 3), 3, R=64.0)
print("Lam/lam=3: decay hypothesis", p.decay_hypothesis)
try:
    print(decay_fit(solve_exterior(p), r0=2.0))
except NoDecay as exc:
    print("  no decay:", exc)

# The two-dimensional annular solver handles angular boundary data

p = ExteriorProblem(PucciPlus(1, 1.5), 2, R=16.0, phi=parse_field("1 + 0.2*cos(x1)", 2), points=96, n_theta=32)
sol = solve_exterior(p, "annular")
print("annular:", {k: (round(v, 6) if isinstance(v, float) else v) for k, v in sol.report.items()})
print("angular spread at r =", round(float(sol.r[48]), 3), ":", np.ptp(sol.U[48]))
