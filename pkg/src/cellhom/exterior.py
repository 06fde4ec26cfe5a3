"""Exterior Dirichlet problems ``F(D^2 u) = f`` outside a ball.

The outer boundary of the truncated annulus ``rho_in < |x| < R`` carries the
asymptote ``w(x) = x^T A x / 2 + b.x + v(x)``. Two discretizations:

* radial: for ``u = U(|x|)`` the Hessian has eigenvalues ``U''`` (once) and
  ``U'/r`` (``n-1`` times). In ``s = log r`` the equation for a fixed choice of
  Pucci weights is a constant-coefficient ODE, discretized with exponential
  fitting (monotone, and nodally exact for homogeneous problems). The
  nonlinearity is resolved by policy iteration over the weight choices.
* annular (n = 2): polar finite differences, semismooth Newton. Makes no
  decay claims.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import solve_banded
from scipy.optimize import least_squares, minimize_scalar

from .errors import NewtonDivergence, NoDecay, NotRadial, TruncationTooSmall, ValidationError
from .fields import FieldExpr
from .grid import GridFunction, periodic_interpolator
from .operators import Operator, PucciMinus, PucciPlus, Trace


@dataclass
class Asymptote:
    """``w(x) = x^T A x / 2 + b.x + v(x)`` with an optional periodic corrector ``v``."""

    A: np.ndarray
    b: np.ndarray
    v: GridFunction | None = None

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self._interp = periodic_interpolator(self.v) if self.v is not None else None

    @classmethod
    def zero(cls, n: int) -> "Asymptote":
        return cls(np.zeros((n, n)), np.zeros(n))

    def __call__(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        out = 0.5 * np.einsum("...i,ij,...j->...", pts, self.A, pts) + pts @ self.b
        if self._interp is not None:
            out = out + self._interp(pts)
        return out

    def radial_curvature(self) -> float | None:
        """``a`` if ``w = a |x|^2 / 2`` exactly, else None."""
        n = self.A.shape[0]
        a = self.A[0, 0]
        if not np.array_equal(self.A, a * np.eye(n)) or np.any(self.b):
            return None
        if self.v is not None and np.any(self.v.values):
            return None
        return float(a)


def _as_field(value, n):
    if isinstance(value, FieldExpr):
        return value
    return float(value)


@dataclass
class ExteriorProblem:
    op: Operator
    n: int
    rho_in: float = 1.0
    R: float = 64.0
    phi: object = 1.0  # float or FieldExpr on the inner sphere
    f: object = 0.0  # float or FieldExpr
    asymptote: Asymptote | None = None
    points: int = 512
    n_theta: int = 64

    def __post_init__(self):
        if self.n not in (2, 3):
            raise ValidationError("exterior problems need n in {2, 3}")
        if not isinstance(self.op, (Trace, PucciPlus, PucciMinus)):
            raise ValidationError(f"operator {self.op.name} is not radially compatible")
        if self.rho_in < 1:
            raise ValidationError("inner radius must be >= 1")
        if self.R < 4 * self.rho_in:
            raise TruncationTooSmall(f"R = {self.R} < 4 rho_in = {4 * self.rho_in}")
        if self.asymptote is None:
            self.asymptote = Asymptote.zero(self.n)
        self.phi = _as_field(self.phi, self.n)
        self.f = _as_field(self.f, self.n)

    @property
    def decay_hypothesis(self) -> bool:
        """Whether ``Lam/lam < n - 1``, under which a decay rate is expected."""
        return self.op.Lam / self.op.lam < self.n - 1

    @property
    def decay_exponent(self) -> float:
        return 1 - (self.n - 1) * self.op.lam / self.op.Lam


@dataclass
class RadialSolution:
    r: np.ndarray
    U: np.ndarray
    w: np.ndarray
    policy_iterations: int
    decay_hypothesis: bool
    R: float

    @property
    def diff(self) -> np.ndarray:
        return self.U - self.w


@dataclass
class AnnularSolution:
    r: np.ndarray
    theta: np.ndarray
    U: np.ndarray  # shape (len(r), len(theta))
    w: np.ndarray
    iterations: int
    R: float
    decay_hypothesis: bool
    report: dict = field(default_factory=dict)


def _policies(op):
    if isinstance(op, Trace):
        return [(op.scale, op.scale)], max
    weights = (op.lam, op.Lam)
    pols = [(w1, w2) for w1 in weights for w2 in weights]
    return pols, (max if isinstance(op, PucciPlus) else min)


def _fitted_coefficients(w1, p, h):
    """Exponentially fitted three-point stencil for ``w1 d'' + p d'``."""
    pe = p * h / w1
    sigma = 1.0 if abs(pe) < 1e-12 else (pe / 2) / math.tanh(pe / 2)
    sec = w1 * sigma / h**2
    first = p / (2 * h)
    return sec - first, -2 * sec, sec + first


def _constant(value, n, what):
    if isinstance(value, float):
        return value
    if value.is_constant:
        return float(value(*np.zeros(n)))
    raise NotRadial(f"radial mode needs a constant {what}, got {value.source!r}")


def _solve_radial(p: ExteriorProblem, max_policy_iter: int = 200) -> RadialSolution:
    phi = _constant(p.phi, p.n, "boundary data")
    f = _constant(p.f, p.n, "right side")
    a = p.asymptote.radial_curvature()
    if a is None:
        raise NotRadial("radial mode needs an asymptote of the form a|x|^2/2")

    n = p.n
    s = np.linspace(math.log(p.rho_in), math.log(p.R), p.points)
    h = s[1] - s[0]
    r = np.exp(s)
    W = 0.5 * a * r**2
    e2s = np.exp(2 * s[1:-1])

    pols, pick = _policies(p.op)
    stencils = []
    for w1, w2 in pols:
        lo, di, up = _fitted_coefficients(w1, (n - 1) * w2 - w1, h)
        stencils.append((lo, di, up, a * (w1 + (n - 1) * w2)))

    d = np.linspace(phi - W[0], 0.0, p.points)

    def values(d):
        # (policy, node) values of w1 kappa_1 + (n-1) w2 kappa_2 - f at interior nodes
        out = np.empty((len(pols), p.points - 2))
        for k, (lo, di, up, const) in enumerate(stencils):
            out[k] = (lo * d[:-2] + di * d[1:-1] + up * d[2:]) / e2s + const - f
        return out

    def choose(vals, current):
        best = np.max(vals, axis=0) if pick is max else np.min(vals, axis=0)
        # keep the current policy wherever it is still optimal, so the iteration cannot cycle on ties
        if current is not None:
            cur = vals[current, np.arange(vals.shape[1])]
            keep = np.abs(cur - best) <= 1e-13 * (1 + np.abs(best))
        else:
            keep = np.zeros(vals.shape[1], dtype=bool)
        chosen = np.argmax(vals, axis=0) if pick is max else np.argmin(vals, axis=0)
        return np.where(keep, current if current is not None else chosen, chosen)

    policy = choose(values(d), None)
    for it in range(1, max_policy_iter + 1):
        ab = np.zeros((3, p.points))
        rhs = np.empty(p.points)
        ab[1, 0] = ab[1, -1] = 1.0
        rhs[0], rhs[-1] = phi - W[0], 0.0
        lo = np.array([stencils[k][0] for k in policy])
        di = np.array([stencils[k][1] for k in policy])
        up = np.array([stencils[k][2] for k in policy])
        const = np.array([stencils[k][3] for k in policy])
        ab[1, 1:-1] = di
        ab[0, 2:] = up
        ab[2, :-2] = lo
        rhs[1:-1] = e2s * (f - const)
        d = solve_banded((1, 1), ab, rhs)
        new = choose(values(d), policy)
        if np.array_equal(new, policy):
            break
        policy = new
    else:
        raise NewtonDivergence("radial policy iteration did not settle")

    return RadialSolution(r, W + d, W, it, p.decay_hypothesis, p.R)


def _solve_annular(p: ExteriorProblem, tol: float = 1e-10, max_iter: int = 50) -> AnnularSolution:
    if p.n != 2:
        raise ValidationError("annular mode is two-dimensional only")
    nr, nt = p.points, p.n_theta
    s = np.linspace(math.log(p.rho_in), math.log(p.R), nr)
    hs = s[1] - s[0]
    theta = np.arange(nt) * 2 * np.pi / nt
    ht = theta[1]
    r = np.exp(s)
    S, TH = np.meshgrid(s, theta, indexing="ij")
    X = np.stack([np.exp(S) * np.cos(TH), np.exp(S) * np.sin(TH)], axis=-1)
    pts = X.reshape(-1, 2)

    def field_values(fe, x):
        return np.full(x.shape[:-1], fe) if isinstance(fe, float) else fe.at_points(x)

    f = field_values(p.f, pts)
    w = p.asymptote(X)
    inner = field_values(p.phi, X[0])

    # 1-D difference matrices; s is non-periodic (boundary rows overwritten), theta periodic
    ones = np.ones(nr)
    Ds = sp.diags([-ones[:-1], ones[:-1]], [-1, 1], shape=(nr, nr)) / (2 * hs)
    Dss = sp.diags([ones[:-1], -2 * ones, ones[:-1]], [-1, 0, 1], shape=(nr, nr)) / hs**2
    onet = np.ones(nt)
    Dt = sp.diags([-onet[:-1], onet[:-1]], [-1, 1], shape=(nt, nt), format="lil")
    Dt[0, nt - 1], Dt[nt - 1, 0] = -1.0, 1.0
    Dt = Dt.tocsr() / (2 * ht)
    Dtt = sp.diags([onet[:-1], -2 * onet, onet[:-1]], [-1, 0, 1], shape=(nt, nt), format="lil")
    Dtt[0, nt - 1], Dtt[nt - 1, 0] = 1.0, 1.0
    Dtt = Dtt.tocsr() / ht**2
    It, Is = sp.identity(nt), sp.identity(nr)
    ops = {
        "rr": sp.kron(Dss - Ds, It, format="csr"),
        "rt": sp.kron(Ds, Dt, format="csr") - sp.kron(Is, Dt, format="csr"),
        "tt": sp.kron(Ds, It, format="csr") + sp.kron(Is, Dtt, format="csr"),
    }
    scale = np.exp(-2 * S).ravel()
    boundary = np.zeros((nr, nt), dtype=bool)
    boundary[0] = boundary[-1] = True
    boundary = boundary.ravel()
    bvals = np.zeros((nr, nt))
    bvals[0], bvals[-1] = inner, w[-1]
    bvals = bvals.ravel()

    def hess(u):
        H = np.empty((u.size, 2, 2))
        H[:, 0, 0] = scale * (ops["rr"] @ u)
        H[:, 0, 1] = H[:, 1, 0] = scale * (ops["rt"] @ u)
        H[:, 1, 1] = scale * (ops["tt"] @ u)
        return H

    def residual(u, H):
        R = p.op.evaluate(H) - f
        return np.where(boundary, u - bvals, R)

    frac = ((S - s[0]) / (s[-1] - s[0])).ravel()
    u = (1 - frac) * np.tile(inner, nr) + frac * np.tile(w[-1], nr)
    u = np.where(boundary, bvals, u)
    H = hess(u)
    R = residual(u, H)
    rnorm = np.max(np.abs(R))
    it = 0
    while rnorm > tol:
        if it >= max_iter:
            raise NewtonDivergence(f"annular Newton stalled (residual {rnorm:.3e})")
        C = p.op.linearize(H)
        J = (
            sp.diags(scale * C[:, 0, 0]) @ ops["rr"]
            + sp.diags(scale * 2 * C[:, 0, 1]) @ ops["rt"]
            + sp.diags(scale * C[:, 1, 1]) @ ops["tt"]
        )
        J = sp.diags(np.where(boundary, 0.0, 1.0)) @ J + sp.diags(boundary.astype(float))
        du = spla.spsolve(J.tocsc(), -R)
        alpha = 1.0
        for _ in range(31):
            u_new = u + alpha * du
            H_new = hess(u_new)
            R_new = residual(u_new, H_new)
            if np.max(np.abs(R_new)) <= (1 - 1e-4 * alpha) * rnorm:
                break
            alpha *= 0.5
        else:
            raise NewtonDivergence("annular line search failed")
        u, H, R = u_new, H_new, R_new
        rnorm = np.max(np.abs(R))
        it += 1

    U = u.reshape(nr, nt)
    diff = U - w
    keep = r <= 0.8 * p.R
    outer = keep & (r >= r[keep][int(0.9 * keep.sum())])
    c_star = float(np.mean(diff[outer]))
    report = {
        "sup_abs_diff": float(np.max(np.abs(diff[keep]))),
        "c_star": c_star,
        "outer_spread": float(np.max(np.abs(diff[outer] - c_star))),
        "residual": float(rnorm),
        "decay_claimed": False,
    }
    return AnnularSolution(r, theta, U, w, it, p.R, p.decay_hypothesis, report)


def solve_exterior(p: ExteriorProblem, mode: str = "radial"):
    """Solve the truncated exterior problem; ``mode`` is ``"radial"`` or ``"annular"``."""
    if mode == "radial":
        return _solve_radial(p)
    if mode == "annular":
        return _solve_annular(p)
    raise ValidationError(f"unknown exterior mode {mode!r}")


@dataclass
class DecayReport:
    c_star: float
    exponent: float
    amplitude: float
    fit_residual: float
    window: tuple
    c_decile: float

    def as_dict(self) -> dict:
        return {
            "c_star": self.c_star,
            "exponent": self.exponent,
            "amplitude": self.amplitude,
            "fit_residual": self.fit_residual,
            "window": list(self.window),
            "c_decile": self.c_decile,
        }


def decay_fit(samples, r0: float, R: float | None = None, max_residual: float = 0.05,
              min_rate: float = 0.01) -> DecayReport:
    """Fit ``u - w ~ c* + C r^p`` on ``[r0, 0.8 R]``.

    ``samples`` is a :class:`RadialSolution` or a pair ``(r, u - w)``. ``c*``
    starts from the mean of the largest-radius decile and is refined jointly
    with ``(C, p)`` by least squares; the reported exponent is the slope of
    ``log|u - w - c*|`` against ``log r``. Exponents in ``(-min_rate, 0)`` are
    rejected: over a window of a few decades they cannot be told apart from
    logarithmic growth.
    """
    if isinstance(samples, RadialSolution):
        r, d = samples.r, samples.diff
        R = samples.R if R is None else R
    else:
        r, d = (np.asarray(a, dtype=float) for a in samples)
        R = float(r.max()) if R is None else R
    win = (r >= r0) & (r <= 0.8 * R)
    rw, dw = r[win], d[win]
    if rw.size < 10:
        raise NoDecay(f"fit window [{r0}, {0.8 * R}] holds only {rw.size} samples")
    decile = rw >= np.quantile(rw, 0.9)
    c_decile = float(np.mean(dw[decile]))
    span = float(np.max(np.abs(dw - c_decile))) or 1.0
    y = dw / span
    x = rw / rw[0]

    def projected(pw):
        basis = np.stack([np.ones_like(x), x**pw], axis=1)
        coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
        return coef, float(np.sum((basis @ coef - y) ** 2))

    grid = np.linspace(-6, -0.01, 300)
    p0 = grid[int(np.argmin([projected(g)[1] for g in grid]))]
    pw = minimize_scalar(lambda q: projected(q)[1], bounds=(p0 - 0.03, min(p0 + 0.03, -1e-4)), method="bounded",
                         options={"xatol": 1e-10}).x
    (c0, C0), _ = projected(pw)
    sol = least_squares(lambda z: z[0] + z[1] * x ** z[2] - y, [c0, C0, pw], xtol=1e-15, ftol=1e-15, gtol=1e-15)
    c_star = float(sol.x[0] * span)
    amp = np.abs(dw - c_star)
    if np.any(amp <= 0):
        raise NoDecay("u - w - c* vanishes inside the fit window")
    slope, icpt = np.polyfit(np.log(rw), np.log(amp), 1)
    resid = float(np.sqrt(np.mean((np.log(amp) - (slope * np.log(rw) + icpt)) ** 2)))
    increases = np.diff(amp) > 1e-9 * amp.max()
    if slope > -min_rate or resid > max_residual or np.any(increases):
        raise NoDecay(f"no power-law decay (slope {slope:.3g}, log-log residual {resid:.3g})")
    return DecayReport(c_star, float(slope), float(math.exp(icpt)), resid, (float(rw[0]), float(rw[-1])), c_decile)


@dataclass
class BarrierParams:
    A_hat: float
    B_hat: float
    rho: float
    r0: float


def build_barrier(rho: float, r0: float, n: int, lam: float, Lam: float, sup_phi: float,
                  delta: float = 1.0, f_inf: float = 0.0, f_sup: float = 0.0,
                  w_sup: float = 0.0, cbar: float | None = None) -> BarrierParams:
    """Parameters of the boundary barrier ``B(exp(-A rho^2) - exp(-A |x - z|^2))``.

    ``A_hat = n Lam / (lam rho^2)``, twice the smallest admissible value, and
    ``B_hat`` is the least value meeting the three barrier inequalities, with
    ``F(+-c I)`` bounded through the Pucci extremal values ``+-n Lam c``.
    """
    if rho <= 0:
        raise ValidationError("barrier radius must be positive")
    cbar = sup_phi if cbar is None else cbar
    A_hat = n * Lam / (lam * rho**2)
    c_phi = 4 * sup_phi / delta**2
    # with this A_hat, n Lam - 2 A_hat lam rho^2 = -n Lam
    gain = 2 * math.exp(-4 * A_hat * r0**2) * A_hat * n * Lam
    need_super = (n * Lam * c_phi - f_inf) / gain
    need_sub = (f_sup + n * Lam * c_phi) / gain
    need_outer = (w_sup + cbar) / (math.exp(-A_hat * rho**2) - math.exp(-A_hat * (rho + 1) ** 2))
    return BarrierParams(A_hat, max(need_super, need_sub, need_outer, 0.0), rho, r0)


def barrier_check(sol: RadialSolution, params: BarrierParams, phi: float, sup_phi: float,
                  delta: float = 1.0, eps: float = 0.0) -> float:
    """Largest violation of ``|U - phi| <= eps + 2 sup|phi| |x-x0|^2 / delta^2 + w+`` on ``[rho, r0]``.

    Evaluated along the ray through the boundary point ``x0`` with the interior
    ball centred at the origin; a value ``<= 0`` means the envelope holds.
    """
    near = (sol.r >= params.rho) & (sol.r <= params.r0)
    r = sol.r[near]
    dist = r - params.rho
    wplus = params.B_hat * (np.exp(-params.A_hat * params.rho**2) - np.exp(-params.A_hat * r**2))
    bound = eps + 2 * sup_phi / delta**2 * dist**2 + wplus
    return float(np.max(np.abs(sol.U[near] - phi) - bound))
