"""Recover ``u = x^T A x / 2 + b.x + c + v`` (``v`` periodic, mean zero) from samples of ``u``.

Integer lattice shifts annihilate the periodic part, so the second difference
quotients ``Delta_e^2 u = e^T A e / |e|^2`` read off ``A`` exactly at any base
point, and ``b_k = (u(e_k) - u(-e_k)) / 2`` when ``u`` is sampled around 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .effective import EffectiveOperator, solvability_check
from .errors import InconsistentCurvature, OutOfRange, ValidationError
from .fields import FieldExpr
from .grid import GridFunction, TorusGrid, periodic_interpolator


@dataclass
class SampledSolution:
    """A pointwise evaluator ``u(pts)`` on ``(..., n)`` arrays, valid for ``|x|_inf <= R_max``."""

    evaluator: object
    n: int
    R_max: float = 1e4

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        if np.any(np.abs(pts) > self.R_max * (1 + 1e-12)):
            raise OutOfRange(f"sample point outside the box of radius {self.R_max}")
        return np.asarray(self.evaluator(pts), dtype=float)

    @classmethod
    def from_parts(cls, A, b=None, c=0.0, periodic=None, R_max: float = 1e4) -> "SampledSolution":
        """``x^T A x / 2 + b.x + c + p(x)`` with ``p`` a FieldExpr, GridFunction, callable or None."""
        A = np.asarray(A, dtype=float)
        n = A.shape[0]
        b = np.zeros(n) if b is None else np.asarray(b, dtype=float)
        if isinstance(periodic, FieldExpr):
            per = periodic.at_points
        elif isinstance(periodic, GridFunction):
            per = periodic_interpolator(periodic)
        else:
            per = periodic

        def u(pts):
            out = 0.5 * np.einsum("...i,ij,...j->...", pts, A, pts) + pts @ b + c
            return out if per is None else out + per(pts)

        return cls(u, n, R_max)


@dataclass
class DecompositionReport:
    A: np.ndarray
    b: np.ndarray
    c: float
    v: GridFunction
    periodicity_deviation: float
    v_mean: float
    solvable: bool | None = None

    def as_dict(self) -> dict:
        return {
            "A": self.A.tolist(),
            "b": self.b.tolist(),
            "c": self.c,
            "periodicity_deviation": self.periodicity_deviation,
            "v_mean": self.v_mean,
            "v_max": float(np.max(np.abs(self.v.values))),
            "solvable": self.solvable,
        }


def blow_down(s: SampledSolution, R: float, grid: TorusGrid) -> GridFunction:
    """Samples of ``u(R x) / R^2`` at the grid nodes shifted to ``[-1/2, 1/2)^n``."""
    if R > s.R_max:
        raise OutOfRange(f"scale R = {R} exceeds R_max = {s.R_max}")
    pts = grid.points() - 0.5
    return GridFunction(grid, s(R * pts) / R**2)


def _curvature_at(s: SampledSolution, base: np.ndarray) -> np.ndarray:
    """``A`` from lattice second differences at each base point; shape ``(len(base), n, n)``."""
    n = s.n
    eye = np.eye(n)
    u0 = s(base)

    def d2(e):
        return s(base + e) + s(base - e) - 2 * u0

    out = np.empty((base.shape[0], n, n))
    for i in range(n):
        out[:, i, i] = d2(eye[i])
        for j in range(i + 1, n):
            # e^T A e with e = e_i +- e_j gives A_ii + A_jj +- 2 A_ij
            out[:, i, j] = out[:, j, i] = 0.25 * (d2(eye[i] + eye[j]) - d2(eye[i] - eye[j]))
    return out


def fit_quadratic(s: SampledSolution, n_base: int = 1000, seed: int = 0, tol: float = 1e-9,
                  robust: bool = False):
    """Return ``(A, b, c)``.

    ``A`` is read at the origin and cross-checked at ``n_base`` seeded base
    points in the sampling box; disagreement beyond ``tol`` (relative to the
    size of ``u`` there) raises :class:`InconsistentCurvature`. With
    ``robust=True`` the median over base points is used and no consistency
    check is made. ``c`` is provisional (``u(0)``) until
    :func:`extract_remainder` moves the remainder's mean into it.
    """
    n = s.n
    rng = np.random.default_rng(seed)
    box = max(min(s.R_max - 2.0, 10.0), 0.0)
    base = np.vstack([np.zeros(n), rng.uniform(-box, box, size=(n_base, n))])
    curv = _curvature_at(s, base)
    if robust:
        A = np.median(curv, axis=0)
    else:
        A = curv[0]
        scale = 1.0 + float(np.max(np.abs(s(base))))
        spread = float(np.max(np.abs(curv - A)))
        if spread > tol * scale:
            raise InconsistentCurvature(
                f"lattice second differences vary by {spread:.3e} across base points; "
                "input is not a quadratic plus a periodic function"
            )
    eye = np.eye(n)
    b = 0.5 * (s(eye) - s(-eye))
    c = float(s(np.zeros((1, n)))[0])
    return A, b, c


def extract_remainder(s: SampledSolution, A, b, c, grid: TorusGrid):
    """Remainder ``u - x^T A x/2 - b.x`` on the unit cell, with its mean moved into ``c``.

    Returns ``(v, c, periodicity_deviation, v_mean)``; the deviation is the max over
    nodes and unit shifts of ``|r(x + e_k) - r(x)|`` for the raw remainder ``r``.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)

    def remainder(pts):
        return s(pts) - 0.5 * np.einsum("...i,ij,...j->...", pts, A, pts) - pts @ b

    pts = grid.points()
    r = remainder(pts)
    dev = 0.0
    for k in range(grid.n):
        shifted = pts.copy()
        shifted[:, k] += 1.0
        dev = max(dev, float(np.max(np.abs(remainder(shifted) - r))))
    c_new = float(np.mean(r))
    v = r - c_new
    return GridFunction(grid, v, mean_zero=True), c_new, dev, float(np.mean(v))


def decompose(s: SampledSolution, grid: TorusGrid, **fit_kw) -> DecompositionReport:
    A, b, c = fit_quadratic(s, **fit_kw)
    v, c, dev, vmean = extract_remainder(s, A, b, c, grid)
    return DecompositionReport(A, b, c, v, dev, vmean)


def verify_decomposition(report: DecompositionReport, eo: EffectiveOperator) -> bool:
    """``Fbar(A) == <f>`` within ``10 h^2`` and the remainder periodic within ``10 h^2``."""
    if report.A.shape != (eo.grid.n, eo.grid.n):
        raise ValidationError("report and effective operator have different dimensions")
    ok = solvability_check(eo, report.A) and report.periodicity_deviation <= 10 * eo.grid.h**2
    report.solvable = bool(ok)
    return bool(ok)


def reconstruct(report: DecompositionReport, R_max: float = 1e4) -> SampledSolution:
    return SampledSolution.from_parts(report.A, report.b, report.c, report.v, R_max)


def hessian_growth_ratio(s: SampledSolution, p: float, radii=(2, 4, 8), samples_per_axis: int = 48,
                         step: float = 1e-3) -> dict:
    """Finite-radius diagnostic ``int_{B_r} |D^2 u|^p dx / r^n`` for each radius.

    Riemann sum on a uniform grid over the ball, Hessian by central differences
    of step ``step``, Frobenius norm.
    """
    n = s.n
    eye = np.eye(n) * step
    out = {}
    for r in radii:
        axis = (np.arange(samples_per_axis) + 0.5) / samples_per_axis * 2 * r - r
        pts = np.stack(np.meshgrid(*([axis] * n), indexing="ij"), axis=-1).reshape(-1, n)
        pts = pts[np.linalg.norm(pts, axis=1) < r]
        u0 = s(pts)
        H = np.empty((pts.shape[0], n, n))
        for i in range(n):
            H[:, i, i] = (s(pts + eye[i]) + s(pts - eye[i]) - 2 * u0) / step**2
            for j in range(i + 1, n):
                H[:, i, j] = H[:, j, i] = (
                    s(pts + eye[i] + eye[j]) + s(pts - eye[i] - eye[j])
                    - s(pts + eye[i] - eye[j]) - s(pts - eye[i] + eye[j])
                ) / (4 * step**2)
        cell = (2 * r / samples_per_axis) ** n
        integral = float(np.sum(np.linalg.norm(H, axis=(1, 2)) ** p) * cell)
        out[float(r)] = integral / r**n
    return out
