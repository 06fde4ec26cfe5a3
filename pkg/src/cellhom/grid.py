"""Uniform periodic grids on the unit torus [0,1)^n and finite differences.

Node ``k = (k_1, ..., k_n)`` sits at ``x = k * h`` with ``h = 1/m``. Grid
functions are stored as flat row-major arrays of length ``m**n``; index
arithmetic wraps modulo ``m`` on every axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np
import scipy.sparse as sp
from scipy.ndimage import map_coordinates, spline_filter

from .errors import InvalidDimension, InvalidResolution, ValidationError, ZeroDirection


@dataclass(frozen=True)
class TorusGrid:
    n: int
    m: int

    @property
    def h(self) -> float:
        return 1.0 / self.m

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.m,) * self.n

    @property
    def size(self) -> int:
        return self.m**self.n

    def coords(self) -> tuple[np.ndarray, ...]:
        """Node coordinates as n arrays of shape ``grid.shape``."""
        axis = np.arange(self.m) * self.h
        return tuple(np.meshgrid(*([axis] * self.n), indexing="ij"))

    def points(self) -> np.ndarray:
        """Node coordinates as an ``(m**n, n)`` array in storage order."""
        return np.stack([c.ravel() for c in self.coords()], axis=-1)

    def flat_index(self, index) -> int:
        index = tuple(int(i) % self.m for i in index)
        return int(np.ravel_multi_index(index, self.shape))


def make_grid(n: int, m: int) -> TorusGrid:
    if n not in (2, 3):
        raise InvalidDimension(f"dimension must be 2 or 3, got {n}")
    if m < 8 or m % 2:
        raise InvalidResolution(f"points per axis must be even and >= 8, got {m}")
    return TorusGrid(n, m)


@dataclass
class GridFunction:
    grid: TorusGrid
    values: np.ndarray
    mean_zero: bool = field(default=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        if values.size != self.grid.size:
            raise ValidationError(
                f"expected {self.grid.size} values for {self.grid}, got {values.size}"
            )
        if not np.all(np.isfinite(values)):
            raise ValidationError("grid function has non-finite values")
        self.values = values

    @classmethod
    def from_callable(cls, grid: TorusGrid, func) -> "GridFunction":
        """Sample ``func(x1, ..., xn)`` (vectorized) at the nodes."""
        vals = np.broadcast_to(func(*grid.coords()), grid.shape)
        return cls(grid, np.array(vals, dtype=float))

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    def shifted(self, shift) -> "GridFunction":
        """Return ``x -> g(x + shift*h)`` for an integer node shift."""
        arr = np.roll(self.as_array(), tuple(-int(s) for s in shift), axis=tuple(range(self.grid.n)))
        return GridFunction(self.grid, arr, self.mean_zero)


def mean(gf: GridFunction) -> float:
    # Node average: the trapezoid rule on the torus.
    return float(np.sum(gf.values) / gf.values.size)


def project_mean_zero(gf: GridFunction) -> GridFunction:
    return GridFunction(gf.grid, gf.values - mean(gf), mean_zero=True)


def _diff_1d(m: int, h: float):
    """Periodic first (central) and second difference matrices on one axis."""
    ones = np.ones(m)
    d1 = sp.diags([ones[:-1], -ones[:-1]], [1, -1], shape=(m, m), format="lil")
    d1[0, m - 1] = -1.0
    d1[m - 1, 0] = 1.0
    d2 = sp.diags([ones[:-1], -2 * ones, ones[:-1]], [1, 0, -1], shape=(m, m), format="lil")
    d2[0, m - 1] = 1.0
    d2[m - 1, 0] = 1.0
    return d1.tocsr() / (2 * h), d2.tocsr() / h**2


def _embed(mats, n: int, m: int):
    """Kronecker product placing ``mats[axis]`` on the given axes (identity elsewhere)."""
    eye = sp.identity(m, format="csr")
    out = None
    for axis in range(n):
        factor = mats.get(axis, eye)
        out = factor if out is None else sp.kron(out, factor, format="csr")
    return out


@lru_cache(maxsize=16)
def _stencils(n: int, m: int):
    d1, d2 = _diff_1d(m, 1.0 / m)
    ops = {}
    for i, j in combinations_with_replacement(range(n), 2):
        if i == j:
            ops[(i, j)] = _embed({i: d2}, n, m)
        else:
            # the symmetric four-point cross stencil is the product of central differences
            ops[(i, j)] = _embed({i: d1, j: d1}, n, m)
    for mat in ops.values():
        mat.sort_indices()
    return ops


def hessian_matrices(grid: TorusGrid) -> dict:
    """Sparse matrices ``D[(i, j)]`` (i <= j) acting on flat grid values."""
    return _stencils(grid.n, grid.m)


def hessian_field(gf: GridFunction) -> np.ndarray:
    """Discrete Hessian at every node, shape ``(m**n, n, n)``."""
    grid = gf.grid
    out = np.empty((grid.size, grid.n, grid.n))
    for (i, j), mat in hessian_matrices(grid).items():
        col = mat @ gf.values
        out[:, i, j] = col
        out[:, j, i] = col
    return out


def discrete_hessian(gf: GridFunction, index) -> np.ndarray:
    """Discrete Hessian at a single node, evaluated directly from the stencil."""
    grid = gf.grid
    arr = gf.as_array()
    h = grid.h
    base = np.array([int(i) for i in index])
    if base.size != grid.n:
        raise ValidationError(f"node index must have {grid.n} entries")

    def at(offset):
        return arr[tuple((base + offset) % grid.m)]

    eye = np.eye(grid.n, dtype=int)
    out = np.zeros((grid.n, grid.n))
    centre = at(np.zeros(grid.n, dtype=int))
    for i in range(grid.n):
        out[i, i] = (at(eye[i]) + at(-eye[i]) - 2 * centre) / h**2
        for j in range(i + 1, grid.n):
            cross = (
                at(eye[i] + eye[j])
                + at(-eye[i] - eye[j])
                - at(eye[i] - eye[j])
                - at(-eye[i] + eye[j])
            ) / (4 * h**2)
            out[i, j] = out[j, i] = cross
    return out


def second_difference(u, e, x) -> float:
    """Second difference quotient ``(u(x+e) + u(x-e) - 2u(x)) / |e|^2``.

    ``u`` maps a point (1-D array) to a float; ``e`` is an integer lattice vector.
    """
    e = np.asarray(e, dtype=float)
    if not np.any(e):
        raise ZeroDirection("direction must be nonzero")
    x = np.asarray(x, dtype=float)
    return float((u(x + e) + u(x - e) - 2 * u(x)) / np.dot(e, e))


def dump_grid_function(gf: GridFunction, path) -> None:
    """Write the text dump: header ``"n m"``, then one value per line, row-major."""
    with open(path, "w") as fh:
        fh.write(f"{gf.grid.n} {gf.grid.m}\n")
        for val in gf.values:
            fh.write(f"{float(val)!r}\n")


def load_grid_function(path) -> GridFunction:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValidationError(f"{path}: bad header")
        grid = make_grid(int(header[0]), int(header[1]))
        values = np.array([float(line) for line in fh if line.strip()])
    return GridFunction(grid, values)


def periodic_interpolator(gf: GridFunction, order: int = 3):
    """Periodic spline interpolant of ``gf``; returns a callable on ``(..., n)`` points.

    Exactly 1-periodic by construction (coordinates are wrapped onto the torus),
    and it reproduces the node values.
    """
    grid = gf.grid
    coeffs = spline_filter(gf.as_array(), order=order, mode="grid-wrap")

    def interp(pts):
        pts = np.asarray(pts, dtype=float)
        idx = np.mod(pts, 1.0) * grid.m
        flat = np.moveaxis(idx, -1, 0).reshape(grid.n, -1)
        out = map_coordinates(coeffs, flat, order=order, mode="grid-wrap", prefilter=False)
        return out.reshape(pts.shape[:-1])

    return interp
