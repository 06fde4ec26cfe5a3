"""Catalog of elliptic operators ``F`` acting on symmetric matrices.

Every operator evaluates on stacks of matrices: ``M`` has shape ``(..., n, n)``
and the result has shape ``M.shape[:-2]``. ``linearize`` returns the
coefficient matrices ``c_ij`` with ``F(M + eps N) = F(M) + eps <c, N> + o(eps)``;
at the kinks of the Pucci and Bellman operators it returns a fixed, valid
subgradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLinearization, ValidationError
from .fields import FieldExpr, parse_field

EIG_EPS = 1e-10


def sym_eigh(M):
    """Eigen-decomposition of (stacks of) symmetric matrices, ascending eigenvalues."""
    M = np.asarray(M, dtype=float)
    return np.linalg.eigh(0.5 * (M + np.swapaxes(M, -1, -2)))


def eigenvalues(M) -> np.ndarray:
    return sym_eigh(M)[0]


def _matrix_norm(M):
    # spectral norm, used only to scale the kink threshold
    return np.max(np.abs(eigenvalues(M)), axis=-1)


def elementary_symmetric(M, k: int):
    """``sigma_0 .. sigma_k`` of the eigenvalues of ``M`` via Newton's identities on traces."""
    M = np.asarray(M, dtype=float)
    sig = [np.ones(M.shape[:-2])]
    power = M
    traces = []
    for r in range(1, k + 1):
        if r > 1:
            power = power @ M
        traces.append(np.trace(power, axis1=-2, axis2=-1))
        acc = np.zeros(M.shape[:-2])
        for i in range(1, r + 1):
            acc = acc + (-1) ** (i - 1) * sig[r - i] * traces[i - 1]
        sig.append(acc / r)
    return sig


def sigma_k(M, k: int):
    return elementary_symmetric(M, k)[k]


def newton_tensor(M, k: int):
    """``T_{k-1}(M) = d sigma_k / dM`` by the recursion ``T_r = sigma_r I - M T_{r-1}``."""
    M = np.asarray(M, dtype=float)
    sig = elementary_symmetric(M, k - 1)
    eye = np.broadcast_to(np.eye(M.shape[-1]), M.shape)
    T = eye.copy()
    for r in range(1, k):
        T = sig[r][..., None, None] * eye - M @ T
    return 0.5 * (T + np.swapaxes(T, -1, -2))


def cone_check(M, k: int):
    """True where ``sigma_j(M) > 0`` for all ``j <= k`` (membership of the Gamma_k cone)."""
    M = np.asarray(M, dtype=float)
    if not 1 <= k <= M.shape[-1]:
        raise ValidationError(f"cone order must lie in 1..{M.shape[-1]}, got {k}")
    sig = elementary_symmetric(M, k)
    ok = np.ones(M.shape[:-2], dtype=bool)
    for j in range(1, k + 1):
        ok &= sig[j] > 0
    return ok if ok.shape else bool(ok)


def _frob(C, N):
    return np.einsum("...ij,...ij->...", C, N)


@dataclass(frozen=True)
class Operator:
    """Base class. ``lam``/``Lam`` are the ellipticity constants."""

    name = "abstract"
    concave = False
    convex = False

    @property
    def lam(self) -> float:
        raise NotImplementedError

    @property
    def Lam(self) -> float:
        raise NotImplementedError

    @property
    def rotation_invariant(self) -> bool:
        return False

    def evaluate(self, M, x=None):
        raise NotImplementedError

    def linearize(self, M, x=None):
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.name}


@dataclass(frozen=True)
class Trace(Operator):
    """``scale * tr(M)``; ``scale=1`` is the Laplacian symbol."""

    scale: float = 1.0
    name = "trace"
    concave = True
    convex = True

    @property
    def lam(self):
        return self.scale

    @property
    def Lam(self):
        return self.scale

    @property
    def rotation_invariant(self):
        return True

    def evaluate(self, M, x=None):
        return self.scale * np.trace(np.asarray(M, dtype=float), axis1=-2, axis2=-1)

    def linearize(self, M, x=None):
        M = np.asarray(M, dtype=float)
        return np.broadcast_to(self.scale * np.eye(M.shape[-1]), M.shape).copy()

    def describe(self):
        return {"kind": self.name, "scale": self.scale}


@dataclass(frozen=True)
class LinearNondivergence(Operator):
    """``a_ij(x) M_ij`` with periodic coefficient expressions."""

    coefficients: tuple  # n x n nested tuple of FieldExpr
    bounds: tuple = (1.0, 1.0)
    name = "linear"
    concave = True
    convex = True

    @classmethod
    def from_strings(cls, rows, n: int, sample_m: int = 32):
        if len(rows) != n or any(len(r) != n for r in rows):
            raise ValidationError(f"coefficient matrix must be {n}x{n}")
        exprs = tuple(tuple(parse_field(s, n) for s in row) for row in rows)
        for i in range(n):
            for j in range(i + 1, n):
                if str(exprs[i][j]) != str(exprs[j][i]):
                    raise ValidationError(f"coefficients not symmetric at ({i + 1},{j + 1})")
        op = cls(exprs)
        lam, Lam = op.sampled_bounds(sample_m)
        if lam <= 0:
            raise ValidationError(f"coefficients not uniformly elliptic (min eigenvalue {lam:.3g})")
        return cls(exprs, (lam, Lam))

    @property
    def n(self):
        return len(self.coefficients)

    @property
    def lam(self):
        return self.bounds[0]

    @property
    def Lam(self):
        return self.bounds[1]

    def coefficient_field(self, pts) -> np.ndarray:
        """Coefficient matrices at an ``(..., n)`` array of points."""
        pts = np.asarray(pts, dtype=float)
        out = np.empty(pts.shape[:-1] + (self.n, self.n))
        for i in range(self.n):
            for j in range(self.n):
                out[..., i, j] = self.coefficients[i][j].at_points(pts)
        return out

    def sampled_bounds(self, m: int):
        axis = np.arange(m) / m
        pts = np.stack(np.meshgrid(*([axis] * self.n), indexing="ij"), axis=-1).reshape(-1, self.n)
        ev = eigenvalues(self.coefficient_field(pts))
        return float(ev.min()), float(ev.max())

    def evaluate(self, M, x=None):
        if x is None:
            raise ValidationError("linear operator needs evaluation points")
        return _frob(self.coefficient_field(x), np.asarray(M, dtype=float))

    def linearize(self, M, x=None):
        if x is None:
            raise ValidationError("linear operator needs evaluation points")
        return self.coefficient_field(x)

    def describe(self):
        return {
            "kind": self.name,
            "coefficients": [[e.source for e in row] for row in self.coefficients],
        }


@dataclass(frozen=True)
class _Pucci(Operator):
    lam_: float = 1.0
    Lam_: float = 1.0

    def __post_init__(self):
        if not 0 < self.lam_ <= self.Lam_:
            raise ValidationError(f"need 0 < lambda <= Lambda, got ({self.lam_}, {self.Lam_})")

    @property
    def lam(self):
        return self.lam_

    @property
    def Lam(self):
        return self.Lam_

    @property
    def rotation_invariant(self):
        return True

    def _weights(self, kappa, M):
        raise NotImplementedError

    def evaluate(self, M, x=None):
        M = np.asarray(M, dtype=float)
        if self.lam_ == self.Lam_:
            return self.lam_ * np.trace(M, axis1=-2, axis2=-1)
        kappa = eigenvalues(M)
        return np.sum(self._weights(kappa, M) * kappa, axis=-1)

    def linearize(self, M, x=None):
        M = np.asarray(M, dtype=float)
        if self.lam_ == self.Lam_:
            return np.broadcast_to(self.lam_ * np.eye(M.shape[-1]), M.shape).copy()
        kappa, Q = sym_eigh(M)
        w = self._weights(kappa, M)
        return np.einsum("...ik,...k,...jk->...ij", Q, w, Q)

    def describe(self):
        return {"kind": self.name, "lam": self.lam_, "Lam": self.Lam_}


@dataclass(frozen=True)
class PucciPlus(_Pucci):
    name = "pucci_plus"
    convex = True

    def _weights(self, kappa, M):
        eps = EIG_EPS * (1 + _matrix_norm(M))[..., None]
        return np.where(kappa < -eps, self.lam_, self.Lam_)


@dataclass(frozen=True)
class PucciMinus(_Pucci):
    name = "pucci_minus"
    concave = True

    def _weights(self, kappa, M):
        eps = EIG_EPS * (1 + _matrix_norm(M))[..., None]
        return np.where(kappa < -eps, self.Lam_, self.lam_)


@dataclass(frozen=True)
class _Bellman(Operator):
    """Min or max of ``tr(a_k M)`` over constant positive definite ``a_k``."""

    members: tuple = ()

    def __post_init__(self):
        if not self.members:
            raise ValidationError("Bellman operator needs at least one member")
        for a in self.members:
            a = np.asarray(a, dtype=float)
            if not np.allclose(a, a.T):
                raise ValidationError("Bellman members must be symmetric")
            if eigenvalues(a).min() <= 0:
                raise ValidationError("Bellman members must be positive definite")

    @property
    def stack(self):
        return np.array(self.members, dtype=float)

    @property
    def lam(self):
        return float(eigenvalues(self.stack).min())

    @property
    def Lam(self):
        return float(eigenvalues(self.stack).max())

    def _values(self, M):
        M = np.asarray(M, dtype=float)
        return np.einsum("kij,...ij->...k", self.stack, M)

    def _pick(self, values):
        raise NotImplementedError

    def evaluate(self, M, x=None):
        vals = self._values(M)
        return np.take_along_axis(vals, self._pick(vals)[..., None], axis=-1)[..., 0]

    def linearize(self, M, x=None):
        # argmin/argmax return the lowest index on ties
        return self.stack[self._pick(self._values(M))]

    def describe(self):
        return {"kind": self.name, "members": [np.asarray(a, dtype=float).tolist() for a in self.members]}


@dataclass(frozen=True)
class BellmanMin(_Bellman):
    name = "bellman_min"
    concave = True

    def _pick(self, values):
        return np.argmin(values, axis=-1)


@dataclass(frozen=True)
class BellmanMax(_Bellman):
    name = "bellman_max"
    convex = True

    def _pick(self, values):
        return np.argmax(values, axis=-1)


@dataclass(frozen=True)
class HessianSigmaK(Operator):
    """``sigma_k`` of the eigenvalues; elliptic and concave (as sigma_k^(1/k)) on Gamma_k only.

    ``lam``/``Lam`` have no global meaning here and report NaN.
    """

    k: int = 2
    name = "sigma_k"
    concave = True

    @property
    def lam(self):
        return float("nan")

    @property
    def Lam(self):
        return float("nan")

    @property
    def rotation_invariant(self):
        return True

    def evaluate(self, M, x=None):
        return sigma_k(M, self.k)

    def linearize(self, M, x=None):
        T = newton_tensor(M, self.k)
        if self.k > 1 and not np.all(eigenvalues(T) > 0):
            raise DegenerateLinearization(
                f"sigma_{self.k} linearization is not positive definite (eigenvalues outside Gamma_{self.k})"
            )
        return T

    def describe(self):
        return {"kind": self.name, "k": self.k}


def eval_operator(op: Operator, M, x=None):
    out = op.evaluate(M, x)
    return float(out) if np.ndim(out) == 0 else out


def linearize(op: Operator, M, x=None):
    return op.linearize(M, x)


def make_operator(block: dict, n: int) -> Operator:
    """Build an operator from a configuration block such as ``{"kind": "pucci_plus", "lam": 1, "Lam": 2}``."""
    block = dict(block)
    kind = block.pop("kind", None)
    allowed = {
        "trace": {"scale"},
        "linear": {"coefficients"},
        "pucci_plus": {"lam", "Lam"},
        "pucci_minus": {"lam", "Lam"},
        "bellman_min": {"members"},
        "bellman_max": {"members"},
        "sigma_k": {"k"},
    }
    if kind not in allowed:
        raise ValidationError(f"unknown operator kind {kind!r}; expected one of {sorted(allowed)}")
    extra = set(block) - allowed[kind]
    if extra:
        raise ValidationError(f"unknown keys for operator {kind!r}: {sorted(extra)}")
    if kind == "trace":
        return Trace(float(block.get("scale", 1.0)))
    if kind == "linear":
        if "coefficients" not in block:
            raise ValidationError("linear operator needs 'coefficients'")
        return LinearNondivergence.from_strings(block["coefficients"], n)
    if kind in ("pucci_plus", "pucci_minus"):
        cls = PucciPlus if kind == "pucci_plus" else PucciMinus
        return cls(float(block.get("lam", 1.0)), float(block.get("Lam", 1.0)))
    if kind in ("bellman_min", "bellman_max"):
        members = block.get("members")
        if not members:
            raise ValidationError(f"{kind} needs a nonempty 'members' list")
        arrs = []
        for a in members:
            a = np.asarray(a, dtype=float)
            if a.shape != (n, n):
                raise ValidationError(f"Bellman members must be {n}x{n}")
            arrs.append(tuple(map(tuple, a)))
        cls = BellmanMin if kind == "bellman_min" else BellmanMax
        return cls(tuple(arrs))
    k = int(block.get("k", 2))
    if not 1 <= k <= n:
        raise ValidationError(f"sigma_k order must lie in 1..{n}")
    return HessianSigmaK(k)


__all__ = [
    "Operator",
    "Trace",
    "LinearNondivergence",
    "PucciPlus",
    "PucciMinus",
    "BellmanMin",
    "BellmanMax",
    "HessianSigmaK",
    "FieldExpr",
    "cone_check",
    "eigenvalues",
    "elementary_symmetric",
    "eval_operator",
    "linearize",
    "make_operator",
    "newton_tensor",
    "sigma_k",
    "sym_eigh",
]
