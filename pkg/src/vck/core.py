"""Discrete measure spaces, kernels, cell sets and plans on a product grid.

A continuum object on ``[0, 1]^2`` is represented by its values at the cell
centres of an ``n x m`` grid carrying product weights.  Kernels are plain 2-D
float arrays and cell sets are 2-D boolean arrays; the helpers here validate
them against the spaces they live on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

WEIGHT_SUM_TOL = 1e-12
METRIC_TOL = 1e-12
MARGINAL_TOL = 1e-10


class ValidationError(ValueError):
    """Raised when an input violates a precondition of an operation."""


def _to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (bool, np.bool_)):
        raise ValidationError(f"boolean weight {x!r}")
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    return Fraction(float(x))


@dataclass(frozen=True, eq=False)
class DiscreteSpace:
    """A finite probability space with strictly positive point masses.

    ``exact`` keeps the normalised weights as rationals so that exact
    algorithms (integer max-flow, enumeration oracles) can use them.
    """

    weights: np.ndarray
    exact: tuple[Fraction, ...]
    original_sum: float

    @property
    def size(self) -> int:
        return len(self.weights)

    def __len__(self) -> int:
        return len(self.weights)

    @cached_property
    def denominator(self) -> int:
        return math.lcm(*(w.denominator for w in self.exact))

    def common_denominator(self) -> int:
        return self.denominator

    def scaled_weights(self, D: int) -> tuple[int, ...]:
        """Weights times ``D`` as integers; ``D`` must be a multiple of the denominator."""
        return tuple(w.numerator * (D // w.denominator) for w in self.exact)

    def is_uniform(self) -> bool:
        return all(w == self.exact[0] for w in self.exact)

    def same_as(self, other: "DiscreteSpace") -> bool:
        return self.exact == other.exact


def make_space(weights: Sequence) -> DiscreteSpace:
    """Build a :class:`DiscreteSpace`, normalising ``weights`` to sum 1.

    Integers, floats, decimal strings and fractions are accepted; the
    normalisation is carried out in exact rational arithmetic.
    """
    ws = list(weights)
    if not ws:
        raise ValidationError("empty weight vector")
    fracs = []
    for i, w in enumerate(ws):
        if not isinstance(w, (Fraction, int, np.integer, str)):
            if not math.isfinite(float(w)):
                raise ValidationError(f"non-finite weight at index {i}")
        try:
            fw = _to_fraction(w)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValidationError(f"unparseable weight at index {i}: {w!r}") from exc
        if fw <= 0:
            raise ValidationError(f"nonpositive weight at index {i}")
        fracs.append(fw)
    total = sum(fracs, Fraction(0))
    exact = tuple(f / total for f in fracs)
    values = np.array([float(f) for f in exact])
    return DiscreteSpace(weights=values, exact=exact, original_sum=float(total))


def uniform_space(n: int) -> DiscreteSpace:
    if n < 1:
        raise ValidationError("space size must be positive")
    return make_space([1] * n)


def as_kernel(values, X: DiscreteSpace | None = None, Y: DiscreteSpace | None = None) -> np.ndarray:
    """Validate a kernel matrix and return it as a float array."""
    f = np.asarray(values, dtype=float)
    if f.ndim != 2:
        raise ValidationError(f"kernel must be 2-D, got shape {f.shape}")
    if not np.all(np.isfinite(f)):
        raise ValidationError("kernel contains non-finite values")
    _check_shape(f.shape, X, Y)
    return f


def as_mask(mask, X: DiscreteSpace | None = None, Y: DiscreteSpace | None = None) -> np.ndarray:
    z = np.asarray(mask)
    if z.ndim != 2:
        raise ValidationError(f"cell set must be 2-D, got shape {z.shape}")
    if z.dtype != bool:
        if not np.all(np.isin(z, (0, 1))):
            raise ValidationError("cell set entries must be 0 or 1")
        z = z.astype(bool)
    _check_shape(z.shape, X, Y)
    return z


def _check_shape(shape, X, Y):
    if X is not None and shape[0] != X.size:
        raise ValidationError(f"row count {shape[0]} does not match |X| = {X.size}")
    if Y is not None and shape[1] != Y.size:
        raise ValidationError(f"column count {shape[1]} does not match |Y| = {Y.size}")


def spaces_for(shape: tuple[int, int], X: DiscreteSpace | None = None,
               Y: DiscreteSpace | None = None) -> tuple[DiscreteSpace, DiscreteSpace]:
    """Fill in uniform spaces for whichever side was not given."""
    X = X if X is not None else uniform_space(shape[0])
    Y = Y if Y is not None else uniform_space(shape[1])
    _check_shape(shape, X, Y)
    return X, Y


@dataclass(frozen=True, eq=False)
class PlanMeasure:
    """A sparse (possibly signed) measure on a product grid.

    Stored as parallel arrays of row index, column index and mass.  Zero
    masses are kept if given explicitly; duplicates are rejected.
    """

    rows: np.ndarray
    cols: np.ndarray
    mass: np.ndarray
    shape: tuple[int, int]
    signed: bool = False

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64).ravel()
        cols = np.asarray(self.cols, dtype=np.int64).ravel()
        mass = np.asarray(self.mass, dtype=float).ravel()
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "shape", (int(self.shape[0]), int(self.shape[1])))
        if not (len(rows) == len(cols) == len(mass)):
            raise ValidationError("plan arrays have different lengths")
        n, m = self.shape
        if len(rows) and (rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= m):
            raise ValidationError(f"plan index out of range for shape {self.shape}")
        if not np.all(np.isfinite(mass)):
            raise ValidationError("plan contains non-finite mass")
        keys = rows * m + cols
        if len(np.unique(keys)) != len(keys):
            raise ValidationError("duplicate (row, col) entries in plan")
        if not self.signed and np.any(mass < 0):
            raise ValidationError("negative mass in an unsigned plan")

    @classmethod
    def from_dense(cls, matrix, signed: bool | None = None) -> "PlanMeasure":
        a = np.asarray(matrix, dtype=float)
        r, c = np.nonzero(a)
        if signed is None:
            signed = bool(np.any(a < 0))
        return cls(r, c, a[r, c], a.shape, signed)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.rows, self.cols] = self.mass
        return out

    def row_var(self) -> np.ndarray:
        return np.bincount(self.rows, weights=np.abs(self.mass), minlength=self.shape[0])

    def col_var(self) -> np.ndarray:
        return np.bincount(self.cols, weights=np.abs(self.mass), minlength=self.shape[1])

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum())

    @property
    def nnz(self) -> int:
        return len(self.mass)

    def scaled(self, c: float) -> "PlanMeasure":
        return PlanMeasure(self.rows, self.cols, c * self.mass, self.shape,
                           self.signed or c < 0)

    def __add__(self, other: "PlanMeasure") -> "PlanMeasure":
        if self.shape != other.shape:
            raise ValidationError("plan shapes differ")
        return PlanMeasure.from_dense(self.to_dense() + other.to_dense(),
                                      signed=self.signed or other.signed)


class MetricViolation(NamedTuple):
    kind: str
    indices: tuple[int, ...]

    def __str__(self):
        return f"{self.kind} {self.indices}"


def validate_metric(values, tol: float = METRIC_TOL, max_report: int = 1000) -> list[MetricViolation]:
    """List the semimetric axioms violated by a square distance matrix.

    Triangle violations are reported as ``(i, j, k)`` with ``d[i, k] >
    d[i, j] + d[j, k]``.  An empty list means the matrix is a valid
    semimetric (zero distances between distinct points are allowed).
    """
    d = np.asarray(values, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValidationError(f"metric matrix must be square, got shape {d.shape}")
    if not np.all(np.isfinite(d)):
        raise ValidationError("metric matrix contains non-finite values")
    out: list[MetricViolation] = []
    for i in np.flatnonzero(np.abs(np.diag(d)) > tol):
        out.append(MetricViolation("nonzero-diagonal", (int(i),)))
    for i, j in zip(*np.nonzero(d < -tol)):
        out.append(MetricViolation("negative", (int(i), int(j))))
    for i, j in zip(*np.nonzero(np.triu(np.abs(d - d.T) > tol))):
        out.append(MetricViolation("asymmetric", (int(i), int(j))))
    n = d.shape[0]
    for j in range(n):
        if len(out) >= max_report:
            break
        bad = d > d[:, j, None] + d[None, j, :] + tol
        for i, k in zip(*np.nonzero(bad)):
            out.append(MetricViolation("triangle", (int(i), j, int(k))))
            if len(out) >= max_report:
                break
    return out


def level_set(f, g, eps: float) -> np.ndarray:
    """Cells where ``|f - g| > eps`` (strict)."""
    f = as_kernel(f)
    g = as_kernel(g)
    if f.shape != g.shape:
        raise ValidationError(f"shape mismatch {f.shape} vs {g.shape}")
    if eps < 0:
        raise ValidationError("eps must be nonnegative")
    return np.abs(f - g) > eps


def cell_centers(n: int) -> np.ndarray:
    return (np.arange(n) + 0.5) / n


SMOOTH_FUNCTIONS = {
    "sincos": lambda x, y: np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y),
    "xy": lambda x, y: x * y,
    "sum": lambda x, y: x + y,
    "absdiff": lambda x, y: np.abs(x - y),
    "gauss": lambda x, y: np.exp(-4.0 * (x - y) ** 2),
}

CIRCULANT_PROFILES = {
    "cos": lambda t: np.cos(2 * np.pi * t),
    "tent": lambda t: 1.0 - 2.0 * np.minimum(t, 1.0 - t),
    "step": lambda t: (t < 0.5).astype(float),
}

KERNEL_KINDS = ("triangle", "smooth", "circulant", "lowrank", "random")
SET_KINDS = ("diagonal", "band", "rectangle", "random")
PLAN_KINDS = ("diagonal", "permutation", "product", "vertical_line")


def gen_kernel(kind: str, n: int, *, seed: int | None = None, **params) -> np.ndarray:
    """Generate one of the named test kernels on an ``n x n`` grid.

    ``smooth`` takes ``name`` (see :data:`SMOOTH_FUNCTIONS`, default
    ``sincos``); ``circulant`` takes either a vector ``v`` of length ``n``
    or a ``profile`` name sampled at ``k/n``; ``lowrank`` takes ``r`` and
    optionally explicit ``phi``/``psi`` arrays of shape ``(r, n)``.
    """
    if n < 1:
        raise ValidationError("n must be positive")
    if kind == "triangle":
        i = np.arange(n)
        return (i[:, None] >= i[None, :]).astype(float)
    if kind == "smooth":
        name = params.get("name", "sincos")
        if name not in SMOOTH_FUNCTIONS:
            raise ValidationError(f"unknown smooth function {name!r}")
        x = cell_centers(n)
        return SMOOTH_FUNCTIONS[name](x[:, None], x[None, :])
    if kind == "circulant":
        if params.get("v") is not None:
            v = np.asarray(params["v"], dtype=float)
            if v.shape != (n,):
                raise ValidationError(f"circulant vector must have length {n}")
        else:
            name = params.get("profile", "cos")
            if name not in CIRCULANT_PROFILES:
                raise ValidationError(f"unknown circulant profile {name!r}")
            v = CIRCULANT_PROFILES[name](np.arange(n) / n)
        i = np.arange(n)
        return v[(i[:, None] - i[None, :]) % n]
    if kind == "lowrank":
        r = int(params.get("r", 1))
        if r < 1 or r > n:
            raise ValidationError(f"rank r={r} out of range 1..{n}")
        if params.get("phi") is not None:
            phi = np.asarray(params["phi"], dtype=float).reshape(r, n)
            psi = np.asarray(params.get("psi", phi), dtype=float).reshape(r, n)
        else:
            rng = np.random.default_rng(seed)
            phi = rng.standard_normal((r, n))
            psi = rng.standard_normal((r, n))
        return phi.T @ psi
    if kind == "random":
        return np.random.default_rng(seed).uniform(0.0, 1.0, size=(n, n))
    raise ValidationError(f"unknown kernel kind {kind!r}")


def gen_set(kind: str, n: int, *, seed: int | None = None, **params) -> np.ndarray:
    """Generate a named cell set on an ``n x n`` grid."""
    if n < 1:
        raise ValidationError("n must be positive")
    i = np.arange(n)
    if kind == "diagonal":
        return np.eye(n, dtype=bool)
    if kind == "band":
        k = int(params.get("k", 1))
        if k < 0 or k >= n:
            raise ValidationError(f"band width k={k} must satisfy 0 <= k < n")
        dist = np.abs(i[:, None] - i[None, :])
        if params.get("strict", True):
            return (dist > 0) & (dist <= k)
        return dist <= k
    if kind == "rectangle":
        A = np.asarray(params.get("A", []), dtype=int)
        B = np.asarray(params.get("B", []), dtype=int)
        for name, idx in (("A", A), ("B", B)):
            if idx.size and (idx.min() < 0 or idx.max() >= n):
                raise ValidationError(f"rectangle side {name} out of range")
        z = np.zeros((n, n), dtype=bool)
        z[np.ix_(A, B)] = True
        return z
    if kind == "random":
        p = float(params.get("p", 0.5))
        return np.random.default_rng(seed).random((n, n)) < p
    raise ValidationError(f"unknown set kind {kind!r}")


def gen_plan(kind: str, X: DiscreteSpace | None = None, Y: DiscreteSpace | None = None,
             *, sigma=None, n: int | None = None) -> PlanMeasure:
    """Generate a bistochastic plan.

    ``vertical_line`` lives on the ``n x n`` grid flattened as ``u * n + v``
    and puts mass ``1/n^3`` on every pair ``((u, v), (u, v'))``.
    """
    if kind == "vertical_line":
        if n is None:
            if X is None:
                raise ValidationError("vertical_line needs the grid side n")
            n = math.isqrt(X.size)
        if n < 1:
            raise ValidationError("n must be positive")
        for S in (X, Y):
            if S is not None and (S.size != n * n or not S.is_uniform()):
                raise ValidationError(f"vertical_line needs uniform spaces of size {n * n}")
        u, v, w = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
        rows = (u * n + v).ravel()
        cols = (u * n + w).ravel()
        return PlanMeasure(rows, cols, np.full(rows.size, 1.0 / n ** 3), (n * n, n * n))
    if X is None:
        raise ValidationError(f"plan kind {kind!r} needs a space")
    Y = X if Y is None else Y
    if kind == "product":
        return PlanMeasure.from_dense(np.outer(X.weights, Y.weights))
    if kind in ("diagonal", "permutation"):
        if not X.same_as(Y):
            raise ValidationError(f"{kind} plan requires identical weights on both sides")
        size = X.size
        if kind == "diagonal":
            s = np.arange(size)
        else:
            s = np.asarray(sigma, dtype=int) if sigma is not None else None
            if s is None or s.shape != (size,) or not np.array_equal(np.sort(s), np.arange(size)):
                raise ValidationError("sigma is not a permutation of the index set")
            if not np.allclose(X.weights[s], X.weights, rtol=0, atol=1e-15):
                raise ValidationError("sigma does not preserve the weights")
        return PlanMeasure(np.arange(size), s, X.weights.copy(), (size, size))
    raise ValidationError(f"unknown plan kind {kind!r}")


@dataclass(frozen=True)
class PlanClass:
    kind: str
    row_marginal: np.ndarray
    col_marginal: np.ndarray

    def __str__(self):
        return self.kind


def plan_class(lam: PlanMeasure, X: DiscreteSpace, Y: DiscreteSpace,
               tol: float = MARGINAL_TOL) -> PlanClass:
    """Classify a nonnegative plan by its marginals.

    Checked in order: bistochastic, submultistochastic, almost-bistochastic,
    general.
    """
    if lam.signed and np.any(lam.mass < 0):
        raise ValidationError("classification is defined for nonnegative plans only")
    if lam.shape != (X.size, Y.size):
        raise ValidationError(f"plan shape {lam.shape} does not match spaces")
    r, c = lam.row_var(), lam.col_var()
    if np.all(np.abs(r - X.weights) <= tol) and np.all(np.abs(c - Y.weights) <= tol):
        kind = "bistochastic"
    elif np.all(r <= X.weights + tol) and np.all(c <= Y.weights + tol):
        kind = "submultistochastic"
    elif np.all(r > 0) and np.all(c > 0):
        kind = "almost-bistochastic"
    else:
        kind = "general"
    return PlanClass(kind, r, c)
