"""The VC1 norm, its dual measure norm, traces and Markov operators.

``vc_norm`` solves both sides of the duality

    min  sum a*mu + sum b*nu   s.t.  a(i) + b(j) >= |f(i, j)|,  a, b >= 0
    max  sum |f| * lam         s.t.  lam >= 0, row sums <= mu, col sums <= nu

with different solvers (HiGHS for the separable bound, a transportation
simplex for the plan) and returns both witnesses.  The plan ``lam`` is the
subbistochastic density ``h = lam / (mu x nu)`` in measure form.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix

from ._transport import max_profit_plan
from .core import DiscreteSpace, PlanMeasure, ValidationError, as_kernel, spaces_for
from .thickness import CertificateError

BOUND_TOL = 1e-9
GAP_RTOL = 1e-8
ORACLE_MAX_CELLS = 16


@dataclass(frozen=True)
class SeparableBound:
    a: np.ndarray
    b: np.ndarray

    def cost(self, X: DiscreteSpace, Y: DiscreteSpace) -> float:
        return float(self.a @ X.weights + self.b @ Y.weights)


@dataclass(frozen=True)
class NormCertificate:
    value: float
    primal: SeparableBound
    dual: PlanMeasure
    gap: float

    def density(self, X: DiscreteSpace, Y: DiscreteSpace) -> np.ndarray:
        return self.dual.to_dense() / np.outer(X.weights, Y.weights)

    def check(self, f, X: DiscreteSpace, Y: DiscreteSpace) -> None:
        c = np.abs(as_kernel(f, X, Y))
        a, b = self.primal.a, self.primal.b
        if np.any(a < 0) or np.any(b < 0):
            raise CertificateError("separable bound has a negative part")
        if np.any(a[:, None] + b[None, :] < c - BOUND_TOL):
            raise CertificateError("separable bound does not dominate |f|")
        lam = self.dual
        if np.any(lam.mass < 0):
            raise CertificateError("dual density is negative")
        if np.any(lam.row_var() / X.weights > 1 + BOUND_TOL) or \
                np.any(lam.col_var() / Y.weights > 1 + BOUND_TOL):
            raise CertificateError("dual density is not subbistochastic")
        dual_value = float(np.sum(c[lam.rows, lam.cols] * lam.mass))
        gap = self.primal.cost(X, Y) - dual_value
        if abs(gap) > GAP_RTOL * max(1.0, self.value):
            raise CertificateError(f"duality gap {gap:.3e} exceeds tolerance")

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "gap": self.gap,
            "primal": {"a": self.primal.a.tolist(), "b": self.primal.b.tolist()},
            "dual": [[int(i), int(j), float(w)] for i, j, w in
                     zip(self.dual.rows, self.dual.cols, self.dual.mass)],
        }


def _separable_bound(c: np.ndarray, X: DiscreteSpace, Y: DiscreteSpace) -> SeparableBound:
    n, m = c.shape
    ri, cj = np.nonzero(c > 0)
    if not len(ri):
        return SeparableBound(np.zeros(n), np.zeros(m))
    k = len(ri)
    rows = np.concatenate([np.arange(k), np.arange(k)])
    cols = np.concatenate([ri, n + cj])
    A = coo_matrix((-np.ones(2 * k), (rows, cols)), shape=(k, n + m)).tocsr()
    res = linprog(np.concatenate([X.weights, Y.weights]), A_ub=A, b_ub=-c[ri, cj],
                  bounds=(0, None), method="highs",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise CertificateError(f"separable-bound LP failed: {res.message}")
    a = np.maximum(res.x[:n], 0.0)
    b = np.maximum(res.x[n:], 0.0)
    # absorb solver round-off into a so the bound dominates |f| exactly
    a = np.maximum(a, np.max(c - b[None, :], axis=1))
    return SeparableBound(a, b)


def vc_norm(f, X: DiscreteSpace | None = None, Y: DiscreteSpace | None = None) -> NormCertificate:
    """VC1 norm of ``f`` with a separable bound and a subbistochastic density."""
    f = as_kernel(f)
    X, Y = spaces_for(f.shape, X, Y)
    c = np.abs(f)
    primal = _separable_bound(c, X, Y)
    lam, _ = max_profit_plan(c, X.weights, Y.weights)
    lam = np.maximum(lam, 0.0)
    dual = PlanMeasure.from_dense(np.where(c > 0, lam, 0.0), signed=False)
    value = primal.cost(X, Y)
    gap = value - float(np.sum(c[dual.rows, dual.cols] * dual.mass))
    return NormCertificate(value, primal, dual, gap)


def vc_norm_value(f, X: DiscreteSpace | None = None, Y: DiscreteSpace | None = None) -> float:
    return vc_norm(f, X, Y).value


def vc_norm_oracle(f, X: DiscreteSpace | None = None, Y: DiscreteSpace | None = None) -> float:
    """Exact norm of a tiny kernel by vertex enumeration.

    With ``b`` eliminated (``b(j) = max(0, max_i |f(i,j)| - a(i))``) the cost
    is a convex piecewise-linear function of ``a`` on a box, so its minimum
    sits at a vertex of the arrangement of its breakpoint hyperplanes.
    """
    c = np.abs(as_kernel(f))
    X, Y = spaces_for(c.shape, X, Y)
    if c.size > ORACLE_MAX_CELLS:
        raise ValidationError(f"{c.size} cells exceed the oracle bound {ORACLE_MAX_CELLS}")
    wx, wy = X.weights, Y.weights
    if c.shape[0] > c.shape[1]:
        c, wx, wy = c.T, wy, wx
    r, s = c.shape
    top = c.max(axis=1)
    planes = []
    for i in range(r):
        e = np.zeros(r)
        e[i] = 1.0
        planes.append((e, 0.0))
        planes.append((e, top[i]))
        for j in range(s):
            planes.append((e, c[i, j]))
    for i, k in itertools.combinations(range(r), 2):
        e = np.zeros(r)
        e[i], e[k] = 1.0, -1.0
        for j in range(s):
            planes.append((e, c[i, j] - c[k, j]))
    normals = np.array([p[0] for p in planes])
    offsets = np.array([p[1] for p in planes])
    combos = np.array(list(itertools.combinations(range(len(planes)), r)))
    mats = normals[combos]
    rhs = offsets[combos]
    ok = np.abs(np.linalg.det(mats)) > 0.5
    pts = np.linalg.solve(mats[ok], rhs[ok][..., None])[..., 0]
    pts = pts[np.all((pts >= -1e-12) & (pts <= top + 1e-12), axis=1)]
    pts = np.clip(pts, 0.0, top)
    b = np.maximum(0.0, np.max(c[None, :, :] - pts[:, :, None], axis=1))
    costs = pts @ wx + b @ wy
    return float(costs.min())


def me_norm(eta: PlanMeasure, X: DiscreteSpace | None = None, Y: DiscreteSpace | None = None) -> float:
    """Larger of the sup-norms of the marginal densities of ``|eta|``."""
    X, Y = spaces_for(eta.shape, X, Y)
    return float(max(np.max(eta.row_var() / X.weights), np.max(eta.col_var() / Y.weights)))


def pairing(f, eta: PlanMeasure) -> float:
    """Integral of ``f`` against the plan ``eta``."""
    f = as_kernel(f)
    if f.shape != eta.shape:
        raise ValidationError(f"kernel shape {f.shape} does not match plan shape {eta.shape}")
    return float(np.sum(f[eta.rows, eta.cols] * eta.mass))


class MarkovResult(NamedTuple):
    values: np.ndarray
    empty_rows: np.ndarray

    @property
    def flagged(self) -> bool:
        return bool(self.empty_rows.any())


def markov_apply(lam: PlanMeasure, g, X: DiscreteSpace | None = None,
                 Y: DiscreteSpace | None = None) -> MarkovResult:
    """Conditional expectation ``(U g)(i) = sum_j lam(i,j) g(j) / lam(i, .)``.

    Rows carrying no mass map to 0 and are reported in ``empty_rows``.
    """
    if np.any(lam.mass < 0):
        raise ValidationError("Markov operator needs a nonnegative plan")
    X, Y = spaces_for(lam.shape, X, Y)
    g = np.asarray(g, dtype=float)
    if g.shape != (lam.shape[1],):
        raise ValidationError(f"test vector must have length {lam.shape[1]}")
    num = np.bincount(lam.rows, weights=lam.mass * g[lam.cols], minlength=lam.shape[0])
    den = lam.row_var()
    empty = den <= 0
    if empty.any():
        warnings.warn(f"{int(empty.sum())} rows carry no plan mass; mapped to 0", stacklevel=2)
    out = np.divide(num, den, out=np.zeros_like(num), where=~empty)
    return MarkovResult(out, empty)
