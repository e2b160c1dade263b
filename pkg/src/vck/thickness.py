"""Thickness of cell sets and the tau distance between kernels.

Thickness is the minimum weight ``mu(X1) + nu(Y1)`` of a row/column cover
of a set.  On a finite grid it is the value of a bipartite vertex-cover LP
whose dual is the maximal mass of a submultistochastic plan supported in the
set, so it is computed as a max-flow / min-cut pair and returned together
with both witnesses.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _maxflow
from .core import (DiscreteSpace, PlanMeasure, ValidationError, as_kernel, as_mask,
                   spaces_for)

GAP_TOL = 1e-8
COVER_TOL = 1e-9
NULL_TOL = 1e-10
ORACLE_MAX_SIZE = 24


class CertificateError(RuntimeError):
    """A returned witness failed its independent self-check."""


@dataclass(frozen=True)
class FractionalCover:
    a: np.ndarray
    b: np.ndarray

    def cost(self, X: DiscreteSpace, Y: DiscreteSpace) -> float:
        return float(self.a @ X.weights + self.b @ Y.weights)


@dataclass(frozen=True)
class IntegralCover:
    X1: tuple[int, ...]
    Y1: tuple[int, ...]

    def cost(self, X: DiscreteSpace, Y: DiscreteSpace) -> float:
        return float(X.weights[list(self.X1)].sum() + Y.weights[list(self.Y1)].sum())

    def covers(self, mask: np.ndarray) -> bool:
        left = mask.copy()
        left[list(self.X1), :] = False
        left[:, list(self.Y1)] = False
        return not left.any()


@dataclass(frozen=True)
class ThicknessCertificate:
    value: float
    fractional: FractionalCover
    integral: IntegralCover
    dual: PlanMeasure
    gap: float
    exact: Fraction | None = None

    def check(self, mask, X: DiscreteSpace, Y: DiscreteSpace, tol: float = GAP_TOL) -> None:
        """Re-verify every certificate invariant; raise on the first failure."""
        mask = as_mask(mask, X, Y)
        a, b = self.fractional.a, self.fractional.b
        if np.any(a < -COVER_TOL) or np.any(a > 1 + COVER_TOL) or \
                np.any(b < -COVER_TOL) or np.any(b > 1 + COVER_TOL):
            raise CertificateError("fractional cover leaves [0, 1]")
        if mask.any() and np.min((a[:, None] + b[None, :])[mask]) < 1 - COVER_TOL:
            raise CertificateError("fractional cover misses a masked cell")
        if not self.integral.covers(mask):
            raise CertificateError("integral cover misses a masked cell")
        lam = self.dual
        if lam.nnz and not mask[lam.rows, lam.cols].all():
            raise CertificateError("dual plan leaves the set")
        if np.any(lam.mass < 0):
            raise CertificateError("dual plan has negative mass")
        if np.any(lam.row_var() > X.weights + tol) or np.any(lam.col_var() > Y.weights + tol):
            raise CertificateError("dual plan is not submultistochastic")
        gap = self.fractional.cost(X, Y) - lam.total_mass
        if abs(gap) > tol:
            raise CertificateError(f"duality gap {gap:.3e} exceeds {tol:.0e}")
        if abs(self.integral.cost(X, Y) - self.value) > tol:
            raise CertificateError("integral cover cost differs from the value")

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "gap": self.gap,
            "exact": None if self.exact is None else str(self.exact),
            "fractional": {"a": self.fractional.a.tolist(), "b": self.fractional.b.tolist()},
            "integral": {"X1": list(self.integral.X1), "Y1": list(self.integral.Y1)},
            "dual": [[int(i), int(j), float(w)] for i, j, w in
                     zip(self.dual.rows, self.dual.cols, self.dual.mass)],
        }


def _integer_capacities(X: DiscreteSpace, Y: DiscreteSpace):
    D = math.lcm(X.common_denominator(), Y.common_denominator())
    if 2 * D >= _maxflow.INT_CAP_LIMIT:
        return None
    return D, X.scaled_weights(D), Y.scaled_weights(D)


def thickness(Z, X: DiscreteSpace | None = None, Y: DiscreteSpace | None = None) -> ThicknessCertificate:
    """Thickness of the cell set ``Z`` with primal and dual witnesses.

    Rational weights with a small common denominator are solved exactly in
    integers; other weights use floating-point max-flow.
    """
    Z = as_mask(Z)
    X, Y = spaces_for(Z.shape, X, Y)
    n, m = Z.shape
    if not Z.any():
        empty = PlanMeasure([], [], [], (n, m))
        return ThicknessCertificate(0.0, FractionalCover(np.zeros(n), np.zeros(m)),
                                    IntegralCover((), ()), empty, 0.0, Fraction(0))
    scaled = _integer_capacities(X, Y)
    if scaled is not None:
        D, cap_r, cap_c = scaled
        flow_int = _maxflow.int_max_flow(Z, cap_r, cap_c)
        rows, cols = _maxflow.source_reachable(Z, flow_int, cap_r, cap_c, tol=0)
        cut = sum(c for c, r in zip(cap_r, rows) if not r) + sum(c for c, k in zip(cap_c, cols) if k)
        exact = Fraction(cut, D)
        flow = flow_int / D
    else:
        flow = _maxflow.float_max_flow(Z, X.weights, Y.weights)
        rows, cols = _maxflow.source_reachable(Z, flow, X.weights, Y.weights, tol=1e-13)
        exact = None
    X1 = tuple(int(i) for i in np.flatnonzero(~rows))
    Y1 = tuple(int(j) for j in np.flatnonzero(cols))
    integral = IntegralCover(X1, Y1)
    fractional = FractionalCover((~rows).astype(float), cols.astype(float))
    r, c = np.nonzero(flow > 0)
    dual = PlanMeasure(r, c, flow[r, c], (n, m))
    value = float(exact) if exact is not None else integral.cost(X, Y)
    gap = fractional.cost(X, Y) - dual.total_mass
    return ThicknessCertificate(value, fractional, integral, dual, gap, exact)


def thickness_value(Z, X: DiscreteSpace | None = None, Y: DiscreteSpace | None = None) -> float:
    return thickness(Z, X, Y).value


def thickness_oracle(Z, X: DiscreteSpace | None = None, Y: DiscreteSpace | None = None) -> Fraction:
    """Exhaustive minimum cover weight in exact rational arithmetic.

    For every subset ``X1`` of the smaller side the cheapest completing
    ``Y1`` is forced (all columns hit by uncovered rows), so enumerating the
    smaller side visits every minimal cover.
    """
    Z = as_mask(Z)
    X, Y = spaces_for(Z.shape, X, Y)
    if X.size + Y.size > ORACLE_MAX_SIZE:
        raise ValidationError(f"|X| + |Y| = {X.size + Y.size} exceeds the oracle bound {ORACLE_MAX_SIZE}")
    wx, wy = X.exact, Y.exact
    if Z.shape[0] > Z.shape[1]:
        Z, wx, wy = Z.T, wy, wx
    n = Z.shape[0]
    best = None
    for bits in itertools.product((False, True), repeat=n):
        chosen = np.array(bits, dtype=bool)
        hit = Z[~chosen].any(axis=0)
        cost = sum((w for w, c in zip(wx, chosen) if c), Fraction(0)) + \
            sum((w for w, h in zip(wy, hit) if h), Fraction(0))
        if best is None or cost < best:
            best = cost
    return best


@dataclass(frozen=True)
class Refusal:
    reason: str
    value: float | None = None
    attempt: object = None

    def __bool__(self):
        return False


def extract_null_cover(Z, X: DiscreteSpace | None = None,
                       Y: DiscreteSpace | None = None) -> IntegralCover | Refusal:
    """Zero-weight cover of a set of thickness zero, else a refusal.

    Weights are strictly positive, so thickness zero forces an empty set and
    the returned cover is empty.
    """
    cert = thickness(Z, X, Y)
    if cert.value > NULL_TOL:
        return Refusal("set has positive thickness", cert.value)
    return IntegralCover((), ())


@dataclass(frozen=True)
class TauResult:
    value: float
    breakpoints: tuple[tuple[float, float], ...]
    method: str = "exact"

    def __float__(self):
        return self.value

    def to_dict(self) -> dict:
        return {"value": self.value, "method": self.method,
                "breakpoints": [list(p) for p in self.breakpoints]}


def tau_distance(f, g, X: DiscreteSpace | None = None, Y: DiscreteSpace | None = None,
                 method: str = "exact", tol: float = 1e-6) -> TauResult:
    """Exact tau distance ``inf{eps > 0 : thi{|f - g| > eps} <= eps}``.

    The level set only changes at the distinct values ``v_0 = 0 < v_1 < ...``
    of ``|f - g|``; on ``[v_k, v_{k+1})`` its thickness ``t_k`` is constant,
    and the answer is ``max(v_k, t_k)`` for the first ``k`` with
    ``t_k < v_{k+1}``.  That ``k`` is found by binary search.  ``method =
    "bisect"`` runs plain bisection on ``eps`` instead, to within ``tol``.
    """
    f = as_kernel(f)
    g = as_kernel(g)
    if f.shape != g.shape:
        raise ValidationError(f"shape mismatch {f.shape} vs {g.shape}")
    X, Y = spaces_for(f.shape, X, Y)
    d = np.abs(f - g)
    evaluated: dict[float, float] = {}

    def thi(eps: float) -> float:
        if eps not in evaluated:
            evaluated[eps] = thickness(d > eps, X, Y).value
        return evaluated[eps]

    if method == "bisect":
        lo, hi = 0.0, min(1.0, float(d.max()))
        if thi(0.0) <= 0.0:
            hi = 0.0
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if thi(mid) <= mid:
                hi = mid
            else:
                lo = mid
        value = hi
    elif method == "exact":
        v = np.unique(np.concatenate([[0.0], d.ravel()]))
        K = len(v) - 1

        def feasible(k: int) -> bool:
            return k == K or thi(float(v[k])) < v[k + 1]

        lo, hi = 0, K
        while lo < hi:
            mid = (lo + hi) // 2
            if feasible(mid):
                hi = mid
            else:
                lo = mid + 1
        value = max(float(v[lo]), thi(float(v[lo])) if lo < K else 0.0)
    else:
        raise ValidationError(f"unknown tau method {method!r}")
    return TauResult(value, tuple(sorted(evaluated.items())), method)
