"""Step-function and finite-rank approximation in the tau metric.

Kernels that are tau-limits of step functions are exactly the virtually
continuous ones, so the smallest tau distance to a step function with at
most ``N x N`` blocks (the *defect* at ``N``) is the finite-grid signature
of virtual continuity: it decays with ``N`` for continuous-type kernels and
stalls for kernels like the indicator of a triangle.

Fitting is heuristic (weighted co-clustering with midrange block values);
every reported tau is evaluated exactly on the returned step function, so
it is an upper bound on the true defect.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .core import DiscreteSpace, ValidationError, as_kernel, spaces_for
from .thickness import Refusal, tau_distance

DEFAULT_RESTARTS = 16
POLISH_MAX_CELLS = 256
PAIR_MOVE_MAX_CELLS = 36
EXACT_TOL = 1e-12   # a fit this close is treated as exact
ORACLE_MAX_SIDE = 8
ORACLE_MAX_CLASSES = 3


def _compact(labels: np.ndarray) -> np.ndarray:
    """Relabel classes as 0..k-1 in order of first appearance."""
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inv].astype(np.int64)


@dataclass(frozen=True, eq=False)
class StepFunction:
    row_part: np.ndarray
    col_part: np.ndarray
    block_values: np.ndarray

    def __post_init__(self):
        rp = np.asarray(self.row_part, dtype=np.int64)
        cp = np.asarray(self.col_part, dtype=np.int64)
        bv = np.atleast_2d(np.asarray(self.block_values, dtype=float))
        object.__setattr__(self, "row_part", rp)
        object.__setattr__(self, "col_part", cp)
        object.__setattr__(self, "block_values", bv)
        for name, part, k in (("row", rp, bv.shape[0]), ("column", cp, bv.shape[1])):
            if part.ndim != 1 or not len(part):
                raise ValidationError(f"{name} partition must be a nonempty vector")
            if part.min() < 0 or part.max() >= k:
                raise ValidationError(f"{name} class index out of range")
            if len(np.unique(part)) != k:
                raise ValidationError(f"every {name} class must be nonempty")

    @property
    def n_blocks(self) -> tuple[int, int]:
        return self.block_values.shape

    def to_dict(self) -> dict:
        return {"row_part": self.row_part.tolist(), "col_part": self.col_part.tolist(),
                "block_values": self.block_values.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "StepFunction":
        return cls(d["row_part"], d["col_part"], d["block_values"])


def eval_step(s: StepFunction) -> np.ndarray:
    return s.block_values[s.row_part][:, s.col_part]


def midrange_step(f: np.ndarray, row_part, col_part) -> StepFunction:
    """Step function with the midrange of ``f`` on every block."""
    rp = _compact(np.asarray(row_part))
    cp = _compact(np.asarray(col_part))
    kx, ky = rp.max() + 1, cp.max() + 1
    hi = np.full((kx, ky), -np.inf)
    lo = np.full((kx, ky), np.inf)
    np.maximum.at(hi, (rp[:, None], cp[None, :]), f)
    np.minimum.at(lo, (rp[:, None], cp[None, :]), f)
    return StepFunction(rp, cp, 0.5 * (hi + lo))


class StepFit(NamedTuple):
    step: StepFunction
    tau: float


def _interval_partition(weights: np.ndarray, k: int) -> np.ndarray:
    """Contiguous classes of (roughly) equal weight."""
    edges = np.cumsum(weights) - 0.5 * weights
    labels = np.minimum((edges * k).astype(np.int64), k - 1)
    # guarantee nonempty classes when weights are very uneven
    if len(np.unique(labels)) < k:
        labels = np.minimum(np.arange(len(weights)) * k // len(weights), k - 1)
    return labels


def _random_partition(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    labels = rng.integers(0, k, size=n)
    labels[rng.permutation(n)[:k]] = np.arange(k)
    return labels


def _spectral_order(f: np.ndarray, X: DiscreteSpace, Y: DiscreteSpace, axis: int) -> np.ndarray:
    sx, sy = np.sqrt(X.weights), np.sqrt(Y.weights)
    U, _, Vt = np.linalg.svd(sx[:, None] * f * sy[None, :], full_matrices=False)
    score = U[:, 0] / sx if axis == 0 else Vt[0] / sy
    return np.argsort(score, kind="stable")


def _greedy_runs(bmax: np.ndarray, bmin: np.ndarray, order: np.ndarray, delta: float) -> np.ndarray:
    """Cut ``order`` into maximal runs whose block ranges stay within ``2*delta``."""
    labels = np.empty(len(order), dtype=np.int64)
    c = 0
    hi, lo = bmax[order[0]].copy(), bmin[order[0]].copy()
    for i in order:
        nh, nl = np.maximum(hi, bmax[i]), np.minimum(lo, bmin[i])
        if np.max(nh - nl) > 2 * delta:
            c += 1
            nh, nl = bmax[i].copy(), bmin[i].copy()
        hi, lo = nh, nl
        labels[i] = c
    return labels


def _minimax_runs(f: np.ndarray, other: np.ndarray, order: np.ndarray, k: int) -> np.ndarray:
    """Contiguous classes along ``order`` minimising the largest block half-range."""
    ko = other.max() + 1
    bmax = np.full((f.shape[0], ko), -np.inf)
    bmin = np.full((f.shape[0], ko), np.inf)
    rows = np.arange(f.shape[0])[:, None]
    np.maximum.at(bmax, (rows, other[None, :]), f)
    np.minimum.at(bmin, (rows, other[None, :]), f)
    lo, hi = 0.0, 0.5 * float(np.max(bmax.max(axis=0) - bmin.min(axis=0)))
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _greedy_runs(bmax, bmin, order, mid).max() + 1 <= k:
            hi = mid
        else:
            lo = mid
    return _greedy_runs(bmax, bmin, order, hi)


def _minimax_alternate(f, X, Y, kx, ky, max_iter=20):
    """Alternating minimax quantisation along the leading singular vectors."""
    ro, co = _spectral_order(f, X, Y, 0), _spectral_order(f, X, Y, 1)
    cp = np.empty(f.shape[1], dtype=np.int64)
    cp[co] = np.minimum(np.arange(f.shape[1]) * ky // f.shape[1], ky - 1)
    best, best_err = None, np.inf
    for _ in range(max_iter):
        rp = _minimax_runs(f, cp, ro, kx)
        cp = _minimax_runs(f.T, rp, co, ky)
        err = float(np.abs(f - eval_step(midrange_step(f, rp, cp))).max())
        if err >= best_err - 1e-15:
            break
        best, best_err = (rp, cp), err
    return best


def _reassign(f: np.ndarray, B: np.ndarray, other: np.ndarray, w_other: np.ndarray,
              labels: np.ndarray, k: int) -> np.ndarray:
    """Move every row to the class whose block profile it fits best.

    Sup-distance decides, weighted squared error breaks ties, then the
    lowest class index.
    """
    prof = B[:, other]                                # k x m
    diff = f[:, None, :] - prof[None, :, :]           # n x k x m
    sup = np.abs(diff).max(axis=2)
    l2 = (diff ** 2) @ w_other
    sup_r = np.round(sup, 12)
    best_sup = sup_r.min(axis=1, keepdims=True)
    l2_masked = np.where(sup_r == best_sup, l2, np.inf)
    new = np.argmin(l2_masked, axis=1)
    # refill empty classes with the worst-fitting rows
    err = sup[np.arange(len(new)), new]
    for c in range(k):
        if not np.any(new == c):
            counts = np.bincount(new, minlength=k)
            movable = np.flatnonzero(counts[new] > 1)
            i = movable[np.argmax(err[movable])]
            new[i] = c
            err[i] = -np.inf
    return new


def _alternate(f, X, Y, rp, cp, kx, ky, max_iter=50):
    for _ in range(max_iter):
        s = midrange_step(f, rp, cp)
        new_rp = _reassign(f, s.block_values, s.col_part, Y.weights, s.row_part, kx)
        s = midrange_step(f, new_rp, s.col_part)
        new_cp = _reassign(f.T, s.block_values.T, s.row_part, X.weights, s.col_part, ky)
        if np.array_equal(_compact(new_rp), _compact(rp)) and np.array_equal(_compact(new_cp), _compact(cp)):
            break
        rp, cp = new_rp, new_cp
    return _compact(rp), _compact(cp)


def _tau_of(f, rp, cp, X, Y) -> float:
    return tau_distance(f, eval_step(midrange_step(f, rp, cp)), X, Y).value


def _polish(f, X, Y, rp, cp, kx, ky, tau):
    """Local search on the exact tau: single-index moves, then (on tiny grids) pair moves."""

    def score(axis, trial):
        return _tau_of(f, trial, cp, X, Y) if axis == 0 else _tau_of(f, rp, trial, X, Y)

    improved = tau > EXACT_TOL
    while improved:
        improved = False
        for axis, (part, k) in enumerate(((rp, kx), (cp, ky))):
            for i in range(len(part)):
                for c in range(k):
                    if c == part[i]:
                        continue
                    trial = part.copy()
                    trial[i] = c
                    t = score(axis, trial)
                    if t < tau - 1e-15:
                        part[:] = trial
                        tau, improved = t, True
        if tau <= EXACT_TOL:
            break
        if improved or f.size > PAIR_MOVE_MAX_CELLS:
            continue
        for axis, (part, k) in enumerate(((rp, kx), (cp, ky))):
            for i, j in itertools.combinations(range(len(part)), 2):
                for ci, cj in itertools.product(range(k), repeat=2):
                    if ci == part[i] or cj == part[j]:
                        continue
                    trial = part.copy()
                    trial[i], trial[j] = ci, cj
                    t = score(axis, trial)
                    if t < tau - 1e-15:
                        part[:] = trial
                        tau, improved = t, True
                        break
                if improved:
                    break
            if improved:
                break
    return rp, cp, tau


def fit_step(f, X: DiscreteSpace | None = None, Y: DiscreteSpace | None = None,
             n_x: int = 2, n_y: int | None = None, restarts: int = DEFAULT_RESTARTS,
             seed: int = 0, warm: StepFunction | None = None,
             contiguous: bool = True, polish: bool | None = None) -> StepFit:
    """Heuristic tau-best step function with at most ``n_x x n_y`` blocks.

    Restart 0 starts from ``warm`` if given, else from contiguous
    equal-weight intervals (when ``contiguous``); the other restarts start
    from seeded random partitions.  On small grids the result is polished by
    single-index moves scored with the exact tau.  The best restart wins,
    ties going to the lowest restart index.
    """
    f = as_kernel(f)
    X, Y = spaces_for(f.shape, X, Y)
    n_y = n_x if n_y is None else n_y
    n, m = f.shape
    if not (1 <= n_x <= n and 1 <= n_y <= m):
        raise ValidationError(f"class counts ({n_x}, {n_y}) out of range for a {n}x{m} kernel")
    if polish is None:
        polish = n * m <= POLISH_MAX_CELLS
    best: StepFit | None = None
    for r in range(max(1, restarts)):
        rng = np.random.default_rng([seed, r])
        if r == 0 and warm is not None:
            rp, cp = warm.row_part.copy(), warm.col_part.copy()
            kx, ky = max(n_x, rp.max() + 1), max(n_y, cp.max() + 1)
        elif r == 0 and contiguous:
            rp, cp = _interval_partition(X.weights, n_x), _interval_partition(Y.weights, n_y)
            kx, ky = n_x, n_y
        elif r == 1:
            rp, cp = _minimax_alternate(f, X, Y, n_x, n_y)
            kx, ky = n_x, n_y
        else:
            rp, cp = _random_partition(n, n_x, rng), _random_partition(m, n_y, rng)
            kx, ky = n_x, n_y
        rp, cp = _alternate(f, X, Y, rp, cp, kx, ky)
        tau = _tau_of(f, rp, cp, X, Y)
        if warm is not None and r == 0:
            # the warm start itself is a candidate
            w_tau = _tau_of(f, warm.row_part, warm.col_part, X, Y)
            if w_tau < tau:
                rp, cp, tau = _compact(warm.row_part), _compact(warm.col_part), w_tau
        if polish:
            rp, cp, tau = _polish(f, X, Y, rp.copy(), cp.copy(), kx, ky, tau)
        if best is None or tau < best.tau:
            step = midrange_step(f, rp, cp)
            best = StepFit(step, tau_distance(f, eval_step(step), X, Y).value)
        if best.tau <= EXACT_TOL:
            break
    return best


def _set_partitions(n: int, k: int):
    """Restricted growth strings: partitions of ``n`` items into <= k classes."""
    def rec(prefix, top):
        if len(prefix) == n:
            yield np.array(prefix)
            return
        for c in range(min(top + 2, k)):
            yield from rec(prefix + [c], max(top, c))
    yield from rec([0], 0)


def fit_step_oracle(f, N: int, X: DiscreteSpace | None = None,
                    Y: DiscreteSpace | None = None) -> float:
    """Minimum tau of a midrange step fit over all partitions into <= N classes per side."""
    f = as_kernel(f)
    X, Y = spaces_for(f.shape, X, Y)
    n, m = f.shape
    if n > ORACLE_MAX_SIDE or m > ORACLE_MAX_SIDE or N > ORACLE_MAX_CLASSES:
        raise ValidationError("instance exceeds the step-fit oracle envelope (sides <= 8, N <= 3)")
    rows = list(_set_partitions(n, N))
    cols = list(_set_partitions(m, N))
    return min(_tau_of(f, rp, cp, X, Y) for rp, cp in itertools.product(rows, cols))


@dataclass
class DefectProfile:
    entries: list[tuple[int, float, StepFunction]] = field(default_factory=list)

    @property
    def Ns(self) -> list[int]:
        return [e[0] for e in self.entries]

    @property
    def taus(self) -> list[float]:
        return [e[1] for e in self.entries]

    def to_dict(self) -> list[dict]:
        return [{"N": N, "tau": tau, "blocks": list(s.n_blocks)} for N, tau, s in self.entries]


def _split_worst(f: np.ndarray, s: StepFunction, kx: int, ky: int) -> StepFunction:
    """Split the widest-range classes until there are ``kx`` x ``ky`` classes."""
    rp, cp = s.row_part.copy(), s.col_part.copy()

    def grow(part, g, k):
        while part.max() + 1 < k:
            ranges = []
            for c in range(part.max() + 1):
                members = np.flatnonzero(part == c)
                ranges.append(np.ptp(g[members], axis=0).max() if len(members) > 1 else -1.0)
            worst = int(np.argmax(ranges))
            members = np.flatnonzero(part == worst)
            if len(members) < 2:
                break
            part[members[len(members) // 2:]] = part.max() + 1
        return part

    rp = grow(rp, f, kx)
    cp = grow(cp, f.T, ky)
    return midrange_step(f, rp, cp)


def defect_profile(f, X: DiscreteSpace | None = None, Y: DiscreteSpace | None = None,
                   Ns=(2, 4, 8, 16), restarts: int = DEFAULT_RESTARTS, seed: int = 0,
                   contiguous: bool = True) -> DefectProfile:
    """Best tau to step functions with ``N x N`` blocks, for each ``N``.

    Each level is warm-started from the previous fit with its worst classes
    split; the sequence is kept nonincreasing as a running minimum (a fit
    with fewer blocks is admissible at every larger ``N``).
    """
    f = as_kernel(f)
    X, Y = spaces_for(f.shape, X, Y)
    Ns = list(Ns)
    if Ns != sorted(Ns):
        raise ValidationError("Ns must be sorted increasing")
    profile = DefectProfile()
    prev: StepFit | None = None
    for N in Ns:
        nx, ny = min(N, f.shape[0]), min(N, f.shape[1])
        warm = _split_worst(f, prev.step, nx, ny) if prev is not None else None
        fit = fit_step(f, X, Y, nx, ny, restarts=restarts, seed=seed, warm=warm,
                       contiguous=contiguous)
        if prev is not None and prev.tau <= fit.tau:
            fit = prev
        profile.entries.append((N, fit.tau, fit.step))
        prev = fit
    return profile


@dataclass(frozen=True)
class FiniteRankFunction:
    phi: np.ndarray
    psi: np.ndarray

    @property
    def rank(self) -> int:
        return self.phi.shape[0]

    def evaluate(self) -> np.ndarray:
        return self.phi.T @ self.psi


class RankFit(NamedTuple):
    function: FiniteRankFunction
    tau: float


def finite_rank_fit(f, X: DiscreteSpace | None = None, Y: DiscreteSpace | None = None,
                    r: int = 1) -> RankFit:
    """Truncated SVD of ``f`` in ``L2(mu) x L2(nu)``, scored by the exact tau."""
    f = as_kernel(f)
    X, Y = spaces_for(f.shape, X, Y)
    if not 1 <= r <= min(f.shape):
        raise ValidationError(f"rank r={r} out of range 1..{min(f.shape)}")
    sx, sy = np.sqrt(X.weights), np.sqrt(Y.weights)
    U, S, Vt = np.linalg.svd(sx[:, None] * f * sy[None, :], full_matrices=False)
    phi = (U[:, :r] * S[:r]).T / sx[None, :]
    psi = Vt[:r] / sy[None, :]
    fr = FiniteRankFunction(phi, psi)
    return RankFit(fr, tau_distance(f, fr.evaluate(), X, Y).value)


@dataclass(frozen=True)
class CompactnessCertificate:
    kept_rows: tuple[int, ...]
    kept_cols: tuple[int, ...]
    centers: tuple[int, ...]
    radius: float
    removed_mass: tuple[float, float]

    def check(self, f, X: DiscreteSpace, Y: DiscreteSpace, eps: float) -> None:
        f = as_kernel(f, X, Y)
        sub = f[np.ix_(self.kept_rows, self.kept_cols)]
        cen = f[np.ix_(self.centers, self.kept_cols)]
        d = np.abs(sub[:, None, :] - cen[None, :, :]).max(axis=2, initial=0.0).min(axis=1)
        if np.any(d > self.radius + 1e-12) or self.radius > eps:
            raise ValueError("kept rows are not covered by the net")
        if self.removed_mass[0] > eps + 1e-12 or self.removed_mass[1] > eps + 1e-12:
            raise ValueError("removed mass exceeds eps")

    def to_dict(self) -> dict:
        return {"kept_rows": list(self.kept_rows), "kept_cols": list(self.kept_cols),
                "centers": list(self.centers), "radius": self.radius,
                "removed_mass": list(self.removed_mass)}


def _farthest_point_net(rows: np.ndarray, eps: float, budget: int):
    """Greedy eps-net in sup distance; stops after ``budget + 1`` centers."""
    centers = [0]
    dist = np.abs(rows - rows[0]).max(axis=1, initial=0.0)
    while dist.max(initial=0.0) > eps and len(centers) <= budget:
        k = int(np.argmax(dist))
        centers.append(k)
        dist = np.minimum(dist, np.abs(rows - rows[k]).max(axis=1, initial=0.0))
    return centers, dist


def compactness_certificate(f, X: DiscreteSpace | None = None, Y: DiscreteSpace | None = None,
                            eps: float = 0.1, net_budget: int = 16) -> CompactnessCertificate | Refusal:
    """Search for sets of co-mass <= eps on which the rows form a small eps-net.

    Greedy: build a farthest-point net over the kept columns; while it needs
    more than ``net_budget`` centers, drop the column on which the centers
    disagree most and the most eccentric row, as long as each side's removed
    mass stays within ``eps``.  Success certifies the restricted family;
    a refusal is not a proof that none exists.
    """
    if not 0 < eps < 1:
        raise ValidationError("eps must lie in (0, 1)")
    f = as_kernel(f)
    X, Y = spaces_for(f.shape, X, Y)
    rows = np.arange(f.shape[0])
    cols = np.arange(f.shape[1])
    rem_r = rem_c = 0.0
    best_attempt = None
    while True:
        sub = f[np.ix_(rows, cols)]
        centers, dist = _farthest_point_net(sub, eps, net_budget)
        if best_attempt is None or len(centers) < best_attempt[0]:
            best_attempt = (len(centers), tuple(int(i) for i in rows[centers]))
        if dist.max(initial=0.0) <= eps and len(centers) <= net_budget:
            return CompactnessCertificate(tuple(int(i) for i in rows), tuple(int(j) for j in cols),
                                          tuple(int(rows[c]) for c in centers),
                                          float(dist.max(initial=0.0)), (rem_r, rem_c))
        cen = sub[centers]
        pair_gap = np.abs(cen[:, None, :] - cen[None, :, :]) > eps
        votes = pair_gap.sum(axis=(0, 1)).astype(float)
        removed = False
        for j in np.argsort(-votes, kind="stable"):
            if votes[j] <= 0:
                break
            if rem_c + Y.weights[cols[j]] <= eps + 1e-15 and len(cols) > 1:
                rem_c += Y.weights[cols[j]]
                cols = np.delete(cols, j)
                removed = True
                break
        ecc = int(centers[-1])
        if rem_r + X.weights[rows[ecc]] <= eps + 1e-15 and len(rows) > 1:
            rem_r += X.weights[rows[ecc]]
            rows = np.delete(rows, ecc)
            removed = True
        if not removed:
            return Refusal("no eps-net within budget after admissible removals",
                           attempt={"net_size": best_attempt[0], "centers": list(best_attempt[1])})
