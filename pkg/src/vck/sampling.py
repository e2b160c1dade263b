"""Empirical matrix distributions and the random-points criterion.

The matrix distribution of a kernel is the law of ``{f(x_i, y_j)}`` for
i.i.d. points ``x_i ~ mu``, ``y_j ~ nu``; a ``k x k`` window of it is sampled
here and compared between kernels with an energy-distance permutation test.
Both are statistical evidence only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.spatial.distance import cdist

from .core import DiscreteSpace, ValidationError, as_kernel, spaces_for

DEFAULT_PERMUTATIONS = 200


@dataclass(frozen=True, eq=False)
class MDSample:
    k: int
    trials: int
    matrices: np.ndarray          # trials x k x k
    seed: int | None = None

    def __post_init__(self):
        mats = np.asarray(self.matrices, dtype=float)
        if mats.shape != (self.trials, self.k, self.k):
            raise ValidationError(f"expected {self.trials} matrices of size {self.k}x{self.k}")
        if not np.all(np.isfinite(mats)):
            raise ValidationError("sample contains non-finite entries")
        object.__setattr__(self, "matrices", mats)

    def vectors(self) -> np.ndarray:
        return self.matrices.reshape(self.trials, self.k * self.k)


def sample_md(f, X: DiscreteSpace | None = None, Y: DiscreteSpace | None = None,
              k: int = 3, trials: int = 1000, seed: int = 0) -> MDSample:
    """Draw ``trials`` random ``k x k`` windows ``f(x_i, y_j)``."""
    f = as_kernel(f)
    X, Y = spaces_for(f.shape, X, Y)
    if k < 1 or trials < 1:
        raise ValidationError("k and trials must be positive")
    rng = np.random.default_rng(seed)
    xi = rng.choice(X.size, size=(trials, k), p=X.weights)
    yj = rng.choice(Y.size, size=(trials, k), p=Y.weights)
    return MDSample(k, trials, f[xi[:, :, None], yj[:, None, :]], seed)


class MDComparison(NamedTuple):
    statistic: float
    p_value: float
    permutations: int


def _energy(D: np.ndarray, a: np.ndarray) -> float:
    """V-statistic energy distance between the groups marked by ``a``."""
    b = 1.0 - a
    na, nb = a.sum(), b.sum()
    Da, Db = D @ a, D @ b
    within_a = a @ Da / (na * na)
    within_b = b @ Db / (nb * nb)
    between = a @ Db / (na * nb)
    return 2.0 * between - within_a - within_b


def compare_md(s1: MDSample, s2: MDSample, permutations: int = DEFAULT_PERMUTATIONS,
               seed: int | None = None) -> MDComparison:
    """Energy-distance two-sample test on vectorised matrices.

    The p-value is ``(1 + #{perm >= observed}) / (1 + permutations)``.  The
    shuffles are seeded from ``seed`` or, by default, from the seeds of the
    two samples, so the result is a deterministic function of its inputs.
    """
    if s1.k != s2.k:
        raise ValidationError(f"window sizes differ: {s1.k} vs {s2.k}")
    pooled = np.vstack([s1.vectors(), s2.vectors()])
    D = cdist(pooled, pooled)
    a = np.zeros(len(pooled))
    a[:s1.trials] = 1.0
    observed = max(0.0, float(_energy(D, a)))
    if seed is None:
        seed_seq = [s1.seed or 0, s2.seed or 0, permutations]
    else:
        seed_seq = [seed]
    rng = np.random.default_rng(seed_seq)
    slack = 1e-12 * max(1.0, observed)
    hits = 0
    for _ in range(permutations):
        perm = rng.permutation(a)
        if _energy(D, perm) >= observed - slack:
            hits += 1
    return MDComparison(observed, (1 + hits) / (1 + permutations), permutations)


@dataclass(frozen=True, eq=False)
class ClusterPartition:
    """Classes of sampled rows/columns; class 0 collects the outliers."""

    row_samples: np.ndarray
    col_samples: np.ndarray
    row_classes: np.ndarray
    col_classes: np.ndarray
    outlier_fraction: float
    max_oscillation: float

    def to_dict(self) -> dict:
        return {"row_samples": self.row_samples.tolist(), "col_samples": self.col_samples.tolist(),
                "row_classes": self.row_classes.tolist(), "col_classes": self.col_classes.tolist(),
                "outlier_fraction": self.outlier_fraction,
                "max_oscillation": self.max_oscillation}


class PointsTest(NamedTuple):
    passed: bool
    partition: ClusterPartition


def _greedy_classes(profiles: np.ndarray, radius: float, N: int) -> np.ndarray:
    """Assign profiles to classes of sup-diameter < ``radius``; 0 = outlier."""
    labels = np.zeros(len(profiles), dtype=np.int64)
    hi: list[np.ndarray] = []
    lo: list[np.ndarray] = []
    for i, p in enumerate(profiles):
        if hi:
            H = np.maximum(np.array(hi), p)
            L = np.minimum(np.array(lo), p)
            diam = (H - L).max(axis=1, initial=0.0)
            c = int(np.argmin(diam))
            if diam[c] < radius:
                hi[c], lo[c] = H[c], L[c]
                labels[i] = c + 1
                continue
        if len(hi) < N:
            hi.append(p.copy())
            lo.append(p.copy())
            labels[i] = len(hi)
    return labels


def _oscillation(A: np.ndarray, rc: np.ndarray, cc: np.ndarray) -> float:
    worst = 0.0
    for a in np.unique(rc[rc > 0]):
        sub = A[rc == a]
        for b in np.unique(cc[cc > 0]):
            block = sub[:, cc == b]
            worst = max(worst, float(block.max() - block.min()))
    return worst


def random_points_test(f, X: DiscreteSpace | None = None, Y: DiscreteSpace | None = None,
                       eps: float = 0.1, N: int = 10, m: int = 500, seed: int = 0,
                       warm: ClusterPartition | None = None) -> PointsTest:
    """Finite-sample check of the random-points characterisation.

    Samples ``m`` rows and ``m`` columns, groups rows greedily into at most
    ``N`` classes of sup-diameter ``< eps/2`` (over the sampled columns),
    then columns likewise over the non-outlier rows.  Passes iff the share of
    indices ``s`` whose row or column is an outlier is ``< eps`` and every
    block oscillates by ``< eps``.  A ``warm`` partition drawn with the same
    samples is reused when it already passes at this ``eps``.
    """
    f = as_kernel(f)
    X, Y = spaces_for(f.shape, X, Y)
    if eps <= 0 or N < 1 or m < N:
        raise ValidationError("need eps > 0 and m >= N >= 1")
    rng = np.random.default_rng(seed)
    xs = rng.choice(X.size, size=m, p=X.weights)
    ys = rng.choice(Y.size, size=m, p=Y.weights)
    A = f[np.ix_(xs, ys)]
    if warm is not None and np.array_equal(warm.row_samples, xs) and np.array_equal(warm.col_samples, ys):
        if warm.outlier_fraction < eps and warm.max_oscillation < eps:
            return PointsTest(True, warm)
    rc = _greedy_classes(A, eps / 2, N)
    keep = rc > 0
    cc = _greedy_classes(A[keep].T, eps / 2, N) if keep.any() else np.zeros(m, dtype=np.int64)
    outliers = float(np.mean((rc == 0) | (cc == 0)))
    osc = _oscillation(A, rc, cc)
    part = ClusterPartition(xs, ys, rc, cc, outliers, osc)
    return PointsTest(outliers < eps and osc < eps, part)


def random_points_sweep(f, X: DiscreteSpace | None = None, Y: DiscreteSpace | None = None,
                        eps_values=(0.05, 0.1, 0.2), N: int = 10, m: int = 500,
                        seed: int = 0) -> list[tuple[float, PointsTest]]:
    """Run the test over increasing ``eps``, carrying passing partitions forward."""
    out = []
    warm = None
    for eps in sorted(eps_values):
        res = random_points_test(f, X, Y, eps, N, m, seed, warm=warm)
        if res.passed:
            warm = res.partition
        out.append((eps, res))
    return out
