from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vck.core import (PlanMeasure, ValidationError, as_kernel, as_mask, gen_kernel, gen_plan,
                      gen_set, level_set, make_space, plan_class, uniform_space, validate_metric)


class TestMakeSpace:
    def test_normalises_exactly(self):
        X = make_space([1, 1, 2])
        assert X.exact == (Fraction(1, 4), Fraction(1, 4), Fraction(1, 2))
        assert X.weights.tolist() == [0.25, 0.25, 0.5]
        assert X.original_sum == 4.0

    def test_decimal_strings_are_exact(self):
        X = make_space(["0.1", "0.2", "0.7"])
        assert X.exact == (Fraction(1, 10), Fraction(1, 5), Fraction(7, 10))
        assert X.denominator == 10

    def test_uniform(self):
        X = uniform_space(5)
        assert X.is_uniform() and X.size == 5 and X.weights.sum() == 1.0

    @pytest.mark.parametrize("w, msg", [([], "empty"), ([1, 0, 2], "nonpositive weight at index 1"),
                                        ([1, -1], "nonpositive"), ([1.0, float("nan")], "non-finite"),
                                        ([float("inf")], "non-finite")])
    def test_rejects(self, w, msg):
        with pytest.raises(ValidationError, match=msg):
            make_space(w)

    @given(st.lists(st.integers(1, 1000), min_size=1, max_size=20))
    def test_sum_is_one(self, w):
        X = make_space(w)
        assert sum(X.exact) == 1
        assert abs(X.weights.sum() - 1) < 1e-12
        assert all(x > 0 for x in X.weights)


class TestValidation:
    def test_kernel_must_be_2d_and_finite(self):
        with pytest.raises(ValidationError):
            as_kernel(np.zeros(3))
        with pytest.raises(ValidationError):
            as_kernel([[0.0, np.nan]])

    def test_kernel_shape_against_space(self):
        with pytest.raises(ValidationError, match="row count"):
            as_kernel(np.zeros((3, 2)), uniform_space(2))

    def test_mask_entries(self):
        assert as_mask([[0, 1]]).dtype == bool
        with pytest.raises(ValidationError):
            as_mask([[0, 2]])

    def test_level_set_strict(self):
        f = np.array([[0.0, 0.5, 1.0]])
        assert level_set(f, np.zeros_like(f), 0.5).tolist() == [[False, False, True]]
        with pytest.raises(ValidationError):
            level_set(f, np.zeros((2, 2)), 0.1)


class TestPlanMeasure:
    def test_dense_round_trip(self, rng):
        a = rng.random((4, 5)) * (rng.random((4, 5)) < 0.5)
        p = PlanMeasure.from_dense(a)
        assert np.array_equal(p.to_dense(), a)
        assert np.allclose(p.row_var(), a.sum(1)) and np.allclose(p.col_var(), a.sum(0))

    def test_rejects_bad_entries(self):
        with pytest.raises(ValidationError, match="duplicate"):
            PlanMeasure([0, 0], [1, 1], [0.1, 0.2], (2, 2))
        with pytest.raises(ValidationError, match="range"):
            PlanMeasure([2], [0], [0.1], (2, 2))
        with pytest.raises(ValidationError, match="negative"):
            PlanMeasure([0], [0], [-0.1], (2, 2))
        with pytest.raises(ValidationError, match="non-finite"):
            PlanMeasure([0], [0], [np.inf], (2, 2))

    def test_signed_variation(self):
        p = PlanMeasure([0, 0], [0, 1], [0.5, -0.25], (1, 2), signed=True)
        assert p.row_var().tolist() == [0.75]
        assert p.total_mass == 0.25

    def test_add_and_scale(self):
        p = PlanMeasure([0], [0], [0.5], (2, 2))
        q = (p + p.scaled(-1.0))
        assert q.nnz == 0 and q.signed


class TestMetric:
    def test_valid_euclidean(self, rng):
        pts = rng.random((12, 2))
        d = np.linalg.norm(pts[:, None] - pts[None], axis=2)
        assert validate_metric(d) == []

    def test_semimetric_zero_allowed(self):
        d = np.array([[0, 0, 1], [0, 0, 1], [1, 1, 0.0]])
        assert validate_metric(d) == []

    def test_reports_each_kind(self):
        d = np.array([[1.0, 1, 5], [1, 0, 1], [5, 1, 0]])
        kinds = {v.kind for v in validate_metric(d)}
        assert kinds == {"nonzero-diagonal", "triangle"}
        tri = [v for v in validate_metric(d) if v.kind == "triangle"]
        assert (0, 1, 2) in [v.indices for v in tri]
        d2 = np.array([[0, 1.0], [2.0, 0]])
        assert [v.kind for v in validate_metric(d2)] == ["asymmetric"]
        d3 = np.array([[0, -1.0], [-1.0, 0]])
        assert "negative" in {v.kind for v in validate_metric(d3)}

    def test_square_required(self):
        with pytest.raises(ValidationError):
            validate_metric(np.zeros((2, 3)))


class TestGenerators:
    def test_triangle(self):
        f = gen_kernel("triangle", 4)
        assert f[3, 0] == 1 and f[0, 3] == 0 and np.trace(f) == 4

    def test_circulant_is_circulant(self):
        f = gen_kernel("circulant", 8, profile="tent")
        assert np.array_equal(np.roll(np.roll(f, 1, 0), 1, 1), f)
        v = np.arange(5.0)
        g = gen_kernel("circulant", 5, v=v)
        assert g[3, 1] == v[2] and g[1, 3] == v[3]

    def test_lowrank_rank(self):
        f = gen_kernel("lowrank", 12, r=3, seed=1)
        assert np.linalg.matrix_rank(f) == 3

    def test_smooth_values(self):
        f = gen_kernel("smooth", 4, name="xy")
        c = (np.arange(4) + 0.5) / 4
        assert np.allclose(f, np.outer(c, c))

    def test_seeded(self):
        assert np.array_equal(gen_kernel("random", 6, seed=3), gen_kernel("random", 6, seed=3))

    def test_unknown(self):
        with pytest.raises(ValidationError):
            gen_kernel("nope", 3)
        with pytest.raises(ValidationError):
            gen_set("nope", 3)

    def test_sets(self):
        assert gen_set("diagonal", 5).sum() == 5
        b = gen_set("band", 6, k=1)
        assert b.sum() == 10 and not b.diagonal().any()
        assert gen_set("band", 6, k=1, strict=False).sum() == 16
        r = gen_set("rectangle", 5, A=[0, 1], B=[4])
        assert r.sum() == 2 and r[1, 4]


class TestPlans:
    def test_diagonal_and_product_bistochastic(self):
        X = make_space([1, 2, 3])
        assert plan_class(gen_plan("diagonal", X), X, X).kind == "bistochastic"
        assert plan_class(gen_plan("product", X, X), X, X).kind == "bistochastic"

    def test_permutation_must_preserve_weights(self):
        X = make_space([1, 1, 2])
        assert gen_plan("permutation", X, sigma=[1, 0, 2]).nnz == 3
        with pytest.raises(ValidationError, match="preserve"):
            gen_plan("permutation", X, sigma=[2, 1, 0])
        with pytest.raises(ValidationError, match="permutation"):
            gen_plan("permutation", X, sigma=[0, 0, 1])

    def test_vertical_line(self):
        n = 4
        p = gen_plan("vertical_line", n=n)
        X = uniform_space(n * n)
        assert p.nnz == n ** 3
        assert plan_class(p, X, X).kind == "bistochastic"
        assert np.all(p.rows // n == p.cols // n)

    def test_classes(self):
        X = uniform_space(2)
        half = PlanMeasure.from_dense(np.eye(2) / 4)
        assert plan_class(half, X, X).kind == "submultistochastic"
        skew = PlanMeasure.from_dense(np.array([[0.7, 0.0], [0.1, 0.2]]))
        assert plan_class(skew, X, X).kind == "almost-bistochastic"
        lopsided = PlanMeasure.from_dense(np.array([[1.0, 0.0], [0.0, 0.0]]))
        assert plan_class(lopsided, X, X).kind == "general"
