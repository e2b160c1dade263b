import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import kernel_instances, random_mask, random_space
from vck.core import PlanMeasure, ValidationError, gen_plan, uniform_space
from vck.thickness import CertificateError, thickness_value
from vck.vcnorm import (markov_apply, me_norm, pairing, vc_norm, vc_norm_oracle, vc_norm_value)


def random_bistochastic(rng, X, Y, terms=3):
    """Mixture of the product plan and (weight-compatible) permutation plans."""
    dense = np.outer(X.weights, Y.weights)
    if X.same_as(Y) and X.is_uniform():
        c = rng.dirichlet(np.ones(terms + 1))
        dense = c[0] * dense
        for k in range(terms):
            dense += c[k + 1] * gen_plan("permutation", X, sigma=rng.permutation(X.size)).to_dense()
    return PlanMeasure.from_dense(dense)


class TestExamples:
    def test_constant(self):
        c = vc_norm(np.ones((3, 4)))
        assert c.value == pytest.approx(1.0, abs=1e-12)
        assert vc_norm_value(0.4 * np.ones((2, 2))) == pytest.approx(0.4, abs=1e-12)

    def test_row_function(self, rng):
        X, Y = random_space(rng, 5), random_space(rng, 4)
        u = rng.normal(size=5)
        f = np.repeat(u[:, None], 4, axis=1)
        assert vc_norm_value(f, X, Y) == pytest.approx(np.abs(u) @ X.weights, abs=1e-9)

    def test_single_cell(self):
        f = np.array([[1.0, 0], [0, 0]])
        assert vc_norm_oracle(f) == pytest.approx(0.5, abs=1e-12)
        assert vc_norm_value(f) == pytest.approx(0.5, abs=1e-12)
        assert vc_norm_oracle(np.ones((2, 2))) == pytest.approx(1.0, abs=1e-12)

    def test_oracle_bound(self):
        with pytest.raises(ValidationError):
            vc_norm_oracle(np.ones((5, 5)))

    def test_indicator_is_thickness(self, rng):
        for _ in range(30):
            n, m = rng.integers(1, 12, 2)
            Z = random_mask(rng, n, m)
            X, Y = random_space(rng, n, integer=False), random_space(rng, m, integer=False)
            assert abs(vc_norm_value(Z.astype(float), X, Y) - thickness_value(Z, X, Y)) <= 1e-8

    def test_certificate_check_rejects_tampering(self):
        f = np.eye(3)
        X = uniform_space(3)
        c = vc_norm(f)
        c.check(f, X, X)
        bad = type(c)(c.value, c.primal, c.dual.scaled(0.5), c.gap)
        with pytest.raises(CertificateError):
            bad.check(f, X, X)


class TestProperties:
    @given(kernel_instances(max_side=4))
    def test_oracle_and_certificate(self, inst):
        (f,), X, Y = inst
        c = vc_norm(f, X, Y)
        c.check(f, X, Y)
        assert abs(c.gap) <= 1e-8 * max(1, c.value)
        if f.size <= 16:
            assert c.value == pytest.approx(vc_norm_oracle(f, X, Y), abs=1e-9)

    @given(kernel_instances(count=2), st.sampled_from([-2.0, -0.5, 0.0, 3.0]))
    def test_seminorm(self, inst, c):
        (f, g), X, Y = inst
        n = lambda h: vc_norm_value(h, X, Y)
        assert n(c * f) == pytest.approx(abs(c) * n(f), abs=1e-9)
        assert n(f + g) <= n(f) + n(g) + 1e-9
        assert (n(f) <= 1e-12) == (not f.any())
        assert n(np.minimum(np.abs(f), np.abs(g))) <= n(f) + 1e-9

    @given(kernel_instances())
    def test_weak_type(self, inst):
        (f,), X, Y = inst
        v = vc_norm_value(f, X, Y)
        for eps in (0.1, 0.25, 0.5, 0.9):
            assert v >= eps * thickness_value(np.abs(f) > eps, X, Y) - 1e-9

    def test_rank_one_and_finite_rank(self, rng):
        for _ in range(20):
            n, m = rng.integers(2, 10, 2)
            X, Y = random_space(rng, n, False), random_space(rng, m, False)
            r = int(rng.integers(1, 6))
            phi, psi = rng.normal(size=(r, n)), rng.normal(size=(r, m))
            l2 = np.sqrt((phi ** 2) @ X.weights) * np.sqrt((psi ** 2) @ Y.weights)
            assert vc_norm_value(np.outer(phi[0], psi[0]), X, Y) <= l2[0] + 1e-8
            assert vc_norm_value(phi.T @ psi, X, Y) <= l2.sum() + 1e-8

    def test_holder(self, rng):
        for _ in range(30):
            n, m = rng.integers(1, 8, 2)
            X, Y = random_space(rng, n, False), random_space(rng, m, False)
            f = rng.normal(size=(n, m))
            eta = PlanMeasure.from_dense(rng.normal(size=(n, m)) * (rng.random((n, m)) < 0.6),
                                         signed=True)
            if eta.nnz:
                assert abs(pairing(f, eta)) <= vc_norm_value(f, X, Y) * me_norm(eta, X, Y) + 1e-9


class TestMeNorm:
    def test_examples(self):
        X = uniform_space(4)
        assert me_norm(gen_plan("diagonal", X), X, X) == 1.0
        assert me_norm(gen_plan("diagonal", X).scaled(0.5), X, X) == 0.5
        assert me_norm(PlanMeasure([0], [0], [1.0], (4, 4))) == 4.0

    def test_bistochastic_is_one(self, rng):
        X = uniform_space(6)
        for _ in range(10):
            assert me_norm(random_bistochastic(rng, X, X)) == pytest.approx(1.0, abs=1e-12)
        Y = random_space(rng, 5, False)
        assert me_norm(gen_plan("product", X, Y), X, Y) == pytest.approx(1.0, abs=1e-12)

    def test_homogeneous_subadditive(self, rng):
        X, Y = random_space(rng, 4), random_space(rng, 5)
        for _ in range(20):
            a = PlanMeasure.from_dense(rng.normal(size=(4, 5)), signed=True)
            b = PlanMeasure.from_dense(rng.normal(size=(4, 5)), signed=True)
            assert me_norm(a.scaled(-2.5), X, Y) == pytest.approx(2.5 * me_norm(a, X, Y))
            assert me_norm(a + b, X, Y) <= me_norm(a, X, Y) + me_norm(b, X, Y) + 1e-12


class TestPairing:
    def test_constant_on_bistochastic(self, rng):
        X = uniform_space(5)
        assert pairing(np.ones((5, 5)), random_bistochastic(rng, X, X)) == pytest.approx(1.0)

    def test_trace_of_xy(self):
        n = 256
        c = (np.arange(n) + 0.5) / n
        f = np.outer(c, c)
        assert abs(pairing(f, gen_plan("diagonal", uniform_space(n))) - 1 / 3) < 0.01

    def test_diagonal_indicator_trace(self):
        for n in (4, 32):
            X = uniform_space(n)
            assert pairing(np.eye(n), gen_plan("diagonal", X)) == pytest.approx(1.0)
            assert pairing(np.eye(n), gen_plan("product", X, X)) == pytest.approx(1 / n)

    def test_shape(self):
        with pytest.raises(ValidationError):
            pairing(np.ones((2, 2)), PlanMeasure([0], [0], [1.0], (3, 3)))


class TestMarkov:
    def test_constants_preserved(self, rng):
        X = uniform_space(6)
        for _ in range(10):
            out = markov_apply(random_bistochastic(rng, X, X), np.ones(6), X, X)
            assert np.all(out.values == 1.0) and not out.flagged

    def test_product_and_permutation(self, rng):
        X, Y = random_space(rng, 4), random_space(rng, 6)
        g = rng.normal(size=6)
        out = markov_apply(gen_plan("product", X, Y), g, X, Y).values
        assert np.allclose(out, g @ Y.weights)
        U = uniform_space(5)
        sigma = rng.permutation(5)
        h = rng.normal(size=5)
        out = markov_apply(gen_plan("permutation", U, sigma=sigma), h).values
        assert np.allclose(out, h[sigma], rtol=1e-15, atol=0)

    def test_contractions(self, rng):
        X = uniform_space(7)
        for _ in range(20):
            lam = random_bistochastic(rng, X, X)
            g = rng.normal(size=7)
            out = markov_apply(lam, g, X, X).values
            assert np.abs(out).max() <= np.abs(g).max() + 1e-12
            assert np.abs(out) @ X.weights <= np.abs(g) @ X.weights + 1e-12
            assert np.all(markov_apply(lam, np.abs(g), X, X).values >= 0)

    def test_empty_rows_flagged(self):
        lam = PlanMeasure([0], [1], [0.5], (2, 2))
        with warnings.catch_warnings(record=True):
            warnings.simplefilter("always")
            out = markov_apply(lam, np.array([1.0, 2.0]))
        assert out.flagged and out.values.tolist() == [2.0, 0.0]

    def test_signed_rejected(self):
        lam = PlanMeasure([0], [0], [-0.5], (1, 1), signed=True)
        with pytest.raises(ValidationError):
            markov_apply(lam, np.ones(1))
