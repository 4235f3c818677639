import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neurodecode import ridge
from neurodecode.ridge import (
    DEFAULT_ALPHA_GRID,
    AlphaGrid,
    cross_validate_alpha,
    fit_ridge,
    fit_with_cv,
    predict,
)

import oracles


def rel_frobenius(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


class TestFitRidge:
    def test_identity_design_halves_targets(self):
        model = fit_ridge(np.eye(2), np.eye(2), alpha=1.0, fit_intercept=False)
        assert np.allclose(model.weights, np.diag([0.5, 0.5]), atol=1e-12)

    def test_exact_ols_on_consistent_system(self):
        model = fit_ridge([[1.0], [2.0]], [[2.0], [4.0]], alpha=0.0, fit_intercept=False)
        assert np.allclose(model.weights, [[2.0]], atol=1e-12)

    def test_near_interpolation_matches_targets(self):
        rng = np.random.default_rng(7)
        X = rng.standard_normal((50, 10))
        w_true = rng.standard_normal((10, 3))
        Y = X @ w_true
        model = fit_ridge(X, Y, alpha=1e-8)
        assert np.max(np.abs(predict(model, X) - Y)) < 1e-5

    def test_matches_normal_equations_oracle(self):
        rng = np.random.default_rng(8)
        X = rng.standard_normal((50, 10))
        Y = X @ rng.standard_normal((10, 3))
        model = fit_ridge(X, Y, alpha=1e-8)
        W, b = oracles.ridge_normal_equations(X, Y, 1e-8)
        assert rel_frobenius(model.weights, W) < 1e-6
        assert np.allclose(model.intercept, b, atol=1e-8)

    def test_alpha_zero_rank_deficient_rejected(self):
        X = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
        with pytest.raises(ValueError, match="full-column-rank"):
            fit_ridge(X, np.ones((3, 1)), alpha=0.0, fit_intercept=False)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="samples"):
            fit_ridge(np.zeros((3, 2)), np.zeros((4, 1)), alpha=1.0)

    def test_nonfinite_rejected(self):
        X = np.zeros((3, 2))
        X[0, 0] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            fit_ridge(X, np.zeros((3, 1)), alpha=1.0)

    def test_single_sample_rejected(self):
        with pytest.raises(ValueError, match="2 samples"):
            fit_ridge(np.ones((1, 2)), np.ones((1, 1)), alpha=1.0)


class TestPredict:
    def test_zero_weights_gives_intercept(self):
        model = ridge.RidgeModel(
            weights=np.zeros((3, 2)), intercept=np.array([1.5, -2.0]), alpha=1.0
        )
        out = predict(model, np.random.default_rng(0).standard_normal((4, 3)))
        assert np.allclose(out, np.tile([1.5, -2.0], (4, 1)))

    def test_full_rank_square_interpolation(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((4, 4)) + 4 * np.eye(4)
        Y = rng.standard_normal((4, 2))
        model = fit_ridge(X, Y, alpha=0.0, fit_intercept=False)
        assert np.max(np.abs(predict(model, X) - Y)) < 1e-6

    def test_fresh_design_matches_oracle(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((50, 10))
        Y = X @ rng.standard_normal((10, 3))
        model = fit_ridge(X, Y, alpha=1e-8)
        X_new = rng.standard_normal((20, 10))
        W, b = oracles.ridge_normal_equations(X, Y, 1e-8)
        assert np.max(np.abs(predict(model, X_new) - (X_new @ W + b))) < 1e-5

    def test_column_mismatch_rejected(self):
        model = fit_ridge(np.eye(3), np.eye(3), alpha=1.0)
        with pytest.raises(ValueError, match="columns"):
            predict(model, np.zeros((2, 5)))


class TestRidgeProperties:
    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10_000), st.booleans())
    def test_svd_matches_oracle_including_wide(self, seed, wide):
        rng = np.random.default_rng(seed)
        n, p = (12, 30) if wide else (30, 12)
        X = rng.standard_normal((n, p))
        Y = rng.standard_normal((n, 4))
        for alpha in (1e-2, 1.0, 1e4):
            model = fit_ridge(X, Y, alpha)
            W, b = oracles.ridge_normal_equations(X, Y, alpha)
            assert rel_frobenius(model.weights, W) < 1e-6

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10_000))
    def test_shrinkage_monotone_over_default_grid(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((40, 15))
        Y = rng.standard_normal((40, 5))
        norms = [
            np.linalg.norm(fit_ridge(X, Y, a).weights) for a in DEFAULT_ALPHA_GRID
        ]
        assert all(n1 >= n2 for n1, n2 in zip(norms, norms[1:]))

    def test_infinite_alpha_limit(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((30, 8))
        Y = rng.standard_normal((30, 4)) + 3.0
        model = fit_ridge(X, Y, alpha=1e14)
        assert np.linalg.norm(model.weights) < 1e-9
        assert np.allclose(predict(model, X), np.tile(Y.mean(axis=0), (30, 1)), atol=1e-6)

    def test_target_column_permutation_equivariance(self):
        rng = np.random.default_rng(4)
        X = rng.standard_normal((25, 6))
        Y = rng.standard_normal((25, 5))
        perm = rng.permutation(5)
        base = fit_ridge(X, Y, alpha=10.0)
        permuted = fit_ridge(X, Y[:, perm], alpha=10.0)
        assert np.allclose(permuted.weights, base.weights[:, perm], atol=1e-12)
        assert np.allclose(permuted.intercept, base.intercept[perm], atol=1e-12)


class TestAlphaGrid:
    def test_default_contains_paper_optimum(self):
        assert 50_000 in DEFAULT_ALPHA_GRID

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            AlphaGrid(())

    def test_unsorted_rejected(self):
        with pytest.raises(ValueError, match="increasing"):
            AlphaGrid((2.0, 1.0))

    def test_from_values_sorts_and_dedupes(self):
        assert AlphaGrid.from_values([10.0, 1.0, 10.0]).candidates == (1.0, 10.0)


class TestCrossValidation:
    def test_single_candidate_grid(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((20, 4))
        Y = rng.standard_normal((20, 2))
        best, scores = cross_validate_alpha(X, Y, [7.5], k=4, seed=0)
        assert best == 7.5
        assert len(scores) == 1

    def test_noiseless_prefers_small_alpha(self):
        rng = np.random.default_rng(6)
        X = rng.standard_normal((120, 8))
        Y = X @ rng.standard_normal((8, 3))
        best, scores = cross_validate_alpha(X, Y, [0.1, 50_000.0], k=5, seed=0)
        oracle_best, oracle_scores = oracles.cv_scores_explicit(X, Y, [0.1, 50_000.0], 5, 0)
        assert best == 0.1
        assert best == oracle_best
        assert np.allclose(scores, oracle_scores, rtol=1e-8)

    def test_noisy_selection_matches_oracle_and_is_positive(self):
        # paper-scale-shaped synthetic noisy data, default grid
        rng = np.random.default_rng(7)
        n, v, d = 300, 120, 10
        Z = rng.standard_normal((n, d))
        X = Z @ rng.standard_normal((d, v)) + 1.0 * rng.standard_normal((n, v))
        best, scores = cross_validate_alpha(X, Z, DEFAULT_ALPHA_GRID, k=5, seed=1)
        oracle_best, oracle_scores = oracles.cv_scores_explicit(
            X, Z, DEFAULT_ALPHA_GRID, 5, 1
        )
        assert best == oracle_best
        assert best > 0
        assert np.allclose(scores, oracle_scores, rtol=1e-6)

    def test_grid_order_invariance_and_determinism(self):
        rng = np.random.default_rng(8)
        X = rng.standard_normal((30, 5))
        Y = rng.standard_normal((30, 2))
        a1 = cross_validate_alpha(X, Y, [1.0, 100.0, 10.0], k=3, seed=9)
        a2 = cross_validate_alpha(X, Y, [100.0, 10.0, 1.0], k=3, seed=9)
        assert a1 == a2

    def test_tie_breaks_to_larger_alpha(self):
        # constant targets: every alpha predicts the mean, scores tie exactly
        rng = np.random.default_rng(9)
        X = rng.standard_normal((20, 3))
        Y = np.full((20, 2), 2.5)
        best, scores = cross_validate_alpha(X, Y, [1.0, 10.0, 100.0], k=4, seed=0)
        assert scores[0] == scores[-1]
        assert best == 100.0

    def test_k_exceeding_samples_rejected(self):
        with pytest.raises(ValueError, match="exceeds"):
            cross_validate_alpha(np.eye(3), np.eye(3), [1.0], k=4)

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            cross_validate_alpha(np.eye(4), np.eye(4), [], k=2)


class TestPersistence:
    def test_model_roundtrip(self, tmp_path):
        rng = np.random.default_rng(10)
        X = rng.standard_normal((30, 6))
        Y = rng.standard_normal((30, 3))
        model = fit_with_cv(X, Y, [1.0, 10.0], k=3, seed=2)
        ridge.save_model(model, tmp_path / "m", grid=[1.0, 10.0], k=3, seed=2)
        back = ridge.load_model(tmp_path / "m")
        assert back.alpha == model.alpha
        assert back.cv_scores == pytest.approx(model.cv_scores)
        # float32 storage rounds the weights
        assert np.allclose(back.weights, model.weights, atol=1e-5)
        assert np.allclose(back.intercept, model.intercept, atol=1e-5)
