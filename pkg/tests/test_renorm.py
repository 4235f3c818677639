import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neurodecode import renorm
from neurodecode.renorm import RenormStats, compute_stats, renormalize


class TestComputeStats:
    def test_two_point_column(self):
        stats = compute_stats(np.array([[1.0], [3.0]]))
        assert stats.mean[0] == 2.0
        assert stats.std[0] == 1.0  # population std, ddof 0

    def test_single_row_has_zero_std(self):
        stats = compute_stats(np.array([[4.0, -1.0]]))
        assert np.array_equal(stats.std, [0.0, 0.0])

    def test_constant_column(self):
        stats = compute_stats(np.full((5, 1), 3.25))
        assert stats.mean[0] == 3.25
        assert stats.std[0] == 0.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            compute_stats(np.zeros((0, 3)))

    def test_provenance_recorded(self):
        assert compute_stats(np.ones((2, 2)), provenance="test").provenance == "test"


class TestRenormalize:
    def test_affine_map(self):
        out = renormalize(
            np.array([[1.0]]),
            RenormStats(mean=np.array([0.0]), std=np.array([1.0])),
            RenormStats(mean=np.array([5.0]), std=np.array([2.0])),
        )
        assert out[0, 0] == 7.0

    def test_identity_when_stats_match(self):
        rng = np.random.default_rng(0)
        pred = rng.standard_normal((10, 4))
        stats = compute_stats(pred)
        assert np.allclose(renormalize(pred, stats, stats), pred, atol=1e-12)

    def test_zero_std_column_collapses_to_target_mean(self):
        pred = np.array([[1.0, 5.0], [1.0, 6.0]])
        pred_stats = compute_stats(pred)
        target_stats = RenormStats(mean=np.array([9.0, 0.0]), std=np.array([2.0, 1.0]))
        out = renormalize(pred, pred_stats, target_stats)
        assert np.array_equal(out[:, 0], [9.0, 9.0])

    def test_dim_mismatch_rejected(self):
        with pytest.raises(ValueError, match="mismatch"):
            renormalize(
                np.ones((2, 2)),
                compute_stats(np.ones((2, 2))),
                compute_stats(np.ones((2, 3))),
            )

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_output_matches_target_stats(self, seed):
        rng = np.random.default_rng(seed)
        pred = rng.standard_normal((40, 6)) * rng.uniform(0.5, 3.0, 6) + rng.uniform(-2, 2, 6)
        target = rng.standard_normal((40, 6)) * rng.uniform(0.5, 3.0, 6) + rng.uniform(-2, 2, 6)
        target_stats = compute_stats(target)
        out = renormalize(pred, compute_stats(pred), target_stats)
        out_stats = compute_stats(out)
        assert np.allclose(out_stats.mean, target_stats.mean, atol=1e-9)
        assert np.all(
            np.abs(out_stats.std - target_stats.std) <= 1e-6 * np.abs(target_stats.std)
        )

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_idempotent_once_stats_match(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((20, 3))
        a = compute_stats(rng.standard_normal((20, 3)))
        b = compute_stats(rng.standard_normal((20, 3)) * 2 + 1)
        once = renormalize(x, a, b)
        assert np.allclose(renormalize(once, b, b), once, atol=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_rank_order_preserved(self, seed):
        rng = np.random.default_rng(seed)
        pred = rng.standard_normal((30, 4))
        pred_stats = compute_stats(pred)
        target_stats = compute_stats(rng.standard_normal((30, 4)) * 3 - 1)
        out = renormalize(pred, pred_stats, target_stats)
        for col in range(4):
            if pred_stats.std[col] > 0 and target_stats.std[col] > 0:
                assert np.array_equal(np.argsort(out[:, col]), np.argsort(pred[:, col]))


class TestStatsFile:
    def test_roundtrip(self, tmp_path):
        stats = compute_stats(np.random.default_rng(1).standard_normal((8, 5)))
        path = tmp_path / "stats.f32m"
        renorm.save_stats(stats, path)
        back = renorm.load_stats(path)
        assert np.allclose(back.mean, stats.mean, atol=1e-6)
        assert np.allclose(back.std, stats.std, atol=1e-6)
        assert back.provenance == "train"

    def test_wrong_row_count_rejected(self, tmp_path):
        from neurodecode import datastore

        path = tmp_path / "bad.f32m"
        datastore.write_matrix(np.ones((3, 4)), path)
        with pytest.raises(ValueError, match="2 rows"):
            renorm.load_stats(path)

    def test_negative_std_rejected(self):
        with pytest.raises(ValueError, match="nonnegative"):
            RenormStats(mean=np.zeros(2), std=np.array([1.0, -0.5]))
