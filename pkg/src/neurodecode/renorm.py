"""Per-dimension distribution matching between predicted and true features."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import datastore


@dataclass(frozen=True)
class RenormStats:
    """Column means and population standard deviations (ddof 0).

    ``provenance`` records which split the statistics were computed on so
    the pipeline can refuse test-derived stats end to end.
    """

    mean: np.ndarray
    std: np.ndarray
    provenance: str = "train"

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        std = np.asarray(self.std, dtype=np.float64)
        if mean.ndim != 1 or std.shape != mean.shape:
            raise ValueError("mean and std must be 1-D vectors of equal length")
        if np.any(std < 0):
            raise ValueError("std must be nonnegative")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @property
    def dims(self) -> int:
        return self.mean.shape[0]


def compute_stats(F, provenance: str = "train") -> RenormStats:
    """Column mean and population std of an items x dims matrix."""
    F = np.asarray(F, dtype=np.float64)
    if F.ndim != 2 or F.shape[0] < 1:
        raise ValueError("need a matrix with at least one row")
    return RenormStats(mean=F.mean(axis=0), std=F.std(axis=0, ddof=0), provenance=provenance)


def renormalize(pred, pred_stats: RenormStats, target_stats: RenormStats) -> np.ndarray:
    """Rescale predictions so pred_stats maps onto target_stats per column.

    out = (pred - pred_mean) / pred_std * target_std + target_mean.
    Columns with pred_std = 0 carry no usable scale and collapse to the
    target mean.
    """
    pred = np.asarray(pred, dtype=np.float64)
    if pred.ndim != 2:
        raise ValueError("pred must be 2-D")
    if pred.shape[1] != pred_stats.dims or pred_stats.dims != target_stats.dims:
        raise ValueError(
            f"dimension mismatch: pred {pred.shape[1]}, "
            f"pred_stats {pred_stats.dims}, target_stats {target_stats.dims}"
        )
    degenerate = pred_stats.std == 0
    safe_std = np.where(degenerate, 1.0, pred_stats.std)
    z = (pred - pred_stats.mean) / safe_std
    out = z * target_stats.std + target_stats.mean
    out[:, degenerate] = target_stats.mean[degenerate]
    return out


def save_stats(stats: RenormStats, path) -> None:
    # 2 x dims MatrixFile: row 0 mean, row 1 std
    datastore.write_matrix(np.vstack([stats.mean, stats.std]), path)


def load_stats(path, provenance: str = "train") -> RenormStats:
    m = datastore.read_matrix(path)
    if m.shape[0] != 2:
        raise ValueError(f"{path}: renorm stats file must have exactly 2 rows")
    return RenormStats(
        mean=m[0].astype(np.float64), std=m[1].astype(np.float64), provenance=provenance
    )
