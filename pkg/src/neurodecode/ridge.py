"""Multi-target ridge regression with an SVD-reused alpha path.

One economy SVD of the (optionally centered) design matrix serves every
alpha on a grid: the solution for a given alpha only rescales singular
directions by s / (s^2 + alpha). Because the factorization lives in the
min(samples, voxels) space, the same code path is the primal solver for
tall problems and the dual (kernel) solver for wide ones.

Cross-validation scores a candidate grid by mean held-out negative MSE
over k contiguous blocks of a seeded permutation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import datastore

DEFAULT_ALPHA_GRID = (1e2, 1e3, 1e4, 5e4, 1e5, 1e6)

# singular values below RANK_TOL * s_max are treated as zero
RANK_TOL = 1e-12


@dataclass(frozen=True)
class RidgeModel:
    """Fitted linear map from voxels to feature dimensions."""

    weights: np.ndarray  # voxels x dims
    intercept: np.ndarray  # dims
    alpha: float
    cv_scores: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.weights.ndim != 2:
            raise ValueError("weights must be 2-D")
        if self.intercept.shape != (self.weights.shape[1],):
            raise ValueError("intercept length must match weight columns")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")

    @property
    def n_voxels(self) -> int:
        return self.weights.shape[0]

    @property
    def n_dims(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class AlphaGrid:
    """Strictly increasing nonempty candidate regularization strengths."""

    candidates: tuple[float, ...]

    def __post_init__(self):
        if not self.candidates:
            raise ValueError("alpha grid is empty")
        cands = tuple(float(a) for a in self.candidates)
        if any(a < 0 for a in cands):
            raise ValueError("alpha candidates must be nonnegative")
        if any(b <= a for a, b in zip(cands, cands[1:])):
            raise ValueError("alpha candidates must be strictly increasing")
        object.__setattr__(self, "candidates", cands)

    @classmethod
    def from_values(cls, values) -> "AlphaGrid":
        return cls(tuple(sorted(set(float(v) for v in values))))


class _CenteredSVD:
    """Economy SVD of an (optionally centered) design, shared across alphas."""

    def __init__(self, X: np.ndarray, Y: np.ndarray, fit_intercept: bool):
        X = np.asarray(X, dtype=np.float64)
        Y = np.asarray(Y, dtype=np.float64)
        if X.ndim != 2 or Y.ndim != 2:
            raise ValueError("X and Y must be 2-D")
        if X.shape[0] != Y.shape[0]:
            raise ValueError(
                f"X has {X.shape[0]} samples but Y has {Y.shape[0]}"
            )
        if X.shape[0] < 2:
            raise ValueError("ridge fitting needs at least 2 samples")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise ValueError("non-finite values in X or Y")
        self.fit_intercept = fit_intercept
        self.n_features = X.shape[1]
        if fit_intercept:
            self.x_mean = X.mean(axis=0)
            self.y_mean = Y.mean(axis=0)
            Xc = X - self.x_mean
            Yc = Y - self.y_mean
        else:
            self.x_mean = np.zeros(X.shape[1])
            self.y_mean = np.zeros(Y.shape[1])
            Xc, Yc = X, Y
        U, s, Vt = np.linalg.svd(Xc, full_matrices=False)
        keep = s > RANK_TOL * (s[0] if s.size else 0.0)
        self.s = s[keep]
        self.V = Vt[keep].T
        self.UtY = U[:, keep].T @ Yc
        self.rank = int(self.s.size)

    def weights(self, alpha: float) -> np.ndarray:
        if alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if alpha == 0 and self.rank < self.n_features:
            raise ValueError(
                "alpha = 0 requires a full-column-rank design "
                f"(rank {self.rank} < {self.n_features} columns)"
            )
        filt = self.s / (self.s**2 + alpha)
        return (self.V * filt) @ self.UtY

    def model(self, alpha: float) -> RidgeModel:
        W = self.weights(alpha)
        b = self.y_mean - self.x_mean @ W
        return RidgeModel(weights=W, intercept=b, alpha=float(alpha))


def fit_ridge(X, Y, alpha: float, fit_intercept: bool = True) -> RidgeModel:
    """Fit weights minimizing ||Y - XW - 1 b^T||^2 + alpha ||W||^2."""
    return _CenteredSVD(X, Y, fit_intercept).model(alpha)


def predict(model: RidgeModel, X) -> np.ndarray:
    """Return X @ W + b for every row of X."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be 2-D")
    if X.shape[1] != model.n_voxels:
        raise ValueError(
            f"X has {X.shape[1]} columns but the model expects {model.n_voxels}"
        )
    return X @ model.weights + model.intercept


def _fold_blocks(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Contiguous blocks of a seeded permutation of range(n)."""
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, k)


def cross_validate_alpha(
    X,
    Y,
    grid=DEFAULT_ALPHA_GRID,
    k: int = 5,
    seed: int = 0,
    fit_intercept: bool = True,
) -> tuple[float, list[float]]:
    """Select the best alpha by k-fold CV, scoring with negative MSE.

    The score for each alpha is the mean over folds of the negative mean
    squared error on the held-out block; ties go to the larger alpha.
    Returns (best_alpha, scores_in_grid_order) where the grid is sorted
    ascending internally, so scores are order-invariant.
    """
    if isinstance(grid, AlphaGrid):
        grid = grid.candidates
    grid = AlphaGrid.from_values(grid).candidates
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    n = X.shape[0]
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > n:
        raise ValueError(f"k = {k} exceeds the {n} available samples")
    scores = np.zeros(len(grid))
    for block in _fold_blocks(n, k, seed):
        held = np.zeros(n, dtype=bool)
        held[block] = True
        svd = _CenteredSVD(X[~held], Y[~held], fit_intercept)
        for j, alpha in enumerate(grid):
            resid = predict(svd.model(alpha), X[held]) - Y[held]
            scores[j] += -np.mean(resid**2)
    scores /= k
    best = int(np.flatnonzero(scores == scores.max())[-1])
    return grid[best], [float(s) for s in scores]


def fit_with_cv(
    X, Y, grid=DEFAULT_ALPHA_GRID, k: int = 5, seed: int = 0, fit_intercept: bool = True
) -> RidgeModel:
    """Cross-validate alpha on (X, Y), then refit on all samples."""
    best, scores = cross_validate_alpha(X, Y, grid, k=k, seed=seed, fit_intercept=fit_intercept)
    model = fit_ridge(X, Y, best, fit_intercept=fit_intercept)
    return replace(model, cv_scores=tuple(scores))


def save_model(model: RidgeModel, prefix, grid=None, k=None, seed=None) -> None:
    """Persist a model as two MatrixFiles plus a JSON sidecar."""
    prefix = Path(prefix)
    datastore.write_matrix(model.weights, prefix.with_name(prefix.name + "_weights.f32m"))
    datastore.write_matrix(model.intercept[None, :], prefix.with_name(prefix.name + "_intercept.f32m"))
    sidecar = {
        "alpha": model.alpha,
        "grid": list(grid) if grid is not None else None,
        "k": k,
        "seed": seed,
        "cv_scores": list(model.cv_scores) if model.cv_scores is not None else None,
    }
    prefix.with_name(prefix.name + "_ridge.json").write_text(
        json.dumps(sidecar, indent=2) + "\n", encoding="utf-8"
    )


def load_model(prefix) -> RidgeModel:
    prefix = Path(prefix)
    weights = datastore.read_matrix(prefix.with_name(prefix.name + "_weights.f32m"))
    intercept = datastore.read_matrix(prefix.with_name(prefix.name + "_intercept.f32m"))[0]
    sidecar = json.loads(
        prefix.with_name(prefix.name + "_ridge.json").read_text(encoding="utf-8")
    )
    cv_scores = sidecar.get("cv_scores")
    return RidgeModel(
        weights=weights.astype(np.float64),
        intercept=intercept.astype(np.float64),
        alpha=float(sidecar["alpha"]),
        cv_scores=tuple(cv_scores) if cv_scores is not None else None,
    )
