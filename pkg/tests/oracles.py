"""Independent oracle implementations used to cross-check the package.

Everything here deliberately avoids the code paths under test: ridge via
dense normal equations instead of SVD, METEOR via exhaustive matching
enumeration instead of memoized search, SSIM via explicit per-window
loops instead of convolution, identification accuracy via per-pair
``np.corrcoef`` calls instead of one similarity matrix.
"""

from __future__ import annotations

from itertools import combinations, permutations, product

import numpy as np


def ridge_normal_equations(X, Y, alpha, fit_intercept=True):
    """Solve (X^T X + alpha I) W = X^T Y directly; returns (W, b)."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if fit_intercept:
        x_mean = X.mean(axis=0)
        y_mean = Y.mean(axis=0)
        Xc = X - x_mean
        Yc = Y - y_mean
    else:
        x_mean = np.zeros(X.shape[1])
        y_mean = np.zeros(Y.shape[1])
        Xc, Yc = X, Y
    p = X.shape[1]
    W = np.linalg.solve(Xc.T @ Xc + alpha * np.eye(p), Xc.T @ Yc)
    return W, y_mean - x_mean @ W


def cv_scores_explicit(X, Y, grid, k, seed, fit_intercept=True):
    """Per-alpha mean negative held-out MSE, fitted by normal equations.

    Folds follow the published protocol: contiguous blocks of one seeded
    permutation.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    grid = sorted(set(float(a) for a in grid))
    perm = np.random.default_rng(seed).permutation(X.shape[0])
    blocks = np.array_split(perm, k)
    scores = []
    for alpha in grid:
        fold_scores = []
        for block in blocks:
            mask = np.ones(X.shape[0], dtype=bool)
            mask[block] = False
            W, b = ridge_normal_equations(X[mask], Y[mask], alpha, fit_intercept)
            pred = X[block] @ W + b
            fold_scores.append(-np.mean((pred - Y[block]) ** 2))
        scores.append(np.mean(fold_scores))
    best = max(range(len(grid)), key=lambda j: (scores[j], grid[j]))
    return grid[best], scores


def _chunk_count(pairs):
    pairs = sorted(pairs)
    chunks = 0
    prev = None
    for i, j in pairs:
        if prev is None or i != prev[0] + 1 or j != prev[1] + 1:
            chunks += 1
        prev = (i, j)
    return chunks


def meteor_match_bruteforce(hyp, ref):
    """(matches, min chunks) via exhaustive enumeration of maximum matchings."""
    hyp = list(hyp)
    ref = list(ref)
    shared = sorted(set(hyp) & set(ref))
    hyp_pos = {t: [i for i, w in enumerate(hyp) if w == t] for t in shared}
    ref_pos = {t: [j for j, w in enumerate(ref) if w == t] for t in shared}
    m = sum(min(len(hyp_pos[t]), len(ref_pos[t])) for t in shared)
    if m == 0:
        return 0, 0

    def token_matchings(t):
        k = min(len(hyp_pos[t]), len(ref_pos[t]))
        for hs in combinations(hyp_pos[t], k):
            for rs in permutations(ref_pos[t], k):
                yield list(zip(hs, rs))

    best = None
    for assignment in product(*(token_matchings(t) for t in shared)):
        pairs = [pair for token_pairs in assignment for pair in token_pairs]
        chunks = _chunk_count(pairs)
        if best is None or chunks < best:
            best = chunks
    return m, best


def meteor_bruteforce(hyp, refs):
    """Exact-match unigram METEOR evaluated from the brute-force matcher."""
    best = 0.0
    for ref in refs:
        m, chunks = meteor_match_bruteforce(hyp, ref)
        if m == 0:
            continue
        precision = m / len(hyp)
        recall = m / len(ref)
        fmean = 10 * precision * recall / (recall + 9 * precision)
        score = fmean * (1 - 0.5 * (chunks / m) ** 3)
        best = max(best, score)
    return best


def ssim_direct(x, y, max_value, window_size=11, sigma=1.5, k1=0.01, k2=0.03):
    """SSIM by explicit window loops and a directly constructed kernel."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    c1 = (k1 * max_value) ** 2
    c2 = (k2 * max_value) ** 2
    h, w = x.shape

    def window_score(xs, ys, weights):
        weights = weights / weights.sum()
        mx = float(np.sum(weights * xs))
        my = float(np.sum(weights * ys))
        vx = float(np.sum(weights * xs * xs)) - mx * mx
        vy = float(np.sum(weights * ys * ys)) - my * my
        cxy = float(np.sum(weights * xs * ys)) - mx * my
        return ((2 * mx * my + c1) * (2 * cxy + c2)) / (
            (mx * mx + my * my + c1) * (vx + vy + c2)
        )

    if min(h, w) < window_size:
        return window_score(x, y, np.ones((h, w)))

    half = (window_size - 1) // 2
    kernel = np.empty((window_size, window_size))
    for di in range(window_size):
        for dj in range(window_size):
            kernel[di, dj] = np.exp(-((di - half) ** 2 + (dj - half) ** 2) / (2 * sigma**2))
    scores = []
    for top in range(h - window_size + 1):
        for left in range(w - window_size + 1):
            xs = x[top : top + window_size, left : left + window_size]
            ys = y[top : top + window_size, left : left + window_size]
            scores.append(window_score(xs, ys, kernel))
    return float(np.mean(scores))


def nway_bruteforce(pred, truth, n=2):
    """Identification accuracy with per-pair np.corrcoef calls."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    items = pred.shape[0]
    correct = 0
    total = 0
    for i in range(items):
        own = np.corrcoef(pred[i], truth[i])[0, 1]
        others = [j for j in range(items) if j != i]
        for combo in combinations(others, n - 1):
            total += 1
            if all(own > np.corrcoef(pred[i], truth[j])[0, 1] for j in combo):
                correct += 1
    return correct / total


def frechet_1d(mu1, var1, mu2, var2):
    return (mu1 - mu2) ** 2 + (np.sqrt(var1) - np.sqrt(var2)) ** 2
