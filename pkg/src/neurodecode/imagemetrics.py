"""Image and embedding evaluation metrics.

PixCorr and SSIM operate on grayscale images; identification accuracy and
the Fréchet distance operate on externally produced embedding sets (this
module never runs a neural network). SSIM follows the original published
constants: Gaussian 11x11 window with sigma 1.5, k1 = 0.01, k2 = 0.03,
Gaussian-weighted window statistics. Images smaller than the window are
scored with a single uniform window over the whole image.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb
from pathlib import Path

import numpy as np
from scipy.signal import convolve2d

# ITU-R BT.601 luminance weights for color -> gray conversion
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

# eigenvalues below this fraction of the largest are clamped to zero when
# projecting covariance matrices onto the PSD cone
PSD_CLAMP = 1e-10

_SYM_TOL = 1e-9


@dataclass(frozen=True)
class GrayImage:
    pixels: np.ndarray  # height x width intensities in [0, max_value]
    max_value: float

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 2:
            raise ValueError("pixels must be a 2-D array")
        if self.max_value <= 0:
            raise ValueError("dynamic range must be positive")
        if px.min() < 0 or px.max() > self.max_value:
            raise ValueError("pixel intensities fall outside [0, max_value]")
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def rgb_to_gray(rgb: np.ndarray) -> np.ndarray:
    """Collapse an (h, w, 3) array to BT.601 luminance."""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("expected an (h, w, 3) color array")
    return rgb @ np.array(LUMA_WEIGHTS)


def read_pgm(path) -> GrayImage:
    """Read a binary 8-bit PGM (P5) file."""
    data = Path(path).read_bytes()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        if pos >= len(data):
            raise ValueError(f"{path}: truncated PGM header")
        if data[pos : pos + 1].isspace():
            pos += 1
        elif data[pos : pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
        else:
            end = pos
            while end < len(data) and not data[end : end + 1].isspace():
                end += 1
            fields.append(data[pos:end])
            pos = end
    if fields[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    width, height, maxval = (int(f) for f in fields[1:])
    if not 0 < maxval <= 255:
        raise ValueError(f"{path}: only 8-bit PGM supported (maxval {maxval})")
    pos += 1  # single whitespace after maxval
    raster = np.frombuffer(data, dtype=np.uint8, count=height * width, offset=pos)
    if raster.size != height * width:
        raise ValueError(f"{path}: truncated raster")
    return GrayImage(raster.reshape(height, width).astype(np.float64), float(maxval))


def write_pgm(image: GrayImage, path) -> None:
    if image.max_value > 255:
        raise ValueError("PGM output limited to 8-bit dynamic range")
    header = f"P5\n{image.width} {image.height}\n{int(image.max_value)}\n".encode()
    body = np.rint(image.pixels).astype(np.uint8).tobytes()
    Path(path).write_bytes(header + body)


def pixcorr(a, b) -> float:
    """Pearson correlation between two flattened pixel vectors."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < 2:
        raise ValueError("need at least 2 pixels")
    ac = a - a.mean()
    bc = b - b.mean()
    na = np.linalg.norm(ac)
    nb = np.linalg.norm(bc)
    if na == 0 or nb == 0:
        raise ValueError("correlation is undefined for a constant input")
    return float(np.dot(ac, bc) / (na * nb))


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    """Normalized 2-D Gaussian kernel."""
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def ssim(
    a: GrayImage,
    b: GrayImage,
    window_size: int = 11,
    sigma: float = 1.5,
    k1: float = 0.01,
    k2: float = 0.03,
) -> float:
    """Mean structural similarity over sliding Gaussian windows."""
    if (a.height, a.width) != (b.height, b.width):
        raise ValueError(
            f"image size mismatch: {a.height}x{a.width} vs {b.height}x{b.width}"
        )
    if a.max_value != b.max_value:
        raise ValueError("images must share one dynamic range")
    L = a.max_value
    c1 = (k1 * L) ** 2
    c2 = (k2 * L) ** 2
    x = a.pixels
    y = b.pixels
    if min(a.height, a.width) < window_size:
        # single uniform window over the whole image
        mu_x, mu_y = x.mean(), y.mean()
        var_x = (x**2).mean() - mu_x**2
        var_y = (y**2).mean() - mu_y**2
        cov = (x * y).mean() - mu_x * mu_y
        num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
        den = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
        return float(num / den)
    kernel = gaussian_window(window_size, sigma)
    mu_x = convolve2d(x, kernel, mode="valid")
    mu_y = convolve2d(y, kernel, mode="valid")
    var_x = convolve2d(x**2, kernel, mode="valid") - mu_x**2
    var_y = convolve2d(y**2, kernel, mode="valid") - mu_y**2
    cov = convolve2d(x * y, kernel, mode="valid") - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


@dataclass(frozen=True)
class EmbeddingSet:
    """items x dims embedding matrix with optional aligned item ids."""

    vectors: np.ndarray
    ids: tuple[str, ...] | None = None

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError("embedding set must be a 2-D matrix")
        if not np.all(np.isfinite(v)):
            raise ValueError("embedding set contains non-finite values")
        if self.ids is not None and len(self.ids) != v.shape[0]:
            raise ValueError("ids length does not match item count")
        object.__setattr__(self, "vectors", v)

    @property
    def n_items(self) -> int:
        return self.vectors.shape[0]


def _as_embedding_set(x) -> EmbeddingSet:
    return x if isinstance(x, EmbeddingSet) else EmbeddingSet(np.asarray(x))


def _similarity_matrix(pred: np.ndarray, truth: np.ndarray, kind: str) -> np.ndarray:
    if kind == "pearson":
        pc = pred - pred.mean(axis=1, keepdims=True)
        tc = truth - truth.mean(axis=1, keepdims=True)
        pn = np.linalg.norm(pc, axis=1)
        tn = np.linalg.norm(tc, axis=1)
        if np.any(pn == 0) or np.any(tn == 0):
            raise ValueError("constant embedding row: correlation undefined")
        return (pc / pn[:, None]) @ (tc / tn[:, None]).T
    if kind == "cosine":
        pn = np.linalg.norm(pred, axis=1)
        tn = np.linalg.norm(truth, axis=1)
        if np.any(pn == 0) or np.any(tn == 0):
            raise ValueError("zero embedding row: cosine undefined")
        return (pred / pn[:, None]) @ (truth / tn[:, None]).T
    raise ValueError(f"unknown similarity {kind!r}")


def nway_accuracy(
    pred,
    truth,
    n: int = 2,
    similarity: str = "pearson",
    seed: int = 0,
    max_trials_per_item: int = 1000,
) -> float:
    """n-way identification accuracy of predicted against true embeddings.

    A trial pits item i's own similarity against n - 1 distinct distractors
    and counts as correct only when the own similarity is strictly larger
    than every distractor's. All distractor combinations are enumerated
    when there are at most ``max_trials_per_item`` of them; otherwise that
    many are sampled per item with a seeded generator.
    """
    pred = _as_embedding_set(pred)
    truth = _as_embedding_set(truth)
    if pred.ids is not None and truth.ids is not None and pred.ids != truth.ids:
        raise ValueError("embedding sets have misaligned item ids")
    if pred.vectors.shape != truth.vectors.shape:
        raise ValueError(
            f"shape mismatch: pred {pred.vectors.shape} vs truth {truth.vectors.shape}"
        )
    items = pred.n_items
    if n < 2:
        raise ValueError("n must be at least 2")
    if items < n:
        raise ValueError(f"need at least {n} items for {n}-way trials")
    sims = _similarity_matrix(pred.vectors, truth.vectors, similarity)
    correct = 0
    total = 0
    n_combos = comb(items - 1, n - 1)
    rng = np.random.default_rng(seed)
    for i in range(items):
        own = sims[i, i]
        others = np.delete(np.arange(items), i)
        if n == 2 and n_combos <= max_trials_per_item:
            correct += int(np.sum(own > sims[i, others]))
            total += items - 1
        elif n_combos <= max_trials_per_item:
            for combo in combinations(others, n - 1):
                correct += bool(np.all(own > sims[i, list(combo)]))
                total += 1
        else:
            for _ in range(max_trials_per_item):
                combo = rng.choice(others, size=n - 1, replace=False)
                correct += bool(np.all(own > sims[i, combo]))
                total += 1
    return correct / total


@dataclass(frozen=True)
class GaussianMoments:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.cov, dtype=np.float64)
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise ValueError("cov must be square and match the mean length")
        scale = max(1.0, float(np.abs(cov).max()) if cov.size else 1.0)
        if np.abs(cov - cov.T).max() > _SYM_TOL * scale:
            raise ValueError("covariance is asymmetric beyond tolerance")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dims(self) -> int:
        return self.mean.size


def moments(embeddings) -> GaussianMoments:
    """Sample mean and covariance (ddof 1), symmetrized."""
    embeddings = _as_embedding_set(embeddings)
    if embeddings.n_items < 2:
        raise ValueError("need at least 2 items for a sample covariance")
    v = embeddings.vectors
    cov = np.cov(v, rowvar=False, ddof=1)
    cov = np.atleast_2d(cov)
    cov = (cov + cov.T) / 2.0
    return GaussianMoments(mean=v.mean(axis=0), cov=cov)


def _psd_eigh(cov: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecompose a symmetric matrix, clamping tiny negatives to zero."""
    vals, vecs = np.linalg.eigh(cov)
    top = max(float(vals.max()), 0.0) if vals.size else 0.0
    floor = -_SYM_TOL * max(1.0, top)
    if vals.min() < floor:
        raise ValueError(f"covariance has eigenvalue {vals.min():.3e} below {floor:.3e}")
    vals = np.where(vals < PSD_CLAMP * max(top, 1e-300), 0.0, vals)
    return vals, vecs


def frechet_distance(g1: GaussianMoments, g2: GaussianMoments) -> float:
    """Squared Fréchet (Wasserstein-2) distance between two Gaussians.

    tr((Sigma1 Sigma2)^{1/2}) is evaluated through the eigenvalues of the
    symmetric product sqrt(Sigma1) Sigma2 sqrt(Sigma1), which stays real
    for PSD inputs; negative eigenvalues from roundoff are clamped to 0.
    """
    if g1.dims != g2.dims:
        raise ValueError(f"dimension mismatch: {g1.dims} vs {g2.dims}")
    vals1, vecs1 = _psd_eigh(g1.cov)
    sqrt1 = (vecs1 * np.sqrt(vals1)) @ vecs1.T
    inner = sqrt1 @ g2.cov @ sqrt1
    inner = (inner + inner.T) / 2.0
    cross_vals, _ = _psd_eigh(inner)
    mean_term = float(np.sum((g1.mean - g2.mean) ** 2))
    trace_term = float(np.trace(g1.cov) + np.trace(g2.cov) - 2.0 * np.sum(np.sqrt(cross_vals)))
    return max(mean_term + trace_term, 0.0)
