"""Synthetic linear brain-encoder simulator for closed-loop validation.

Latents Z are i.i.d. standard normal, the encoder W is standard normal
scaled by 1/sqrt(d) so voxel signals are unit-scale, and each repeated
trial adds fresh Gaussian noise of noise_sigma times the empirical signal
std. Decoding the generated trials and correlating against the known Z
gives a ground-truth score for the whole pipeline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import datastore
from .datastore import Manifest, ManifestEntry


@dataclass(frozen=True)
class SynthSpec:
    n_train: int
    n_test: int
    voxels: int
    latent_dims: int
    noise_sigma: float = 0.0
    repeats: int = 1
    seed: int = 0

    def __post_init__(self):
        for name in ("n_train", "n_test", "voxels", "latent_dims"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if not 1 <= self.repeats <= 3:
            raise ValueError("repeats must be between 1 and 3")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")

    @classmethod
    def from_json(cls, path) -> "SynthSpec":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ValueError(f"{path}: bad synth spec: {exc}") from exc


@dataclass(frozen=True)
class SynthData:
    trials: np.ndarray  # (n_stimuli * repeats) x voxels
    manifest: Manifest
    latents: np.ndarray  # n_stimuli x latent_dims, stimulus order
    encoder: np.ndarray  # latent_dims x voxels
    signal_std: float


def generate(spec: SynthSpec) -> SynthData:
    """Draw a dataset from the linear encoder model, deterministic per seed."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n_train + spec.n_test
    latents = rng.standard_normal((n, spec.latent_dims))
    encoder = rng.standard_normal((spec.latent_dims, spec.voxels)) / np.sqrt(spec.latent_dims)
    signal = latents @ encoder
    signal_std = float(signal.std())
    noise_scale = spec.noise_sigma * signal_std
    entries = []
    rows = []
    for s in range(n):
        split = "train" if s < spec.n_train else "test"
        stim = f"stim_{s:05d}"
        for r in range(spec.repeats):
            noise = noise_scale * rng.standard_normal(spec.voxels) if noise_scale else 0.0
            rows.append(signal[s] + noise)
            entries.append(ManifestEntry(f"{stim}_t{r}", stim, split))
    return SynthData(
        trials=np.array(rows),
        manifest=Manifest(tuple(entries)),
        latents=latents,
        encoder=encoder,
        signal_std=signal_std,
    )


def closed_loop_score(true_latents, decoded_latents) -> tuple[np.ndarray, float]:
    """Per-dimension Pearson r between decoded and true latents, plus mean."""
    truth = np.asarray(true_latents, dtype=np.float64)
    decoded = np.asarray(decoded_latents, dtype=np.float64)
    if truth.shape != decoded.shape:
        raise ValueError(f"shape mismatch: {truth.shape} vs {decoded.shape}")
    tc = truth - truth.mean(axis=0)
    dc = decoded - decoded.mean(axis=0)
    denom = np.linalg.norm(tc, axis=0) * np.linalg.norm(dc, axis=0)
    if np.any(denom == 0):
        raise ValueError("constant column: correlation undefined")
    per_dim = np.sum(tc * dc, axis=0) / denom
    return per_dim, float(per_dim.mean())


def write_dataset(data: SynthData, out_dir) -> dict[str, Path]:
    """Write trials, latents, encoder, and manifest in pipeline formats."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "voxels": out / "voxels.f32m",
        "latents": out / "latents.f32m",
        "encoder": out / "encoder.f32m",
        "manifest": out / "manifest.json",
    }
    datastore.write_matrix(data.trials, paths["voxels"])
    datastore.write_matrix(data.latents, paths["latents"])
    datastore.write_matrix(data.encoder, paths["encoder"])
    datastore.write_manifest(data.manifest, paths["manifest"])
    return paths
