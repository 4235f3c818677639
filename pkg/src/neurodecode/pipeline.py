"""Branch orchestration: preprocessing, per-branch ridge fits, prediction,
metric reports, and the conditioning-bundle export.

Every decoding branch (caption features, hierarchical VAE layers, depth
latents) is the same computation against a different target file:
average repeats -> ROI mask -> split -> cross-validated ridge fit on the
train split -> predict the test split -> renormalize with train-derived
statistics. Shared preprocessing is computed once per run and cached.
"""

from __future__ import annotations

import json
import logging
import os
import re
import shutil
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import datastore, imagemetrics, renorm, ridge, textmetrics

log = logging.getLogger("neurodecode.pipeline")

BRANCH_NAME_RE = re.compile(r"^(caption_features|depth_latent|vdvae_layer_(\d+))$")

DEFAULT_DIFFUSION = {
    "steps": 30,
    "guidance_scale": 9,
    "controlnet_weight": 0.8,
    "negative_prompt": "",
}

TABLE1_ROWS = (
    "Meteor (image captions and human captions)",
    "Meteor (brain captions and image captions)",
    "Sentence (image captions and human captions)",
    "Sentence (brain captions and image captions)",
    "CLIP (image captions and human captions)",
    "CLIP (brain captions and image captions)",
)
TABLE2_ROWS = ("PixCorr", "SSIM", "AlexNet (2)", "AlexNet (5)", "Inception", "CLIP")
ALL_ROWS = TABLE1_ROWS + TABLE2_ROWS + ("FID",)

_NWAY_LABELS = {
    "AlexNet (2)": "alexnet2",
    "AlexNet (5)": "alexnet5",
    "Inception": "inception",
    "CLIP": "clip",
}


class ConfigError(ValueError):
    """Configuration or input validation failure (CLI exit code 1)."""


class LeakageError(RuntimeError):
    """Test-derived statistics reached a fitting or renormalization step."""


def validate_branch_name(name: str) -> None:
    m = BRANCH_NAME_RE.match(name)
    if not m:
        raise ConfigError(
            f"invalid branch name {name!r}: expected caption_features, "
            "depth_latent, or vdvae_layer_1..31"
        )
    if m.group(2) is not None and not 1 <= int(m.group(2)) <= 31:
        raise ConfigError(f"invalid branch name {name!r}: layer index must be 1..31")


@dataclass(frozen=True)
class BranchSpec:
    name: str
    target: Path


@dataclass(frozen=True)
class PipelineConfig:
    voxels: Path
    manifest: Path
    out_dir: Path
    branches: tuple[BranchSpec, ...]
    roi_mask: Path | None = None
    alpha_grid: tuple[float, ...] = ridge.DEFAULT_ALPHA_GRID
    folds: int = 5
    seed: int = 0
    similarity: str = "pearson"
    metrics: Mapping[str, Any] = field(default_factory=dict)
    diffusion: Mapping[str, Any] = field(default_factory=lambda: dict(DEFAULT_DIFFUSION))
    base_dir: Path = Path(".")

    def branch(self, name: str) -> BranchSpec:
        for b in self.branches:
            if b.name == name:
                return b
        raise ConfigError(f"branch {name!r} is not configured")


def _load_document(path: Path) -> dict:
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".toml":
        try:
            import tomllib  # py >= 3.11
        except ModuleNotFoundError:
            import tomli as tomllib
        return tomllib.loads(text)
    return json.loads(text)


def load_config(path) -> PipelineConfig:
    """Parse and validate a TOML/JSON pipeline config.

    Relative paths are resolved against the config file's directory. The
    core inputs (voxels, manifest, ROI mask, branch targets) must exist;
    metric inputs are checked lazily so missing ones become skipped report
    rows instead of hard failures.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = _load_document(path)
    except ValueError as exc:
        raise ConfigError(f"{path}: cannot parse config: {exc}") from exc
    base = path.parent

    def respath(value) -> Path:
        p = Path(str(value))
        return p if p.is_absolute() else base / p

    missing = [key for key in ("voxels", "manifest", "out_dir", "branches") if key not in raw]
    if missing:
        raise ConfigError(f"{path}: missing required keys: {', '.join(missing)}")

    branches = []
    for name, spec in raw["branches"].items():
        validate_branch_name(name)
        target = spec["target"] if isinstance(spec, Mapping) else spec
        branches.append(BranchSpec(name=name, target=respath(target)))
    if not branches:
        raise ConfigError(f"{path}: no branches configured")

    try:
        alpha_grid = ridge.AlphaGrid.from_values(
            raw.get("alpha_grid", ridge.DEFAULT_ALPHA_GRID)
        ).candidates
    except ValueError as exc:
        raise ConfigError(f"{path}: bad alpha_grid: {exc}") from exc

    folds = int(raw.get("folds", 5))
    if folds < 2:
        raise ConfigError(f"{path}: folds must be at least 2")

    similarity = raw.get("similarity", "pearson")
    if similarity not in ("pearson", "cosine"):
        raise ConfigError(f"{path}: similarity must be 'pearson' or 'cosine'")

    diffusion = dict(DEFAULT_DIFFUSION)
    diffusion.update(raw.get("diffusion", {}))  # values pass through verbatim

    cfg = PipelineConfig(
        voxels=respath(raw["voxels"]),
        manifest=respath(raw["manifest"]),
        out_dir=respath(raw["out_dir"]),
        branches=tuple(branches),
        roi_mask=respath(raw["roi_mask"]) if raw.get("roi_mask") else None,
        alpha_grid=alpha_grid,
        folds=folds,
        seed=int(raw.get("seed", 0)),
        similarity=similarity,
        metrics=raw.get("metrics", {}),
        diffusion=diffusion,
        base_dir=base,
    )

    for label, p in [("voxels", cfg.voxels), ("manifest", cfg.manifest)] + [
        (f"branch {b.name} target", b.target) for b in cfg.branches
    ]:
        if not Path(p).exists():
            raise ConfigError(f"{path}: {label} file not found: {p}")
    if cfg.roi_mask is not None and not cfg.roi_mask.exists():
        raise ConfigError(f"{path}: roi_mask file not found: {cfg.roi_mask}")
    return cfg


@dataclass(frozen=True)
class PreparedData:
    """Shared preprocessing output: averaged, masked, split voxel data."""

    x_train: np.ndarray
    x_test: np.ndarray
    stim_order: tuple[str, ...]
    stim_split: np.ndarray  # "train"/"test" aligned with stim_order


class PreprocessCache:
    """Computes the shared preprocessing once; counts subsequent hits."""

    def __init__(self, cfg: PipelineConfig):
        self._cfg = cfg
        self._data: PreparedData | None = None
        self._lock = threading.Lock()
        self.hits = 0

    def get(self) -> PreparedData:
        with self._lock:
            if self._data is not None:
                self.hits += 1
                log.info("preprocessing cache hit (%d so far)", self.hits)
                return self._data
            self._data = _prepare(self._cfg)
            return self._data


def _prepare(cfg: PipelineConfig) -> PreparedData:
    trials = datastore.read_matrix(cfg.voxels)
    manifest = datastore.read_manifest(cfg.manifest)
    if trials.shape[0] != len(manifest):
        raise ConfigError(
            f"voxel matrix has {trials.shape[0]} rows but manifest has {len(manifest)}"
        )
    averaged, avg_manifest = datastore.average_repeats(trials, manifest)
    if cfg.roi_mask is not None:
        averaged = datastore.apply_roi_mask(averaged, datastore.read_roi_mask(cfg.roi_mask))
    x_train, x_test = datastore.split_rows(averaged, avg_manifest)
    log.info(
        "prepared voxel data: %d train / %d test stimuli, %d voxels",
        x_train.shape[0], x_test.shape[0], averaged.shape[1],
    )
    return PreparedData(
        x_train=x_train,
        x_test=x_test,
        stim_order=tuple(avg_manifest.stimulus_order()),
        stim_split=avg_manifest.splits(),
    )


def _branch_paths(cfg: PipelineConfig, name: str) -> dict[str, Path]:
    out = Path(cfg.out_dir)
    return {
        "prefix": out / name,
        "pred_stats": out / f"{name}_pred_stats.f32m",
        "target_stats": out / f"{name}_target_stats.f32m",
        "pred": out / f"{name}_pred.f32m",
        "record": out / f"{name}_branch.json",
    }


def _split_targets(cfg, branch: BranchSpec, prep: PreparedData):
    targets = datastore.read_matrix(branch.target).astype(np.float64)
    if targets.shape[0] != len(prep.stim_order):
        raise ConfigError(
            f"branch {branch.name}: target file has {targets.shape[0]} rows "
            f"but the manifest describes {len(prep.stim_order)} stimuli"
        )
    return targets[prep.stim_split == "train"], targets[prep.stim_split == "test"]


def _write_record(path: Path, record: dict) -> None:
    path.write_text(json.dumps(record, indent=2) + "\n", encoding="utf-8")


def fit_branch(cfg: PipelineConfig, name: str, cache: PreprocessCache | None = None) -> dict:
    """Cross-validate, fit, and persist one branch's model and train stats."""
    branch = cfg.branch(name)
    prep = (cache or PreprocessCache(cfg)).get()
    y_train, _ = _split_targets(cfg, branch, prep)
    if prep.x_train.shape[0] < 2:
        raise ConfigError(f"branch {name}: train split has fewer than 2 stimuli")
    Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
    best_alpha, scores = ridge.cross_validate_alpha(
        prep.x_train, y_train, cfg.alpha_grid, k=cfg.folds, seed=cfg.seed
    )
    model = replace(
        ridge.fit_ridge(prep.x_train, y_train, best_alpha), cv_scores=tuple(scores)
    )
    train_pred = ridge.predict(model, prep.x_train)
    pred_stats = renorm.compute_stats(train_pred, provenance="train")
    target_stats = renorm.compute_stats(y_train, provenance="train")

    paths = _branch_paths(cfg, name)
    ridge.save_model(model, paths["prefix"], grid=cfg.alpha_grid, k=cfg.folds, seed=cfg.seed)
    renorm.save_stats(pred_stats, paths["pred_stats"])
    renorm.save_stats(target_stats, paths["target_stats"])
    record = {
        "branch": name,
        "alpha": model.alpha,
        "cv_scores": list(model.cv_scores),
        "alpha_grid": list(cfg.alpha_grid),
        "folds": cfg.folds,
        "seed": cfg.seed,
        "n_train": int(prep.x_train.shape[0]),
        "n_test": int(prep.x_test.shape[0]),
        "stats_provenance": {"pred": pred_stats.provenance, "target": target_stats.provenance},
        "prediction": None,
    }
    _write_record(paths["record"], record)
    log.info("branch %s: alpha %.6g selected by %d-fold CV", name, model.alpha, cfg.folds)
    return record


def renormalize_checked(pred, pred_stats: renorm.RenormStats, target_stats: renorm.RenormStats):
    """Renormalize, refusing statistics that were not train-derived."""
    for stats, label in ((pred_stats, "prediction"), (target_stats, "target")):
        if stats.provenance != "train":
            raise LeakageError(
                f"{label} statistics are tagged {stats.provenance!r}; "
                "only train-derived statistics may renormalize predictions"
            )
    return renorm.renormalize(pred, pred_stats, target_stats)


def predict_branch(cfg: PipelineConfig, name: str, cache: PreprocessCache | None = None) -> dict:
    """Predict and renormalize the test split from a previously fitted branch."""
    cfg.branch(name)
    paths = _branch_paths(cfg, name)
    if not paths["record"].exists():
        raise ConfigError(f"branch {name}: no fit artifacts in {cfg.out_dir}; run fit first")
    record = json.loads(paths["record"].read_text(encoding="utf-8"))
    prep = (cache or PreprocessCache(cfg)).get()
    if prep.x_test.shape[0] == 0:
        record["prediction"] = {"skipped": "empty test split"}
        _write_record(paths["record"], record)
        log.info("branch %s: prediction skipped (empty test split)", name)
        return record
    model = ridge.load_model(paths["prefix"])
    pred_stats = renorm.load_stats(paths["pred_stats"], provenance="train")
    target_stats = renorm.load_stats(paths["target_stats"], provenance="train")
    renormed = renormalize_checked(ridge.predict(model, prep.x_test), pred_stats, target_stats)
    datastore.write_matrix(renormed, paths["pred"])
    record["prediction"] = {"file": paths["pred"].name, "rows": int(renormed.shape[0])}
    _write_record(paths["record"], record)
    return record


def run_branch(cfg: PipelineConfig, name: str, cache: PreprocessCache | None = None) -> dict:
    """Fit then predict one branch (the full per-branch pipeline)."""
    cache = cache or PreprocessCache(cfg)
    fit_branch(cfg, name, cache)
    return predict_branch(cfg, name, cache)


def _max_workers(n_tasks: int) -> int:
    cap = os.environ.get("NEURODECODE_THREADS", "").strip()
    limit = os.cpu_count() or 1
    if cap:
        try:
            limit = min(limit, max(1, int(cap)))
        except ValueError as exc:
            raise ConfigError(f"NEURODECODE_THREADS must be an integer, got {cap!r}") from exc
    return max(1, min(n_tasks, limit))


def _for_each_branch(cfg, names, fn) -> list[dict]:
    names = list(names) if names else [b.name for b in cfg.branches]
    for name in names:
        cfg.branch(name)  # fail fast on unknown names
    cache = PreprocessCache(cfg)
    cache.get()  # warm once so parallel branches share it
    workers = _max_workers(len(names))
    if workers == 1:
        return [fn(cfg, name, cache) for name in names]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda name: fn(cfg, name, cache), names))


def fit_all(cfg: PipelineConfig, names=None) -> list[dict]:
    return _for_each_branch(cfg, names, fit_branch)


def predict_all(cfg: PipelineConfig, names=None) -> list[dict]:
    return _for_each_branch(cfg, names, predict_branch)


# ---------------------------------------------------------------------------
# evaluation report


@dataclass
class MetricReport:
    rows: dict[str, dict]
    metadata: dict

    def to_json(self) -> str:
        ordered = {
            "metadata": self.metadata,
            "rows": {label: self.rows[label] for label in ALL_ROWS},
        }
        return json.dumps(ordered, indent=2) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @property
    def all_skipped(self) -> bool:
        return all("skipped" in entry for entry in self.rows.values())


def _load_captions(path: Path) -> dict[str, str]:
    records = json.loads(path.read_text(encoding="utf-8"))
    out: dict[str, str] = {}
    for i, rec in enumerate(records):
        try:
            sid, text = str(rec["stimulus_id"]), str(rec["text"])
        except (KeyError, TypeError) as exc:
            raise ValueError(f"{path}: caption entry {i} is malformed: {exc}") from exc
        if sid in out:
            raise ValueError(f"{path}: duplicate stimulus_id {sid!r}")
        out[sid] = text
    if not out:
        raise ValueError(f"{path}: captions file is empty")
    return out


def _meteor_corpus(hyp_path: Path, ref_paths: list[Path]) -> float:
    hyps = _load_captions(hyp_path)
    refs = [_load_captions(p) for p in ref_paths]
    scores = []
    for sid, text in hyps.items():
        ref_tokens = [textmetrics.tokenize(r[sid]) for r in refs if sid in r]
        if not ref_tokens:
            raise ValueError(f"no reference caption for stimulus {sid!r}")
        scores.append(textmetrics.meteor(textmetrics.tokenize(text), ref_tokens))
    return textmetrics.corpus_mean(scores)


def _cosine_corpus(a_path: Path, b_path: Path) -> float:
    a = datastore.read_matrix(a_path)
    b = datastore.read_matrix(b_path)
    if a.shape != b.shape:
        raise ValueError(f"embedding shape mismatch: {a.shape} vs {b.shape}")
    return textmetrics.corpus_mean(
        [textmetrics.cosine_similarity(a[i], b[i]) for i in range(a.shape[0])]
    )


def _load_image_pairs(cfg: PipelineConfig, spec: Mapping) -> list[tuple]:
    def respath(v) -> Path:
        p = Path(str(v))
        return p if p.is_absolute() else cfg.base_dir / p

    if "truth_dir" in spec and "pred_dir" in spec:
        tdir, pdir = respath(spec["truth_dir"]), respath(spec["pred_dir"])
        names = sorted(p.name for p in tdir.glob("*.pgm"))
        if not names:
            raise ValueError(f"no .pgm files in {tdir}")
        if sorted(p.name for p in pdir.glob("*.pgm")) != names:
            raise ValueError("truth and prediction image directories differ")
        return [
            (imagemetrics.read_pgm(tdir / n), imagemetrics.read_pgm(pdir / n)) for n in names
        ]
    for key in ("truth", "pred", "height", "width", "max_value"):
        if key not in spec:
            raise ValueError(f"images config missing {key!r}")
    h, w, L = int(spec["height"]), int(spec["width"]), float(spec["max_value"])
    truth = datastore.read_matrix(respath(spec["truth"]))
    pred = datastore.read_matrix(respath(spec["pred"]))
    if truth.shape != pred.shape:
        raise ValueError(f"image matrix shape mismatch: {truth.shape} vs {pred.shape}")
    if truth.shape[1] != h * w:
        raise ValueError(f"flattened image length {truth.shape[1]} != {h}x{w}")
    return [
        (
            imagemetrics.GrayImage(truth[i].reshape(h, w).astype(np.float64), L),
            imagemetrics.GrayImage(pred[i].reshape(h, w).astype(np.float64), L),
        )
        for i in range(truth.shape[0])
    ]


def _alpha_per_branch(cfg: PipelineConfig) -> dict[str, float | None]:
    alphas: dict[str, float | None] = {}
    for b in cfg.branches:
        record = _branch_paths(cfg, b.name)["record"]
        if record.exists():
            alphas[b.name] = json.loads(record.read_text(encoding="utf-8")).get("alpha")
        else:
            alphas[b.name] = None
    return alphas


def evaluate(cfg: PipelineConfig) -> MetricReport:
    """Compute every report row, marking unavailable ones as skipped."""
    metrics = cfg.metrics

    def respath(v) -> Path:
        p = Path(str(v))
        return p if p.is_absolute() else cfg.base_dir / p

    def caption_paths(kind: str) -> Path:
        return respath(metrics["captions"][kind])

    def reference_list(kind: str) -> list[Path]:
        value = metrics["captions"][kind]
        values = value if isinstance(value, list) else [value]
        return [respath(v) for v in values]

    def embedding(kind: str) -> Path:
        return respath(metrics["embeddings"][kind])

    builders = {
        "Meteor (image captions and human captions)": lambda: _meteor_corpus(
            caption_paths("image"), reference_list("human")
        ),
        "Meteor (brain captions and image captions)": lambda: _meteor_corpus(
            caption_paths("brain"), reference_list("image")
        ),
        "Sentence (image captions and human captions)": lambda: _cosine_corpus(
            embedding("sentence_image"), embedding("sentence_human")
        ),
        "Sentence (brain captions and image captions)": lambda: _cosine_corpus(
            embedding("sentence_brain"), embedding("sentence_image")
        ),
        "CLIP (image captions and human captions)": lambda: _cosine_corpus(
            embedding("clip_image"), embedding("clip_human")
        ),
        "CLIP (brain captions and image captions)": lambda: _cosine_corpus(
            embedding("clip_brain"), embedding("clip_image")
        ),
        "PixCorr": lambda: textmetrics.corpus_mean(
            [
                imagemetrics.pixcorr(t.pixels.ravel(), p.pixels.ravel())
                for t, p in _load_image_pairs(cfg, metrics["images"])
            ]
        ),
        "SSIM": lambda: textmetrics.corpus_mean(
            [imagemetrics.ssim(t, p) for t, p in _load_image_pairs(cfg, metrics["images"])]
        ),
        "FID": lambda: imagemetrics.frechet_distance(
            imagemetrics.moments(datastore.read_matrix(respath(metrics["fid"]["truth"]))),
            imagemetrics.moments(datastore.read_matrix(respath(metrics["fid"]["pred"]))),
        ),
    }
    for label, key in _NWAY_LABELS.items():
        def nway_row(key=key):
            spec = metrics["nway"][key]
            return imagemetrics.nway_accuracy(
                datastore.read_matrix(respath(spec["pred"])),
                datastore.read_matrix(respath(spec["truth"])),
                n=int(metrics["nway"].get("n", 2)),
                similarity=cfg.similarity,
                seed=cfg.seed,
            )
        builders[label] = nway_row

    rows: dict[str, dict] = {}
    for label in ALL_ROWS:
        try:
            rows[label] = {"value": float(builders[label]())}
        except KeyError as exc:
            rows[label] = {"skipped": f"not configured (missing {exc.args[0]!r})"}
        except (OSError, ValueError) as exc:
            rows[label] = {"skipped": str(exc)}
    metadata = {
        "meteor_variant": "exact-match unigram, recall weighted 9:1, penalty 0.5*(chunks/matches)^3",
        "tokenization": "lowercase, whitespace split, ASCII punctuation stripped",
        "similarity": cfg.similarity,
        "similarity_aggregation": "mean of per-item cosine similarities",
        "grayscale": "BT.601 luminance (0.299, 0.587, 0.114)",
        "folds": cfg.folds,
        "seed": cfg.seed,
        "alpha_per_branch": _alpha_per_branch(cfg),
    }
    return MetricReport(rows=rows, metadata=metadata)


# ---------------------------------------------------------------------------
# conditioning export


def export_conditioning(cfg: PipelineConfig, out_dir, names=None) -> Path:
    """Bundle predicted features and the verbatim diffusion passthrough.

    The descriptor lets an external generation stack locate each branch's
    predicted-feature file and reproduce the recorded sampler settings.
    """
    names = list(names) if names else [b.name for b in cfg.branches]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    features = []
    for name in names:
        cfg.branch(name)
        pred = _branch_paths(cfg, name)["pred"]
        if not pred.exists():
            raise ConfigError(f"branch {name} is incomplete: no prediction file {pred}")
        dest = out / f"{name}_features.f32m"
        shutil.copyfile(pred, dest)
        matrix = datastore.read_matrix(dest)
        features.append(
            {"branch": name, "file": dest.name, "rows": matrix.shape[0], "cols": matrix.shape[1]}
        )
    descriptor = {"features": features, "diffusion": dict(cfg.diffusion)}
    desc_path = out / "descriptor.json"
    desc_path.write_text(json.dumps(descriptor, indent=2) + "\n", encoding="utf-8")
    return desc_path


def validate_descriptor(bundle_dir) -> dict:
    """Re-read an exported bundle and check its schema and files."""
    bundle = Path(bundle_dir)
    descriptor = json.loads((bundle / "descriptor.json").read_text(encoding="utf-8"))
    if set(descriptor) != {"features", "diffusion"}:
        raise ValueError(f"descriptor has unexpected keys: {sorted(descriptor)}")
    for key in DEFAULT_DIFFUSION:
        if key not in descriptor["diffusion"]:
            raise ValueError(f"descriptor diffusion block missing {key!r}")
    for entry in descriptor["features"]:
        validate_branch_name(entry["branch"])
        matrix = datastore.read_matrix(bundle / entry["file"])
        if matrix.shape != (entry["rows"], entry["cols"]):
            raise ValueError(
                f"{entry['file']}: dims {matrix.shape} disagree with descriptor "
                f"({entry['rows']}, {entry['cols']})"
            )
    return descriptor
