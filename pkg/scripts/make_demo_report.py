#!/usr/bin/env python3
"""Build a self-contained demo workspace and produce a full metric report.

Creates a synthetic dataset, caption/embedding/image files for every metric
row, a pipeline config, then runs fit -> predict -> evaluate -> export and
leaves all artifacts in the chosen directory for inspection.
"""

import argparse
import json
from pathlib import Path

import numpy as np

from neurodecode import cli
from neurodecode.datastore import write_matrix
from neurodecode.synth import SynthSpec, generate, write_dataset


def write_metric_inputs(workdir: Path, rng) -> dict:
    emb = rng.standard_normal((25, 16))
    noisy = emb + 0.3 * rng.standard_normal(emb.shape)
    paths = {}
    for name, matrix in [("truth_emb", emb), ("pred_emb", noisy)]:
        paths[name] = workdir / f"{name}.f32m"
        write_matrix(matrix, paths[name])

    captions_truth = [
        {"stimulus_id": f"s{i}", "text": f"a photo of a {w} on the grass"}
        for i, w in enumerate(["dog", "cat", "horse", "bird", "cow"])
    ]
    captions_pred = [
        {"stimulus_id": f"s{i}", "text": f"a picture of a {w} in the grass"}
        for i, w in enumerate(["dog", "cat", "animal", "bird", "sheep"])
    ]
    paths["caps_truth"] = workdir / "captions_truth.json"
    paths["caps_truth"].write_text(json.dumps(captions_truth, indent=2))
    paths["caps_pred"] = workdir / "captions_pred.json"
    paths["caps_pred"].write_text(json.dumps(captions_pred, indent=2))

    images = rng.uniform(0, 1, (8, 144))
    blurred = np.clip(images + 0.1 * rng.standard_normal(images.shape), 0, 1)
    paths["imgs_truth"] = workdir / "imgs_truth.f32m"
    write_matrix(images, paths["imgs_truth"])
    paths["imgs_pred"] = workdir / "imgs_pred.f32m"
    write_matrix(blurred, paths["imgs_pred"])

    nway = {
        key: {"pred": str(paths["pred_emb"]), "truth": str(paths["truth_emb"])}
        for key in ("alexnet2", "alexnet5", "inception", "clip")
    }
    return {
        "captions": {
            "brain": str(paths["caps_pred"]),
            "image": str(paths["caps_truth"]),
            "human": [str(paths["caps_truth"])],
        },
        "embeddings": {
            "sentence_brain": str(paths["pred_emb"]),
            "sentence_image": str(paths["truth_emb"]),
            "sentence_human": str(paths["truth_emb"]),
            "clip_brain": str(paths["pred_emb"]),
            "clip_image": str(paths["truth_emb"]),
            "clip_human": str(paths["truth_emb"]),
        },
        "images": {
            "truth": str(paths["imgs_truth"]),
            "pred": str(paths["imgs_pred"]),
            "height": 12,
            "width": 12,
            "max_value": 1.0,
        },
        "nway": nway,
        "fid": {"pred": str(paths["pred_emb"]), "truth": str(paths["truth_emb"])},
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", default="demo_workspace")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    workdir = Path(args.workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)

    spec = SynthSpec(
        n_train=200, n_test=50, voxels=60, latent_dims=8,
        noise_sigma=0.4, repeats=2, seed=args.seed,
    )
    data_paths = write_dataset(generate(spec), workdir / "data")

    config = {
        "voxels": str(data_paths["voxels"]),
        "manifest": str(data_paths["manifest"]),
        "out_dir": str(workdir / "artifacts"),
        "seed": args.seed,
        "branches": {
            "caption_features": {"target": str(data_paths["latents"])},
            "depth_latent": {"target": str(data_paths["latents"])},
        },
        "metrics": write_metric_inputs(workdir, rng),
    }
    cfg_path = workdir / "config.json"
    cfg_path.write_text(json.dumps(config, indent=2))

    for argv in (
        ["fit", "--config", str(cfg_path)],
        ["predict", "--config", str(cfg_path)],
        ["evaluate", "--config", str(cfg_path), "--out", str(workdir / "report.json")],
        ["export", "--config", str(cfg_path), "--out", str(workdir / "bundle")],
    ):
        print(f"$ neurodecode {' '.join(argv)}")
        code = cli.main(argv)
        if code != 0:
            raise SystemExit(code)
    print(f"\nartifacts under {workdir}/ (report.json, bundle/descriptor.json)")


if __name__ == "__main__":
    main()
