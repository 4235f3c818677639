"""Matrix container I/O, trial manifests, and dataset preparation.

Matrices travel as little-endian float32 binary files ("F32M"); manifests
are JSON arrays describing one trial per voxel-matrix row. Preparation
steps (repeat averaging, ROI masking, train/test splitting) are pure
functions over numpy arrays and manifests.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"F32M"
VERSION = 1

# magic, version u16, reserved u16, rows u64, cols u64 -- all little-endian
_HEADER = struct.Struct("<4sHHQQ")
HEADER_SIZE = _HEADER.size

SPLITS = ("train", "test")


class MatrixFormatError(ValueError):
    """File is not a valid F32M container (bad magic or version)."""


class MatrixLengthError(ValueError):
    """Declared dimensions disagree with the payload length."""


class MatrixDataError(ValueError):
    """Matrix payload contains non-finite values."""


def write_matrix(m, path) -> None:
    """Write a 2-D float matrix to ``path`` in the F32M layout.

    Values are converted to float32 on write. Non-finite entries are
    rejected before anything touches the filesystem.
    """
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={a.ndim}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"matrix must be at least 1x1, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise MatrixDataError("matrix contains non-finite values; refusing to write")
    data = np.ascontiguousarray(a, dtype="<f4")
    header = _HEADER.pack(MAGIC, VERSION, 0, a.shape[0], a.shape[1])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())


def read_matrix(path) -> np.ndarray:
    """Read an F32M file back into a (rows, cols) float32 array."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < HEADER_SIZE:
        raise MatrixFormatError(f"{path}: file shorter than the {HEADER_SIZE}-byte header")
    magic, version, _reserved, rows, cols = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise MatrixFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise MatrixFormatError(f"{path}: unsupported version {version}")
    if rows < 1 or cols < 1:
        raise MatrixFormatError(f"{path}: degenerate dimensions {rows}x{cols}")
    expected = rows * cols * 4
    payload = raw[HEADER_SIZE:]
    if len(payload) != expected:
        raise MatrixLengthError(
            f"{path}: expected {expected} payload bytes for {rows}x{cols}, found {len(payload)}"
        )
    values = np.frombuffer(payload, dtype="<f4").reshape(rows, cols)
    if not np.all(np.isfinite(values)):
        raise MatrixDataError(f"{path}: payload contains non-finite values")
    return np.array(values, dtype=np.float32)


@dataclass(frozen=True)
class ManifestEntry:
    trial_id: str
    stimulus_id: str
    split: str


@dataclass(frozen=True)
class Manifest:
    """Per-trial metadata aligned row-for-row with a voxel matrix."""

    entries: tuple[ManifestEntry, ...]

    def __post_init__(self):
        seen_trials = set()
        stim_split: dict[str, str] = {}
        for e in self.entries:
            if e.split not in SPLITS:
                raise ValueError(f"trial {e.trial_id!r}: unknown split {e.split!r}")
            if e.trial_id in seen_trials:
                raise ValueError(f"duplicate trial_id {e.trial_id!r}")
            seen_trials.add(e.trial_id)
            prior = stim_split.setdefault(e.stimulus_id, e.split)
            if prior != e.split:
                raise ValueError(f"stimulus {e.stimulus_id!r} appears in both splits")

    def __len__(self):
        return len(self.entries)

    def stimulus_order(self) -> list[str]:
        """Distinct stimulus ids in order of first appearance."""
        seen = set()
        order = []
        for e in self.entries:
            if e.stimulus_id not in seen:
                seen.add(e.stimulus_id)
                order.append(e.stimulus_id)
        return order

    def splits(self) -> np.ndarray:
        return np.array([e.split for e in self.entries])


def write_manifest(manifest: Manifest, path) -> None:
    records = [
        {"trial_id": e.trial_id, "stimulus_id": e.stimulus_id, "split": e.split}
        for e in manifest.entries
    ]
    Path(path).write_text(json.dumps(records, indent=2) + "\n", encoding="utf-8")


def read_manifest(path) -> Manifest:
    records = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(records, list):
        raise ValueError(f"{path}: manifest must be a JSON array")
    entries = []
    for i, rec in enumerate(records):
        try:
            entries.append(
                ManifestEntry(str(rec["trial_id"]), str(rec["stimulus_id"]), str(rec["split"]))
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"{path}: entry {i} is malformed: {exc}") from exc
    return Manifest(tuple(entries))


@dataclass(frozen=True)
class RoiMask:
    """Boolean column selector over voxels."""

    flags: np.ndarray

    def __post_init__(self):
        flags = np.asarray(self.flags, dtype=bool)
        if flags.ndim != 1:
            raise ValueError("mask flags must be a 1-D vector")
        if not flags.any():
            raise ValueError("mask selects no voxels")
        object.__setattr__(self, "flags", flags)

    @property
    def n_selected(self) -> int:
        return int(self.flags.sum())


def write_roi_mask(mask: RoiMask, path) -> None:
    # stored as a 1-row MatrixFile of 0.0/1.0 so the container format is reused
    write_matrix(mask.flags.astype(np.float64)[None, :], path)


def read_roi_mask(path) -> RoiMask:
    row = read_matrix(path)
    if row.shape[0] != 1:
        raise ValueError(f"{path}: ROI mask file must have exactly one row")
    return RoiMask(row[0] != 0.0)


def average_repeats(trials: np.ndarray, manifest: Manifest) -> tuple[np.ndarray, Manifest]:
    """Average repeated presentations of each stimulus.

    Returns one row per distinct stimulus (order of first appearance) and a
    manifest with one entry per stimulus. Accumulation happens in float64 so
    the result does not depend on trial order at float32 scale.
    """
    trials = np.asarray(trials)
    if trials.ndim != 2:
        raise ValueError("trials must be a 2-D matrix")
    if trials.shape[0] != len(manifest):
        raise ValueError(
            f"manifest rows ({len(manifest)}) do not match trial rows ({trials.shape[0]})"
        )
    order = manifest.stimulus_order()
    groups: dict[str, list[int]] = {s: [] for s in order}
    split_of: dict[str, str] = {}
    for i, e in enumerate(manifest.entries):
        groups[e.stimulus_id].append(i)
        split_of[e.stimulus_id] = e.split
    out = np.empty((len(order), trials.shape[1]), dtype=np.float64)
    for r, stim in enumerate(order):
        out[r] = trials[groups[stim]].astype(np.float64).mean(axis=0)
    entries = tuple(ManifestEntry(stim, stim, split_of[stim]) for stim in order)
    return out, Manifest(entries)


def apply_roi_mask(volume: np.ndarray, mask: RoiMask) -> np.ndarray:
    """Keep only the flagged voxel columns, preserving their order."""
    volume = np.asarray(volume)
    if volume.ndim != 2:
        raise ValueError("volume must be a 2-D matrix")
    if volume.shape[1] != mask.flags.shape[0]:
        raise ValueError(
            f"mask length {mask.flags.shape[0]} does not match voxel count {volume.shape[1]}"
        )
    return volume[:, mask.flags]


def split_rows(m: np.ndarray, manifest: Manifest) -> tuple[np.ndarray, np.ndarray]:
    """Partition rows into (train, test) by the manifest split field."""
    m = np.asarray(m)
    if m.ndim != 2:
        raise ValueError("matrix must be 2-D")
    if m.shape[0] != len(manifest):
        raise ValueError(
            f"manifest rows ({len(manifest)}) do not match matrix rows ({m.shape[0]})"
        )
    labels = manifest.splits()
    return m[labels == "train"], m[labels == "test"]
