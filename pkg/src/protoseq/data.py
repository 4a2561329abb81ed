"""Skeleton-sequence data model, dataset I/O and synthetic motion generation.

On-disk dataset format: UTF-8 JSONL, one record per line,

    {"id": str, "label": int | null, "joints": [[[x, y, z] * J] * T],
     "true_length": int}

where ``true_length`` is optional on input and defaults to the frame count.
A sidecar manifest JSON carries ``{"joint_count": J, "anchor_joints":
{"root": i, "spine": i, "hip_left": i, "hip_right": i}}``. Coordinates are
written at 32-bit precision (values round-trip exactly); in memory they are
kept as 64-bit floats.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError, SchemaError
from .seeds import SYNTH_DATA, spawn_rng


@dataclass(frozen=True)
class AnchorJoints:
    """Joint indices used to build the view-invariant coordinate frame."""

    root: int
    spine: int
    hip_left: int
    hip_right: int

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.root, self.spine, self.hip_left, self.hip_right)

    def as_dict(self) -> dict[str, int]:
        return {
            "root": self.root,
            "spine": self.spine,
            "hip_left": self.hip_left,
            "hip_right": self.hip_right,
        }


@dataclass(frozen=True)
class SkeletonSequence:
    """One action sample: (T, J, 3) joint coordinates over T frames.

    ``true_length`` counts the leading frames holding real data; frames past
    it are zero padding appended by ``fix_length``.
    """

    id: str
    label: int | None
    joints: np.ndarray
    true_length: int

    def __post_init__(self):
        joints = np.asarray(self.joints, dtype=np.float64)
        if joints.ndim != 3 or joints.shape[2] != 3:
            raise SchemaError(
                f"sequence {self.id!r}: joints must have shape (T, J, 3), "
                f"got {joints.shape}"
            )
        if not np.all(np.isfinite(joints)):
            raise SchemaError(f"sequence {self.id!r}: non-finite joint coordinate")
        if not 1 <= self.true_length <= joints.shape[0]:
            raise SchemaError(
                f"sequence {self.id!r}: true_length {self.true_length} outside "
                f"1..{joints.shape[0]}"
            )
        object.__setattr__(self, "joints", joints)

    @property
    def n_frames(self) -> int:
        return self.joints.shape[0]

    @property
    def n_joints(self) -> int:
        return self.joints.shape[1]


@dataclass(frozen=True)
class Dataset:
    sequences: list[SkeletonSequence]
    joint_count: int
    anchors: AnchorJoints

    def __post_init__(self):
        idx = self.anchors.as_tuple()
        if len(set(idx)) != 4 or any(i < 0 or i >= self.joint_count for i in idx):
            raise SchemaError(
                f"anchor joints {idx} must be distinct indices below "
                f"{self.joint_count}"
            )
        for seq in self.sequences:
            if seq.n_joints != self.joint_count:
                raise SchemaError(
                    f"sequence {seq.id!r} has {seq.n_joints} joints, "
                    f"expected {self.joint_count}"
                )

    def __len__(self) -> int:
        return len(self.sequences)

    def labels(self) -> list[int | None]:
        return [s.label for s in self.sequences]


def default_manifest_path(data_path: str | Path) -> Path:
    data_path = Path(data_path)
    if data_path.suffix == ".jsonl":
        return data_path.with_suffix(".manifest.json")
    return Path(str(data_path) + ".manifest.json")


def save_manifest(path: str | Path, joint_count: int, anchors: AnchorJoints) -> None:
    payload = {"joint_count": joint_count, "anchor_joints": anchors.as_dict()}
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8")


def load_manifest(path: str | Path) -> tuple[int, AnchorJoints]:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        joint_count = int(payload["joint_count"])
        anchors = AnchorJoints(**{k: int(v) for k, v in payload["anchor_joints"].items()})
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise SchemaError(f"manifest {path}: {exc}") from exc
    return joint_count, anchors


def load_jsonl(path: str | Path, manifest_path: str | Path | None = None) -> Dataset:
    """Load a dataset, validating every record against the manifest.

    Order is preserved. A malformed line raises ParseError naming the line
    number; a sequence whose joint count disagrees with the manifest raises
    SchemaError.
    """
    path = Path(path)
    joint_count, anchors = load_manifest(manifest_path or default_manifest_path(path))
    sequences: list[SkeletonSequence] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict) or "id" not in obj or "joints" not in obj:
                raise ParseError(f"{path}:{lineno}: record must carry 'id' and 'joints'")
            joints = np.asarray(obj["joints"], dtype=np.float64)
            if joints.ndim != 3 or joints.shape[2] != 3:
                raise ParseError(
                    f"{path}:{lineno}: joints must be a T x J x 3 array, "
                    f"got shape {joints.shape}"
                )
            if not np.all(np.isfinite(joints)):
                raise ParseError(f"{path}:{lineno}: non-finite joint coordinate")
            if joints.shape[1] != joint_count:
                raise SchemaError(
                    f"{path}:{lineno}: {joints.shape[1]} joints per frame, "
                    f"manifest says {joint_count}"
                )
            label = obj.get("label")
            true_length = int(obj.get("true_length", joints.shape[0]))
            try:
                seq = SkeletonSequence(
                    id=str(obj["id"]),
                    label=None if label is None else int(label),
                    joints=joints,
                    true_length=true_length,
                )
            except SchemaError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
            sequences.append(seq)
    return Dataset(sequences=sequences, joint_count=joint_count, anchors=anchors)


def save_jsonl(
    dataset: Dataset, path: str | Path, manifest_path: str | Path | None = None
) -> None:
    """Write a dataset plus its sidecar manifest.

    Coordinates are rounded to 32-bit floats before encoding, so a
    save -> load round trip is exact for values representable at that width.
    """
    path = Path(path)
    save_manifest(
        manifest_path or default_manifest_path(path),
        dataset.joint_count,
        dataset.anchors,
    )
    with path.open("w", encoding="utf-8") as fh:
        for seq in dataset.sequences:
            record = {
                "id": seq.id,
                "label": seq.label,
                "joints": seq.joints.astype(np.float32).astype(np.float64).tolist(),
                "true_length": seq.true_length,
            }
            fh.write(json.dumps(record, separators=(",", ":")) + "\n")


def fix_length(seq: SkeletonSequence, n_frames: int) -> SkeletonSequence:
    """Truncate or zero-pad a sequence to exactly `n_frames` frames.

    Idempotent; truncation never inflates true_length past the frames that
    actually carried data.
    """
    if n_frames < 1:
        raise ValueError(f"n_frames must be >= 1, got {n_frames}")
    t = seq.n_frames
    if t == n_frames:
        return seq
    if t > n_frames:
        joints = seq.joints[:n_frames].copy()
        true_length = min(seq.true_length, n_frames)
    else:
        joints = np.zeros((n_frames, seq.n_joints, 3), dtype=seq.joints.dtype)
        joints[:t] = seq.joints
        true_length = seq.true_length
    return SkeletonSequence(seq.id, seq.label, joints, true_length)


def reverse(seq: SkeletonSequence) -> SkeletonSequence:
    """Flip the frame order of the full (padded) array; frame t becomes
    frame T-t+1. true_length is preserved."""
    return SkeletonSequence(
        seq.id, seq.label, seq.joints[::-1].copy(), seq.true_length
    )


# Synthetic motion: each class traces per-joint sinusoids with a
# class-specific frequency, phase and amplitude pattern; individual
# sequences jitter the class phase. Anchor joints barely move so the
# frame-1 coordinate axes stay well conditioned; the remaining joints carry
# the discriminative motion.
_ANCHOR_AMPLITUDE = 0.02
_LIMB_AMPLITUDE = 0.3
_PHASE_JITTER = 1.0  # radians; keeps class manifolds compact


def _base_pose(joint_count: int) -> np.ndarray:
    base = np.zeros((joint_count, 3))
    base[0] = (0.0, 0.0, 0.0)  # root
    base[1] = (0.0, 1.0, 0.0)  # spine
    base[2] = (0.15, -0.2, 0.0)  # hip left
    base[3] = (-0.15, -0.2, 0.0)  # hip right
    for j in range(4, joint_count):
        k = j - 4
        base[j] = (0.35 * (-1.0) ** k, 0.55 + 0.2 * (k // 2), 0.1 * (k % 3))
    return base


def class_trajectory(
    label: int, phase: float, n_frames: int, joint_count: int, seed: int
) -> np.ndarray:
    """Noise-free (T, J, 3) trajectory for one class; `phase` shifts the
    class's own base phase (the per-sequence degree of freedom)."""
    rng = spawn_rng(seed, SYNTH_DATA, label)
    freq = 1.0 + 0.75 * label
    class_phase = rng.uniform(0.0, 2.0 * math.pi)
    offsets = rng.uniform(0.0, 2.0 * math.pi, size=(joint_count, 3))
    amp = rng.uniform(0.5, 1.0, size=(joint_count, 3))
    amp[:4] *= _ANCHOR_AMPLITUDE
    amp[4:] *= _LIMB_AMPLITUDE
    t = np.arange(n_frames, dtype=np.float64) / n_frames
    angle = (
        2.0 * math.pi * freq * t[:, None, None] + class_phase + phase + offsets[None]
    )
    return _base_pose(joint_count)[None] + amp[None] * np.sin(angle)


def synth_generate(
    n_per_class: int,
    classes: int,
    n_frames: int,
    joint_count: int,
    noise_sigma: float,
    seed: int,
) -> Dataset:
    """Labeled synthetic dataset; bitwise reproducible for a fixed seed."""
    if n_per_class < 1 or classes < 1 or n_frames < 1:
        raise ValueError("n_per_class, classes and n_frames must all be >= 1")
    if joint_count < 4:
        raise ValueError("joint_count must be >= 4 so anchor joints are distinct")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be non-negative")
    rng = spawn_rng(seed, SYNTH_DATA)
    sequences = []
    for label in range(classes):
        for i in range(n_per_class):
            phase = rng.uniform(-_PHASE_JITTER, _PHASE_JITTER)
            joints = class_trajectory(label, phase, n_frames, joint_count, seed)
            if noise_sigma > 0:
                joints = joints + rng.normal(0.0, noise_sigma, size=joints.shape)
            sequences.append(
                SkeletonSequence(
                    id=f"c{label}_s{i:04d}",
                    label=label,
                    joints=joints,
                    true_length=n_frames,
                )
            )
    return Dataset(
        sequences=sequences,
        joint_count=joint_count,
        anchors=AnchorJoints(root=0, spine=1, hip_left=2, hip_right=3),
    )
