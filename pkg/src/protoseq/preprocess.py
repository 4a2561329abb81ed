"""View-invariant coordinate transform.

Each sequence is re-expressed in a rigid frame anchored at its first frame:
the origin sits at the root joint, the first axis follows the root-to-spine
vector, the second axis follows the hip-to-hip vector orthogonalized against
the first, and the third completes a right-handed basis via the cross
product. Applying the transform to a rigidly rotated + translated copy of a
sequence yields the same output, which removes camera pose.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import AnchorJoints, Dataset, SkeletonSequence
from .errors import DegeneratePoseError, SchemaError

DEGENERACY_TOL = 1e-8
_FRAME_TOL = 1e-9


@dataclass(frozen=True)
class RigidFrame:
    """Proper rotation (columns are the new axes) plus an origin."""

    rotation: np.ndarray  # (3, 3), orthonormal, det +1
    origin: np.ndarray  # (3,)

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        o = np.asarray(self.origin, dtype=np.float64)
        if r.shape != (3, 3) or o.shape != (3,):
            raise SchemaError(
                f"rigid frame needs a 3x3 rotation and 3-vector origin, "
                f"got {r.shape} and {o.shape}"
            )
        if not np.allclose(r.T @ r, np.eye(3), atol=_FRAME_TOL, rtol=0.0):
            raise SchemaError("rotation columns are not orthonormal")
        if np.linalg.det(r) < 0:
            raise SchemaError("rotation must be proper (determinant +1)")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "origin", o)


def compute_frame(seq: SkeletonSequence, anchors: AnchorJoints) -> RigidFrame:
    """Rigid frame from the anchor joints of the first frame.

    Raises DegeneratePoseError (naming the sequence) when the spine vector
    vanishes or the hip vector is parallel to it.
    """
    first = seq.joints[0].astype(np.float64)
    u1 = first[anchors.spine] - first[anchors.root]
    u2 = first[anchors.hip_left] - first[anchors.hip_right]
    n1 = np.linalg.norm(u1)
    n2 = np.linalg.norm(u2)
    if n1 <= 1e-12 or n2 <= 1e-12:
        raise DegeneratePoseError(
            f"sequence {seq.id!r}: zero-length anchor vector at frame 1"
        )
    u2_hat = u2 - (u2 @ u1) / (u1 @ u1) * u1
    n2_hat = np.linalg.norm(u2_hat)
    if n2_hat <= DEGENERACY_TOL * n2:
        raise DegeneratePoseError(
            f"sequence {seq.id!r}: hip vector parallel to spine vector at frame 1"
        )
    c1 = u1 / n1
    c2 = u2_hat / n2_hat
    c3 = np.cross(u1, u2_hat)
    c3 /= np.linalg.norm(c3)
    return RigidFrame(
        rotation=np.column_stack([c1, c2, c3]), origin=first[anchors.root].copy()
    )


def apply_view_invariant(seq: SkeletonSequence, frame: RigidFrame) -> SkeletonSequence:
    """Map every joint of every frame (padding included) by x -> R^T (x - o).

    The rotation inverse is its transpose, exact by orthonormality.
    """
    joints = (seq.joints.astype(np.float64) - frame.origin) @ frame.rotation
    return SkeletonSequence(seq.id, seq.label, joints, seq.true_length)


def preprocess_sequence(seq: SkeletonSequence, anchors: AnchorJoints) -> SkeletonSequence:
    return apply_view_invariant(seq, compute_frame(seq, anchors))


def preprocess_dataset(dataset: Dataset) -> Dataset:
    transformed = [preprocess_sequence(s, dataset.anchors) for s in dataset.sequences]
    return Dataset(
        sequences=transformed,
        joint_count=dataset.joint_count,
        anchors=dataset.anchors,
    )
