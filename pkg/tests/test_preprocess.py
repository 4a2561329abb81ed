import numpy as np
import pytest
from helpers import random_rotation

from protoseq.data import AnchorJoints, SkeletonSequence, synth_generate
from protoseq.errors import DegeneratePoseError
from protoseq.preprocess import (
    RigidFrame,
    apply_view_invariant,
    compute_frame,
    preprocess_sequence,
)

ANCHORS = AnchorJoints(root=0, spine=1, hip_left=2, hip_right=3)


def _pose_sequence(first_frame, extra_frames=2, rng_seed=0):
    rng = np.random.default_rng(rng_seed)
    frames = [np.asarray(first_frame, dtype=np.float64)]
    for _ in range(extra_frames):
        frames.append(frames[0] + 0.1 * rng.normal(size=frames[0].shape))
    joints = np.stack(frames)
    return SkeletonSequence("pose", 0, joints, joints.shape[0])


def test_axis_aligned_pose_gives_identity():
    first = np.zeros((4, 3))
    first[1] = (1.0, 0.0, 0.0)  # spine - root = (1,0,0)
    first[2] = (0.5, 0.5, 0.0)
    first[3] = (0.5, -0.5, 0.0)  # hips differ along y
    frame = compute_frame(_pose_sequence(first), ANCHORS)
    np.testing.assert_allclose(frame.rotation, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(frame.origin, np.zeros(3), atol=1e-12)


def test_hand_computed_frame():
    # spine vector (0,2,0), hip vector (3,0,0)
    first = np.zeros((4, 3))
    first[1] = (0.0, 2.0, 0.0)
    first[2] = (1.5, 0.0, 0.0)
    first[3] = (-1.5, 0.0, 0.0)
    frame = compute_frame(_pose_sequence(first), ANCHORS)
    expected = np.column_stack([(0, 1, 0), (1, 0, 0), (0, 0, -1)])
    np.testing.assert_allclose(frame.rotation, expected, atol=1e-12)
    np.testing.assert_allclose(frame.rotation.T @ frame.rotation, np.eye(3), atol=1e-12)
    assert np.linalg.det(frame.rotation) == pytest.approx(1.0, abs=1e-12)


def test_parallel_hip_vector_is_degenerate():
    first = np.zeros((4, 3))
    first[1] = (0.0, 1.0, 0.0)
    first[2] = (0.0, 2.0, 0.0)
    first[3] = (0.0, 1.0, 0.0)  # hip vector parallel to spine vector
    with pytest.raises(DegeneratePoseError) as err:
        compute_frame(_pose_sequence(first), ANCHORS)
    assert "pose" in str(err.value)


def test_zero_spine_vector_is_degenerate():
    first = np.zeros((4, 3))
    first[2] = (1.0, 0.0, 0.0)
    first[3] = (-1.0, 0.0, 0.0)
    with pytest.raises(DegeneratePoseError):
        compute_frame(_pose_sequence(first), ANCHORS)


def test_identity_frame_leaves_sequence_unchanged():
    seq = _pose_sequence(np.random.default_rng(1).normal(size=(4, 3)))
    frame = RigidFrame(rotation=np.eye(3), origin=np.zeros(3))
    out = apply_view_invariant(seq, frame)
    np.testing.assert_array_equal(out.joints, seq.joints)


def test_root_maps_to_origin_and_spine_to_first_axis():
    ds = synth_generate(3, 2, 6, 6, noise_sigma=0.05, seed=2)
    for seq in ds.sequences:
        out = preprocess_sequence(seq, ds.anchors)
        np.testing.assert_allclose(out.joints[0, 0], np.zeros(3), atol=1e-12)
        spine = out.joints[0, 1] - out.joints[0, 0]
        assert abs(spine[1]) < 1e-12 and abs(spine[2]) < 1e-12
        assert spine[0] > 0


def test_rigid_invariance():
    ds = synth_generate(10, 3, 8, 5, noise_sigma=0.05, seed=5)
    rng = np.random.default_rng(6)
    for seq in ds.sequences:
        reference = preprocess_sequence(seq, ds.anchors).joints
        rotation = random_rotation(rng)
        translation = rng.normal(size=3) * 5.0
        moved = SkeletonSequence(
            seq.id, seq.label, seq.joints @ rotation.T + translation, seq.true_length
        )
        transformed = preprocess_sequence(moved, ds.anchors).joints
        np.testing.assert_allclose(transformed, reference, atol=1e-9)


def test_transform_is_isometry():
    ds = synth_generate(4, 2, 6, 5, noise_sigma=0.05, seed=7)
    for seq in ds.sequences:
        out = preprocess_sequence(seq, ds.anchors)
        for t in range(seq.n_frames):
            before = np.linalg.norm(
                seq.joints[t][:, None, :] - seq.joints[t][None, :, :], axis=-1
            )
            after = np.linalg.norm(
                out.joints[t][:, None, :] - out.joints[t][None, :, :], axis=-1
            )
            np.testing.assert_allclose(after, before, atol=1e-9)


def test_frame_rotation_orthonormal_on_random_poses():
    rng = np.random.default_rng(8)
    for _ in range(50):
        first = rng.normal(size=(5, 3))
        seq = _pose_sequence(first, rng_seed=int(rng.integers(1000)))
        try:
            frame = compute_frame(seq, ANCHORS)
        except DegeneratePoseError:
            continue
        np.testing.assert_allclose(
            frame.rotation.T @ frame.rotation, np.eye(3), atol=1e-9
        )
        assert np.linalg.det(frame.rotation) == pytest.approx(1.0, abs=1e-9)


def test_pad_frames_are_transformed_too():
    joints = np.zeros((4, 5, 3))
    joints[0, 1] = (0, 1, 0)
    joints[0, 2] = (0.2, 0, 0)
    joints[0, 3] = (-0.2, 0, 0)
    joints[0, 0] = (1.0, 2.0, 3.0)  # nonzero origin
    seq = SkeletonSequence("padded", 0, joints, true_length=2)
    out = preprocess_sequence(seq, ANCHORS)
    # all-zero pad frames move to R^T(0 - origin), not zero
    assert not np.allclose(out.joints[3], 0.0)
