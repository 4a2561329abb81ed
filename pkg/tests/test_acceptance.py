"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines; the end-to-end experiment trains two models and takes ~20 s.
"""
import json
import math
import time

import numpy as np
import pytest
from helpers import numerical_grad, random_rotation
from sklearn.metrics import adjusted_rand_score

from protoseq import autodiff as ad
from protoseq.checkpoint import load_checkpoint
from protoseq.clustering import kmeans, tightness
from protoseq.data import Dataset, SkeletonSequence, synth_generate
from protoseq.evaluate import (
    extract_encodings,
    probe_eval,
    probe_train,
    stratified_split,
)
from protoseq.gru import decode, encode, init_gru, named_arrays, tensorize
from protoseq.losses import ContrastConfig, proto_contrast, protomae, reverse_mae
from protoseq.preprocess import preprocess_dataset, preprocess_sequence
from protoseq.trainer import TrainConfig, e_step, init_models, train


def _verdict(n, ok, detail):
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {n} failed: {detail}"


# --------------------------------------------------------------------------
# criterion 1: end-to-end gradient vs central finite differences
# --------------------------------------------------------------------------


def test_criterion_1_gradient_correctness():
    started = time.perf_counter()
    t_steps, joints, hidden = 5, 3, 8
    input_dim = joints * 3
    rng = np.random.default_rng(101)
    encoder = init_gru(input_dim, hidden, rng=rng, dtype=np.float64)
    decoder = init_gru(
        hidden, hidden, rng=rng, frozen=True, readout_dim=input_dim,
        dtype=np.float64,
    )

    # one real clustering (M=1, k=4) over encodings of a small random set
    pool = rng.normal(size=(12, t_steps, input_dim))
    cfg = TrainConfig(
        hidden_dim=hidden, t_fixed=t_steps, ks=(4,), r=2, seed=101,
        dtype="float64",
    )
    models = e_step(pool, encoder, cfg)
    batch = pool[:2]
    targets = batch[:, ::-1]
    contrast_cfg = ContrastConfig(r=2, lambda_contrast=1.0)

    def loss_value(arrays):
        for (name, _), arr in zip(param_names, arrays):
            field = name.split(".")[-1]
            encoder.layers[0].__setattr__(field, arr)
        enc_t = tensorize(encoder, requires_grad=True)
        _, v_final = encode(batch, enc_t)
        predictions = decode(v_final, t_steps, decoder)
        return protomae(
            targets, predictions, v_final, models, contrast_cfg, 7, [0, 1]
        ).item()

    param_names = named_arrays(encoder, "encoder")
    arrays = [arr.copy() for _, arr in param_names]

    enc_t = tensorize(encoder, requires_grad=True)
    _, v_final = encode(batch, enc_t)
    predictions = decode(v_final, t_steps, decoder)
    loss = protomae(targets, predictions, v_final, models, contrast_cfg, 7, [0, 1])
    leaves = enc_t.leaves("encoder")
    analytic = ad.backward(loss, [t for _, t in leaves])

    numeric = numerical_grad(loss_value, arrays, step=1e-5)
    # relative error per parameter array, scaled by its dominant gradient
    worst = max(
        float(np.max(np.abs(g_ad - g_fd)) / (np.max(np.abs(g_fd)) + 1e-12))
        for g_ad, g_fd in zip(analytic, numeric)
    )
    elapsed = time.perf_counter() - started
    _verdict(
        1,
        worst < 1e-3 and elapsed < 10.0,
        f"max relative gradient error {worst:.2e} over "
        f"{len(param_names)} parameter arrays in {elapsed:.1f}s",
    )


# --------------------------------------------------------------------------
# criterion 2: view-invariance under random rigid motion
# --------------------------------------------------------------------------


def test_criterion_2_view_invariance():
    started = time.perf_counter()
    dataset = synth_generate(
        n_per_class=334, classes=3, n_frames=10, joint_count=5,
        noise_sigma=0.05, seed=202,
    )
    rng = np.random.default_rng(203)
    worst = 0.0
    for seq in dataset.sequences[:1000]:
        reference = preprocess_sequence(seq, dataset.anchors).joints
        rotation = random_rotation(rng)
        translation = 10.0 * rng.normal(size=3)
        moved = SkeletonSequence(
            seq.id,
            seq.label,
            seq.joints @ rotation.T + translation,
            seq.true_length,
        )
        transformed = preprocess_sequence(moved, dataset.anchors).joints
        worst = max(worst, float(np.max(np.abs(transformed - reference))))
    elapsed = time.perf_counter() - started
    _verdict(
        2,
        worst < 1e-9 and elapsed < 10.0,
        f"max deviation {worst:.2e} over 1000 sequences in {elapsed:.1f}s",
    )


# --------------------------------------------------------------------------
# criterion 3: exact hand-computed values
# --------------------------------------------------------------------------


def test_criterion_3_exact_values():
    phi = tightness(
        np.array([[1.0, 1.0], [1.0, -1.0]]), np.array([1.0, 0.0]), alpha=10.0
    )
    phi_err = abs(phi - 1.0 / math.log(12.0))

    from protoseq.clustering import ClusterModel

    model = ClusterModel(
        k=2,
        prototypes=np.eye(2),
        tightness=np.array([0.5, 0.5]),
        assignment=np.array([0, 1]),
        member_counts=np.array([1, 1]),
    )
    contrast = proto_contrast(
        ad.constant(np.array([1.0, 0.0])), [model], 0, ContrastConfig(r=2), seed=0
    ).item()
    contrast_err = abs(contrast - (-math.log(math.exp(2.0) / (math.exp(2.0) + 1.0))))

    target = np.array([[[1.0, 2.0, 3.0]], [[4.0, 5.0, 6.0]]])
    mae = reverse_mae(target, ad.constant(np.zeros_like(target))).item()
    mae_err = abs(mae - 3.5)

    ok = phi_err < 1e-9 and contrast_err < 1e-9 and mae_err < 1e-9
    _verdict(
        3,
        ok,
        f"tightness err {phi_err:.1e}, contrast err {contrast_err:.1e}, "
        f"MAE err {mae_err:.1e}",
    )


# --------------------------------------------------------------------------
# criterion 4: k-means soundness
# --------------------------------------------------------------------------


def test_criterion_4_kmeans_soundness():
    rng = np.random.default_rng(404)
    monotone = True
    for _ in range(100):
        n = int(rng.integers(10, 100))
        c = int(rng.integers(2, 16))
        k = int(rng.integers(1, min(n, 12) + 1))
        v = rng.normal(size=(n, c))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        model = kmeans(v, k, seed=int(rng.integers(2**31)))
        if np.any(np.diff(model.objective_history) > 1e-9):
            monotone = False
            break

    # two well-separated blobs with 0.05 rad angular noise
    c = 16
    centers = np.zeros((2, c))
    centers[0, 0] = 1.0
    centers[1, 1] = 1.0
    points, labels = [], []
    for b in (0, 1):
        for _ in range(60):
            tangent = rng.normal(size=c)
            tangent -= (tangent @ centers[b]) * centers[b]
            tangent /= np.linalg.norm(tangent)
            p = centers[b] + math.tan(0.05 * rng.normal()) * tangent
            points.append(p / np.linalg.norm(p))
            labels.append(b)
    points, labels = np.array(points), np.array(labels)
    model = kmeans(points, 2, seed=11)
    ari = adjusted_rand_score(labels, model.assignment)
    means = np.array([points[labels == b].mean(axis=0) for b in (0, 1)])
    means /= np.linalg.norm(means, axis=1, keepdims=True)
    max_angle = max(
        float(np.min(np.arccos(np.clip(means @ proto, -1.0, 1.0))))
        for proto in model.prototypes
    )
    ok = monotone and ari == 1.0 and max_angle < 1e-2
    _verdict(
        4,
        ok,
        f"objective monotone on 100 instances: {monotone}, blob ARI {ari:.3f}, "
        f"prototype angular error {max_angle:.2e} rad",
    )


# --------------------------------------------------------------------------
# criterion 5: end-to-end synthetic experiment (with 6 and 7 piggybacked)
# --------------------------------------------------------------------------

EXPERIMENT_SEED = 42


def _experiment_config(**overrides):
    base = dict(
        hidden_dim=64,
        t_fixed=20,
        ks=(6, 9, 12),
        r=4,
        lambda_contrast=1.0,
        pretrain_lr=0.001,
        pretrain_epochs=30,
        batch_size=32,
        probe_lr=0.01,
        probe_epochs=50,
        seed=EXPERIMENT_SEED,
    )
    base.update(overrides)
    return TrainConfig(**base)


@pytest.fixture(scope="module")
def experiment(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("experiment")
    started = time.perf_counter()

    dataset = preprocess_dataset(
        synth_generate(
            n_per_class=100, classes=3, n_frames=20, joint_count=5,
            noise_sigma=0.02, seed=EXPERIMENT_SEED,
        )
    )
    labels = np.array([s.label for s in dataset.sequences])
    train_idx, test_idx = stratified_split(labels, 0.7, seed=EXPERIMENT_SEED)
    train_split = Dataset(
        [dataset.sequences[i] for i in train_idx],
        dataset.joint_count,
        dataset.anchors,
    )

    results = {}
    for tag, use_pc, use_rp in (("full", True, True), ("baseline", False, False)):
        cfg = _experiment_config(use_pc=use_pc, use_rp=use_rp)
        ckpt = tmp / f"{tag}.ckpt"
        log = tmp / f"{tag}.log.jsonl"
        train(train_split, cfg, ckpt, log_path=log)
        features, all_labels = extract_encodings(dataset, ckpt)
        probe = probe_train(
            features[train_idx],
            all_labels[train_idx],
            lr=cfg.probe_lr,
            epochs=cfg.probe_epochs,
            seed=cfg.seed,
        )
        report = probe_eval(probe, features[test_idx], all_labels[test_idx])
        losses = [
            json.loads(line)["mean_loss"]
            for line in log.read_text().splitlines()
        ]
        results[tag] = {
            "config": cfg,
            "ckpt": ckpt,
            "accuracy": report.accuracy,
            "losses": losses,
        }
    results["seconds"] = time.perf_counter() - started
    results["train_split"] = train_split
    results["tmp"] = tmp
    return results


def test_criterion_5a_full_model_accuracy(experiment):
    accuracy = experiment["full"]["accuracy"]
    _verdict(
        "5a", accuracy >= 0.85, f"full-model probe accuracy {accuracy:.3f} >= 0.85"
    )


def test_criterion_5b_full_beats_baseline(experiment):
    full = experiment["full"]["accuracy"]
    base = experiment["baseline"]["accuracy"]
    _verdict(
        "5b", full >= base, f"full {full:.3f} vs baseline {base:.3f}"
    )


def test_criterion_5c_training_loss_halves(experiment):
    losses = experiment["full"]["losses"]
    ratio = losses[-1] / losses[0]
    _verdict(
        "5c",
        len(losses) == 30 and ratio < 0.5,
        f"epoch-30 / epoch-1 loss ratio {ratio:.3f} < 0.5",
    )


def test_criterion_5_runtime(experiment):
    seconds = experiment["seconds"]
    _verdict("5-runtime", seconds < 300.0, f"experiment took {seconds:.1f}s < 300s")


def test_criterion_6_determinism(experiment):
    cfg = _experiment_config(use_pc=True, use_rp=True)
    tmp = experiment["tmp"]
    rerun = tmp / "full_rerun.ckpt"
    rerun_log = tmp / "full_rerun.log.jsonl"
    train(experiment["train_split"], cfg, rerun, log_path=rerun_log)
    bitwise = rerun.read_bytes() == experiment["full"]["ckpt"].read_bytes()

    threaded = tmp / "full_threads.ckpt"
    threaded_log = tmp / "full_threads.log.jsonl"
    train(
        experiment["train_split"], cfg, threaded, log_path=threaded_log, threads=4
    )
    single_loss = experiment["full"]["losses"][-1]
    threaded_loss = json.loads(threaded_log.read_text().splitlines()[-1])["mean_loss"]
    relative = abs(threaded_loss - single_loss) / abs(single_loss)
    _verdict(
        6,
        bitwise and relative <= 1e-5,
        f"bitwise-identical rerun: {bitwise}, threaded final-loss relative "
        f"difference {relative:.2e} <= 1e-5",
    )


def test_criterion_7_frozen_decoder(experiment):
    worst = None
    for tag in ("full", "baseline"):
        cfg = experiment[tag]["config"]
        _, trained_decoder, _ = load_checkpoint(experiment[tag]["ckpt"])
        _, fresh_decoder = init_models(cfg, input_dim=15)
        for (name, got), (_, want) in zip(
            named_arrays(trained_decoder, "decoder"),
            named_arrays(fresh_decoder, "decoder"),
        ):
            if not np.array_equal(got, want.astype(np.float32)):
                worst = f"{tag}:{name}"
    _verdict(
        7,
        worst is None,
        "decoder and readout bitwise identical before and after training"
        if worst is None
        else f"mismatch at {worst}",
    )
