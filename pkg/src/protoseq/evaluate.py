"""Linear evaluation protocol: extract frozen-encoder features, train a
softmax linear probe with Adam, and report accuracy plus a confusion matrix.
The encoder is never touched; only the probe's weight and bias learn.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, backward
from .checkpoint import load_checkpoint
from .data import Dataset
from .gru import encode_batch
from .seeds import PROBE_INIT, SPLIT, spawn_rng
from .trainer import AdamState, adam_update, flatten_dataset


@dataclass
class ProbeModel:
    weight: np.ndarray  # (classes, C)
    bias: np.ndarray  # (classes,)

    @property
    def classes(self) -> int:
        return self.weight.shape[0]


@dataclass
class EvalReport:
    accuracy: float
    confusion: np.ndarray  # (classes, classes), rows = true class
    per_class_accuracy: np.ndarray  # (classes,)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "confusion": self.confusion.tolist(),
            "per_class_accuracy": self.per_class_accuracy.tolist(),
        }

    def save_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), sort_keys=True), encoding="utf-8")
        return path

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(
            accuracy=float(d["accuracy"]),
            confusion=np.asarray(d["confusion"], dtype=np.int64),
            per_class_accuracy=np.asarray(d["per_class_accuracy"], dtype=np.float64),
        )

    @classmethod
    def load_json(cls, path) -> "EvalReport":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def save_confusion_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(range(self.confusion.shape[1]))
            for row in self.confusion:
                writer.writerow(int(c) for c in row)
        return path


def extract_encodings(
    dataset: Dataset, checkpoint_path, *, threads: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Final-step encoder outputs plus labels, order preserved. Every
    sequence must be labeled."""
    unlabeled = [s.id for s in dataset.sequences if s.label is None]
    if unlabeled:
        raise ValueError(f"unlabeled sequences: {unlabeled}")
    encoder, _, cfg = load_checkpoint(checkpoint_path)
    x = flatten_dataset(dataset, cfg.t_fixed, cfg.np_dtype())
    features = encode_batch(x, encoder, threads=threads).astype(np.float64)
    labels = np.array([s.label for s in dataset.sequences], dtype=np.int64)
    return features, labels


def stratified_split(
    labels: np.ndarray, train_fraction: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Per-class shuffled split; deterministic for a fixed seed."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    rng = spawn_rng(seed, SPLIT)
    labels = np.asarray(labels)
    train_idx, test_idx = [], []
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        members = members[rng.permutation(len(members))]
        cut = int(round(train_fraction * len(members)))
        train_idx.append(members[:cut])
        test_idx.append(members[cut:])
    return np.sort(np.concatenate(train_idx)), np.sort(np.concatenate(test_idx))


def probe_train(
    features: np.ndarray,
    labels: np.ndarray,
    lr: float = 0.01,
    epochs: int = 50,
    seed: int = 0,
) -> ProbeModel:
    """Multinomial logistic regression on frozen features, full-batch Adam."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(np.unique(labels)) < 2:
        raise ValueError("probe training needs at least two classes")
    classes = int(labels.max()) + 1
    dim = features.shape[1]
    rng = spawn_rng(seed, PROBE_INIT)
    # trained in (dim, classes) layout so logits = X @ W + b; reported
    # transposed to match the (classes, C) model contract
    weight = rng.uniform(-0.01, 0.01, size=(dim, classes))
    bias = rng.uniform(-0.01, 0.01, size=classes)
    x_const = ad.constant(features)
    state = AdamState.for_params([("weight", weight), ("bias", bias)])
    for _ in range(epochs):
        w_t = Tensor(weight, requires_grad=True)
        b_t = Tensor(bias, requires_grad=True)
        logits = ad.add(ad.matmul(x_const, w_t), b_t)
        loss = ad.softmax_cross_entropy(logits, labels)
        grads = backward(loss, [w_t, b_t])
        updated = adam_update(
            [("weight", weight), ("bias", bias)], grads, state, lr
        )
        weight, bias = updated["weight"], updated["bias"]
    return ProbeModel(weight=weight.T.copy(), bias=bias)


def probe_predict(model: ProbeModel, features: np.ndarray) -> np.ndarray:
    logits = features @ model.weight.T + model.bias
    return logits.argmax(axis=1)


def probe_eval(
    model: ProbeModel, features: np.ndarray, labels: np.ndarray
) -> EvalReport:
    """Argmax predictions (ties break to the lowest class index) tallied into
    a confusion matrix with rows = true class."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise ValueError("cannot evaluate on an empty set")
    if labels.min() < 0 or labels.max() >= model.classes:
        raise ValueError(
            f"labels must lie in 0..{model.classes - 1}, got range "
            f"{labels.min()}..{labels.max()}"
        )
    predictions = probe_predict(model, np.asarray(features, dtype=np.float64))
    k = model.classes
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (labels, predictions), 1)
    total = labels.shape[0]
    accuracy = float(np.trace(confusion)) / total
    row_sums = confusion.sum(axis=1)
    per_class = np.divide(
        np.diag(confusion),
        row_sums,
        out=np.zeros(k, dtype=np.float64),
        where=row_sums > 0,
    )
    return EvalReport(
        accuracy=accuracy, confusion=confusion, per_class_accuracy=per_class
    )
