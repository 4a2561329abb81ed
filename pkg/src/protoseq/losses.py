"""Training objective: reverse-prediction MAE plus a prototype contrast term.

The MAE averages absolute error over every time step, joint and coordinate.
The contrast term treats each sample's assigned prototype as the positive,
draws distinct negative prototypes uniformly without replacement, and scores
them with a temperature-scaled dot-product softmax where each prototype's
temperature is its cluster tightness. Prototypes and tightness are constants
within a gradient step; only the encoding side is differentiated.
"""
from __future__ import annotations

from dataclasses import dataclass
from collections.abc import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .clustering import ClusterModel
from .errors import ShapeError
from .seeds import derive_seed


@dataclass(frozen=True)
class ContrastConfig:
    """r = prototypes scored per clustering (positive included); the weight
    scales the contrast term against the MAE term."""

    r: int = 4
    lambda_contrast: float = 1.0

    def __post_init__(self):
        if self.r < 1:
            raise ValueError(f"r must be >= 1, got {self.r}")


def reverse_mae(target: np.ndarray | Tensor, predicted: Tensor) -> Tensor:
    """Mean absolute error over all elements of the two (T, ...) arrays."""
    target_data = target.data if isinstance(target, Tensor) else np.asarray(target)
    if target_data.shape != predicted.data.shape:
        raise ShapeError(
            f"target shape {target_data.shape} != prediction shape "
            f"{predicted.data.shape}"
        )
    flat_target = ad.constant(
        target_data.reshape(predicted.data.shape), dtype=predicted.dtype
    )
    return ad.mean_abs(ad.sub(predicted, flat_target))


def _sample_prototypes(
    model: ClusterModel, sample_index: int, r: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Positive prototype first, then r-1 distinct negatives (clamped to the
    available k-1)."""
    positive = int(model.assignment[sample_index])
    r_eff = min(r, model.k)
    pool = np.delete(np.arange(model.k), positive)
    negatives = rng.choice(pool, size=r_eff - 1, replace=False) if r_eff > 1 else []
    chosen = np.concatenate(([positive], negatives)).astype(int)
    return model.prototypes[chosen], model.tightness[chosen]


def proto_contrast(
    v: Tensor,
    models: Sequence[ClusterModel],
    sample_index: int,
    cfg: ContrastConfig,
    seed: int,
) -> Tensor:
    """Mean over clusterings of the softmax contrast for one unit-norm
    encoding. Negative draws are seeded per (seed, clustering, sample)."""
    if not models:
        return ad.constant(np.zeros((), dtype=v.dtype))
    terms = []
    for m, model in enumerate(models):
        rng = np.random.default_rng(derive_seed(seed, m, sample_index))
        protos, temps = _sample_prototypes(model, sample_index, cfg.r, rng)
        terms.append(ad.log_softmax_dot(v, protos, temps, positive_index=0))
    return ad.mul(ad.add_n(terms), 1.0 / len(terms))


def protomae(
    targets: np.ndarray,
    predictions: Tensor,
    encodings: Tensor,
    models: Sequence[ClusterModel],
    cfg: ContrastConfig,
    seed: int,
    sample_indices: Sequence[int],
) -> Tensor:
    """Batch objective: mean over samples of [MAE + weight * contrast].

    `encodings` are the raw final-step outputs, one row per batch item;
    they are length-normalized here, inside the differentiated graph.
    `sample_indices` map batch rows to dataset positions so each sample's
    cluster assignment can be looked up. With no clusterings the contrast
    term is zero and the loss reduces to the MAE.
    """
    targets = np.asarray(targets)
    batch = predictions.data.shape[0]
    if targets.shape[0] != batch or len(sample_indices) != batch:
        raise ShapeError(
            f"batch mismatch: {targets.shape[0]} targets, {batch} predictions, "
            f"{len(sample_indices)} indices"
        )
    loss = reverse_mae(targets.reshape(predictions.data.shape), predictions)
    if models and cfg.lambda_contrast != 0.0:
        normalized = ad.l2_normalize(encodings)
        terms = [
            proto_contrast(
                ad.take_row(normalized, row), models, int(idx), cfg, seed
            )
            for row, idx in enumerate(sample_indices)
        ]
        contrast = ad.mul(ad.add_n(terms), 1.0 / batch)
        loss = ad.add(loss, ad.mul(contrast, cfg.lambda_contrast))
    return loss
