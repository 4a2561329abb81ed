"""Alternating training loop: per epoch, prototypes are re-estimated by
clustering all current encodings, then the encoder is updated by Adam over
shuffled minibatches of the combined objective. Decoder and readout are
frozen for the whole run. Fully deterministic for a fixed config and seed
in single-threaded mode.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import seeds
from .autodiff import backward
from .checkpoint import save_checkpoint
from .clustering import ClusterModel, dump_cluster_models, multi_cluster
from .data import Dataset, fix_length
from .errors import ContractError, ShapeError
from .gru import (
    GruParams,
    assign_named_arrays,
    decode,
    encode,
    encode_batch,
    init_gru,
    named_arrays,
    tensorize,
)
from .losses import ContrastConfig, protomae

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    """Every knob of the pretraining and probe stages, JSON-serializable
    field-for-field."""

    hidden_dim: int = 128
    layer_count: int = 1
    t_fixed: int = 50
    ks: tuple[int, ...] = (40, 70, 100)
    alpha: float = 10.0
    r: int = 4
    lambda_contrast: float = 1.0
    pretrain_lr: float = 0.001
    pretrain_epochs: int = 50
    batch_size: int = 32
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    probe_lr: float = 0.01
    probe_epochs: int = 50
    seed: int = 0
    use_pc: bool = True
    use_rp: bool = True
    dtype: str = "float32"

    def validate(self) -> None:
        positive = {
            "hidden_dim": self.hidden_dim,
            "layer_count": self.layer_count,
            "t_fixed": self.t_fixed,
            "r": self.r,
            "pretrain_lr": self.pretrain_lr,
            "batch_size": self.batch_size,
            "alpha": self.alpha,
            "probe_lr": self.probe_lr,
            "adam_eps": self.adam_eps,
        }
        for name, value in positive.items():
            if value <= 0:
                raise ValueError(f"{name} must be positive, got {value}")
        if self.pretrain_epochs < 0 or self.probe_epochs < 0:
            raise ValueError("epoch counts must be non-negative")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.use_pc and not self.ks:
            raise ValueError("ks must be non-empty when prototype contrast is on")
        if any(k < 1 for k in self.ks):
            raise ValueError(f"cluster counts must be >= 1, got {self.ks}")
        if not 0 <= self.adam_beta1 < 1 or not 0 <= self.adam_beta2 < 1:
            raise ValueError("adam betas must lie in [0, 1)")
        if self.dtype not in ("float32", "float64"):
            raise ValueError(f"dtype must be float32 or float64, got {self.dtype}")

    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64

    def contrast_config(self) -> ContrastConfig:
        return ContrastConfig(r=self.r, lambda_contrast=self.lambda_contrast)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["ks"] = list(self.ks)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        if "ks" in d:
            d = dict(d, ks=tuple(int(k) for k in d["ks"]))
        cfg = cls(**d)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "TrainConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_file(cls, path) -> "TrainConfig":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


@dataclass
class AdamState:
    """First/second moment estimates per parameter name plus a step count."""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def for_params(cls, named: list[tuple[str, np.ndarray]]) -> "AdamState":
        return cls(
            m={name: np.zeros_like(arr) for name, arr in named},
            v={name: np.zeros_like(arr) for name, arr in named},
        )


def adam_update(
    named_params: list[tuple[str, np.ndarray]],
    grads: list[np.ndarray],
    state: AdamState,
    lr: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> dict[str, np.ndarray]:
    """One bias-corrected Adam step; returns the updated arrays by name."""
    if len(named_params) != len(grads):
        raise ShapeError(
            f"{len(named_params)} parameters but {len(grads)} gradients"
        )
    b1, b2 = betas
    state.step += 1
    t = state.step
    updated: dict[str, np.ndarray] = {}
    for (name, p), g in zip(named_params, grads):
        if g.shape != p.shape:
            raise ShapeError(
                f"gradient shape {g.shape} != parameter shape {p.shape} for {name}"
            )
        m = state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        v = state.v[name] = b2 * state.v[name] + (1.0 - b2) * (g * g)
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        updated[name] = p - lr * m_hat / (np.sqrt(v_hat) + eps)
    return updated


def flatten_dataset(dataset: Dataset, t_fixed: int, dtype) -> np.ndarray:
    """(N, T, J*3) array of length-fixed sequences, order preserved."""
    rows = [
        fix_length(s, t_fixed).joints.reshape(t_fixed, -1) for s in dataset.sequences
    ]
    return np.stack(rows).astype(dtype)


def e_step(
    dataset: Dataset | np.ndarray,
    encoder: GruParams,
    cfg: TrainConfig,
    *,
    epoch: int = 0,
    threads: int = 1,
) -> list[ClusterModel]:
    """Encode the full training set without gradients, length-normalize, and
    cluster once per requested cluster count. Returns [] when prototype
    contrast is ablated."""
    if not cfg.use_pc:
        return []
    x = (
        dataset
        if isinstance(dataset, np.ndarray)
        else flatten_dataset(dataset, cfg.t_fixed, cfg.np_dtype())
    )
    encodings = encode_batch(x, encoder, threads=threads).astype(np.float64)
    norms = np.linalg.norm(encodings, axis=1, keepdims=True)
    v = encodings / np.maximum(norms, 1e-12)
    return multi_cluster(
        v, cfg.ks, seed=seeds.derive_seed(cfg.seed, seeds.CLUSTERING, epoch),
        alpha=cfg.alpha,
    )


def m_step(
    batch: np.ndarray,
    batch_indices: np.ndarray,
    encoder: GruParams,
    decoder: GruParams,
    models: list[ClusterModel],
    cfg: TrainConfig,
    state: AdamState,
    seed: int,
) -> float:
    """One gradient step on a (B, T, D) batch: encode, decode, score against
    reversed targets (or forward targets with reverse prediction ablated),
    backpropagate, and apply Adam to the encoder only."""
    if not decoder.frozen:
        raise ContractError("decoder must be frozen during training")
    enc_t = tensorize(encoder, requires_grad=True)
    _, v_final = encode(batch, enc_t)
    predictions = decode(v_final, batch.shape[1], decoder)
    targets = batch[:, ::-1] if cfg.use_rp else batch
    loss = protomae(
        targets,
        predictions,
        v_final,
        models,
        cfg.contrast_config(),
        seed,
        list(batch_indices),
    )
    leaves = enc_t.leaves("encoder")
    grads = backward(loss, [t for _, t in leaves])
    updated = adam_update(
        [(name, t.data) for name, t in leaves],
        grads,
        state,
        cfg.pretrain_lr,
        betas=(cfg.adam_beta1, cfg.adam_beta2),
        eps=cfg.adam_eps,
    )
    assign_named_arrays(encoder, "encoder", updated)
    return float(loss.data)


def init_models(cfg: TrainConfig, input_dim: int) -> tuple[GruParams, GruParams]:
    """Fresh encoder plus frozen decoder/readout for the given frame width."""
    dtype = cfg.np_dtype()
    encoder = init_gru(
        input_dim,
        cfg.hidden_dim,
        cfg.layer_count,
        rng=seeds.spawn_rng(cfg.seed, seeds.ENCODER_INIT),
        frozen=False,
        dtype=dtype,
    )
    decoder = init_gru(
        cfg.hidden_dim,
        cfg.hidden_dim,
        cfg.layer_count,
        rng=seeds.spawn_rng(cfg.seed, seeds.DECODER_INIT),
        frozen=True,
        readout_dim=input_dim,
        dtype=dtype,
    )
    return encoder, decoder


def train(
    dataset: Dataset,
    cfg: TrainConfig,
    out_path,
    *,
    log_path=None,
    threads: int = 1,
    cluster_dump_dir=None,
) -> Path:
    """Full pretraining run; writes the checkpoint and (optionally) a JSONL
    log with one {epoch, mean_loss, e_step_seconds, m_step_seconds} record
    per epoch. Returns the checkpoint path."""
    cfg.validate()
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    x = flatten_dataset(dataset, cfg.t_fixed, cfg.np_dtype())
    n = x.shape[0]
    encoder, decoder = init_models(cfg, input_dim=x.shape[2])
    state = AdamState.for_params(named_arrays(encoder, "encoder"))
    log_handle = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        for epoch in range(1, cfg.pretrain_epochs + 1):
            t0 = time.perf_counter()
            models = e_step(x, encoder, cfg, epoch=epoch, threads=threads)
            if cluster_dump_dir is not None and models:
                dump_dir = Path(cluster_dump_dir)
                dump_dir.mkdir(parents=True, exist_ok=True)
                dump_cluster_models(models, dump_dir / f"clusters_epoch{epoch:04d}.json")
            t1 = time.perf_counter()
            if models and cfg.r > min(m.k for m in models):
                logger.warning(
                    "epoch %d: r=%d exceeds the smallest cluster count; "
                    "negative draws are clamped",
                    epoch,
                    cfg.r,
                )
            order = seeds.spawn_rng(cfg.seed, seeds.EPOCH_SHUFFLE, epoch).permutation(n)
            losses = []
            for batch_no, start in enumerate(range(0, n, cfg.batch_size)):
                idx = order[start : start + cfg.batch_size]
                batch_seed = seeds.derive_seed(
                    cfg.seed, seeds.NEGATIVE_SAMPLING, epoch, batch_no
                )
                losses.append(
                    m_step(x[idx], idx, encoder, decoder, models, cfg, state, batch_seed)
                )
            t2 = time.perf_counter()
            record = {
                "epoch": epoch,
                "mean_loss": float(np.mean(losses)),
                "e_step_seconds": t1 - t0,
                "m_step_seconds": t2 - t1,
            }
            logger.info(
                "epoch %d/%d: mean loss %.6f",
                epoch,
                cfg.pretrain_epochs,
                record["mean_loss"],
            )
            if log_handle is not None:
                log_handle.write(json.dumps(record) + "\n")
                log_handle.flush()
    finally:
        if log_handle is not None:
            log_handle.close()
    return save_checkpoint(out_path, encoder, decoder, cfg)
