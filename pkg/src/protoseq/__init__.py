"""Unsupervised skeleton-sequence representation learning.

An alternating training loop estimates action prototypes by clustering
sequence encodings, then updates a recurrent encoder on a combined
reverse-prediction + prototype-contrast objective while the decoder stays
frozen. Representation quality is measured with a linear probe on frozen
features.
"""

from .autodiff import Tensor, backward
from .clustering import ClusterModel, kmeans, multi_cluster, tightness
from .data import (
    AnchorJoints,
    Dataset,
    SkeletonSequence,
    fix_length,
    load_jsonl,
    reverse,
    save_jsonl,
    synth_generate,
)
from .evaluate import (
    EvalReport,
    ProbeModel,
    extract_encodings,
    probe_eval,
    probe_train,
    stratified_split,
)
from .gru import GruParams, decode, encode, gru_cell, init_gru
from .losses import ContrastConfig, proto_contrast, protomae, reverse_mae
from .preprocess import (
    RigidFrame,
    apply_view_invariant,
    compute_frame,
    preprocess_dataset,
)
from .trainer import AdamState, TrainConfig, adam_update, e_step, m_step, train

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "AnchorJoints",
    "ClusterModel",
    "ContrastConfig",
    "Dataset",
    "EvalReport",
    "GruParams",
    "ProbeModel",
    "RigidFrame",
    "SkeletonSequence",
    "Tensor",
    "TrainConfig",
    "adam_update",
    "apply_view_invariant",
    "backward",
    "compute_frame",
    "decode",
    "e_step",
    "encode",
    "extract_encodings",
    "fix_length",
    "gru_cell",
    "init_gru",
    "kmeans",
    "load_jsonl",
    "m_step",
    "multi_cluster",
    "preprocess_dataset",
    "probe_eval",
    "probe_train",
    "proto_contrast",
    "protomae",
    "reverse",
    "reverse_mae",
    "save_jsonl",
    "stratified_split",
    "synth_generate",
    "tightness",
    "train",
]
