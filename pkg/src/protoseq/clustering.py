"""Prototype estimation: spherical k-means over unit-norm encodings plus a
per-cluster tightness estimate that serves as the contrast temperature.

Input rows are expected to be unit-norm (normalized upstream), so Euclidean
and cosine nearest-neighbor assignments coincide. Centroids are re-normalized
to the unit sphere after every update, which keeps the squared distance to a
prototype equal to 2 - 2 * (dot product).
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractError
from .seeds import derive_seed

logger = logging.getLogger(__name__)

# Lower bound on tightness. Near-duplicate clusters would otherwise drive
# the temperature toward zero and blow the contrast logits up by orders of
# magnitude, which destabilizes training; 0.05 caps the amplification of a
# unit dot product at 20x.
PHI_FLOOR = 0.05
_UNIT_TOL = 1e-9


@dataclass
class ClusterModel:
    """One clustering run: prototypes, per-cluster tightness, assignments."""

    k: int
    prototypes: np.ndarray  # (k, C), unit rows
    tightness: np.ndarray  # (k,), > 0
    assignment: np.ndarray  # (N,), sample -> cluster
    member_counts: np.ndarray  # (k,)
    objective_history: tuple[float, ...] = ()

    def __post_init__(self):
        n = self.assignment.shape[0]
        if self.member_counts.sum() != n:
            raise ContractError("member counts must sum to the sample count")
        norms = np.linalg.norm(self.prototypes, axis=1)
        if np.any(np.abs(norms - 1.0) > _UNIT_TOL):
            raise ContractError("prototype rows must be unit-norm")
        if np.any(self.tightness <= 0):
            raise ContractError("tightness values must be positive")


def tightness(members: np.ndarray, prototype: np.ndarray, alpha: float) -> float:
    """Mean member-to-prototype distance damped by cluster size:
    sum ||v_i - z|| / (P * ln(P + alpha)), floored at PHI_FLOOR."""
    members = np.asarray(members, dtype=np.float64)
    p = members.shape[0]
    if p < 1:
        raise ContractError("tightness of an empty cluster is undefined")
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    raw = np.linalg.norm(members - prototype, axis=1).sum() / (p * np.log(p + alpha))
    return max(float(raw), PHI_FLOOR)


def _plusplus_init(v: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = v.shape[0]
    centroids = np.empty((k, v.shape[1]), dtype=v.dtype)
    centroids[0] = v[rng.integers(n)]
    d2 = np.sum((v - centroids[0]) ** 2, axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            # all remaining points coincide with a centroid; pick uniformly
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centroids[i] = v[idx]
        d2 = np.minimum(d2, np.sum((v - centroids[i]) ** 2, axis=1))
    return centroids


def kmeans(
    v: np.ndarray,
    k: int,
    seed: int,
    max_iter: int = 100,
    alpha: float = 10.0,
) -> ClusterModel:
    """Lloyd iterations with k-means++ seeding on unit-norm rows.

    Assignment minimizes Euclidean distance to the returned prototypes (ties
    break toward the lowest cluster index). Per iteration the objective (sum
    of squared distances from each sample to its assigned prototype, i.e.
    the prototypes the assignment was computed against) is recorded in
    objective_history; it is non-increasing across iterations. An emptied
    cluster is re-seeded from the point farthest from its assigned centroid.
    """
    v = np.asarray(v, dtype=np.float64)
    n = v.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n_samples; got k={k}, n={n}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    rng = np.random.default_rng(seed)
    centroids = _plusplus_init(v, k, rng)
    assignment: np.ndarray | None = None
    history: list[float] = []
    for iteration in range(max_iter):
        d2 = np.sum((v[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        new_assignment = d2.argmin(axis=1)

        own = d2[np.arange(n), new_assignment].copy()
        counts = np.bincount(new_assignment, minlength=k)
        if np.any(counts == 0):
            for empty in np.flatnonzero(counts == 0):
                farthest = int(own.argmax())
                logger.debug(
                    "re-seeding empty cluster %d from sample %d", empty, farthest
                )
                new_assignment[farthest] = empty
                centroids[empty] = v[farthest]
                own[farthest] = 0.0  # now its own prototype
            counts = np.bincount(new_assignment, minlength=k)
        history.append(float(own.sum()))

        stable = assignment is not None and np.array_equal(new_assignment, assignment)
        assignment = new_assignment
        if stable or iteration == max_iter - 1:
            break
        sums = np.zeros((k, v.shape[1]))
        np.add.at(sums, new_assignment, v)
        means = sums / counts[:, None]
        norms = np.linalg.norm(means, axis=1, keepdims=True)
        degenerate = norms[:, 0] <= 1e-12
        centroids = np.where(degenerate[:, None], centroids, means / np.maximum(norms, 1e-12))

    phi = np.array(
        [
            tightness(v[assignment == i], centroids[i], alpha)
            for i in range(k)
        ]
    )
    return ClusterModel(
        k=k,
        prototypes=centroids,
        tightness=phi,
        assignment=assignment,
        member_counts=np.bincount(assignment, minlength=k),
        objective_history=tuple(history),
    )


def multi_cluster(
    v: np.ndarray,
    ks: list[int] | tuple[int, ...],
    seed: int,
    alpha: float = 10.0,
    max_iter: int = 100,
) -> list[ClusterModel]:
    """Independent k-means runs for each requested cluster count; run m uses
    a seed derived deterministically from (seed, m)."""
    return [
        kmeans(v, k, seed=derive_seed(seed, m), max_iter=max_iter, alpha=alpha)
        for m, k in enumerate(ks)
    ]


def dump_cluster_models(models: list[ClusterModel], path) -> Path:
    """Debug dump of prototypes, tightness and member counts."""
    payload = {
        "models": [
            {
                "k": m.k,
                "prototypes": m.prototypes.tolist(),
                "tightness": m.tightness.tolist(),
                "member_counts": m.member_counts.tolist(),
            }
            for m in models
        ]
    }
    path = Path(path)
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path
