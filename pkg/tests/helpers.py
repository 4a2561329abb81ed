"""Shared test utilities: finite-difference gradients and random rotations."""
from __future__ import annotations

import numpy as np


def numerical_grad(f, arrays, step=1e-5):
    """Central finite differences of a scalar function of numpy arrays.

    `f` is called with the (mutated copies of the) arrays and must return a
    float. Returns one gradient array per input array.
    """
    grads = []
    work = [a.copy() for a in arrays]
    for ai, arr in enumerate(work):
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + step
            up = f(work)
            flat[i] = original - step
            down = f(work)
            flat[i] = original
            gflat[i] = (up - down) / (2.0 * step)
        grads.append(g)
    return grads


def max_relative_error(analytic, numeric, atol=1e-12):
    """Max absolute difference scaled by the array's dominant gradient."""
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    return float(
        np.max(np.abs(analytic - numeric)) / (np.max(np.abs(numeric)) + atol)
    )


def random_rotation(rng) -> np.ndarray:
    """Uniform random proper rotation from a unit quaternion."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )
