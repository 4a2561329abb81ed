"""Dense tensors with a minimal reverse-mode differentiation tape.

Arrays are plain numpy; the computation graph lives implicitly in each
output's parent references plus a per-operation vector-Jacobian closure.
``backward`` replays the tape once in reverse topological order, so each
node's adjoint is accumulated exactly once. Elementwise operations broadcast
over leading axes only (numpy semantics); the adjoint of a broadcast operand
is summed back to its original shape.

Single-threaded evaluation is bitwise deterministic: the same inputs always
produce the same outputs and gradients.
"""
from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from .errors import ContractError, NormalizationError, ShapeError

NORM_EPS = 1e-12


class Tensor:
    """A dense array node in the tape."""

    __slots__ = ("data", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.data = np.asarray(data, dtype=dtype)
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._vjp = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)


def constant(data, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=False, dtype=dtype)


def _coerce(x, like: Tensor) -> Tensor:
    """Wrap python scalars / arrays as constants matching `like`'s dtype."""
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=like.dtype))


def _node(data: np.ndarray, parents: tuple[Tensor, ...], vjp) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._vjp = vjp
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum an adjoint back down to the shape of a broadcast operand."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_op(a, b, fwd, da, db) -> Tensor:
    if not isinstance(a, Tensor) and isinstance(b, Tensor):
        a = _coerce(a, b)
    elif not isinstance(b, Tensor) and isinstance(a, Tensor):
        b = _coerce(b, a)
    try:
        data = fwd(a.data, b.data)
    except ValueError:
        raise ShapeError(
            f"operands of shapes {a.data.shape} and {b.data.shape} do not broadcast"
        ) from None
    a_rg, b_rg = a.requires_grad, b.requires_grad
    ad, bd = a.data, b.data

    def vjp(g):
        ga = _unbroadcast(da(g, ad, bd), ad.shape) if a_rg else None
        gb = _unbroadcast(db(g, ad, bd), bd.shape) if b_rg else None
        return ga, gb

    return _node(data, (a, b), vjp)


def add(a, b) -> Tensor:
    return _broadcast_op(a, b, lambda x, y: x + y, lambda g, x, y: g, lambda g, x, y: g)


def sub(a, b) -> Tensor:
    return _broadcast_op(a, b, lambda x, y: x - y, lambda g, x, y: g, lambda g, x, y: -g)


def mul(a, b) -> Tensor:
    return _broadcast_op(
        a, b, lambda x, y: x * y, lambda g, x, y: g * y, lambda g, x, y: g * x
    )


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a = a if isinstance(a, Tensor) else constant(a)
    b = b if isinstance(b, Tensor) else constant(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(
            f"matmul requires (m,k) @ (k,n); got {a.data.shape} and {b.data.shape}"
        )
    ad, bd = a.data, b.data
    a_rg, b_rg = a.requires_grad, b.requires_grad

    def vjp(g):
        ga = g @ bd.T if a_rg else None
        gb = ad.T @ g if b_rg else None
        return ga, gb

    return _node(ad @ bd, (a, b), vjp)


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    # exp(-|x|) never overflows, unlike exp(-x) for large negative x
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))

    def vjp(g):
        return (g * out * (1.0 - out),)

    return _node(out, (a,), vjp)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)

    def vjp(g):
        return (g * (1.0 - out * out),)

    return _node(out, (a,), vjp)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    old = a.data.shape

    def vjp(g):
        return (g.reshape(old),)

    return _node(a.data.reshape(shape), (a,), vjp)


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = tuple(parts)
    if not parts:
        raise ShapeError("concat of an empty sequence")
    sizes = [p.data.shape[axis] for p in parts]
    bounds = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, bounds, axis=axis))

    try:
        data = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError:
        raise ShapeError(
            f"concat of shapes {[p.data.shape for p in parts]} along axis {axis}"
        ) from None
    return _node(data, parts, vjp)


def take_row(a: Tensor, index: int) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError(f"take_row expects a 2-d tensor, got shape {a.data.shape}")
    ad = a.data

    def vjp(g):
        out = np.zeros_like(ad)
        out[index] = g
        return (out,)

    return _node(ad[index], (a,), vjp)


def add_n(parts: Sequence[Tensor]) -> Tensor:
    parts = tuple(parts)
    if not parts:
        raise ShapeError("add_n of an empty sequence")
    shape = parts[0].data.shape
    for p in parts[1:]:
        if p.data.shape != shape:
            raise ShapeError(
                f"add_n operands must share a shape; got {shape} and {p.data.shape}"
            )
    data = parts[0].data.copy()
    for p in parts[1:]:
        data += p.data

    def vjp(g):
        return (g,) * len(parts)

    return _node(data, parts, vjp)


def mean_abs(a: Tensor) -> Tensor:
    ad = a.data
    n = ad.size

    def vjp(g):
        # subgradient 0 at exactly zero entries
        return (g * np.sign(ad) / n,)

    return _node(np.abs(ad).mean(), (a,), vjp)


def l2_normalize(a: Tensor) -> Tensor:
    """Scale the last axis to unit Euclidean norm."""
    ad = a.data
    norms = np.linalg.norm(ad, axis=-1, keepdims=True)
    if np.any(norms <= NORM_EPS):
        raise NormalizationError(f"cannot normalize vector with norm <= {NORM_EPS}")
    out = ad / norms

    def vjp(g):
        return ((g - out * np.sum(g * out, axis=-1, keepdims=True)) / norms,)

    return _node(out, (a,), vjp)


def log_softmax_dot(v: Tensor, prototypes, temps, positive_index: int) -> Tensor:
    """Negative log-probability of the positive row under a temperature-scaled
    dot-product softmax: -log( exp(v.z_s/t_s) / sum_k exp(v.z_k/t_k) ).

    `prototypes` (r, C) and `temps` (r,) are treated as constants. The
    log-sum-exp subtracts the max logit, so the result is invariant to a
    common shift of all logits.
    """
    z = np.asarray(prototypes.data if isinstance(prototypes, Tensor) else prototypes)
    t = np.asarray(temps.data if isinstance(temps, Tensor) else temps, dtype=v.dtype)
    if z.ndim != 2 or z.shape[1] != v.data.shape[-1] or v.data.ndim != 1:
        raise ShapeError(
            f"log_softmax_dot expects v (C,) and prototypes (r, C); got "
            f"{v.data.shape} and {z.shape}"
        )
    if np.any(t <= 0):
        raise ValueError("temperatures must be strictly positive")
    r = z.shape[0]
    if not 0 <= positive_index < r:
        raise ValueError(f"positive_index {positive_index} out of range for r={r}")
    z = z.astype(v.dtype, copy=False)
    logits = (z @ v.data) / t
    m = logits.max()
    lse = m + np.log(np.sum(np.exp(logits - m)))
    loss = lse - logits[positive_index]

    def vjp(g):
        w = np.exp(logits - lse) / t
        w[positive_index] -= 1.0 / t[positive_index]
        return (g * (w @ z),)

    return _node(np.asarray(loss, dtype=v.dtype), (v,), vjp)


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean cross-entropy of integer labels under row-wise softmax."""
    lab = np.asarray(labels)
    ld = logits.data
    if ld.ndim != 2 or lab.shape != (ld.shape[0],):
        raise ShapeError(
            f"expected logits (N, K) with labels (N,); got {ld.shape} and {lab.shape}"
        )
    n = ld.shape[0]
    m = ld.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.sum(np.exp(ld - m), axis=1))
    loss = (lse - ld[np.arange(n), lab]).mean()

    def vjp(g):
        p = np.exp(ld - lse[:, None])
        p[np.arange(n), lab] -= 1.0
        return (g * p / n,)

    return _node(np.asarray(loss, dtype=ld.dtype), (logits,), vjp)


def backward(loss: Tensor, params: Sequence[Tensor]) -> list[np.ndarray]:
    """Reverse-mode gradients of a scalar loss with respect to `params`.

    Parameters not reachable from the loss receive a zero gradient. The
    traversal is iterative, so graph depth is not limited by the Python
    recursion limit.
    """
    if loss.data.size != 1:
        raise ContractError(f"loss must be a scalar; got shape {loss.data.shape}")

    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(topo):
        g = grads.get(id(node))
        if g is None or node._vjp is None:
            continue
        for parent, pg in zip(node._parents, node._vjp(g)):
            if pg is None or not parent.requires_grad:
                continue
            acc = grads.get(id(parent))
            grads[id(parent)] = pg if acc is None else acc + pg

    return [grads.get(id(p), np.zeros_like(p.data)) for p in params]
