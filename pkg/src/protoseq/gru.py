"""Gated recurrent encoder and frozen decoder built on the tensor tape.

Per-layer cell recurrence (x is the layer input, h the previous hidden
state):

    z = sigmoid(x W_z + h U_z + b_z)
    r = sigmoid(x W_r + h U_r + b_r)
    c = tanh(x W_h + (r * h) U_h + b_h)
    h' = (1 - z) * h + z * c

The encoder consumes one flattened skeleton frame per step and its
final-step top-layer output is the sequence representation. The decoder is
initialized once and then frozen: step 1 consumes the encoder's final
output, later steps run on their own hidden state with zero external input,
and a frozen linear readout maps each hidden state to a predicted frame.
Frozen means excluded from optimizer updates; gradients still flow through
the decoder back into the encoder.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError, ShapeError

GATE_FIELDS = ("w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_h", "u_h", "b_h")


@dataclass
class GruLayerParams:
    w_z: np.ndarray
    u_z: np.ndarray
    b_z: np.ndarray
    w_r: np.ndarray
    u_r: np.ndarray
    b_r: np.ndarray
    w_h: np.ndarray
    u_h: np.ndarray
    b_h: np.ndarray


@dataclass
class GruParams:
    """All weights of a GRU stack plus the optional linear readout.

    Input-to-hidden matrices are (in, C), hidden-to-hidden are (C, C),
    biases are (C,). The readout, present on decoders, is (C, out) + (out,).
    """

    input_dim: int
    hidden_dim: int
    layer_count: int
    frozen: bool
    layers: list[GruLayerParams]
    readout_w: np.ndarray | None = None
    readout_b: np.ndarray | None = None


def init_gru(
    input_dim: int,
    hidden_dim: int,
    layer_count: int = 1,
    *,
    rng: np.random.Generator,
    frozen: bool = False,
    readout_dim: int | None = None,
    dtype=np.float32,
) -> GruParams:
    """Uniform initialization in [-1/sqrt(C), 1/sqrt(C)], reproducible for a
    fixed generator state (draw order is fixed)."""
    bound = 1.0 / np.sqrt(hidden_dim)

    def draw(*shape):
        return rng.uniform(-bound, bound, size=shape).astype(dtype)

    layers = []
    for li in range(layer_count):
        d_in = input_dim if li == 0 else hidden_dim
        layers.append(
            GruLayerParams(
                w_z=draw(d_in, hidden_dim),
                u_z=draw(hidden_dim, hidden_dim),
                b_z=draw(hidden_dim),
                w_r=draw(d_in, hidden_dim),
                u_r=draw(hidden_dim, hidden_dim),
                b_r=draw(hidden_dim),
                w_h=draw(d_in, hidden_dim),
                u_h=draw(hidden_dim, hidden_dim),
                b_h=draw(hidden_dim),
            )
        )
    readout_w = readout_b = None
    if readout_dim is not None:
        readout_w = draw(hidden_dim, readout_dim)
        readout_b = draw(readout_dim)
    return GruParams(
        input_dim=input_dim,
        hidden_dim=hidden_dim,
        layer_count=layer_count,
        frozen=frozen,
        layers=layers,
        readout_w=readout_w,
        readout_b=readout_b,
    )


def named_arrays(params: GruParams, prefix: str) -> list[tuple[str, np.ndarray]]:
    out = []
    for li, layer in enumerate(params.layers):
        for field in GATE_FIELDS:
            out.append((f"{prefix}.layer{li}.{field}", getattr(layer, field)))
    if params.readout_w is not None:
        out.append((f"{prefix}.readout_w", params.readout_w))
        out.append((f"{prefix}.readout_b", params.readout_b))
    return out


def assign_named_arrays(params: GruParams, prefix: str, values: dict[str, np.ndarray]) -> None:
    """Write updated arrays back; keys follow named_arrays naming."""
    for li, layer in enumerate(params.layers):
        for field in GATE_FIELDS:
            name = f"{prefix}.layer{li}.{field}"
            if name in values:
                setattr(layer, field, values[name])
    if f"{prefix}.readout_w" in values:
        params.readout_w = values[f"{prefix}.readout_w"]
        params.readout_b = values[f"{prefix}.readout_b"]


class TensorGru:
    """Tape-side view of a GruParams: the same arrays wrapped as leaves."""

    def __init__(self, params: GruParams, requires_grad: bool):
        if requires_grad and params.frozen:
            raise ContractError("frozen parameters cannot require gradients")
        self.params = params
        self.requires_grad = requires_grad
        self.layers = [
            {f: Tensor(getattr(layer, f), requires_grad=requires_grad) for f in GATE_FIELDS}
            for layer in params.layers
        ]
        self.readout_w = self.readout_b = None
        if params.readout_w is not None:
            self.readout_w = Tensor(params.readout_w, requires_grad=requires_grad)
            self.readout_b = Tensor(params.readout_b, requires_grad=requires_grad)

    @property
    def dtype(self):
        return self.layers[0]["w_z"].dtype

    def leaves(self, prefix: str) -> list[tuple[str, Tensor]]:
        out = []
        for li, layer in enumerate(self.layers):
            for field in GATE_FIELDS:
                out.append((f"{prefix}.layer{li}.{field}", layer[field]))
        if self.readout_w is not None:
            out.append((f"{prefix}.readout_w", self.readout_w))
            out.append((f"{prefix}.readout_b", self.readout_b))
        return out


def tensorize(params: GruParams | TensorGru, requires_grad: bool = False) -> TensorGru:
    if isinstance(params, TensorGru):
        return params
    return TensorGru(params, requires_grad)


def _cell(x: Tensor, h: Tensor, lt: dict[str, Tensor]) -> Tensor:
    z = ad.sigmoid(x @ lt["w_z"] + h @ lt["u_z"] + lt["b_z"])
    r = ad.sigmoid(x @ lt["w_r"] + h @ lt["u_r"] + lt["b_r"])
    c = ad.tanh(x @ lt["w_h"] + ad.mul(r, h) @ lt["u_h"] + lt["b_h"])
    return ad.add(ad.mul(1.0 - z, h), ad.mul(z, c))


def gru_cell(
    x_t: Tensor | np.ndarray,
    h_prev: Tensor | np.ndarray,
    params: GruParams | TensorGru,
    layer: int = 0,
) -> tuple[Tensor, Tensor]:
    """Single step of one layer's recurrence; returns (v_t, h_t) where the
    step output v_t is the new hidden state."""
    tg = tensorize(params)
    x = x_t if isinstance(x_t, Tensor) else ad.constant(x_t, dtype=tg.dtype)
    h = h_prev if isinstance(h_prev, Tensor) else ad.constant(h_prev, dtype=tg.dtype)
    single = x.data.ndim == 1
    if single:
        x = ad.reshape(x, (1, x.data.shape[0]))
        h = ad.reshape(h, (1, h.data.shape[0]))
    lt = tg.layers[layer]
    expected = lt["w_z"].data.shape[0]
    if x.data.shape[1] != expected or h.data.shape[1] != tg.params.hidden_dim:
        raise ShapeError(
            f"cell expects input ({expected},) and hidden ({tg.params.hidden_dim},); "
            f"got {x.data.shape[1:]} and {h.data.shape[1:]}"
        )
    h_next = _cell(x, h, lt)
    if single:
        h_next = ad.reshape(h_next, (tg.params.hidden_dim,))
    return h_next, h_next


def encode(
    x: np.ndarray, params: GruParams | TensorGru
) -> tuple[Tensor, Tensor]:
    """Run the stack over a (T, D) sequence or (B, T, D) batch from a zero
    initial hidden state. Returns (step outputs, final-step output)."""
    tg = tensorize(params)
    x = np.asarray(x)
    single = x.ndim == 2
    xb = x[None] if single else x
    if xb.ndim != 3 or xb.shape[2] != tg.params.input_dim:
        raise ShapeError(
            f"encode expects (T, {tg.params.input_dim}) or (B, T, "
            f"{tg.params.input_dim}); got {x.shape}"
        )
    xb = xb.astype(tg.dtype, copy=False)
    b, t_steps, _ = xb.shape
    c = tg.params.hidden_dim
    hidden = [ad.constant(np.zeros((b, c), dtype=tg.dtype)) for _ in tg.layers]
    step_outputs: list[Tensor] = []
    for t in range(t_steps):
        inp: Tensor = ad.constant(xb[:, t])
        for li, lt in enumerate(tg.layers):
            hidden[li] = _cell(inp, hidden[li], lt)
            inp = hidden[li]
        step_outputs.append(hidden[-1])
    v_final = step_outputs[-1]
    outputs = ad.concat([ad.reshape(s, (b, 1, c)) for s in step_outputs], axis=1)
    if single:
        outputs = ad.reshape(outputs, (t_steps, c))
        v_final = ad.reshape(v_final, (c,))
    return outputs, v_final


def decode(
    v_final: Tensor, n_steps: int, params: GruParams | TensorGru
) -> Tensor:
    """Predict `n_steps` frames from the encoder's final output.

    The decoder must be frozen; gradients still flow through it to
    `v_final`. Step 1 consumes `v_final`, later steps get zero input.
    """
    tg = tensorize(params)
    if not tg.params.frozen:
        raise ContractError("decoder parameters must be frozen")
    if tg.readout_w is None:
        raise ContractError("decoder has no readout")
    single = v_final.data.ndim == 1
    v = ad.reshape(v_final, (1, v_final.data.shape[0])) if single else v_final
    if v.data.shape[1] != tg.params.input_dim:
        raise ShapeError(
            f"decoder expects input width {tg.params.input_dim}, "
            f"got {v.data.shape[1]}"
        )
    b = v.data.shape[0]
    c = tg.params.hidden_dim
    out_dim = tg.readout_w.data.shape[1]
    hidden = [ad.constant(np.zeros((b, c), dtype=tg.dtype)) for _ in tg.layers]
    zero_input = ad.constant(np.zeros((b, tg.params.input_dim), dtype=tg.dtype))
    frames: list[Tensor] = []
    for t in range(n_steps):
        inp = v if t == 0 else zero_input
        for li, lt in enumerate(tg.layers):
            hidden[li] = _cell(inp, hidden[li], lt)
            inp = hidden[li]
        frames.append(hidden[-1] @ tg.readout_w + tg.readout_b)
    predicted = ad.concat([ad.reshape(f, (b, 1, out_dim)) for f in frames], axis=1)
    if single:
        predicted = ad.reshape(predicted, (n_steps, out_dim))
    return predicted


def encode_batch(
    x: np.ndarray, params: GruParams, threads: int = 1
) -> np.ndarray:
    """Final-step outputs for a (N, T, D) array, no gradient tracking.

    With threads > 1 the batch is split into contiguous chunks encoded in
    parallel; chunk results are concatenated in order, so output order is
    independent of scheduling.
    """
    tg = tensorize(params, requires_grad=False)
    n = x.shape[0]
    if threads <= 1 or n < 2 * threads:
        return encode(x, tg)[1].data.copy()

    bounds = np.linspace(0, n, threads + 1, dtype=int)
    chunks = [x[bounds[i] : bounds[i + 1]] for i in range(threads)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda c: encode(c, tg)[1].data, chunks))
    return np.concatenate(parts, axis=0)
