"""Binary checkpoint for encoder, decoder and readout parameters.

Layout (all integers little-endian u32):

    magic bytes "PCRP"
    format version
    record count
    records: name length, name bytes (utf-8), rank, shape dims,
             payload as little-endian 32-bit floats
    config length, training config as utf-8 JSON

Records cover every encoder and decoder parameter (readout included) under
the names produced by ``gru.named_arrays``. Identical parameters and config
serialize to identical bytes.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import SchemaError
from .gru import GATE_FIELDS, GruLayerParams, GruParams, named_arrays

MAGIC = b"PCRP"
VERSION = 1


def save_checkpoint(path, encoder: GruParams, decoder: GruParams, cfg) -> Path:
    path = Path(path)
    records = named_arrays(encoder, "encoder") + named_arrays(decoder, "decoder")
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(records)))
        for name, arr in records:
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
        config_json = cfg.to_json().encode("utf-8")
        fh.write(struct.pack("<I", len(config_json)))
        fh.write(config_json)
    return path


def _read_exact(fh, n: int, path, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise SchemaError(f"checkpoint {path}: truncated while reading {what}")
    return buf


def load_checkpoint(path):
    """Returns (encoder, decoder, config). The decoder comes back frozen."""
    from .trainer import TrainConfig  # deferred: trainer depends on this module

    path = Path(path)
    with path.open("rb") as fh:
        if _read_exact(fh, 4, path, "magic") != MAGIC:
            raise SchemaError(f"checkpoint {path}: bad magic bytes")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, path, "version"))
        if version != VERSION:
            raise SchemaError(f"checkpoint {path}: unsupported version {version}")
        (count,) = struct.unpack("<I", _read_exact(fh, 4, path, "record count"))
        arrays: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<I", _read_exact(fh, 4, path, "name length"))
            name = _read_exact(fh, name_len, path, "name").decode("utf-8")
            (rank,) = struct.unpack("<I", _read_exact(fh, 4, path, "rank"))
            shape = struct.unpack(
                f"<{rank}I", _read_exact(fh, 4 * rank, path, "shape")
            )
            n_items = int(np.prod(shape, dtype=np.int64)) if rank else 1
            payload = _read_exact(fh, 4 * n_items, path, f"payload of {name}")
            arrays[name] = np.frombuffer(payload, dtype="<f4").reshape(shape)
        (cfg_len,) = struct.unpack("<I", _read_exact(fh, 4, path, "config length"))
        cfg = TrainConfig.from_json(
            _read_exact(fh, cfg_len, path, "config").decode("utf-8")
        )

    dtype = cfg.np_dtype()

    def build(prefix: str, frozen: bool, with_readout: bool) -> GruParams:
        layers = []
        for li in range(cfg.layer_count):
            fields = {}
            for field in GATE_FIELDS:
                name = f"{prefix}.layer{li}.{field}"
                if name not in arrays:
                    raise SchemaError(f"checkpoint {path}: missing record {name}")
                fields[field] = arrays[name].astype(dtype)
            layers.append(GruLayerParams(**fields))
        readout_w = readout_b = None
        if with_readout:
            for name in (f"{prefix}.readout_w", f"{prefix}.readout_b"):
                if name not in arrays:
                    raise SchemaError(f"checkpoint {path}: missing record {name}")
            readout_w = arrays[f"{prefix}.readout_w"].astype(dtype)
            readout_b = arrays[f"{prefix}.readout_b"].astype(dtype)
        return GruParams(
            input_dim=layers[0].w_z.shape[0],
            hidden_dim=cfg.hidden_dim,
            layer_count=cfg.layer_count,
            frozen=frozen,
            layers=layers,
            readout_w=readout_w,
            readout_b=readout_b,
        )

    encoder = build("encoder", frozen=False, with_readout=False)
    decoder = build("decoder", frozen=True, with_readout=True)
    return encoder, decoder, cfg
