"""Versioned binary model file.

Layout (little endian): magic, u32 version, u32 header length, JSON header
(architecture, activation, quantization format, metadata), then row-major
float64 weight blocks (w1, then each stream's w2), then the quantized blocks
(int16 codes in the same order), then the activation and threshold tables.
"""
from __future__ import annotations

import dataclasses
import json
import struct
from pathlib import Path

import numpy as np

from ..errors import ModelError
from .network import AnnModel, StreamSpec
from .quantized import QuantFormat, QuantizedModel, build_quantized

MAGIC = b"WDTMANN\x00"
VERSION = 1


def save_model(path: str | Path, model: AnnModel, fmt: QuantFormat | None = None) -> None:
    qm = build_quantized(model, fmt)
    if qm.fmt.weight_bits > 16:
        raise ModelError("the file format stores quantized weights as int16")
    meta = {k: v for k, v in model.meta.items() if isinstance(v, (int, float, str, bool))}
    header = {"n_in": model.n_in, "activation": model.activation,
              "streams": [[s.name, s.hidden, s.n_out] for s in model.streams],
              "quant": dataclasses.asdict(qm.fmt), "meta": meta}
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(blob)))
        fh.write(blob)
        for w in model.params():
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
        for w in [qm.w1, *qm.w2]:
            fh.write(np.ascontiguousarray(w, dtype="<i2").tobytes())
        fh.write(qm.act_lut.astype(np.uint8).tobytes())
        fh.write(qm.thr_lut.astype(np.uint8).tobytes())


def _read(fh, dtype: str, shape) -> np.ndarray:
    n = int(np.prod(shape))
    size = np.dtype(dtype).itemsize * n
    raw = fh.read(size)
    if len(raw) != size:
        raise ModelError("truncated model file")
    return np.frombuffer(raw, dtype=dtype).reshape(shape).copy()


def _load(path: str | Path) -> tuple[AnnModel, QuantizedModel]:
    with open(path, "rb") as fh:
        if fh.read(8) != MAGIC:
            raise ModelError(f"{path}: not a model file")
        head = fh.read(8)
        if len(head) != 8:
            raise ModelError(f"{path}: truncated model file")
        version, hlen = struct.unpack("<II", head)
        if version != VERSION:
            raise ModelError(f"{path}: unsupported model version {version}")
        try:
            header = json.loads(fh.read(hlen))
            streams = tuple(StreamSpec(n, h, o) for n, h, o in header["streams"])
            n_in = header["n_in"]
            fmt = QuantFormat(**header["quant"])
            activation, meta = header["activation"], dict(header["meta"])
        except (ValueError, KeyError, TypeError) as exc:
            raise ModelError(f"{path}: corrupt header") from exc
        n_hidden = sum(s.hidden for s in streams)
        shapes = [(n_hidden, n_in + 1)] + [(s.n_out, s.hidden + 1) for s in streams]
        floats = [_read(fh, "<f8", sh).astype(float) for sh in shapes]
        codes = [_read(fh, "<i2", sh).astype(np.int64) for sh in shapes]
        act = _read(fh, "u1", (fmt.lut_entries,))
        thr = _read(fh, "u1", (fmt.threshold_entries,))
        if fh.read(1):
            raise ModelError(f"{path}: trailing bytes")
    model = AnnModel(n_in, streams, floats[0], floats[1:], activation, meta)
    qm = QuantizedModel(fmt, n_in, streams, codes[0], codes[1:], act, thr)
    return model, qm


def load_model(path: str | Path) -> AnnModel:
    return _load(path)[0]


def load_quantized(path: str | Path) -> QuantizedModel:
    return _load(path)[1]
