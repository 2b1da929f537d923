"""Residual recurrent network mapping magnitude spectra to bounded targets.

Architecture: a dense input layer with layer normalisation and ReLU
(the only normalisation in the network), a stack of residual LSTM
blocks, and a sigmoid dense output layer.  Each block adds its cell
output to the block input; bidirectional blocks add both directions.
The backward pass is full backpropagation through time, written against
the same caches the forward pass produces, so finite differences can
check every parameter.

Everything is float64 in memory; the file format stores little-endian
float32 tensors after a short text header.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

LN_EPS = 1e-6
FORGET_BIAS = 1.0
_GATES = 4  # order: input, forget, candidate, output
_MODEL_MAGIC = "sefront-net-v1"


@dataclass
class DenseParams:
    w: np.ndarray  # (fan_in, fan_out)
    b: np.ndarray  # (fan_out,)


@dataclass
class LstmCellParams:
    """Stacked gate parameters, gate order input, forget, candidate, output."""

    w_x: np.ndarray  # (input_dim, 4 * cell)
    w_h: np.ndarray  # (cell, 4 * cell)
    b: np.ndarray    # (4 * cell,)

    @property
    def cell_size(self) -> int:
        return self.w_h.shape[0]


@dataclass
class ResBlockParams:
    fwd: LstmCellParams
    bwd: LstmCellParams | None = None  # present only in bidirectional mode


@dataclass
class NetworkParams:
    fc: DenseParams
    ln_gain: np.ndarray
    ln_offset: np.ndarray
    blocks: list[ResBlockParams]
    out: DenseParams
    bidirectional: bool
    input_dim: int
    output_dim: int
    cell_size: int

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def mode(self) -> str:
        return "BI" if self.bidirectional else "UNI"

    def tensors(self) -> dict[str, np.ndarray]:
        """Named parameter tensors in a fixed serialisation order."""
        out = {
            "fc.w": self.fc.w,
            "fc.b": self.fc.b,
            "ln.gain": self.ln_gain,
            "ln.offset": self.ln_offset,
        }
        for i, blk in enumerate(self.blocks):
            out[f"block{i}.fwd.w_x"] = blk.fwd.w_x
            out[f"block{i}.fwd.w_h"] = blk.fwd.w_h
            out[f"block{i}.fwd.b"] = blk.fwd.b
            if blk.bwd is not None:
                out[f"block{i}.bwd.w_x"] = blk.bwd.w_x
                out[f"block{i}.bwd.w_h"] = blk.bwd.w_h
                out[f"block{i}.bwd.b"] = blk.bwd.b
        out["out.w"] = self.out.w
        out["out.b"] = self.out.b
        return out


def _glorot(rng, fan_in, fan_out, shape):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _init_cell(rng, input_dim: int, cell: int) -> LstmCellParams:
    w_x = _glorot(rng, input_dim, cell, (input_dim, _GATES * cell))
    w_h = _glorot(rng, cell, cell, (cell, _GATES * cell))
    b = np.zeros(_GATES * cell)
    b[cell : 2 * cell] = FORGET_BIAS
    return LstmCellParams(w_x, w_h, b)


def init_network(
    seed: int = 0,
    input_dim: int = 257,
    output_dim: int = 257,
    cell_size: int = 64,
    n_blocks: int = 2,
    bidirectional: bool = False,
) -> NetworkParams:
    """Glorot-uniform weights, zero biases except the +1 forget gate."""
    if input_dim < 1 or output_dim < 1 or cell_size < 1 or n_blocks < 1:
        raise ValueError("network dimensions must be positive")
    rng = np.random.default_rng(seed)
    fc = DenseParams(
        _glorot(rng, input_dim, cell_size, (input_dim, cell_size)), np.zeros(cell_size)
    )
    blocks = []
    for _ in range(n_blocks):
        fwd = _init_cell(rng, cell_size, cell_size)
        bwd = _init_cell(rng, cell_size, cell_size) if bidirectional else None
        blocks.append(ResBlockParams(fwd, bwd))
    out = DenseParams(
        _glorot(rng, cell_size, output_dim, (cell_size, output_dim)),
        np.zeros(output_dim),
    )
    return NetworkParams(
        fc,
        np.ones(cell_size),
        np.zeros(cell_size),
        blocks,
        out,
        bidirectional,
        input_dim,
        output_dim,
        cell_size,
    )


def lstm_step(cell: LstmCellParams, x_t, h_prev, c_prev):
    """One LSTM time step (no peepholes); returns (h, c)."""
    z = x_t @ cell.w_x + h_prev @ cell.w_h + cell.b
    c_sz = cell.cell_size
    i = expit(z[..., :c_sz])
    f = expit(z[..., c_sz : 2 * c_sz])
    g = np.tanh(z[..., 2 * c_sz : 3 * c_sz])
    o = expit(z[..., 3 * c_sz :])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c


def _lstm_run(cell: LstmCellParams, x: np.ndarray):
    """Run over time. x is (B, L, D); returns h (B, L, C) and the cache."""
    b_sz, n_t, _ = x.shape
    c_sz = cell.cell_size
    gates = np.empty((n_t, b_sz, _GATES * c_sz))
    cells = np.empty((n_t, b_sz, c_sz))
    tanh_c = np.empty((n_t, b_sz, c_sz))
    hs = np.empty((n_t, b_sz, c_sz))
    h = np.zeros((b_sz, c_sz))
    c = np.zeros((b_sz, c_sz))
    for t in range(n_t):
        z = x[:, t, :] @ cell.w_x + h @ cell.w_h + cell.b
        i = expit(z[:, :c_sz])
        f = expit(z[:, c_sz : 2 * c_sz])
        g = np.tanh(z[:, 2 * c_sz : 3 * c_sz])
        o = expit(z[:, 3 * c_sz :])
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        gates[t, :, :c_sz] = i
        gates[t, :, c_sz : 2 * c_sz] = f
        gates[t, :, 2 * c_sz : 3 * c_sz] = g
        gates[t, :, 3 * c_sz :] = o
        cells[t] = c
        tanh_c[t] = tc
        hs[t] = h
    cache = {"x": x, "gates": gates, "cells": cells, "tanh_c": tanh_c, "hs": hs}
    return np.swapaxes(hs, 0, 1), cache


def _lstm_backprop(cell: LstmCellParams, cache, dh_out: np.ndarray):
    """BPTT for one cell. dh_out is (B, L, C); returns (dx, grads)."""
    x = cache["x"]
    gates, cells, tanh_c, hs = (
        cache["gates"],
        cache["cells"],
        cache["tanh_c"],
        cache["hs"],
    )
    b_sz, n_t, _ = x.shape
    c_sz = cell.cell_size
    dw_x = np.zeros_like(cell.w_x)
    dw_h = np.zeros_like(cell.w_h)
    db = np.zeros_like(cell.b)
    dx = np.empty_like(x)
    dh_next = np.zeros((b_sz, c_sz))
    dc_next = np.zeros((b_sz, c_sz))
    dz = np.empty((b_sz, _GATES * c_sz))
    for t in range(n_t - 1, -1, -1):
        i = gates[t, :, :c_sz]
        f = gates[t, :, c_sz : 2 * c_sz]
        g = gates[t, :, 2 * c_sz : 3 * c_sz]
        o = gates[t, :, 3 * c_sz :]
        tc = tanh_c[t]
        c_prev = cells[t - 1] if t > 0 else np.zeros((b_sz, c_sz))
        h_prev = hs[t - 1] if t > 0 else np.zeros((b_sz, c_sz))

        dh = dh_out[:, t, :] + dh_next
        dc = dh * o * (1.0 - tc * tc) + dc_next
        dz[:, :c_sz] = dc * g * i * (1.0 - i)
        dz[:, c_sz : 2 * c_sz] = dc * c_prev * f * (1.0 - f)
        dz[:, 2 * c_sz : 3 * c_sz] = dc * i * (1.0 - g * g)
        dz[:, 3 * c_sz :] = dh * tc * o * (1.0 - o)

        dw_x += x[:, t, :].T @ dz
        dw_h += h_prev.T @ dz
        db += dz.sum(axis=0)
        dx[:, t, :] = dz @ cell.w_x.T
        dh_next = dz @ cell.w_h.T
        dc_next = dc * f
    return dx, {"w_x": dw_x, "w_h": dw_h, "b": db}


def _reverse_index(lengths: np.ndarray, n_t: int) -> np.ndarray:
    # Reverse each row within its valid length; padding stays in place.
    t = np.arange(n_t)[None, :]
    valid = t < lengths[:, None]
    return np.where(valid, lengths[:, None] - 1 - t, t)


def _reverse_sequence(x: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    idx = _reverse_index(lengths, x.shape[1])
    return x[np.arange(x.shape[0])[:, None], idx]


def _layer_norm(z: np.ndarray, gain, offset):
    mean = z.mean(axis=-1, keepdims=True)
    centered = z - mean
    var = np.mean(centered * centered, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = centered * inv
    return gain * xhat + offset, (centered, inv, xhat)


def _layer_norm_backprop(dy, gain, ln_cache):
    centered, inv, xhat = ln_cache
    n = xhat.shape[-1]
    dxhat = dy * gain
    dvar = np.sum(dxhat * centered, axis=-1, keepdims=True) * (-0.5) * inv**3
    dmean = (
        -np.sum(dxhat, axis=-1, keepdims=True) * inv
        + dvar * np.sum(-2.0 * centered, axis=-1, keepdims=True) / n
    )
    dz = dxhat * inv + dvar * 2.0 * centered / n + dmean / n
    dgain = np.sum(dy * xhat, axis=tuple(range(dy.ndim - 1)))
    doffset = np.sum(dy, axis=tuple(range(dy.ndim - 1)))
    return dz, dgain, doffset


def _as_batch(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        return x[None], True
    if x.ndim == 3:
        return x, False
    raise ValueError("input must be (frames x bins) or (batch x frames x bins)")


def _forward(params: NetworkParams, x, lengths=None, want_cache: bool = False):
    x, squeeze = _as_batch(x)
    if not np.all(np.isfinite(x)):
        raise ValueError("network input must be finite")
    if x.shape[-1] != params.input_dim:
        raise ValueError(f"input dim: expected {params.input_dim}, got {x.shape[-1]}")
    b_sz, n_t = x.shape[0], x.shape[1]
    if lengths is None:
        lengths = np.full(b_sz, n_t, dtype=np.int64)
    else:
        lengths = np.asarray(lengths, dtype=np.int64)
        if lengths.shape != (b_sz,) or np.any(lengths < 1) or np.any(lengths > n_t):
            raise ValueError("lengths must be in [1, n_frames] per batch row")

    z0 = x @ params.fc.w + params.fc.b
    y0, ln_cache = _layer_norm(z0, params.ln_gain, params.ln_offset)
    act = np.maximum(y0, 0.0)

    block_caches = []
    for blk in params.blocks:
        h_f, cache_f = _lstm_run(blk.fwd, act)
        if blk.bwd is not None:
            rev_in = _reverse_sequence(act, lengths)
            h_br, cache_b = _lstm_run(blk.bwd, rev_in)
            h_b = _reverse_sequence(h_br, lengths)
            nxt = act + h_f + h_b
        else:
            cache_b = None
            nxt = act + h_f
        block_caches.append((act, cache_f, cache_b))
        act = nxt

    logits = act @ params.out.w + params.out.b
    pred = expit(logits)
    if want_cache:
        cache = {
            "x": x,
            "lengths": lengths,
            "z0": z0,
            "ln": ln_cache,
            "y0": y0,
            "blocks": block_caches,
            "final_act": act,
            "pred": pred,
        }
        return pred, cache
    return pred[0] if squeeze else pred


def forward(params: NetworkParams, mag, lengths=None) -> np.ndarray:
    """Network output per frame and bin, each value strictly inside (0, 1)."""
    return _forward(params, mag, lengths)


PRED_CLAMP = 1e-7


def loss_cross_entropy(pred, target) -> float:
    """Mean binary cross-entropy with predictions clamped to [1e-7, 1 - 1e-7]."""
    p = np.clip(np.asarray(pred, dtype=np.float64), PRED_CLAMP, 1.0 - PRED_CLAMP)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError("prediction and target shapes differ")
    if np.any((t < 0.0) | (t > 1.0)):
        raise ValueError("targets must lie in [0, 1]")
    return float(np.mean(-(t * np.log(p) + (1.0 - t) * np.log1p(-p))))


def _masked_loss_grad(pred, target, mask):
    """Masked mean BCE and its gradient w.r.t. the logits."""
    p = np.clip(pred, PRED_CLAMP, 1.0 - PRED_CLAMP)
    ce = -(target * np.log(p) + (1.0 - target) * np.log1p(-p))
    m = mask[..., None]
    n_valid = mask.sum() * pred.shape[-1]
    loss = float((ce * m).sum() / n_valid)
    inside = (pred > PRED_CLAMP) & (pred < 1.0 - PRED_CLAMP)
    dlogits = np.where(inside, pred - target, 0.0) * m / n_valid
    return loss, dlogits


def backward(params: NetworkParams, x, target, lengths=None):
    """Loss and gradients for every parameter tensor.

    Returns (loss, grads) where grads has exactly the keys of
    params.tensors().  Padded frames (beyond each row's length) carry no
    loss and no gradient.
    """
    pred, cache = _forward(params, x, lengths, want_cache=True)
    target = np.asarray(target, dtype=np.float64)
    if target.ndim == 2:
        target = target[None]
    if target.shape != pred.shape:
        raise ValueError("target shape must match the prediction")
    if np.any((target < 0.0) | (target > 1.0)):
        raise ValueError("targets must lie in [0, 1]")
    lengths = cache["lengths"]
    n_t = pred.shape[1]
    mask = (np.arange(n_t)[None, :] < lengths[:, None]).astype(np.float64)

    loss, dlogits = _masked_loss_grad(pred, target, mask)
    grads: dict[str, np.ndarray] = {}

    final_act = cache["final_act"]
    grads["out.w"] = np.tensordot(final_act, dlogits, axes=([0, 1], [0, 1]))
    grads["out.b"] = dlogits.sum(axis=(0, 1))
    da = dlogits @ params.out.w.T

    for bi in range(params.n_blocks - 1, -1, -1):
        blk = params.blocks[bi]
        act_in, cache_f, cache_b = cache["blocks"][bi]
        dx_f, g_f = _lstm_backprop(blk.fwd, cache_f, da)
        grads[f"block{bi}.fwd.w_x"] = g_f["w_x"]
        grads[f"block{bi}.fwd.w_h"] = g_f["w_h"]
        grads[f"block{bi}.fwd.b"] = g_f["b"]
        da_next = da + dx_f
        if blk.bwd is not None:
            dh_rev = _reverse_sequence(da, lengths)
            dx_br, g_b = _lstm_backprop(blk.bwd, cache_b, dh_rev)
            grads[f"block{bi}.bwd.w_x"] = g_b["w_x"]
            grads[f"block{bi}.bwd.w_h"] = g_b["w_h"]
            grads[f"block{bi}.bwd.b"] = g_b["b"]
            da_next = da_next + _reverse_sequence(dx_br, lengths)
        da = da_next

    dy0 = da * (cache["y0"] > 0.0)
    dz0, dgain, doffset = _layer_norm_backprop(dy0, params.ln_gain, cache["ln"])
    grads["ln.gain"] = dgain
    grads["ln.offset"] = doffset
    grads["fc.w"] = np.tensordot(cache["x"], dz0, axes=([0, 1], [0, 1]))
    grads["fc.b"] = dz0.sum(axis=(0, 1))
    return loss, grads


def save_network(params: NetworkParams, path) -> None:
    """Text header naming every tensor and its shape, then raw float32 data."""
    tensors = params.tensors()
    lines = [
        _MODEL_MAGIC,
        f"mode {params.mode}",
        f"blocks {params.n_blocks}",
        f"cell {params.cell_size}",
        f"input_dim {params.input_dim}",
        f"output_dim {params.output_dim}",
    ]
    for name, arr in tensors.items():
        lines.append("tensor " + name + " " + " ".join(str(d) for d in arr.shape))
    header = ("\n".join(lines) + "\ndata\n").encode("utf-8")
    blob = b"".join(
        np.ascontiguousarray(arr, dtype="<f4").tobytes() for arr in tensors.values()
    )
    Path(path).write_bytes(header + blob)


def load_network(path) -> NetworkParams:
    raw = Path(path).read_bytes()
    marker = b"\ndata\n"
    split = raw.find(marker)
    if split < 0:
        raise ValueError("model file: missing data section")
    head_lines = raw[:split].decode("utf-8").splitlines()
    if not head_lines or head_lines[0] != _MODEL_MAGIC:
        raise ValueError("model file: bad magic")
    fields = {}
    shapes: list[tuple[str, tuple[int, ...]]] = []
    for line in head_lines[1:]:
        parts = line.split()
        if parts[0] == "tensor":
            shapes.append((parts[1], tuple(int(d) for d in parts[2:])))
        else:
            fields[parts[0]] = parts[1]
    try:
        mode = fields["mode"]
        n_blocks = int(fields["blocks"])
        cell = int(fields["cell"])
        input_dim = int(fields["input_dim"])
        output_dim = int(fields["output_dim"])
    except KeyError as exc:
        raise ValueError(f"model file: missing header field {exc}") from exc
    if mode not in ("UNI", "BI"):
        raise ValueError(f"model file: mode must be UNI or BI, got {mode}")

    data = np.frombuffer(raw[split + len(marker) :], dtype="<f4")
    arrays: dict[str, np.ndarray] = {}
    pos = 0
    for name, shape in shapes:
        n = int(np.prod(shape)) if shape else 1
        if pos + n > data.size:
            raise ValueError(f"model file: truncated data for tensor {name}")
        arrays[name] = data[pos : pos + n].astype(np.float64).reshape(shape)
        pos += n
    if pos != data.size:
        raise ValueError("model file: trailing data after last tensor")

    try:
        blocks = []
        for i in range(n_blocks):
            fwd = LstmCellParams(
                arrays[f"block{i}.fwd.w_x"],
                arrays[f"block{i}.fwd.w_h"],
                arrays[f"block{i}.fwd.b"],
            )
            bwd = None
            if mode == "BI":
                bwd = LstmCellParams(
                    arrays[f"block{i}.bwd.w_x"],
                    arrays[f"block{i}.bwd.w_h"],
                    arrays[f"block{i}.bwd.b"],
                )
            blocks.append(ResBlockParams(fwd, bwd))
        params = NetworkParams(
            DenseParams(arrays["fc.w"], arrays["fc.b"]),
            arrays["ln.gain"],
            arrays["ln.offset"],
            blocks,
            DenseParams(arrays["out.w"], arrays["out.b"]),
            mode == "BI",
            input_dim,
            output_dim,
            cell,
        )
    except KeyError as exc:
        raise ValueError(f"model file: missing tensor {exc}") from exc
    return params
