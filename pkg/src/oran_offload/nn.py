"""Flat-vector feed-forward networks and the binary parameter checkpoint format."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from .errors import ShapeMismatch

MAGIC = b"ORANPRM\x00"
VERSION = 1
KINDS = {"mlp": 1, "gru": 2}
_KIND_NAMES = {v: k for k, v in KINDS.items()}


@dataclass
class ModelParams:
    """Parameters of one network as a single float64 vector plus a layer-shape descriptor."""

    vector: np.ndarray
    shape: tuple
    kind: str = "mlp"

    def __post_init__(self):
        self.vector = np.ascontiguousarray(self.vector, dtype=np.float64)
        self.shape = tuple(int(s) for s in self.shape)
        if self.vector.ndim != 1 or self.vector.size != n_params(self.shape, self.kind):
            raise ShapeMismatch(f"{self.vector.size} parameters do not fit {self.kind} shape {self.shape}")
        if not np.all(np.isfinite(self.vector)):
            raise ValueError("non-finite parameter")

    def copy(self) -> "ModelParams":
        return ModelParams(self.vector.copy(), self.shape, self.kind)


def n_params(shape, kind="mlp") -> int:
    if kind == "mlp":
        return sum((a + 1) * b for a, b in zip(shape[:-1], shape[1:]))
    if kind == "gru":
        n_in, hidden, n_out = shape
        return 3 * hidden * (n_in + hidden + 1) + (hidden + 1) * n_out
    raise ValueError(f"unknown model kind {kind!r}")


def mlp_layers(p: ModelParams) -> list[tuple[np.ndarray, np.ndarray]]:
    """(W, b) views into the flat vector; W has shape (fan_in, fan_out)."""
    return _views(p.vector, p.shape)


def mlp_init(sizes, rng, out_scale=1.0) -> ModelParams:
    """He-uniform hidden layers, zero biases."""
    parts = []
    sizes = tuple(sizes)
    for k, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        lim = np.sqrt(6.0 / a)
        if k == len(sizes) - 2:
            lim *= out_scale
        parts.append(rng.uniform(-lim, lim, size=a * b))
        parts.append(np.zeros(b))
    return ModelParams(np.concatenate(parts), sizes, "mlp")


def _as_batch(p: ModelParams, x):
    x = np.ascontiguousarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != p.shape[0]:
        raise ShapeMismatch(f"input of width {X.shape[-1]} for a network expecting {p.shape[0]}")
    return X, single


@njit(cache=True)
def _forward(vec, shape, X, keep):
    """ReLU hidden layers, linear output; with ``keep`` also returns every layer's input."""
    n_layers = shape.size - 1
    acts = [X]
    h = X
    off = 0
    for k in range(n_layers):
        a, b = shape[k], shape[k + 1]
        W = vec[off:off + a * b].reshape(a, b)
        bias = vec[off + a * b:off + a * b + b]
        off += a * b + b
        z = h @ W
        last = k == n_layers - 1
        for i in range(z.shape[0]):
            for j in range(b):
                v = z[i, j] + bias[j]
                z[i, j] = v if (last or v > 0.0) else 0.0
        h = z
        if keep:
            acts.append(h)
    return h, acts


@njit(cache=True)
def _backward(vec, shape, X, selected, actions, target):
    out, acts = _forward(vec, shape, X, True)
    n = X.shape[0]
    n_layers = shape.size - 1
    delta = np.zeros_like(out)
    loss = 0.0
    if selected:  # error on the selected output only
        for i in range(n):
            e = out[i, actions[i]] - target[i, 0]
            loss += e * e
            delta[i, actions[i]] = e * 2.0 / n
    else:
        for i in range(n):
            for j in range(out.shape[1]):
                e = out[i, j] - target[i, j]
                loss += e * e
                delta[i, j] = e * 2.0 / n
    grad = np.empty_like(vec)
    offs = np.zeros(n_layers + 1, dtype=np.int64)
    for k in range(n_layers):
        offs[k + 1] = offs[k] + shape[k] * shape[k + 1] + shape[k + 1]
    for k in range(n_layers - 1, -1, -1):
        a, b = shape[k], shape[k + 1]
        o = offs[k]
        a_in = acts[k]
        grad[o:o + a * b] = (a_in.T @ delta).ravel()
        for j in range(b):
            s = 0.0
            for i in range(n):
                s += delta[i, j]
            grad[o + a * b + j] = s
        if k:
            d = delta @ vec[o:o + a * b].reshape(a, b).T
            for i in range(n):
                for j in range(a):
                    if a_in[i, j] <= 0.0:
                        d[i, j] = 0.0
            delta = d
    return grad, loss / n


def mlp_forward(p: ModelParams, x) -> np.ndarray:
    """ReLU hidden layers, linear output; accepts one vector or a batch of rows."""
    X, single = _as_batch(p, x)
    out, _ = _forward(p.vector, np.asarray(p.shape, dtype=np.int64), X, False)
    return out[0] if single else out


def mlp_backward(p: ModelParams, x, target, actions=None) -> tuple[np.ndarray, float]:
    """Gradient of the mean squared error and the loss value.

    With ``actions`` the error is taken on the selected output of each row
    only (Q-learning); otherwise on every output against a target array.
    """
    X, _ = _as_batch(p, x)
    n = X.shape[0]
    target = np.asarray(target, dtype=float)
    if actions is not None:
        a = np.asarray(actions, dtype=np.int64).reshape(n)
        if np.any((a < 0) | (a >= p.shape[-1])):
            raise ShapeMismatch("action index outside the output layer")
        t = np.ascontiguousarray(target.reshape(n, 1))
    else:
        a = np.zeros(n, dtype=np.int64)
        t = np.ascontiguousarray(target.reshape(n, p.shape[-1]))
    return _backward(p.vector, np.asarray(p.shape, dtype=np.int64), X, actions is not None, a, t)


def _views(vec, shape):
    out, off = [], 0
    for a, b in zip(shape[:-1], shape[1:]):
        out.append((vec[off:off + a * b].reshape(a, b), vec[off + a * b:off + a * b + b]))
        off += a * b + b
    return out


def save_params(p: ModelParams, path) -> None:
    """Little-endian checkpoint: 16-byte header, shape descriptor, float64 vector."""
    buf = bytearray(MAGIC)
    buf += struct.pack("<II", VERSION, KINDS[p.kind])
    buf += struct.pack("<Q", len(p.shape))
    buf += struct.pack(f"<{len(p.shape)}Q", *p.shape)
    buf += struct.pack("<Q", p.vector.size)
    buf += p.vector.astype("<f8").tobytes()
    Path(path).write_bytes(bytes(buf))


def load_params(path) -> ModelParams:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ValueError("not a parameter checkpoint")
    version, kind = struct.unpack_from("<II", raw, 8)
    if version != VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    off = 16
    (n_shape,) = struct.unpack_from("<Q", raw, off)
    off += 8
    shape = struct.unpack_from(f"<{n_shape}Q", raw, off)
    off += 8 * n_shape
    (n,) = struct.unpack_from("<Q", raw, off)
    off += 8
    vec = np.frombuffer(raw, dtype="<f8", count=n, offset=off).astype(np.float64)
    return ModelParams(vec, shape, _KIND_NAMES[kind])
