"""Tape-based reverse-mode automatic differentiation on dense numpy buffers.

Tensors store float32 or float64 data; reductions accumulate in float64.
Each op records its parents and a pullback closure on the output tensor;
`backward` walks the graph once and then frees it, so training loops
re-record per step. There is no global tape: interleaved models cannot
interact.
"""

from __future__ import annotations

import math
import threading
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.special import erf

_state = threading.local()


def _recording() -> bool:
    return getattr(_state, "recording", True)


class no_grad:
    """Context manager that disables graph recording (inference mode)."""

    def __enter__(self):
        self._prev = _recording()
        _state.recording = False
        return self

    def __exit__(self, *exc):
        _state.recording = self._prev
        return False


class ShapeError(ValueError):
    """Operand shapes violate an op's contract."""


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_pullback")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._pullback: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{flag})"

    # Operator sugar; the named functions below are the actual op set.
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _make(data: np.ndarray, parents: Sequence[Tensor], pullback) -> Tensor:
    out = Tensor(data, dtype=data.dtype)
    if _recording() and any(p.requires_grad or p._parents for p in parents):
        out.requires_grad = any(p.requires_grad or p._parents for p in parents)
        out._parents = tuple(parents)
        out._pullback = pullback
    return out


def _accumulate(t: Tensor, grad: np.ndarray, sink: dict[int, np.ndarray]) -> None:
    key = id(t)
    if key in sink:
        sink[key] = sink[key] + grad
    else:
        sink[key] = grad


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.astype(np.result_type(grad.dtype, np.float32), copy=False)


def backward(loss: Tensor) -> None:
    """Populate grads of every requires_grad leaf reachable from a scalar loss.

    The recorded graph is freed afterwards.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")

    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(topo):
        grad = grads.pop(id(node), None)
        if grad is None:
            continue
        if node._pullback is not None:
            node._pullback(grad, grads)
        elif node.requires_grad:
            node.grad = grad.astype(node.data.dtype, copy=False) if node.grad is None \
                else node.grad + grad.astype(node.data.dtype, copy=False)
        node._parents = ()
        node._pullback = None


def _leaf_or_flow(t: Tensor, grad: np.ndarray, grads: dict[int, np.ndarray]) -> None:
    """Route a gradient to a leaf's .grad or onward through the graph."""
    if t._pullback is not None or t._parents:
        _accumulate(t, grad, grads)
    elif t.requires_grad:
        g = grad.astype(t.data.dtype, copy=False)
        t.grad = g if t.grad is None else t.grad + g


# -- elementwise and linear ops ----------------------------------------------


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = a.data + b.data

    def pull(grad, grads):
        _leaf_or_flow(a, _unbroadcast(grad, a.data.shape), grads)
        _leaf_or_flow(b, _unbroadcast(grad, b.data.shape), grads)

    return _make(out, (a, b), pull)


def sub(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = a.data - b.data

    def pull(grad, grads):
        _leaf_or_flow(a, _unbroadcast(grad, a.data.shape), grads)
        _leaf_or_flow(b, _unbroadcast(-grad, b.data.shape), grads)

    return _make(out, (a, b), pull)


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = a.data * b.data

    def pull(grad, grads):
        _leaf_or_flow(a, _unbroadcast(grad * b.data, a.data.shape), grads)
        _leaf_or_flow(b, _unbroadcast(grad * a.data, b.data.shape), grads)

    return _make(out, (a, b), pull)


def matmul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} @ {b.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def pull(grad, grads):
        _leaf_or_flow(a, grad @ b.data.T, grads)
        _leaf_or_flow(b, a.data.T @ grad, grads)

    return _make(out, (a, b), pull)


def affine(x, w, b) -> Tensor:
    """x @ w + b with the bias broadcast over rows."""
    x, w, b = _wrap(x), _wrap(w), _wrap(b)
    if x.data.ndim != 2 or w.data.ndim != 2 or x.data.shape[1] != w.data.shape[0]:
        raise ShapeError(f"affine shapes incompatible: {x.shape} @ {w.shape}")
    if b.data.shape != (w.data.shape[1],):
        raise ShapeError(f"affine bias shape {b.shape} != ({w.data.shape[1]},)")
    out = x.data @ w.data + b.data

    def pull(grad, grads):
        _leaf_or_flow(x, grad @ w.data.T, grads)
        _leaf_or_flow(w, x.data.T @ grad, grads)
        _leaf_or_flow(b, grad.sum(axis=0), grads)

    return _make(out, (x, w, b), pull)


def relu(x) -> Tensor:
    x = _wrap(x)
    out = np.maximum(x.data, 0)

    def pull(grad, grads):
        _leaf_or_flow(x, grad * (x.data > 0), grads)

    return _make(out, (x,), pull)


def gelu(x) -> Tensor:
    """Exact (erf-based) GELU."""
    x = _wrap(x)
    cdf = 0.5 * (1.0 + erf(x.data / math.sqrt(2.0)))
    out = (x.data * cdf).astype(x.data.dtype)

    def pull(grad, grads):
        pdf = np.exp(-0.5 * x.data.astype(np.float64) ** 2) / math.sqrt(2.0 * math.pi)
        local = cdf + x.data * pdf
        _leaf_or_flow(x, (grad * local).astype(x.data.dtype), grads)

    return _make(out, (x,), pull)


def exp(x) -> Tensor:
    x = _wrap(x)
    out = np.exp(x.data)

    def pull(grad, grads):
        _leaf_or_flow(x, grad * out, grads)

    return _make(out, (x,), pull)


def tanh(x) -> Tensor:
    x = _wrap(x)
    out = np.tanh(x.data)

    def pull(grad, grads):
        _leaf_or_flow(x, grad * (1.0 - out * out), grads)

    return _make(out, (x,), pull)


def mean(x, axis: int | None = None) -> Tensor:
    x = _wrap(x)
    out64 = np.mean(x.data, axis=axis, dtype=np.float64)
    out = np.asarray(out64, dtype=x.data.dtype)
    count = x.data.size if axis is None else x.data.shape[axis]

    def pull(grad, grads):
        if axis is None:
            g = np.broadcast_to(grad / count, x.data.shape)
        else:
            g = np.broadcast_to(np.expand_dims(grad / count, axis), x.data.shape)
        _leaf_or_flow(x, g.astype(x.data.dtype), grads)

    return _make(out, (x,), pull)


def mse_loss(pred, target, weights: np.ndarray | None = None) -> Tensor:
    """Mean squared error; optional nonnegative weights (mean becomes weighted)."""
    pred, target = _wrap(pred), _wrap(target)
    if pred.data.shape != target.data.shape:
        raise ShapeError(f"mse_loss shapes differ: {pred.shape} vs {target.shape}")
    diff = pred.data.astype(np.float64) - target.data.astype(np.float64)
    if weights is None:
        total = float(np.mean(diff**2))
        scale = 2.0 / diff.size
    else:
        wsum = float(np.sum(weights))
        if wsum <= 0:
            raise ValueError("mse_loss weights must have positive sum")
        total = float(np.sum(weights * diff**2) / wsum)
        scale = 2.0 / wsum
    out = np.asarray(total, dtype=pred.data.dtype)

    def pull(grad, grads):
        g = grad * scale * diff
        if weights is not None:
            g = g * weights
        _leaf_or_flow(pred, g.astype(pred.data.dtype), grads)
        _leaf_or_flow(target, (-g).astype(target.data.dtype), grads)

    return _make(out, (pred, target), pull)


# -- shape ops ----------------------------------------------------------------


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [_wrap(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: {exc}") from exc
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def pull(grad, grads):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * grad.ndim
            idx[axis] = slice(lo, hi)
            _leaf_or_flow(t, grad[tuple(idx)], grads)

    return _make(out, tuple(tensors), pull)


def slice_axis(x, axis: int, start: int, stop: int) -> Tensor:
    """Contiguous slice [start:stop) along one axis."""
    x = _wrap(x)
    if not (0 <= start < stop <= x.data.shape[axis]):
        raise ShapeError(
            f"slice [{start}:{stop}) out of range for axis {axis} of {x.shape}"
        )
    idx = [slice(None)] * x.data.ndim
    idx[axis] = slice(start, stop)
    out = x.data[tuple(idx)].copy()

    def pull(grad, grads):
        g = np.zeros_like(x.data)
        g[tuple(idx)] = grad
        _leaf_or_flow(x, g, grads)

    return _make(out, (x,), pull)


def transpose(x, axes: tuple[int, ...] | None = None) -> Tensor:
    x = _wrap(x)
    out = np.transpose(x.data, axes).copy()
    inverse = None if axes is None else tuple(np.argsort(axes))

    def pull(grad, grads):
        _leaf_or_flow(x, np.transpose(grad, inverse), grads)

    return _make(out, (x,), pull)


def reshape(x, shape: tuple[int, ...]) -> Tensor:
    x = _wrap(x)
    out = x.data.reshape(shape)

    def pull(grad, grads):
        _leaf_or_flow(x, grad.reshape(x.data.shape), grads)

    return _make(out, (x,), pull)


# -- series ops ----------------------------------------------------------------


@lru_cache(maxsize=64)
def _ma_matrix(n: int, k: int) -> np.ndarray:
    """Row-stochastic matrix applying a centred k-point reflect-padded mean."""
    pad_left = (k - 1) // 2
    pad_right = k - 1 - pad_left
    if max(pad_left, pad_right) >= n:
        raise ShapeError(f"moving average kernel {k} too long for length {n}")
    mat = np.zeros((n, n), dtype=np.float64)
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        padded = np.pad(e, (pad_left, pad_right), mode="reflect")
        mat[:, j] = np.convolve(padded, np.ones(k) / k, mode="valid")
    return mat


def moving_average_1d(x, k: int, axis: int = 0) -> Tensor:
    """Centred k-point running mean along `axis` with reflect padding.

    Constant sequences are preserved exactly (the kernel matrix is
    row-stochastic).
    """
    x = _wrap(x)
    n = x.data.shape[axis]
    mat = _ma_matrix(n, int(k))
    moved = np.moveaxis(x.data, axis, -1).astype(np.float64)
    out = np.moveaxis(moved @ mat.T, -1, axis).astype(x.data.dtype)

    def pull(grad, grads):
        gmoved = np.moveaxis(grad, axis, -1).astype(np.float64)
        g = np.moveaxis(gmoved @ mat, -1, axis).astype(x.data.dtype)
        _leaf_or_flow(x, g, grads)

    return _make(out, (x,), pull)


def rfft_magnitude(x) -> Tensor:
    """Magnitude spectrum of a real series; forward-only (never differentiated)."""
    x = _wrap(x)
    return Tensor(np.abs(np.fft.rfft(np.asarray(x.data, dtype=np.float64), axis=0)))
