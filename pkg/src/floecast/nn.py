"""Parameter registry and initializers shared by the trainable models."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    """Glorot-normal weight matrix, float32."""
    scale = np.sqrt(2.0 / (fan_in + fan_out))
    return (rng.standard_normal((fan_in, fan_out)) * scale).astype(np.float32)


class ParamStore:
    """Named trainable tensors with deterministic iteration order."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, array: np.ndarray) -> Tensor:
        if name in self._params:
            raise KeyError(f"duplicate parameter name {name!r}")
        t = Tensor(np.asarray(array, dtype=np.float32), requires_grad=True)
        self._params[name] = t
        return t

    def add_linear(
        self,
        prefix: str,
        fan_in: int,
        fan_out: int,
        rng: np.random.Generator,
        zero: bool = False,
    ) -> None:
        w = np.zeros((fan_in, fan_out), np.float32) if zero else glorot(rng, fan_in, fan_out)
        self.add(prefix + ".w", w)
        self.add(prefix + ".b", np.zeros(fan_out, np.float32))

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params)

    def tensors(self) -> list[Tensor]:
        return list(self._params.values())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self._params.items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self._params) - set(state)
        extra = set(state) - set(self._params)
        if missing or extra:
            raise KeyError(
                f"parameter names mismatch (missing={sorted(missing)}, "
                f"unexpected={sorted(extra)})"
            )
        for name, tensor in self._params.items():
            arr = np.asarray(state[name], dtype=tensor.data.dtype)
            if arr.shape != tensor.data.shape:
                raise ValueError(
                    f"parameter {name!r}: shape {arr.shape} != {tensor.data.shape}"
                )
            tensor.data = arr.copy()
            tensor.grad = None


def rowwise_affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Affine map applied to the last axis of an N-D tensor."""
    shape = x.shape
    flat = ad.reshape(x, (int(np.prod(shape[:-1], dtype=np.int64)), shape[-1]))
    out = ad.affine(flat, w, b)
    return ad.reshape(out, shape[:-1] + (w.shape[1],))


def linear(params: ParamStore, prefix: str, x: Tensor) -> Tensor:
    return rowwise_affine(x, params[prefix + ".w"], params[prefix + ".b"])


def residual_mlp(params: ParamStore, prefix: str, x: Tensor) -> Tensor:
    """x + W2 . gelu(W1 . x) acting on the channel (last) axis."""
    h = ad.gelu(linear(params, prefix + ".fc1", x))
    return ad.add(x, linear(params, prefix + ".fc2", h))
