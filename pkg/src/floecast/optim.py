"""First-order optimizers over autodiff parameter tensors.

Both optimizers consume the `.grad` buffers populated by `backward` and
zero them after applying an update, so each training step re-records its
graph from scratch.
"""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from .autodiff import Tensor


class MissingGradError(RuntimeError):
    """A parameter reached `step` without a populated gradient."""


def _check_grads(params: list[Tensor]) -> None:
    for i, p in enumerate(params):
        if p.grad is None:
            raise MissingGradError(
                f"parameter {i} (shape {p.data.shape}) has no gradient; "
                "call backward() before step()"
            )


class SGD:
    """Plain stochastic gradient descent."""

    def __init__(self, params: Iterable[Tensor], lr: float = 1e-3):
        self.params = list(params)
        self.lr = float(lr)
        self.step_count = 0

    def step(self) -> None:
        _check_grads(self.params)
        for p in self.params:
            p.data = p.data - self.lr * p.grad
            p.grad = None
        self.step_count += 1


class Adam:
    """Adam with bias correction (defaults beta1=0.9, beta2=0.999, eps=1e-8)."""

    def __init__(
        self,
        params: Iterable[Tensor],
        lr: float = 1e-3,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        lr_schedule: Callable[[int], float] | None = None,
    ):
        self.params = list(params)
        self.lr = float(lr)
        self.betas = (float(betas[0]), float(betas[1]))
        self.eps = float(eps)
        self.lr_schedule = lr_schedule
        self.step_count = 0
        self.m = [np.zeros_like(p.data, dtype=np.float64) for p in self.params]
        self.v = [np.zeros_like(p.data, dtype=np.float64) for p in self.params]

    def step(self) -> None:
        _check_grads(self.params)
        self.step_count += 1
        t = self.step_count
        lr = self.lr if self.lr_schedule is None else float(self.lr_schedule(t))
        b1, b2 = self.betas
        c1 = 1.0 - b1**t
        c2 = 1.0 - b2**t
        for i, p in enumerate(self.params):
            g = p.grad.astype(np.float64)
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g
            m_hat = self.m[i] / c1
            v_hat = self.v[i] / c2
            update = lr * m_hat / (np.sqrt(v_hat) + self.eps)
            p.data = (p.data.astype(np.float64) - update).astype(p.data.dtype)
            p.grad = None
