"""AdamW with decoupled weight decay and the warmup/step-decay LR schedule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor

__all__ = ["LrSchedule", "AdamW", "OptimizerError"]


class OptimizerError(RuntimeError):
    """Raised when a step is attempted without populated gradients."""


@dataclass(frozen=True)
class LrSchedule:
    """Linear warmup to ``base_lr`` followed by stepwise exponential decay."""

    base_lr: float = 1.0e-5
    warmup_start_lr: float = 2.0e-6
    warmup_epochs: int = 3
    decay_factor: float = 0.1
    decay_every_epochs: int = 3

    def __post_init__(self):
        if self.base_lr <= 0 or self.warmup_start_lr <= 0:
            raise ValueError("learning rates must be positive")
        if self.warmup_start_lr > self.base_lr:
            raise ValueError("warmup_start_lr must not exceed base_lr")
        if not 0.0 < self.decay_factor < 1.0:
            raise ValueError("decay_factor must lie in (0, 1)")
        if self.warmup_epochs < 0 or self.decay_every_epochs < 1:
            raise ValueError("invalid schedule epochs")

    def lr_at(self, epoch: int) -> float:
        if epoch < self.warmup_epochs:
            frac = epoch / self.warmup_epochs
            return self.warmup_start_lr + (self.base_lr - self.warmup_start_lr) * frac
        steps = (epoch - self.warmup_epochs) // self.decay_every_epochs
        return self.base_lr * self.decay_factor**steps


class AdamW:
    """Decoupled-weight-decay Adam over a named parameter list.

    The decay is applied directly to the parameter before the adaptive
    update, so it never enters the moment estimates.
    """

    def __init__(
        self,
        params: list[tuple[str, Tensor]],
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: float = 0.05,
    ):
        self.params = list(params)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in self.params}
        self.v = {name: np.zeros_like(p.data) for name, p in self.params}

    def step(self, lr: float) -> None:
        missing = [name for name, p in self.params if p.grad is None]
        if missing:
            raise OptimizerError(f"gradients missing for: {', '.join(missing[:5])}")
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, p in self.params:
            g = p.grad
            if self.weight_decay != 0.0:
                p.data -= lr * self.weight_decay * p.data
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def zero_grad(self) -> None:
        for _, p in self.params:
            p.grad = None
