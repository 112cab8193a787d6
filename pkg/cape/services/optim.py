"""Adaptive-moment optimizer with cosine-annealed step size."""

import math
from collections.abc import Sequence

import numpy as np

from cape.autodiff import Tensor
from cape.models.config import OptimConfig


def cosine_lr(step: int, config: OptimConfig) -> float:
    """Step size at ``step``, decaying from ``lr`` to ``lr * min_lr_ratio``."""
    if config.steps <= 1:
        return config.lr
    progress = min(step / (config.steps - 1), 1.0)
    floor = config.lr * config.min_lr_ratio
    return floor + 0.5 * (config.lr - floor) * (1.0 + math.cos(math.pi * progress))


def clip_grad_norm(params: Sequence[Tensor], max_norm: float) -> float:
    """Scale gradients in place so their global norm is at most ``max_norm``.

    Returns:
        The norm before clipping.
    """
    grads = [p.grad for p in params if p.grad is not None]
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if norm > max_norm and norm > 0:
        factor = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * factor
    return norm


class AdamOptimizer:
    """Adam with decoupled weight decay."""

    def __init__(self, params: Sequence[Tensor], config: OptimConfig) -> None:
        self.params = list(params)
        self.config = config
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]
        self._t = 0

    def step(self, lr: float) -> None:
        cfg = self.config
        self._t += 1
        bias1 = 1.0 - cfg.beta1**self._t
        bias2 = 1.0 - cfg.beta2**self._t
        for p, m, v in zip(self.params, self._m, self._v, strict=True):
            if p.grad is None:
                continue
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * p.grad
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * p.grad**2
            update = (m / bias1) / (np.sqrt(v / bias2) + cfg.eps)
            p.data -= lr * (update + cfg.weight_decay * p.data)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def state_dict(self, names: Sequence[str]) -> dict[str, np.ndarray]:
        """Moment estimates keyed ``m.<name>`` and ``v.<name>``, plus the step count ``t``."""
        state = {"t": np.asarray(self._t, dtype=np.int64)}
        for name, m, v in zip(names, self._m, self._v, strict=True):
            state[f"m.{name}"] = m.copy()
            state[f"v.{name}"] = v.copy()
        return state

    def load_state_dict(self, names: Sequence[str], state: dict[str, np.ndarray]) -> None:
        """Restore ``state_dict`` output for parameters listed in the same order.

        Raises:
            ValueError: If the keys or shapes do not match the parameters.
        """
        expected = {"t"} | {f"{k}.{name}" for name in names for k in ("m", "v")}
        if set(state) != expected:
            raise ValueError("Optimizer state does not match the parameters")
        for name, m, v in zip(names, self._m, self._v, strict=True):
            if state[f"m.{name}"].shape != m.shape or state[f"v.{name}"].shape != v.shape:
                raise ValueError(f"Optimizer state shape mismatch for {name}")
        self._t = int(state["t"])
        for name, m, v in zip(names, self._m, self._v, strict=True):
            m[...] = state[f"m.{name}"]
            v[...] = state[f"v.{name}"]
