"""Parameter containers and the small layers every model component is built from.

All layers use the channel-first convention: an input holding ``n`` vectors of
width ``w`` has shape ``[w x n]``.
"""

from collections.abc import Iterator, Mapping
from enum import Enum

import numpy as np

from cape.autodiff import ops
from cape.autodiff.tensor import Tensor
from cape.exceptions import CheckpointError, ShapeMismatchError


class Activation(str, Enum):
    """Nonlinearity between the two layers of an ``MLP2``."""

    RELU = "relu"
    IDENTITY = "identity"


class Module:
    """Base class giving layers a deterministic parameter registry.

    Parameters are discovered from instance attributes in assignment order:
    tensors with ``requires_grad``, child modules, and lists of child modules.
    """

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, value in vars(self).items():
            if name.startswith("_"):
                continue
            full = f"{prefix}{name}"
            if isinstance(value, Tensor) and value.requires_grad:
                yield full, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{full}.")
            elif isinstance(value, list | tuple):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{full}.{i}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        """Copy every parameter's values, keyed by dotted name."""
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: Mapping[str, np.ndarray]) -> None:
        """Overwrite parameter values in place.

        Raises:
            CheckpointError: If names or shapes do not match this module.
        """
        params = dict(self.named_parameters())
        missing = sorted(set(params) - set(state))
        unexpected = sorted(set(state) - set(params))
        if missing or unexpected:
            raise CheckpointError(
                f"State mismatch: missing={missing[:5]}, unexpected={unexpected[:5]}"
            )
        for name, p in params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.shape:
                raise CheckpointError(
                    f"Shape mismatch for {name}: expected {p.shape}, got {value.shape}"
                )
            p.data[...] = value


def xavier_uniform(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


class Linear(Module):
    """Affine map ``W x + b`` with ``W`` of shape ``[out x in]``."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator) -> None:
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Tensor(xavier_uniform(rng, out_features, in_features), requires_grad=True)
        self.bias = Tensor(np.zeros((out_features, 1)), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 2 or x.shape[0] != self.in_features:
            raise ShapeMismatchError(
                "linear", x.shape, (self.in_features,), detail="input width mismatch"
            )
        return self.weight @ x + self.bias


def mlp2(x: Tensor, first: Linear, second: Linear, activation: Activation) -> Tensor:
    """Two-layer perceptron: linear, nonlinearity, linear."""
    hidden = first(x)
    if activation == Activation.RELU:
        hidden = ops.relu(hidden)
    return second(hidden)


class MLP2(Module):
    """Two-layer perceptron used for every embedding and head in the model."""

    def __init__(
        self,
        in_features: int,
        out_features: int,
        rng: np.random.Generator,
        hidden: int | None = None,
        activation: Activation = Activation.RELU,
    ) -> None:
        width = hidden or out_features
        self.in_features = in_features
        self.out_features = out_features
        self.activation = Activation(activation)
        self.first = Linear(in_features, width, rng)
        self.second = Linear(width, out_features, rng)

    def __call__(self, x: Tensor) -> Tensor:
        return mlp2(x, self.first, self.second, self.activation)


class LayerNorm(Module):
    """Layer normalization over the channel axis (axis 0)."""

    def __init__(self, width: int, eps: float = 1e-5) -> None:
        self.eps = eps
        self.gamma = Tensor(np.ones((width, 1)), requires_grad=True)
        self.beta = Tensor(np.zeros((width, 1)), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, self.gamma, self.beta, axis=0, eps=self.eps)
