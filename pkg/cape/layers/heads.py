"""Classification and box-regression heads."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from cape.autodiff import MLP2, Activation, Module, Tensor, ops

BOX_CODE_SIZE = 10
PRIOR_PROBABILITY = 0.01


@dataclass(eq=False)
class DetectionOutput:
    """Head outputs for one layer and one frame.

    ``boxes`` holds per-query ``(dx, dy, dz, log w, log l, log h, sin, cos, vx, vy)``
    with the offsets relative to ``reference`` (normalized global coordinates).
    """

    logits: Tensor
    boxes: Tensor
    reference: Tensor

    @property
    def num_queries(self) -> int:
        return int(self.logits.shape[1])

    def absolute(self) -> Tensor:
        """Box vectors ``[10 x M]`` with the reference point added to the offsets."""
        center = self.boxes[:3] + self.reference.T
        return ops.concat([center, self.boxes[3:]], axis=0)

    def scores(self) -> np.ndarray:
        """Per-class sigmoid probabilities ``[K x M]`` (no gradient)."""
        return expit(self.logits.data)  # type: ignore[no-any-return]


class DetectionHeads(Module):
    """Two perceptrons on every query embedding, shared by all decoder layers."""

    def __init__(
        self,
        channels: int,
        num_classes: int,
        rng: np.random.Generator,
        activation: Activation = Activation.RELU,
    ) -> None:
        self.classifier = MLP2(channels, num_classes, rng, hidden=channels, activation=activation)
        self.regressor = MLP2(channels, BOX_CODE_SIZE, rng, hidden=channels, activation=activation)
        prior_logit = -math.log((1 - PRIOR_PROBABILITY) / PRIOR_PROBABILITY)
        self.classifier.second.bias.data[...] = prior_logit

    def predict_heads(self, embeddings: Tensor, reference: Tensor) -> DetectionOutput:
        """Class logits ``[K x M]`` and box vectors ``[10 x M]`` for ``[C x M]`` embeddings."""
        return DetectionOutput(self.classifier(embeddings), self.regressor(embeddings), reference)

    def __call__(self, embeddings: Tensor, reference: Tensor) -> DetectionOutput:
        return self.predict_heads(embeddings, reference)
