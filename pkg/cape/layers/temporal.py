"""Ego-motion-aligned fusion of the current and previous frames' decoder embeddings."""

import numpy as np

from cape.autodiff import MLP2, Activation, Module, Tensor, ops
from cape.exceptions import ShapeMismatchError
from cape.geometry import EgoMotion
from cape.models.config import FusionKind

MOTION_WIDTH = 12


class TemporalFusion(Module):
    """Fuses two query streams.

    Channel attention aligns the other frame's embeddings by an ego-motion
    embedding, predicts two gate logits per channel from ``[o; a]`` and mixes
    with their pairwise softmax. The concat variant adds a perceptron of
    ``[o; a]`` to ``o`` instead.
    """

    def __init__(
        self,
        channels: int,
        rng: np.random.Generator,
        kind: FusionKind = FusionKind.CHANNEL_ATTENTION,
        use_ego: bool = True,
        activation: Activation = Activation.RELU,
    ) -> None:
        self.channels = channels
        self.kind = FusionKind(kind)
        self.use_ego = use_ego
        self.ego = MLP2(MOTION_WIDTH, channels, rng, activation=activation)
        width = 2 * channels if self.kind == FusionKind.CHANNEL_ATTENTION else channels
        self.mix = MLP2(2 * channels, width, rng, activation=activation)
        self.fixed_gates: tuple[float, float] | None = None

    def ego_motion_embedding(self, motion: EgoMotion) -> Tensor:
        """``[C x 1]`` embedding of the motion's top three rows."""
        return self.ego(Tensor(motion.vec12().reshape(MOTION_WIDTH, 1)))

    def _align(self, embeddings: Tensor, motion: EgoMotion) -> Tensor:
        if not self.use_ego:
            return embeddings
        return embeddings * self.ego_motion_embedding(motion)

    def gates(self, own: Tensor, aligned: Tensor) -> tuple[Tensor, Tensor]:
        """Per-channel weights ``(w1, w2)`` with ``w1 + w2 = 1``."""
        if self.fixed_gates is not None:
            w1, w2 = self.fixed_gates
            return Tensor(np.full(own.shape, w1)), Tensor(np.full(own.shape, w2))
        logits = self.mix(ops.concat([own, aligned], axis=0))
        c = self.channels
        pair = ops.softmax(ops.stack([logits[:c], logits[c:]], axis=0), axis=0)
        return pair[0], pair[1]

    def _fuse_one(self, own: Tensor, other: Tensor, motion: EgoMotion) -> Tensor:
        aligned = self._align(other, motion)
        if self.kind == FusionKind.CONCAT_MLP:
            return own + self.mix(ops.concat([own, aligned], axis=0))
        w1, w2 = self.gates(own, aligned)
        return w1 * own + w2 * aligned

    def fuse_queries(
        self, current: Tensor, previous: Tensor, motion: EgoMotion
    ) -> tuple[Tensor, Tensor]:
        """Return ``(fused current, fused previous)``.

        The previous stream is fused by a mirrored pass of the same weights,
        aligning the current embeddings with the inverse motion.

        Raises:
            ShapeMismatchError: If the two streams differ in shape.
        """
        if current.shape != previous.shape or current.shape[0] != self.channels:
            raise ShapeMismatchError("fuse_queries", current.shape, previous.shape)
        fused_current = self._fuse_one(current, previous, motion)
        fused_previous = self._fuse_one(previous, current, motion.inverse())
        return fused_current, fused_previous
