"""Pre-norm transformer decoder over multi-view keys."""

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from cape.autodiff import MLP2, Activation, LayerNorm, Module, Tensor
from cape.layers.attention import AttentionRecord, BilateralCrossAttention, SelfAttention
from cape.models.config import ModelConfig

QueryPEFn = Callable[[Tensor], list[Tensor]]


class DecoderLayer(Module):
    """Self-attention, cross-attention and feed-forward, each pre-normed with a residual."""

    def __init__(
        self,
        channels: int,
        num_heads: int,
        rng: np.random.Generator,
        bilateral: bool = True,
        per_view_softmax: bool = False,
        ffn_ratio: int = 4,
        activation: Activation = Activation.RELU,
    ) -> None:
        self.norm_self = LayerNorm(channels)
        self.self_attn = SelfAttention(channels, num_heads, rng)
        self.norm_cross = LayerNorm(channels)
        self.cross_attn = BilateralCrossAttention(
            channels, num_heads, rng, bilateral=bilateral, per_view_softmax=per_view_softmax
        )
        self.norm_ffn = LayerNorm(channels)
        self.ffn = MLP2(channels, channels, rng, hidden=ffn_ratio * channels, activation=activation)

    def __call__(
        self,
        embeddings: Tensor,
        self_position: Tensor,
        features: Sequence[Tensor],
        key_pes: Sequence[Tensor],
        query_pes: Sequence[Tensor],
        record: bool = False,
    ) -> tuple[Tensor, AttentionRecord | None]:
        o = embeddings + self.self_attn.attend(self.norm_self(embeddings), self_position)
        update, maps = self.cross_attn.attend(
            self.norm_cross(o), features, key_pes, query_pes, record=record
        )
        o = o + update
        o = o + self.ffn(self.norm_ffn(o))
        return o, maps


def decoder_layer(
    layer: DecoderLayer,
    embeddings: Tensor,
    self_position: Tensor,
    features: Sequence[Tensor],
    key_pes: Sequence[Tensor],
    query_pes: Sequence[Tensor],
) -> Tensor:
    """Apply one decoder layer and return the new embeddings."""
    out, _ = layer(embeddings, self_position, features, key_pes, query_pes)
    return out


@dataclass
class DecodeResult:
    """Embeddings after every layer, plus attention maps when recorded."""

    outputs: list[Tensor] = field(default_factory=list)
    records: list[AttentionRecord] = field(default_factory=list)


class TransformerDecoder(Module):
    """A stack of ``L`` decoder layers sharing the query-PE function between them."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator) -> None:
        self.layers = [
            DecoderLayer(
                config.channels,
                config.num_heads,
                rng,
                bilateral=config.bilateral,
                per_view_softmax=config.per_view_softmax,
                ffn_ratio=config.ffn_ratio,
                activation=config.activation,
            )
            for _ in range(config.num_layers)
        ]

    def __len__(self) -> int:
        return len(self.layers)

    def step(
        self,
        index: int,
        embeddings: Tensor,
        self_position: Tensor,
        features: Sequence[Tensor],
        key_pes: Sequence[Tensor],
        query_pes: QueryPEFn,
        record: bool = False,
    ) -> tuple[Tensor, AttentionRecord | None]:
        """Run layer ``index``; query PEs are recomputed from the layer's input embeddings."""
        return self.layers[index](
            embeddings, self_position, features, key_pes, query_pes(embeddings), record=record
        )

    def decode(
        self,
        embeddings: Tensor,
        self_position: Tensor,
        features: Sequence[Tensor],
        key_pes: Sequence[Tensor],
        query_pes: QueryPEFn,
        record: bool = False,
    ) -> DecodeResult:
        """Run every layer and keep each intermediate output for per-layer supervision."""
        result = DecodeResult()
        o = embeddings
        for i in range(len(self.layers)):
            o, maps = self.step(i, o, self_position, features, key_pes, query_pes, record)
            result.outputs.append(o)
            if maps is not None:
                result.records.append(maps)
        return result
