"""Model components: embeddings, attention, decoder, temporal fusion and heads."""

from cape.layers.attention import AttentionRecord, BilateralCrossAttention, SelfAttention
from cape.layers.decoder import DecodeResult, DecoderLayer, TransformerDecoder, decoder_layer
from cape.layers.detector import CapeDetector, ForwardResult, temporal_forward
from cape.layers.embedding import (
    CoordinateNormalizer,
    KeyPositionEncoder,
    QueryPositionEncoder,
    key_coordinates,
    query_coordinates,
)
from cape.layers.heads import BOX_CODE_SIZE, DetectionHeads, DetectionOutput
from cape.layers.temporal import TemporalFusion

__all__ = [
    "BOX_CODE_SIZE",
    "AttentionRecord",
    "BilateralCrossAttention",
    "CapeDetector",
    "CoordinateNormalizer",
    "DecodeResult",
    "DecoderLayer",
    "DetectionHeads",
    "DetectionOutput",
    "ForwardResult",
    "KeyPositionEncoder",
    "QueryPositionEncoder",
    "SelfAttention",
    "TemporalFusion",
    "TransformerDecoder",
    "decoder_layer",
    "key_coordinates",
    "query_coordinates",
    "temporal_forward",
]
