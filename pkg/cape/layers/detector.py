"""The full detector: embeddings, decoder, optional temporal stream, heads."""

import logging
from dataclasses import dataclass, field

import numpy as np

from cape.autodiff import Module, Tensor
from cape.exceptions import CapeError
from cape.geometry import Camera, CameraRig, EgoMotion, Extrinsics, propagate_reference
from cape.layers.attention import AttentionRecord
from cape.layers.decoder import DecodeResult, QueryPEFn, TransformerDecoder
from cape.layers.embedding import (
    CoordinateNormalizer,
    KeyPositionEncoder,
    QueryPositionEncoder,
    key_coordinates,
    query_coordinates,
)
from cape.layers.heads import DetectionHeads, DetectionOutput
from cape.layers.temporal import TemporalFusion
from cape.models.config import ExperimentConfig, PEMode, TemporalMode
from cape.models.scene import Frame, SceneSample

logger = logging.getLogger(__name__)


@dataclass
class ForwardResult:
    """Per-layer head outputs of the current (and optionally previous) frame."""

    current: list[DetectionOutput] = field(default_factory=list)
    previous: list[DetectionOutput] | None = None
    records: list[AttentionRecord] = field(default_factory=list)

    def final(self) -> DetectionOutput | None:
        return self.current[-1] if self.current else None


class CapeDetector(Module):
    """Query-based multi-view detector with camera-view position embeddings.

    Parameters shared with the single-frame model are created first, so a
    temporal detector and a single-frame detector built from the same generator
    agree on every common parameter.
    """

    def __init__(self, config: ExperimentConfig, rng: np.random.Generator) -> None:
        model = config.model
        self._config = config
        self._normalizer = CoordinateNormalizer.from_scene(config.scene, model.camera_range)
        c, m = model.channels, model.num_queries

        self.reference_points = Tensor(rng.uniform(0.0, 1.0, size=(m, 3)), requires_grad=True)
        self.query_init = Tensor(rng.normal(size=(c, m)), requires_grad=True)
        self.key_encoder = KeyPositionEncoder(
            c, config.scene.depth_bins, rng, feature_guided=model.key_fpe,
            activation=model.activation,
        )
        self.query_encoder = QueryPositionEncoder(
            c, rng, feature_guided=model.query_fpe, activation=model.activation
        )
        self.decoder = TransformerDecoder(model, rng)
        self.heads = DetectionHeads(c, model.num_classes, rng, activation=model.activation)

        if config.temporal.mode == TemporalMode.SEPARATE:
            self.prev_query_init = Tensor(rng.normal(size=(c, m)), requires_grad=True)
            self.fusion = TemporalFusion(
                c, rng, kind=config.temporal.fusion, use_ego=config.temporal.ego_embedding,
                activation=model.activation,
            )

    @property
    def config(self) -> ExperimentConfig:
        return self._config

    @property
    def normalizer(self) -> CoordinateNormalizer:
        return self._normalizer

    @property
    def pe_mode(self) -> PEMode:
        return self._config.model.pe_mode

    def keys(self, features: np.ndarray, rig: CameraRig) -> tuple[list[Tensor], list[Tensor]]:
        """Content keys ``X_n`` and key position embeddings ``P_n`` for every view."""
        xs, ps = [], []
        for n in range(rig.num_cameras):
            x = Tensor(features[n])
            coords = key_coordinates(rig, n, self.pe_mode, self._normalizer)
            xs.append(x)
            ps.append(self.key_encoder(coords, x))
        return xs, ps

    def query_pe_fn(self, reference: Tensor, extrinsics: list[Extrinsics]) -> QueryPEFn:
        """Build the per-layer query-PE function for one frame's views."""
        if self.pe_mode == PEMode.GLOBAL:
            identity = Extrinsics.identity()
            count = len(extrinsics)

            def global_pes(embeddings: Tensor) -> list[Tensor]:
                return [self.query_encoder(reference, embeddings, identity)] * count

            return global_pes

        points = [
            query_coordinates(reference, e, self.pe_mode, self._normalizer) for e in extrinsics
        ]

        def camera_pes(embeddings: Tensor) -> list[Tensor]:
            return [
                self.query_encoder(p, embeddings, e)
                for p, e in zip(points, extrinsics, strict=True)
            ]

        return camera_pes

    def decode(
        self,
        embeddings: Tensor,
        reference: Tensor,
        features: np.ndarray,
        rig: CameraRig,
        record: bool = False,
    ) -> DecodeResult:
        """Run the decoder stack for one frame; returns every layer's embeddings."""
        xs, ps = self.keys(features, rig)
        query_pes = self.query_pe_fn(reference, [cam.extrinsics for cam in rig.cameras])
        position = self.query_encoder.self_pos_embedding(reference)
        return self.decoder.decode(embeddings, position, xs, ps, query_pes, record=record)

    def previous_reference(self, motion: EgoMotion) -> Tensor:
        """Reference points moved into the previous frame, still normalized."""
        metric = self._normalizer.denormalize_global(self.reference_points)
        return self._normalizer.normalize_global(propagate_reference(metric, motion))

    def forward(
        self,
        current: Frame,
        previous: Frame | None = None,
        motion: EgoMotion | None = None,
        record: bool = False,
    ) -> ForwardResult:
        """Detect in ``current``, using ``previous`` as the temporal mode requires.

        Raises:
            CapeError: If a temporal mode is configured but no previous frame is given.
        """
        mode = self._config.temporal.mode
        if mode != TemporalMode.OFF and (previous is None or motion is None):
            raise CapeError(f"Temporal mode '{mode.value}' needs the previous frame and ego motion")
        if mode == TemporalMode.SHARED:
            assert previous is not None and motion is not None
            return self._forward_shared(current, previous, motion, record)
        if mode == TemporalMode.SEPARATE:
            assert previous is not None and motion is not None
            return self._forward_separate(current, previous, motion, record)

        ref = self.reference_points
        decoded = self.decode(self.query_init, ref, current.features, current.rig, record)
        return ForwardResult(
            current=[self.heads(o, ref) for o in decoded.outputs], records=decoded.records
        )

    def _forward_shared(
        self, current: Frame, previous: Frame, motion: EgoMotion, record: bool
    ) -> ForwardResult:
        # Previous views are re-expressed in the current ego frame: e_prev . M.
        moved = tuple(
            Camera(cam.intrinsics, Extrinsics(cam.extrinsics.matrix @ motion.matrix))
            for cam in previous.rig.cameras
        )
        rig = CameraRig(
            current.rig.cameras + moved,
            current.rig.height,
            current.rig.width,
            current.rig.depth_bins,
        )
        features = np.concatenate([current.features, previous.features], axis=0)
        ref = self.reference_points
        decoded = self.decode(self.query_init, ref, features, rig, record)
        return ForwardResult(
            current=[self.heads(o, ref) for o in decoded.outputs], records=decoded.records
        )

    def _forward_separate(
        self, current: Frame, previous: Frame, motion: EgoMotion, record: bool
    ) -> ForwardResult:
        temporal = self._config.temporal
        ref_t = self.reference_points
        ref_p = self.previous_reference(motion)

        xs_t, ps_t = self.keys(current.features, current.rig)
        xs_p, ps_p = self.keys(previous.features, previous.rig)
        qpe_t = self.query_pe_fn(ref_t, [cam.extrinsics for cam in current.rig.cameras])
        qpe_p = self.query_pe_fn(ref_p, [cam.extrinsics for cam in previous.rig.cameras])
        pos_t = self.query_encoder.self_pos_embedding(ref_t)
        pos_p = self.query_encoder.self_pos_embedding(ref_p)

        result = ForwardResult(previous=[])
        assert result.previous is not None
        o_t, o_p = self.query_init, self.prev_query_init
        last = len(self.decoder) - 1
        for i in range(len(self.decoder)):
            o_t, maps = self.decoder.step(i, o_t, pos_t, xs_t, ps_t, qpe_t, record=record)
            o_p, _ = self.decoder.step(i, o_p, pos_p, xs_p, ps_p, qpe_p)
            if temporal.fuse_every_layer or i == last:
                o_t, o_p = self.fusion.fuse_queries(o_t, o_p, motion)
            result.current.append(self.heads(o_t, ref_t))
            result.previous.append(self.heads(o_p, ref_p))
            if maps is not None:
                result.records.append(maps)
        return result

    def __call__(
        self,
        current: Frame,
        previous: Frame | None = None,
        motion: EgoMotion | None = None,
        record: bool = False,
    ) -> ForwardResult:
        return self.forward(current, previous, motion, record)


def temporal_forward(
    detector: CapeDetector, sample: SceneSample, record: bool = False
) -> ForwardResult:
    """Forward a two-frame sample; single-frame detectors see only the current frame."""
    if detector.config.temporal.mode == TemporalMode.OFF:
        return detector(sample.current, record=record)
    return detector(sample.current, sample.previous, sample.ego_motion, record=record)
