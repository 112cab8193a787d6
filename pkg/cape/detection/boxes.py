"""Box vector encoding, prediction decoding and previous-frame targets."""

import math
from collections.abc import Sequence

import numpy as np

from cape.geometry import EgoMotion
from cape.layers.embedding import CoordinateNormalizer
from cape.layers.heads import BOX_CODE_SIZE, DetectionOutput
from cape.models.box import Box3D, Detection
from cape.utils import wrap_angle


def box_to_vector(box: Box3D, normalizer: CoordinateNormalizer) -> np.ndarray:
    """Absolute normalized vector ``(x, y, z, log w, log l, log h, sin, cos, vx, vy)``."""
    center = normalizer.normalize_global(np.asarray(box.center, dtype=np.float64))
    return np.concatenate(
        [
            center,
            np.log(np.asarray(box.size, dtype=np.float64)),
            [math.sin(box.yaw), math.cos(box.yaw)],
            np.asarray(box.velocity, dtype=np.float64),
        ]
    )


def vector_to_box(vector: np.ndarray, normalizer: CoordinateNormalizer, label: int) -> Box3D:
    """Inverse of ``box_to_vector``; ``(sin, cos)`` need not be unit length."""
    vector = np.asarray(vector, dtype=np.float64)
    center = normalizer.denormalize_global(vector[:3])
    yaw = wrap_angle(math.atan2(float(vector[6]), float(vector[7])))
    return Box3D(
        center=(float(center[0]), float(center[1]), float(center[2])),
        size=(float(np.exp(vector[3])), float(np.exp(vector[4])), float(np.exp(vector[5]))),
        yaw=yaw,
        velocity=(float(vector[8]), float(vector[9])),
        label=label,
    )


def encode_box(box: Box3D, reference: np.ndarray, normalizer: CoordinateNormalizer) -> np.ndarray:
    """Box vector with the center expressed as an offset from a normalized reference point."""
    vector = box_to_vector(box, normalizer)
    vector[:3] -= np.asarray(reference, dtype=np.float64)
    return vector


def decode_box(
    vector: np.ndarray, reference: np.ndarray, normalizer: CoordinateNormalizer, label: int = 0
) -> Box3D:
    """Add the reference point back to the offsets and denormalize."""
    absolute = np.array(vector, dtype=np.float64)
    if absolute.shape != (BOX_CODE_SIZE,):
        raise ValueError(f"Box vector must have {BOX_CODE_SIZE} entries, got {absolute.shape}")
    absolute[:3] += np.asarray(reference, dtype=np.float64)
    return vector_to_box(absolute, normalizer, label)


def decode_predictions(
    output: DetectionOutput,
    normalizer: CoordinateNormalizer,
    score_threshold: float = 0.0,
    max_detections: int | None = None,
) -> list[Detection]:
    """Turn one layer's head outputs into scored boxes, highest score first.

    Each query contributes one detection labelled with its best class.
    """
    scores = output.scores()
    labels = scores.argmax(axis=0)
    best = scores.max(axis=0)
    vectors = output.absolute().data
    order = np.argsort(-best, kind="stable")
    detections = []
    for m in order:
        if best[m] < score_threshold:
            continue
        box = vector_to_box(vectors[:, m], normalizer, int(labels[m]))
        detections.append(Detection(box=box, score=float(best[m]), query=int(m)))
        if max_detections is not None and len(detections) >= max_detections:
            break
    return detections


def generate_prev_gt(boxes: Sequence[Box3D], motion: EgoMotion) -> tuple[Box3D, ...]:
    """Ground truth for the previous frame from current boxes and constant velocity.

    ``center_prev = M (center - (vx, vy, 0) dt)``; heading and velocity are
    rotated by ``M``'s rotation, sizes and labels are unchanged.
    """
    rotation = motion.rotation
    heading_turn = math.atan2(rotation[1, 0], rotation[0, 0])
    out = []
    for box in boxes:
        vx, vy = box.velocity
        earlier = np.asarray(box.center) - np.array([vx, vy, 0.0]) * motion.dt
        center = rotation @ earlier + motion.translation
        velocity = rotation @ np.array([vx, vy, 0.0])
        out.append(
            Box3D(
                center=(float(center[0]), float(center[1]), float(center[2])),
                size=box.size,
                yaw=wrap_angle(box.yaw + heading_turn),
                velocity=(float(velocity[0]), float(velocity[1])),
                label=box.label,
            )
        )
    return tuple(out)
