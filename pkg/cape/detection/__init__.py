"""Box coding, matching, losses and evaluation."""

from cape.detection.boxes import (
    box_to_vector,
    decode_box,
    decode_predictions,
    encode_box,
    generate_prev_gt,
    vector_to_box,
)
from cape.detection.losses import LossBreakdown, focal_loss, frame_loss, l1_loss, total_loss
from cape.detection.matching import Assignment, hungarian_match, match_cost
from cape.detection.metrics import average_precision, center_distance, evaluate

__all__ = [
    "Assignment",
    "LossBreakdown",
    "average_precision",
    "box_to_vector",
    "center_distance",
    "decode_box",
    "decode_predictions",
    "encode_box",
    "evaluate",
    "focal_loss",
    "frame_loss",
    "generate_prev_gt",
    "hungarian_match",
    "l1_loss",
    "match_cost",
    "total_loss",
    "vector_to_box",
]
