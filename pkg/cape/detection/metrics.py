"""Desk-scale detection metrics.

Center-distance AP in the style of nuScenes (ground-plane distance, greedy
matching by confidence, class-aware), plus translation and velocity errors of
the true positives at 2 m. These are not NDS.
"""

from collections.abc import Sequence

import numpy as np

from cape.models.box import Box3D, Detection
from cape.models.metrics import DISTANCE_THRESHOLDS, DeskMetrics, threshold_key

ERROR_THRESHOLD = 2.0


def center_distance(a: Box3D, b: Box3D) -> float:
    """Ground-plane distance between box centers."""
    return float(np.hypot(a.center[0] - b.center[0], a.center[1] - b.center[1]))


def average_precision(tp: np.ndarray, num_gts: int) -> float:
    """All-point interpolated area under the precision/recall curve.

    Args:
        tp: True-positive flags of the predictions in descending score order.
        num_gts: Number of ground truths of the class.
    """
    if num_gts == 0 or tp.size == 0:
        return 0.0
    tp_cum = np.cumsum(tp)
    precision = tp_cum / np.arange(1, tp.size + 1)
    recall = tp_cum / num_gts
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    steps = np.diff(np.concatenate([[0.0], recall]))
    return float(np.sum(steps * envelope))


def _match_class(
    detections: list[tuple[int, int, Detection]],
    gts: dict[int, list[Box3D]],
    threshold: float,
) -> tuple[np.ndarray, list[tuple[Detection, Box3D]]]:
    """Greedy matching of score-sorted detections to unclaimed ground truths."""
    claimed = {scene: np.zeros(len(boxes), dtype=bool) for scene, boxes in gts.items()}
    flags = np.zeros(len(detections))
    pairs = []
    for i, (scene, _, det) in enumerate(detections):
        candidates = gts.get(scene, [])
        best, best_dist = -1, np.inf
        for j, gt in enumerate(candidates):
            if claimed[scene][j]:
                continue
            dist = center_distance(det.box, gt)
            if dist < best_dist:
                best, best_dist = j, dist
        if best >= 0 and best_dist <= threshold:
            claimed[scene][best] = True
            flags[i] = 1.0
            pairs.append((det, candidates[best]))
    return flags, pairs


def evaluate(
    predictions: Sequence[Sequence[Detection]],
    ground_truths: Sequence[Sequence[Box3D]],
    thresholds: Sequence[float] = DISTANCE_THRESHOLDS,
) -> DeskMetrics:
    """Score detections against ground truth over a set of scenes.

    Args:
        predictions: Per-scene detections.
        ground_truths: Per-scene ground-truth boxes, aligned with ``predictions``.
        thresholds: Center-distance thresholds in meters.

    Returns:
        AP per threshold averaged over the classes present in the ground truth,
        their mean, and mATE/mAVE over true positives at 2 m (``None`` without any).
    """
    if len(predictions) != len(ground_truths):
        raise ValueError(
            f"Got predictions for {len(predictions)} scenes but ground truth for "
            f"{len(ground_truths)}"
        )
    classes = sorted({b.label for boxes in ground_truths for b in boxes})
    ap: dict[str, float] = {}
    translation_errors: list[float] = []
    velocity_errors: list[float] = []

    for threshold in thresholds:
        per_class = []
        for label in classes:
            gts = {
                s: [b for b in boxes if b.label == label] for s, boxes in enumerate(ground_truths)
            }
            num_gts = sum(len(v) for v in gts.values())
            dets = [
                (s, k, d)
                for s, scene_dets in enumerate(predictions)
                for k, d in enumerate(scene_dets)
                if d.box.label == label
            ]
            dets.sort(key=lambda item: (-item[2].score, item[0], item[1]))
            flags, pairs = _match_class(dets, gts, threshold)
            per_class.append(average_precision(flags, num_gts))
            if threshold == ERROR_THRESHOLD:
                for det, gt in pairs:
                    translation_errors.append(center_distance(det.box, gt))
                    velocity_errors.append(
                        float(
                            np.hypot(
                                det.box.velocity[0] - gt.velocity[0],
                                det.box.velocity[1] - gt.velocity[1],
                            )
                        )
                    )
        ap[threshold_key(threshold)] = float(np.mean(per_class)) if per_class else 0.0

    return DeskMetrics(
        ap=ap,
        mean_ap=float(np.mean(list(ap.values()))) if ap else 0.0,
        mate=float(np.mean(translation_errors)) if translation_errors else None,
        mave=float(np.mean(velocity_errors)) if velocity_errors else None,
        num_predictions=sum(len(p) for p in predictions),
        num_ground_truths=sum(len(g) for g in ground_truths),
    )
