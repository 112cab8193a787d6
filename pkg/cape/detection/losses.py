"""Set-prediction losses: sigmoid focal classification plus weighted L1 regression."""

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from cape.autodiff import Tensor, ops
from cape.detection.boxes import box_to_vector
from cape.detection.matching import Assignment, hungarian_match, match_cost
from cape.layers.embedding import CoordinateNormalizer
from cape.layers.heads import DetectionOutput
from cape.models.box import Box3D
from cape.models.config import LossConfig


def focal_loss(
    logits: Tensor, targets: np.ndarray, alpha: float = 0.25, gamma: float = 2.0
) -> Tensor:
    """Sigmoid focal loss, summed over classes and averaged over queries.

    Args:
        logits: Class logits ``[K x M]``.
        targets: Binary targets ``[K x M]``; background queries are all zero.
        alpha: Positive-class balance in ``(0, 1)``.
        gamma: Focusing exponent, 0 or ``>= 1``.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if gamma != 0 and gamma < 1:
        raise ValueError(f"gamma must be 0 or >= 1, got {gamma}")
    t = np.asarray(targets, dtype=np.float64)
    prob = ops.sigmoid(logits)
    ce = ops.softplus(logits) - logits * t
    p_t = prob * t + (1.0 - prob) * (1.0 - t)
    alpha_t = alpha * t + (1.0 - alpha) * (1.0 - t)
    loss = ops.power(1.0 - p_t, gamma) * ce * alpha_t
    return loss.sum() / float(max(logits.shape[1], 1))


def l1_loss(
    pred_vectors: Tensor,
    assignment: Assignment,
    gt_vectors: np.ndarray,
    code_weights: Sequence[float],
) -> Tensor:
    """Weighted L1 between matched predictions ``[10 x M]`` and targets, per matched box."""
    if len(assignment) == 0:
        return Tensor(0.0)
    matched = pred_vectors[:, assignment.query_indices]
    targets = np.asarray(gt_vectors)[assignment.gt_indices].T
    weights = np.asarray(code_weights, dtype=np.float64).reshape(-1, 1)
    return (ops.abs(matched - targets) * weights).sum() / float(len(assignment))


@dataclass
class LossBreakdown:
    """The scalar training loss and its named parts as floats."""

    total: Tensor
    terms: dict[str, float] = field(default_factory=dict)
    assignments: list[Assignment] = field(default_factory=list)


def frame_loss(
    outputs: Sequence[DetectionOutput],
    boxes: Sequence[Box3D],
    normalizer: CoordinateNormalizer,
    config: LossConfig,
) -> tuple[Tensor, Tensor, list[Assignment]]:
    """Classification and regression loss of one frame, summed over decoder layers."""
    labels = [b.label for b in boxes]
    gt_vectors = (
        np.stack([box_to_vector(b, normalizer) for b in boxes])
        if boxes
        else np.zeros((0, 10))
    )
    cls_terms, reg_terms, assignments = [], [], []
    for out in outputs:
        absolute = out.absolute()
        cost = match_cost(
            out.logits.data, absolute.data, labels, gt_vectors, config.lambda_cls
        )
        assignment = hungarian_match(cost)
        targets = np.zeros(out.logits.shape)
        matched_labels = np.asarray(labels, dtype=np.int64)[assignment.gt_indices]
        targets[matched_labels, assignment.query_indices] = 1.0
        cls_terms.append(focal_loss(out.logits, targets, config.focal_alpha, config.focal_gamma))
        reg_terms.append(l1_loss(absolute, assignment, gt_vectors, config.code_weights))
        assignments.append(assignment)
    return ops.total(cls_terms), ops.total(reg_terms), assignments


def total_loss(
    outputs_current: Sequence[DetectionOutput],
    gts_current: Sequence[Box3D],
    normalizer: CoordinateNormalizer,
    config: LossConfig,
    outputs_previous: Sequence[DetectionOutput] | None = None,
    gts_previous: Sequence[Box3D] | None = None,
) -> LossBreakdown:
    """``L_all = L_cur + lambda * L_prev`` with ``L = lambda_cls * focal + L1`` per layer.

    The previous-frame term is skipped entirely when its outputs are ``None``.
    """
    cls_cur, reg_cur, assignments = frame_loss(outputs_current, gts_current, normalizer, config)
    loss_cur = cls_cur * config.lambda_cls + reg_cur
    terms = {
        "cls_cur": cls_cur.item(),
        "reg_cur": reg_cur.item(),
        "loss_cur": loss_cur.item(),
    }
    total = loss_cur
    if outputs_previous is not None and gts_previous is not None:
        cls_prev, reg_prev, _ = frame_loss(outputs_previous, gts_previous, normalizer, config)
        loss_prev = cls_prev * config.lambda_cls + reg_prev
        terms.update(
            cls_prev=cls_prev.item(), reg_prev=reg_prev.item(), loss_prev=loss_prev.item()
        )
        total = total + loss_prev * config.lambda_prev
    terms["total"] = total.item()
    return LossBreakdown(total=total, terms=terms, assignments=assignments)
