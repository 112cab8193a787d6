"""Bipartite assignment of ground-truth boxes to object queries."""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import expit

from cape.exceptions import MatchingError


@dataclass(frozen=True, eq=False)
class Assignment:
    """Injective map from ground-truth index to query index."""

    gt_indices: np.ndarray
    query_indices: np.ndarray
    cost: float

    def __len__(self) -> int:
        return int(self.gt_indices.size)

    def as_dict(self) -> dict[int, int]:
        return {int(g): int(q) for g, q in zip(self.gt_indices, self.query_indices, strict=True)}

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Assignment)
            and np.array_equal(self.gt_indices, other.gt_indices)
            and np.array_equal(self.query_indices, other.query_indices)
            and self.cost == other.cost
        )


def match_cost(
    logits: np.ndarray,
    pred_vectors: np.ndarray,
    gt_labels: Sequence[int],
    gt_vectors: np.ndarray,
    lambda_cls: float,
) -> np.ndarray:
    """Pairwise matching cost ``[G x M]``.

    ``cost[g, m] = -lambda_cls * sigmoid(logits[label_g, m]) + sum_j |pred[j, m] - gt[g, j]|``,
    a plain L1 over the box vector; the regression loss weights its components separately.

    Args:
        logits: Class logits ``[K x M]``.
        pred_vectors: Absolute normalized box vectors ``[10 x M]``.
        gt_labels: Ground-truth class ids, length ``G``.
        gt_vectors: Absolute normalized ground-truth vectors ``[G x 10]``.
        lambda_cls: Weight of the classification term.
    """
    labels = np.asarray(gt_labels, dtype=np.int64)
    gt_vectors = np.asarray(gt_vectors, dtype=np.float64).reshape(labels.size, -1)
    if labels.size == 0:
        return np.zeros((0, pred_vectors.shape[1]))
    probs = expit(np.asarray(logits, dtype=np.float64))
    diff = np.abs(gt_vectors[:, :, None] - np.asarray(pred_vectors)[None, :, :])
    geometric = diff.sum(axis=1)
    return -lambda_cls * probs[labels, :] + geometric  # type: ignore[no-any-return]


def hungarian_match(cost: np.ndarray) -> Assignment:
    """Minimum-total-cost injective assignment of rows (ground truths) to columns (queries).

    Raises:
        MatchingError: If there are more ground truths than queries or costs are not finite.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise MatchingError(f"Cost matrix must be 2-D, got shape {cost.shape}")
    num_gts, num_queries = cost.shape
    if num_gts > num_queries:
        raise MatchingError(f"Cannot match {num_gts} ground truths to {num_queries} queries")
    if not np.all(np.isfinite(cost)):
        raise MatchingError("Cost matrix contains non-finite entries")
    if num_gts == 0:
        empty = np.zeros(0, dtype=np.int64)
        return Assignment(empty, empty.copy(), 0.0)
    rows, cols = linear_sum_assignment(cost)
    total = sum(float(cost[r, c]) for r, c in zip(rows, cols, strict=True))
    return Assignment(rows.astype(np.int64), cols.astype(np.int64), float(total))
