"""Unit tests for desk-scale detection metrics."""

import numpy as np
import pytest

from cape.detection import average_precision, center_distance, evaluate
from cape.models.box import Box3D, Detection


def box(x: float, y: float, label: int = 0, vx: float = 0.0) -> Box3D:
    return Box3D(center=(x, y, 0.75), size=(1.0, 1.0, 1.5), velocity=(vx, 0.0), label=label)


def det(x: float, y: float, score: float, label: int = 0, vx: float = 0.0) -> Detection:
    return Detection(box=box(x, y, label, vx), score=score)


class TestAveragePrecision:
    """Tests for average_precision."""

    def test_perfect(self) -> None:
        """All true positives covering every ground truth should give AP 1."""
        assert average_precision(np.array([1.0, 1.0]), 2) == pytest.approx(1.0)

    def test_interpolated(self) -> None:
        """A false positive between two hits should give 5/6."""
        assert average_precision(np.array([1.0, 0.0, 1.0]), 2) == pytest.approx(5 / 6)

    def test_no_ground_truth(self) -> None:
        """No ground truth should give AP 0."""
        assert average_precision(np.array([1.0]), 0) == 0.0


class TestEvaluate:
    """Tests for evaluate."""

    def test_center_distance_ignores_height(self) -> None:
        """Distance should be measured on the ground plane."""
        a = Box3D(center=(0.0, 0.0, 0.0), size=(1.0, 1.0, 1.0))
        b = Box3D(center=(3.0, 4.0, 9.0), size=(1.0, 1.0, 1.0))
        assert center_distance(a, b) == 5.0

    def test_perfect_predictions(self) -> None:
        """Exact detections should score mAP 1 with zero errors."""
        gts = [[box(5.0, 0.0), box(-4.0, 3.0, label=1)]]
        preds = [[det(5.0, 0.0, 0.9), det(-4.0, 3.0, 0.8, label=1)]]
        metrics = evaluate(preds, gts)
        assert metrics.mean_ap == pytest.approx(1.0)
        assert metrics.mate == pytest.approx(0.0)
        assert metrics.mave == pytest.approx(0.0)

    def test_threshold_dependence(self) -> None:
        """An offset of 1.5 m should hit at 2 m and 4 m but miss below."""
        metrics = evaluate([[det(6.5, 0.0, 0.9)]], [[box(5.0, 0.0)]])
        assert metrics.ap_at(0.5) == 0.0
        assert metrics.ap_at(1.0) == 0.0
        assert metrics.ap_at(2.0) == pytest.approx(1.0)
        assert metrics.ap_at(4.0) == pytest.approx(1.0)
        assert metrics.mean_ap == pytest.approx(0.5)
        assert metrics.mate == pytest.approx(1.5)

    def test_class_mismatch_is_false_positive(self) -> None:
        """A detection of the wrong class should not match."""
        metrics = evaluate([[det(5.0, 0.0, 0.9, label=1)]], [[box(5.0, 0.0, label=0)]])
        assert metrics.mean_ap == 0.0
        assert metrics.mate is None

    def test_velocity_error(self) -> None:
        """mAVE should measure the velocity difference of matched pairs."""
        metrics = evaluate([[det(5.0, 0.0, 0.9, vx=3.0)]], [[box(5.0, 0.0, vx=1.0)]])
        assert metrics.mave == pytest.approx(2.0)

    def test_matching_is_per_scene(self) -> None:
        """A detection should not match ground truth of another scene."""
        metrics = evaluate([[det(5.0, 0.0, 0.9)], []], [[], [box(5.0, 0.0)]])
        assert metrics.mean_ap == 0.0

    def test_no_ground_truth(self) -> None:
        """No ground truth at all should give mAP 0 and no errors."""
        metrics = evaluate([[det(1.0, 1.0, 0.5)]], [[]])
        assert metrics.mean_ap == 0.0
        assert metrics.mate is None
        assert metrics.num_predictions == 1

    def test_length_mismatch(self) -> None:
        """Misaligned scene lists should raise ValueError."""
        with pytest.raises(ValueError):
            evaluate([[]], [[], []])
