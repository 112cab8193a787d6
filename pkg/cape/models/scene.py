"""In-memory scene containers."""

from dataclasses import dataclass

import numpy as np

from cape.exceptions import ShapeMismatchError
from cape.geometry import CameraRig, EgoMotion
from cape.models.box import Box3D


@dataclass(frozen=True, eq=False)
class Frame:
    """One time step: boxes, the rig that observed them, and per-camera features.

    ``features`` has shape ``[N x C x I]`` with ``I = H * W`` pixels in row-major
    order.
    """

    boxes: tuple[Box3D, ...]
    rig: CameraRig
    features: np.ndarray

    def __post_init__(self) -> None:
        features = np.array(self.features, dtype=np.float64)
        expected = (self.rig.num_cameras, self.rig.num_pixels)
        if features.ndim != 3 or (features.shape[0], features.shape[2]) != expected:
            raise ShapeMismatchError(
                "frame", features.shape, expected, detail="features must be [N x C x H*W]"
            )
        object.__setattr__(self, "boxes", tuple(self.boxes))
        object.__setattr__(self, "features", features)

    @property
    def channels(self) -> int:
        return int(self.features.shape[1])

    def view(self, camera_index: int) -> np.ndarray:
        """Feature map ``[C x I]`` of one camera."""
        return self.features[camera_index]

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Frame)
            and self.boxes == other.boxes
            and self.rig == other.rig
            and np.array_equal(self.features, other.features)
        )


@dataclass(frozen=True, eq=False)
class SceneSample:
    """A current frame, the previous frame, and the ego motion linking them."""

    current: Frame
    previous: Frame
    ego_motion: EgoMotion
    seed: int = 0

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, SceneSample)
            and self.current == other.current
            and self.previous == other.previous
            and self.ego_motion == other.ego_motion
            and self.seed == other.seed
        )
