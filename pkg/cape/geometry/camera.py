"""Camera calibration and ego-motion types.

Coordinate conventions: the global (ego) frame is x forward, y left, z up.
Camera frames are x right, y down, z along the optical axis. Extrinsics map
global coordinates into a camera frame.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from cape.exceptions import InvalidGeometryError, SingularIntrinsicsError

ORTHONORMAL_TOL = 1e-10


def _check_rigid(matrix: np.ndarray, what: str) -> None:
    if matrix.shape != (4, 4):
        raise InvalidGeometryError(f"{what} must be 4x4, got {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise InvalidGeometryError(f"{what} contains non-finite values")
    if not np.allclose(matrix[3], [0.0, 0.0, 0.0, 1.0], atol=ORTHONORMAL_TOL, rtol=0.0):
        raise InvalidGeometryError(f"{what} last row must be (0, 0, 0, 1)")
    rotation = matrix[:3, :3]
    if not np.allclose(rotation.T @ rotation, np.eye(3), atol=ORTHONORMAL_TOL, rtol=0.0):
        raise InvalidGeometryError(f"{what} rotation block is not orthonormal")
    if np.linalg.det(rotation) <= 0:
        raise InvalidGeometryError(f"{what} rotation block must have det +1")


def rigid_matrix(rotation: np.ndarray, translation: np.ndarray) -> np.ndarray:
    """Assemble a 4x4 homogeneous transform."""
    matrix = np.eye(4)
    matrix[:3, :3] = rotation
    matrix[:3, 3] = translation
    return matrix


def yaw_rotation(yaw: float) -> np.ndarray:
    """Rotation about the global z axis."""
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True, eq=False)
class Intrinsics:
    """Pinhole intrinsic matrix in pixels (zero skew)."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        matrix = np.array(self.matrix, dtype=np.float64)
        if matrix.shape != (3, 3):
            raise InvalidGeometryError(f"Intrinsics must be 3x3, got {matrix.shape}")
        if abs(np.linalg.det(matrix)) < 1e-12:
            raise SingularIntrinsicsError("Intrinsic matrix is singular")
        if matrix[0, 0] <= 0 or matrix[1, 1] <= 0:
            raise InvalidGeometryError("Focal lengths must be positive")
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def from_params(cls, fx: float, fy: float, cx: float, cy: float) -> "Intrinsics":
        return cls(np.array([[fx, 0.0, cx], [0.0, fy, cy], [0.0, 0.0, 1.0]]))

    @property
    def fx(self) -> float:
        return float(self.matrix[0, 0])

    @property
    def fy(self) -> float:
        return float(self.matrix[1, 1])

    @property
    def cx(self) -> float:
        return float(self.matrix[0, 2])

    @property
    def cy(self) -> float:
        return float(self.matrix[1, 2])

    def inverse(self) -> np.ndarray:
        try:
            return np.linalg.inv(self.matrix)
        except np.linalg.LinAlgError as e:
            raise SingularIntrinsicsError(str(e)) from e

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Intrinsics) and np.array_equal(self.matrix, other.matrix)


@dataclass(frozen=True, eq=False)
class Extrinsics:
    """Homogeneous global-to-camera transform."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        matrix = np.array(self.matrix, dtype=np.float64)
        _check_rigid(matrix, "Extrinsics")
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def identity(cls) -> "Extrinsics":
        return cls(np.eye(4))

    @classmethod
    def from_rotation_translation(
        cls, rotation: np.ndarray, translation: np.ndarray
    ) -> "Extrinsics":
        return cls(rigid_matrix(rotation, translation))

    @classmethod
    def from_pose(cls, camera_to_global: np.ndarray, position: np.ndarray) -> "Extrinsics":
        """Build extrinsics from a camera's orientation and position in the global frame."""
        rotation = np.asarray(camera_to_global).T
        return cls(rigid_matrix(rotation, -rotation @ np.asarray(position)))

    @property
    def rotation(self) -> np.ndarray:
        return self.matrix[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.matrix[:3, 3]

    def inverse(self) -> np.ndarray:
        """Camera-to-global transform."""
        rotation = self.rotation.T
        return rigid_matrix(rotation, -rotation @ self.translation)

    def vec12(self) -> np.ndarray:
        """The top three rows flattened row-major."""
        return self.matrix[:3, :].reshape(12).copy()

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Extrinsics) and np.array_equal(self.matrix, other.matrix)


@dataclass(frozen=True, eq=False)
class Camera:
    intrinsics: Intrinsics
    extrinsics: Extrinsics

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Camera)
            and self.intrinsics == other.intrinsics
            and self.extrinsics == other.extrinsics
        )


@dataclass(frozen=True, eq=False)
class CameraRig:
    """N calibrated cameras sharing one feature-map extent and depth bins."""

    cameras: tuple[Camera, ...]
    height: int
    width: int
    depth_bins: np.ndarray = field(default_factory=lambda: np.linspace(1.0, 60.0, 8))

    def __post_init__(self) -> None:
        cameras = tuple(self.cameras)
        if len(cameras) < 1:
            raise InvalidGeometryError("A camera rig needs at least one camera")
        if self.height < 1 or self.width < 1:
            raise InvalidGeometryError(f"Invalid feature extent {self.height}x{self.width}")
        bins = np.array(self.depth_bins, dtype=np.float64).reshape(-1)
        if bins.size < 1 or np.any(bins <= 0) or np.any(np.diff(bins) <= 0):
            raise InvalidGeometryError("Depth bins must be positive and strictly increasing")
        object.__setattr__(self, "cameras", cameras)
        object.__setattr__(self, "depth_bins", bins)

    @property
    def num_cameras(self) -> int:
        return len(self.cameras)

    @property
    def num_pixels(self) -> int:
        return self.height * self.width

    @property
    def num_depth_bins(self) -> int:
        return int(self.depth_bins.size)

    def with_extrinsics(self, extrinsics: list[Extrinsics]) -> "CameraRig":
        """Return a copy whose cameras use the given extrinsics."""
        if len(extrinsics) != self.num_cameras:
            raise InvalidGeometryError(
                f"Expected {self.num_cameras} extrinsics, got {len(extrinsics)}"
            )
        cameras = tuple(
            Camera(cam.intrinsics, ext) for cam, ext in zip(self.cameras, extrinsics, strict=True)
        )
        return CameraRig(cameras, self.height, self.width, self.depth_bins)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, CameraRig)
            and self.cameras == other.cameras
            and self.height == other.height
            and self.width == other.width
            and np.array_equal(self.depth_bins, other.depth_bins)
        )


@dataclass(frozen=True, eq=False)
class EgoMotion:
    """Rigid transform from current-frame to previous-frame ego coordinates."""

    matrix: np.ndarray
    dt: float = 0.5

    def __post_init__(self) -> None:
        matrix = np.array(self.matrix, dtype=np.float64)
        _check_rigid(matrix, "EgoMotion")
        if not self.dt > 0:
            raise InvalidGeometryError(f"Frame gap must be positive, got {self.dt}")
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def identity(cls, dt: float = 0.5) -> "EgoMotion":
        return cls(np.eye(4), dt)

    @property
    def rotation(self) -> np.ndarray:
        return self.matrix[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.matrix[:3, 3]

    def inverse(self) -> "EgoMotion":
        rotation = self.rotation.T
        return EgoMotion(rigid_matrix(rotation, -rotation @ self.translation), self.dt)

    def compose(self, then: "EgoMotion") -> "EgoMotion":
        """Motion equivalent to applying this motion followed by ``then``."""
        return EgoMotion(then.matrix @ self.matrix, self.dt + then.dt)

    def vec12(self) -> np.ndarray:
        return self.matrix[:3, :].reshape(12).copy()

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, EgoMotion)
            and np.array_equal(self.matrix, other.matrix)
            and self.dt == other.dt
        )


class DepthSpacing(str, Enum):
    """How depth bins are spread between the near and far limits."""

    UNIFORM = "uniform"
    LINEAR_INCREASING = "linear_increasing"


def make_depth_bins(
    d_min: float, d_max: float, count: int, spacing: DepthSpacing = DepthSpacing.UNIFORM
) -> np.ndarray:
    """Depth bin centers in meters, first at ``d_min`` and last at ``d_max``.

    Linear-increasing spacing grows the gap between consecutive bins linearly.
    """
    if count < 1:
        raise InvalidGeometryError(f"Need at least one depth bin, got {count}")
    if d_min <= 0 or d_max <= d_min:
        raise InvalidGeometryError(f"Invalid depth range [{d_min}, {d_max}]")
    if count == 1:
        return np.array([d_min])
    if DepthSpacing(spacing) == DepthSpacing.UNIFORM:
        return np.linspace(d_min, d_max, count)
    i = np.arange(count, dtype=np.float64)
    return d_min + (d_max - d_min) * i * (i + 1) / ((count - 1) * count)
