"""Frustum lifting, rigid transforms, projection and extrinsic noise.

Point-set functions accept either numpy arrays or ``Tensor`` values of shape
``[M x 3]``; tensors keep their gradient history through the transform.
"""

import math
from typing import TypeVar

import numpy as np
from scipy.spatial.transform import Rotation

from cape.autodiff import Tensor
from cape.exceptions import BehindCameraError, InvalidGeometryError
from cape.geometry.camera import CameraRig, EgoMotion, Extrinsics, Intrinsics

Points = TypeVar("Points", np.ndarray, Tensor)


def _apply(points: Points, matrix: np.ndarray) -> Points:
    rotated = points @ matrix[:3, :3].T
    return rotated + matrix[:3, 3]  # type: ignore[no-any-return]


def lift_pixels(
    intrinsics: Intrinsics, height: int, width: int, depth_bins: np.ndarray
) -> np.ndarray:
    """Camera-frame points behind every pixel at every depth bin.

    Pixel ``(u, v)`` (column, row) at depth ``d`` is the homogeneous image point
    ``(u*d, v*d, d)``, mapped through the inverse intrinsics.

    Returns:
        Array of shape ``[H x W x D x 3]``.
    """
    inverse = intrinsics.inverse()
    v, u = np.meshgrid(np.arange(height, dtype=np.float64), np.arange(width, dtype=np.float64),
                       indexing="ij")
    pixels = np.stack([u, v, np.ones_like(u)], axis=-1)
    image_points = pixels[:, :, None, :] * np.asarray(depth_bins)[None, None, :, None]
    return image_points @ inverse.T  # type: ignore[no-any-return]


def frustum_points(rig: CameraRig, camera_index: int) -> np.ndarray:
    """Frustum coordinates of one camera in its own frame, ``[H x W x D x 3]``.

    Only the camera's intrinsics are read.

    Raises:
        InvalidGeometryError: If the camera index is out of range.
        SingularIntrinsicsError: If the intrinsic matrix cannot be inverted.
    """
    if not 0 <= camera_index < rig.num_cameras:
        raise InvalidGeometryError(
            f"Camera index {camera_index} out of range for {rig.num_cameras} cameras"
        )
    intrinsics = rig.cameras[camera_index].intrinsics
    return lift_pixels(intrinsics, rig.height, rig.width, rig.depth_bins)


def global_to_camera(points: Points, extrinsics: Extrinsics) -> Points:
    """Express global points ``[M x 3]`` in the camera frame."""
    return _apply(points, extrinsics.matrix)


def camera_to_global(points: Points, extrinsics: Extrinsics) -> Points:
    """Express camera-frame points ``[... x 3]`` in the global frame."""
    return _apply(points, extrinsics.inverse())


def propagate_reference(points: Points, motion: EgoMotion) -> Points:
    """Move current-frame points into the previous frame's ego coordinates."""
    return _apply(points, motion.matrix)


def compose_motions(first: EgoMotion, second: EgoMotion) -> EgoMotion:
    """Motion equivalent to applying ``first`` then ``second``."""
    return first.compose(second)


def project_to_image(point: np.ndarray, intrinsics: Intrinsics) -> tuple[float, float, float]:
    """Pinhole projection of one camera-frame point.

    Returns:
        ``(u, v, depth)`` in pixels and meters.

    Raises:
        BehindCameraError: If the point's depth is not positive.
    """
    point = np.asarray(point, dtype=np.float64)
    depth = float(point[2])
    if depth <= 0:
        raise BehindCameraError(depth)
    image = intrinsics.matrix @ point
    return float(image[0] / image[2]), float(image[1] / image[2]), depth


def project_points(
    points: np.ndarray, intrinsics: Intrinsics
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized projection of ``[M x 3]`` camera-frame points.

    Returns:
        ``(uv, depth, visible)`` where ``uv`` is ``[M x 2]`` and ``visible``
        marks points with positive depth (their ``uv`` is NaN otherwise).
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    depth = points[:, 2]
    visible = depth > 0
    image = points @ intrinsics.matrix.T
    uv = np.full((points.shape[0], 2), np.nan)
    uv[visible] = image[visible, :2] / image[visible, 2:3]
    return uv, depth, visible


def unproject_pixel(u: float, v: float, depth: float, intrinsics: Intrinsics) -> np.ndarray:
    """Inverse of ``project_to_image``."""
    inverse = intrinsics.inverse()
    return inverse @ np.array([u * depth, v * depth, depth])  # type: ignore[no-any-return]


def perturb_extrinsics(
    extrinsics: Extrinsics, r_max_deg: float, rng: np.random.Generator
) -> Extrinsics:
    """Rotate a camera's extrinsics by a random small rotation.

    The angle is uniform in ``[-r_max, r_max]`` degrees about an axis uniform on
    the sphere; the noise rotation left-multiplies the rotation block and the
    translation is untouched.
    """
    if r_max_deg < 0:
        raise ValueError(f"r_max must be nonnegative, got {r_max_deg}")
    if r_max_deg == 0:
        return extrinsics
    angle = math.radians(rng.uniform(-r_max_deg, r_max_deg))
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    noise = Rotation.from_rotvec(axis * angle).as_matrix()
    matrix = extrinsics.matrix.copy()
    matrix[:3, :3] = noise @ extrinsics.rotation
    return Extrinsics(matrix)


def perturb_rig(rig: CameraRig, r_max_deg: float, rng: np.random.Generator) -> CameraRig:
    """Apply independent extrinsic noise to every camera of a rig."""
    if r_max_deg == 0:
        return rig
    return rig.with_extrinsics(
        [perturb_extrinsics(cam.extrinsics, r_max_deg, rng) for cam in rig.cameras]
    )


def rotation_angle_deg(a: np.ndarray, b: np.ndarray) -> float:
    """Geodesic angle between two rotation matrices, in degrees."""
    cos = (np.trace(a.T @ b) - 1.0) / 2.0
    return math.degrees(math.acos(float(np.clip(cos, -1.0, 1.0))))
