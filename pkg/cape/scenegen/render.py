"""Synthetic per-camera feature maps.

Each visible object adds a Gaussian splat centered at the projection of its
box center. The splat's channel pattern is a fixed linear mix of the object's
feature code::

    [depth_scale / depth, one_hot(label), log w, log l, log h, sin yaw, cos yaw, vx, vy]

When there are at least as many channels as code entries, the first channels
carry the code unmixed (channel 0 is the inverse-depth energy) and the rest
carry random combinations of it. Otherwise the code is projected onto the
available channels.
"""

import math
from collections.abc import Sequence

import numpy as np

from cape.geometry import CameraRig, global_to_camera, project_points
from cape.models.box import Box3D
from cape.models.config import SceneConfig
from cape.models.scene import Frame
from cape.utils import make_rng

MIXING_SEED = 0x5EED
ENERGY_CHANNEL = 0


def code_length(num_classes: int) -> int:
    return 8 + num_classes


def feature_code(box: Box3D, depth: float, config: SceneConfig) -> np.ndarray:
    """Appearance code of one object seen at ``depth`` meters."""
    one_hot = np.zeros(config.num_classes)
    one_hot[box.label] = 1.0
    return np.concatenate(
        [
            [config.depth_scale / depth],
            one_hot,
            np.log(np.asarray(box.size, dtype=np.float64)),
            [math.sin(box.yaw), math.cos(box.yaw)],
            np.asarray(box.velocity, dtype=np.float64),
        ]
    )


def mixing_matrix(channels: int, num_classes: int) -> np.ndarray:
    """Fixed ``[C x code_length]`` map from feature code to channels."""
    length = code_length(num_classes)
    rng = make_rng(MIXING_SEED, channels, num_classes)
    if channels >= length:
        extra = rng.normal(size=(channels - length, length)) / math.sqrt(length)
        return np.vstack([np.eye(length), extra])
    q, _ = np.linalg.qr(rng.normal(size=(length, channels)))
    return q.T  # type: ignore[no-any-return]


def splat_center(
    box: Box3D, rig: CameraRig, camera_index: int
) -> tuple[float, float, float] | None:
    """Pixel ``(u, v)`` and depth of a box center in one view, or ``None`` behind the camera."""
    extrinsics = rig.cameras[camera_index].extrinsics
    point = global_to_camera(np.asarray([box.center], dtype=np.float64), extrinsics)
    uv, depth, visible = project_points(point, rig.cameras[camera_index].intrinsics)
    if not visible[0]:
        return None
    return float(uv[0, 0]), float(uv[0, 1]), float(depth[0])


def render_features(
    boxes: Sequence[Box3D],
    rig: CameraRig,
    camera_index: int,
    config: SceneConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Feature map ``[C x H*W]`` of one camera: background noise plus object splats."""
    height, width = rig.height, rig.width
    features = config.noise_std * rng.normal(size=(config.channels, height * width))
    mix = mixing_matrix(config.channels, config.num_classes)
    rows, cols = np.meshgrid(
        np.arange(height, dtype=np.float64), np.arange(width, dtype=np.float64), indexing="ij"
    )
    for box in boxes:
        center = splat_center(box, rig, camera_index)
        if center is None:
            continue
        u, v, depth = center
        dist2 = (cols - u) ** 2 + (rows - v) ** 2
        splat = np.exp(-dist2 / (2.0 * config.splat_sigma**2)).reshape(-1)
        features += np.outer(mix @ feature_code(box, depth, config), splat)
    return features  # type: ignore[no-any-return]


def render_frame(
    boxes: Sequence[Box3D], rig: CameraRig, config: SceneConfig, rng: np.random.Generator
) -> Frame:
    """Render every view of a frame, drawing background noise view by view."""
    features = np.stack(
        [render_features(boxes, rig, n, config, rng) for n in range(rig.num_cameras)]
    )
    return Frame(boxes=tuple(boxes), rig=rig, features=features)
