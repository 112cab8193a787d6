"""Deterministic synthetic two-frame scenes.

Cameras sit on a ring around the ego origin with outward headings. Objects are
placed uniformly inside the scene bounds outside a keep-out radius, move with
constant velocity along their heading, and must stay inside the bounds in both
frames.
"""

import logging
import math

import numpy as np

from cape.detection.boxes import generate_prev_gt
from cape.exceptions import InvalidConfigError
from cape.geometry import (
    Camera,
    CameraRig,
    EgoMotion,
    Extrinsics,
    Intrinsics,
    make_depth_bins,
    rigid_matrix,
    yaw_rotation,
)
from cape.models.box import Box3D
from cape.models.config import SceneConfig
from cape.models.scene import SceneSample
from cape.scenegen.render import render_frame
from cape.utils import make_rng, wrap_angle
from cape.utils.seeds import STREAM_NOISE, STREAM_SCENE

logger = logging.getLogger(__name__)

# (w, l, h) per class: car, pedestrian, cyclist
CLASS_BASE_SIZES: tuple[tuple[float, float, float], ...] = (
    (1.8, 4.2, 1.5),
    (0.6, 0.7, 1.7),
    (0.7, 1.8, 1.4),
)
SIZE_JITTER = 0.2
MAX_PLACEMENT_ATTEMPTS = 1000


def _camera_axes(heading: float) -> np.ndarray:
    """Camera-to-ego rotation for a camera looking along ``heading`` in the ground plane."""
    right = np.array([math.sin(heading), -math.cos(heading), 0.0])
    down = np.array([0.0, 0.0, -1.0])
    forward = np.array([math.cos(heading), math.sin(heading), 0.0])
    return np.column_stack([right, down, forward])


def build_intrinsics(config: SceneConfig) -> Intrinsics:
    """Pinhole intrinsics whose horizontal field of view covers one ring sector plus overlap."""
    fov = min(2.0 * math.pi / config.num_cameras * (1.0 + config.camera_overlap), 0.95 * math.pi)
    focal = (config.width / 2.0) / math.tan(fov / 2.0)
    return Intrinsics.from_params(
        focal, focal, (config.width - 1) / 2.0, (config.height - 1) / 2.0
    )


def build_rig(config: SceneConfig) -> CameraRig:
    """Ring of ``N`` outward-facing cameras with identical intrinsics."""
    intrinsics = build_intrinsics(config)
    cameras = []
    for i in range(config.num_cameras):
        heading = 2.0 * math.pi * i / config.num_cameras
        position = np.array(
            [
                config.ring_radius * math.cos(heading),
                config.ring_radius * math.sin(heading),
                config.camera_height,
            ]
        )
        cameras.append(Camera(intrinsics, Extrinsics.from_pose(_camera_axes(heading), position)))
    bins = make_depth_bins(
        config.depth_min, config.depth_max, config.depth_bins, config.depth_spacing
    )
    return CameraRig(tuple(cameras), config.height, config.width, bins)


def sample_ego_motion(config: SceneConfig, rng: np.random.Generator) -> EgoMotion:
    """Current-to-previous ego transform for a vehicle driving forward while turning.

    The vehicle covered ``speed * dt`` meters along the previous frame's x axis
    and turned by a yaw drawn from ``[-yaw_max, yaw_max]``.
    """
    speed = rng.uniform(0.0, config.ego_speed_max)
    yaw = math.radians(rng.uniform(-config.ego_yaw_max_deg, config.ego_yaw_max_deg))
    translation = np.array([speed * config.dt, 0.0, 0.0])
    return EgoMotion(rigid_matrix(yaw_rotation(yaw), translation), config.dt)


def _inside(box: Box3D, config: SceneConfig) -> bool:
    lo, hi = config.bounds_min, config.bounds_max
    if any(not lo[k] <= box.center[k] <= hi[k] for k in range(3)):
        return False
    return math.hypot(box.center[0], box.center[1]) >= config.min_range


def _sample_box(config: SceneConfig, rng: np.random.Generator) -> Box3D:
    lo, hi = config.bounds_min, config.bounds_max
    label = int(rng.integers(config.num_classes))
    base = CLASS_BASE_SIZES[label % len(CLASS_BASE_SIZES)]
    size = tuple(s * rng.uniform(1.0 - SIZE_JITTER, 1.0 + SIZE_JITTER) for s in base)
    yaw = wrap_angle(rng.uniform(-math.pi, math.pi))
    speed = rng.uniform(0.0, config.max_speed)
    z = float(np.clip(lo[2] + size[2] / 2.0, lo[2], hi[2]))
    return Box3D(
        center=(float(rng.uniform(lo[0], hi[0])), float(rng.uniform(lo[1], hi[1])), z),
        size=(float(size[0]), float(size[1]), float(size[2])),
        yaw=yaw,
        velocity=(speed * math.cos(yaw), speed * math.sin(yaw)),
        label=label,
    )


def sample_boxes(
    config: SceneConfig, rng: np.random.Generator, motion: EgoMotion
) -> tuple[Box3D, ...]:
    """Draw the current frame's objects by rejection sampling.

    A candidate is kept only if its center and its constant-velocity position in
    the previous frame both lie inside the bounds and outside the keep-out radius.

    Raises:
        InvalidConfigError: If no valid placement is found.
    """
    count = int(rng.integers(config.min_objects, config.max_objects + 1))
    boxes: list[Box3D] = []
    for _ in range(count):
        for _attempt in range(MAX_PLACEMENT_ATTEMPTS):
            box = _sample_box(config, rng)
            (earlier,) = generate_prev_gt([box], motion)
            if _inside(box, config) and _inside(earlier, config):
                boxes.append(box)
                break
        else:
            raise InvalidConfigError(
                f"Could not place an object after {MAX_PLACEMENT_ATTEMPTS} attempts; "
                "check bounds, min_range and speeds"
            )
    return tuple(boxes)


def generate_scene(config: SceneConfig, seed: int) -> SceneSample:
    """Build one two-frame sample; a pure function of ``(config, seed)``."""
    rng = make_rng(seed, STREAM_SCENE)
    rig = build_rig(config)
    motion = sample_ego_motion(config, rng)
    boxes = sample_boxes(config, rng, motion)
    previous_boxes = generate_prev_gt(boxes, motion)
    current = render_frame(boxes, rig, config, make_rng(seed, STREAM_NOISE, 0))
    previous = render_frame(previous_boxes, rig, config, make_rng(seed, STREAM_NOISE, 1))
    logger.debug("Generated scene %d with %d objects", seed, len(boxes))
    return SceneSample(current=current, previous=previous, ego_motion=motion, seed=seed)
