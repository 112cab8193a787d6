"""Camera rigs, frustum lifting and rigid transforms."""

from cape.geometry.camera import (
    Camera,
    CameraRig,
    DepthSpacing,
    EgoMotion,
    Extrinsics,
    Intrinsics,
    make_depth_bins,
    rigid_matrix,
    yaw_rotation,
)
from cape.geometry.transforms import (
    camera_to_global,
    compose_motions,
    frustum_points,
    global_to_camera,
    lift_pixels,
    perturb_extrinsics,
    perturb_rig,
    project_points,
    project_to_image,
    propagate_reference,
    rotation_angle_deg,
    unproject_pixel,
)

__all__ = [
    "Camera",
    "CameraRig",
    "DepthSpacing",
    "EgoMotion",
    "Extrinsics",
    "Intrinsics",
    "camera_to_global",
    "compose_motions",
    "frustum_points",
    "global_to_camera",
    "lift_pixels",
    "make_depth_bins",
    "perturb_extrinsics",
    "perturb_rig",
    "project_points",
    "project_to_image",
    "propagate_reference",
    "rigid_matrix",
    "rotation_angle_deg",
    "unproject_pixel",
    "yaw_rotation",
]
